#include "seqtag/model_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace seqtag {

namespace {

constexpr const char* kMagic = "seqtag-model";
constexpr int kFormatVersion = 1;

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

double read_f64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw load_error("truncated tensor data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw load_error(std::string("archive ends before ") + what);
  return line;
}

// "key value" line; returns the value (which may contain spaces).
std::string expect_field(std::istream& in, const std::string& key) {
  const std::string line = read_line(in, key.c_str());
  if (line.compare(0, key.size(), key) != 0 ||
      (line.size() > key.size() && line[key.size()] != ' ')) {
    throw load_error("expected '" + key + "' line, got '" + line + "'");
  }
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

std::size_t parse_size(const std::string& s, const std::string& what) {
  try {
    return std::stoul(s);
  } catch (const std::exception&) {
    throw load_error("bad " + what + " '" + s + "'");
  }
}

}  // namespace

void save_model(Model& model, std::ostream& out) {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "cell " << to_string(model.config.cell) << '\n';
  out << "output " << to_string(model.config.output_layer) << '\n';
  out << "dim " << model.embeddings.dim() << '\n';
  out << "hidden " << model.encoder.hidden() << '\n';
  out << "unk " << (model.embeddings.has_unk() ? 1 : 0) << '\n';

  const auto& classes = model.tag_set.class_names();
  out << "classes " << classes.size() << '\n';
  for (const auto& c : classes) out << c << '\n';

  const auto& vocab = model.embeddings.vocab();
  out << "vocab " << vocab.size() << '\n';
  for (const auto& tok : vocab) out << tok << '\n';

  std::string origins;
  for (RowOrigin o : model.embeddings.origins()) {
    origins.push_back(o == RowOrigin::pretrained ? 'p' : 'r');
  }
  out << "origins " << origins << '\n';
  out << "config " << model.config.echo() << '\n';

  const std::vector<Param*> params = model.params();
  out << "tensors " << params.size() << '\n';
  for (const Param* p : params) {
    out << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
  }
  out << "binary\n";
  for (const Param* p : params) {
    for (double v : p->value.data()) write_f64(out, v);
  }
}

void save_model(Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open '" + path + "' for writing");
  save_model(model, out);
  if (!out) throw input_error("failed writing model archive '" + path + "'");
}

Model load_model(std::istream& in) {
  const std::string magic = read_line(in, "magic");
  std::istringstream magic_ss(magic);
  std::string name;
  int version = -1;
  magic_ss >> name >> version;
  if (name != kMagic) throw load_error("not a model archive");
  if (version != kFormatVersion) {
    throw load_error("unsupported archive version " + std::to_string(version));
  }

  const CellKind cell = cell_kind_from_string(expect_field(in, "cell"));
  const OutputLayer layer = output_layer_from_string(expect_field(in, "output"));
  const std::size_t dim = parse_size(expect_field(in, "dim"), "dimension");
  const std::size_t hidden = parse_size(expect_field(in, "hidden"), "hidden size");
  const bool with_unk = expect_field(in, "unk") == "1";

  const std::size_t num_classes = parse_size(expect_field(in, "classes"), "class count");
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < num_classes; ++i) classes.push_back(read_line(in, "class name"));
  const TagSet tag_set(classes);

  const std::size_t vocab_size = parse_size(expect_field(in, "vocab"), "vocabulary size");
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < vocab_size; ++i) vocab.push_back(read_line(in, "vocabulary token"));

  const std::string origin_chars = expect_field(in, "origins");
  if (origin_chars.size() != vocab_size) {
    throw load_error("origin flags do not match vocabulary size");
  }
  std::vector<RowOrigin> origins;
  for (char c : origin_chars) {
    if (c != 'p' && c != 'r') throw load_error("bad origin flag");
    origins.push_back(c == 'p' ? RowOrigin::pretrained : RowOrigin::random);
  }

  const TrainConfig config = TrainConfig::from_echo(expect_field(in, "config"));

  const std::size_t tensor_count = parse_size(expect_field(in, "tensors"), "tensor count");
  struct TensorInfo {
    std::string name;
    std::size_t rows = 0, cols = 0;
  };
  std::vector<TensorInfo> manifest;
  for (std::size_t i = 0; i < tensor_count; ++i) {
    std::istringstream line(read_line(in, "tensor manifest"));
    TensorInfo info;
    if (!(line >> info.name >> info.rows >> info.cols)) {
      throw load_error("bad tensor manifest entry");
    }
    manifest.push_back(std::move(info));
  }
  if (expect_field(in, "binary") != "") throw load_error("malformed binary marker");

  std::vector<Matrix> tensors;
  for (const TensorInfo& info : manifest) {
    Matrix m(info.rows, info.cols);
    for (double& v : m.data()) v = read_f64(in);
    tensors.push_back(std::move(m));
  }

  if (manifest.empty() || manifest[0].name != "embeddings") {
    throw load_error("archive must start with the embeddings tensor");
  }
  EmbeddingTable embeddings =
      EmbeddingTable::from_parts(vocab, dim, std::move(tensors[0]), origins, with_unk);

  Encoder encoder(cell, dim, hidden, tag_set.num_tags());
  std::optional<Crf> crf;
  if (layer == OutputLayer::crf) {
    crf.emplace(tag_set.num_tags());
    if (config.constrain_transitions) crf->apply_iob_constraints(tag_set);
  }

  std::vector<Param*> targets;
  for (Param* p : encoder.params()) targets.push_back(p);
  if (crf) targets.push_back(&crf->transitions());
  if (manifest.size() != targets.size() + 1) {
    throw load_error("archive holds " + std::to_string(manifest.size()) + " tensors, expected " +
                     std::to_string(targets.size() + 1));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const TensorInfo& info = manifest[i + 1];
    Param* p = targets[i];
    if (info.name != p->name || info.rows != p->value.rows() || info.cols != p->value.cols()) {
      throw load_error("tensor '" + info.name + "' does not match expected '" + p->name + " " +
                       std::to_string(p->value.rows()) + " " + std::to_string(p->value.cols()) +
                       "'");
    }
    p->value = std::move(tensors[i + 1]);
  }

  if (config.cell != cell || config.output_layer != layer) {
    throw load_error("archive header disagrees with stored config");
  }
  return Model(tag_set, std::move(embeddings), std::move(encoder), std::move(crf), config);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error("cannot open model archive '" + path + "'");
  return load_model(in);
}

}  // namespace seqtag
