#include "seqtag/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace seqtag {

std::string to_string(CellKind kind) { return kind == CellKind::rnn ? "rnn" : "lstm"; }

std::string to_string(OutputLayer layer) {
  return layer == OutputLayer::crf ? "crf" : "softmax";
}

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "rnn") return CellKind::rnn;
  if (s == "lstm") return CellKind::lstm;
  throw config_error("unknown cell kind '" + s + "' (expected rnn or lstm)");
}

OutputLayer output_layer_from_string(const std::string& s) {
  if (s == "crf") return OutputLayer::crf;
  if (s == "softmax") return OutputLayer::softmax;
  throw config_error("unknown output layer '" + s + "' (expected crf or softmax)");
}

void TrainConfig::validate() const {
  if (dim != 50 && dim != 100 && dim != 300 && dim != 500) {
    throw config_error("dim must be one of {50, 100, 300, 500}, got " + std::to_string(dim));
  }
  if (learning_rate < 0.05 || learning_rate > 0.1) {
    throw config_error("learning rate must lie in [0.05, 0.1], got " +
                       std::to_string(learning_rate));
  }
  if (dropout < 0.05 || dropout > 0.1) {
    throw config_error("dropout rate must lie in [0.05, 0.1], got " + std::to_string(dropout));
  }
  if (hidden == 0) throw config_error("hidden size must be at least 1");
  if (max_epochs == 0) throw config_error("epoch budget must be at least 1");
  if (dev_fraction <= 0.0 || dev_fraction >= 1.0) {
    throw config_error("dev fraction must lie in (0, 1), got " + std::to_string(dev_fraction));
  }
  if (clip_norm < 0.0) throw config_error("clip norm must be nonnegative");
}

std::string TrainConfig::echo() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "dim=%zu lr=%.17g dropout=%.17g hidden=%zu epochs=%zu dev_fraction=%.17g "
                "seed=%llu cell=%s output_layer=%s clip_norm=%.17g constrain_transitions=%d "
                "contiguous_split=%d embeddings=%s",
                dim, learning_rate, dropout, hidden, max_epochs, dev_fraction,
                static_cast<unsigned long long>(seed), to_string(cell).c_str(),
                to_string(output_layer).c_str(), clip_norm, constrain_transitions ? 1 : 0,
                contiguous_split ? 1 : 0, embeddings_path.c_str());
  return buf;
}

TrainConfig TrainConfig::from_echo(const std::string& line) {
  TrainConfig config;
  std::istringstream iss(line);
  std::string field;
  while (iss >> field) {
    const std::size_t eq = field.find('=');
    if (eq == std::string::npos) throw load_error("bad config field '" + field + "'");
    const std::string key = field.substr(0, eq);
    std::string value = field.substr(eq + 1);
    if (key == "dim") config.dim = std::stoul(value);
    else if (key == "lr") config.learning_rate = std::stod(value);
    else if (key == "dropout") config.dropout = std::stod(value);
    else if (key == "hidden") config.hidden = std::stoul(value);
    else if (key == "epochs") config.max_epochs = std::stoul(value);
    else if (key == "dev_fraction") config.dev_fraction = std::stod(value);
    else if (key == "seed") config.seed = std::stoull(value);
    else if (key == "cell") config.cell = cell_kind_from_string(value);
    else if (key == "output_layer") config.output_layer = output_layer_from_string(value);
    else if (key == "clip_norm") config.clip_norm = std::stod(value);
    else if (key == "constrain_transitions") config.constrain_transitions = value == "1";
    else if (key == "contiguous_split") config.contiguous_split = value == "1";
    else if (key == "embeddings") {
      // Everything after "embeddings=" belongs to the path.
      std::string rest;
      std::getline(iss, rest);
      config.embeddings_path = value + rest;
      break;
    } else {
      throw load_error("unknown config key '" + key + "'");
    }
  }
  return config;
}

Model::Model(TagSet tag_set_, EmbeddingTable embeddings_, Encoder encoder_,
             std::optional<Crf> crf_, TrainConfig config_)
    : tag_set(std::move(tag_set_)),
      embeddings(std::move(embeddings_)),
      encoder(std::move(encoder_)),
      crf(std::move(crf_)),
      config(std::move(config_)) {
  if (config.output_layer == OutputLayer::crf && !crf.has_value()) {
    throw config_error("CRF output layer requires CRF parameters");
  }
}

namespace {

std::vector<Vector> gather_inputs(const EmbeddingTable& table,
                                  const std::vector<std::size_t>& row_ids) {
  std::vector<Vector> inputs;
  inputs.reserve(row_ids.size());
  for (std::size_t id : row_ids) {
    auto row = table.row(id);
    inputs.emplace_back(row.begin(), row.end());
  }
  return inputs;
}

std::vector<int> decode_tags(const EmbeddingTable& table, const Encoder& encoder,
                             const std::optional<Crf>& crf, OutputLayer layer,
                             const std::vector<std::size_t>& row_ids) {
  Rng unused(0);
  const std::vector<Vector> inputs = gather_inputs(table, row_ids);
  const EncoderOutput out = encoder.encode(inputs, 0.0, unused, RunMode::eval);
  if (layer == OutputLayer::crf) {
    return crf->viterbi_decode(out.emissions).first;
  }
  std::vector<int> tags(out.length());
  for (std::size_t t = 0; t < out.length(); ++t) {
    const auto row = out.emissions.row(t);
    tags[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return tags;
}

std::vector<std::size_t> row_ids_for(const EmbeddingTable& table,
                                     const std::vector<std::string>& tokens) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(table.row_index(tok));
  return ids;
}

}  // namespace

std::vector<int> Model::predict_tags(const std::vector<std::string>& tokens) const {
  return decode_tags(embeddings, encoder, crf, config.output_layer,
                     row_ids_for(embeddings, tokens));
}

std::vector<Param*> Model::params() {
  std::vector<Param*> out;
  out.push_back(&embeddings.rows());
  for (Param* p : encoder.params()) out.push_back(p);
  if (crf) out.push_back(&crf->transitions());
  return out;
}

double RunLog::best_dev_f1() const {
  if (best_epoch == 0 || best_epoch > epochs.size()) return 0.0;
  return epochs[best_epoch - 1].dev_f1;
}

void RunLog::write(std::ostream& out) const {
  out << "config " << config_echo << '\n';
  if (!embedding_stats.empty()) out << "embeddings " << embedding_stats << '\n';
  char buf[160];
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "epoch %zu nll %.6f dev_f1 %.4f time_s %.3f\n", e + 1,
                  epochs[e].train_nll, epochs[e].dev_f1, epochs[e].seconds);
    out << buf;
  }
  out << "best_epoch " << best_epoch << '\n';
}

bool RunLog::same_trajectory(const RunLog& other) const {
  if (config_echo != other.config_echo || embedding_stats != other.embedding_stats ||
      best_epoch != other.best_epoch || epochs.size() != other.epochs.size()) {
    return false;
  }
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (epochs[i].train_nll != other.epochs[i].train_nll ||
        epochs[i].dev_f1 != other.epochs[i].dev_f1) {
      return false;
    }
  }
  return true;
}

namespace {

// Seed streams consumed by one training run.
constexpr std::uint64_t kSplitStream = 0;
constexpr std::uint64_t kEmbeddingStream = 1;
constexpr std::uint64_t kWeightStream = 2;
constexpr std::uint64_t kEpochStream = 3;

EmbeddingTable build_embeddings(const TrainConfig& config,
                                const std::vector<std::string>& vocab, std::string* stats) {
  if (config.embeddings_path.empty()) {
    *stats = "source=random oov_fraction=1.0000";
    return EmbeddingTable::random_init(vocab, config.dim,
                                       derive_seed(config.seed, kEmbeddingStream));
  }
  std::ifstream in(config.embeddings_path);
  if (!in) throw input_error("cannot open embeddings file '" + config.embeddings_path + "'");
  EmbeddingTable table = EmbeddingTable::load_pretrained(
      in, vocab, config.dim, derive_seed(config.seed, kEmbeddingStream));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "source=pretrained oov_fraction=%.4f", table.oov_fraction());
  *stats = buf;
  return table;
}

double dev_micro_f1(const EmbeddingTable& table, const Encoder& encoder,
                    const std::optional<Crf>& crf, OutputLayer layer, const TagSet& tags,
                    const std::vector<std::vector<std::size_t>>& dev_rows,
                    const std::vector<std::vector<Span>>& dev_gold) {
  std::vector<std::vector<Span>> predicted;
  predicted.reserve(dev_rows.size());
  for (const auto& rows : dev_rows) {
    const std::vector<int> path = decode_tags(table, encoder, crf, layer, rows);
    predicted.push_back(spans_from_iob(path, tags));
  }
  return f1_pct(score_spans(dev_gold, predicted).overall);
}

}  // namespace

TrainResult train_on_split(const TrainConfig& config, const TagSet& tag_set,
                           const std::vector<std::string>& vocab,
                           const std::vector<Sentence>& train_part,
                           const std::vector<Sentence>& dev_part) {
  if (train_part.empty()) throw config_error("empty train split");
  if (dev_part.empty()) throw config_error("empty dev split");
  for (const auto& part : {&train_part, &dev_part}) {
    for (const Sentence& s : *part) {
      if (!s.labeled()) throw input_error("training data must be labeled");
    }
  }
  const std::size_t num_tags = tag_set.num_tags();

  RunLog log;
  log.config_echo = config.echo();
  EmbeddingTable embeddings = build_embeddings(config, vocab, &log.embedding_stats);

  Encoder encoder(config.cell, config.dim, config.hidden, num_tags);
  Rng weight_rng(derive_seed(config.seed, kWeightStream));
  encoder.init_weights(weight_rng);

  std::optional<Crf> crf;
  if (config.output_layer == OutputLayer::crf) {
    crf.emplace(num_tags);
    if (config.constrain_transitions) crf->apply_iob_constraints(tag_set);
  }

  std::vector<Param*> params;
  params.push_back(&embeddings.rows());
  for (Param* p : encoder.params()) params.push_back(p);
  if (crf) params.push_back(&crf->transitions());

  std::vector<std::vector<std::size_t>> train_rows, dev_rows;
  for (const Sentence& s : train_part) train_rows.push_back(row_ids_for(embeddings, s.tokens));
  for (const Sentence& s : dev_part) dev_rows.push_back(row_ids_for(embeddings, s.tokens));
  std::vector<std::vector<Span>> dev_gold;
  for (const Sentence& s : dev_part) dev_gold.push_back(spans_from_iob(s.tag_ids, tag_set));

  Rng epoch_rng(derive_seed(config.seed, kEpochStream));
  std::vector<std::size_t> order(train_part.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_f1 = -1.0;
  std::optional<EmbeddingTable> best_embeddings;
  std::optional<Encoder> best_encoder;
  std::optional<Crf> best_crf;

  Matrix d_emissions;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    epoch_rng.shuffle(order);
    double total_nll = 0.0;
    for (std::size_t idx : order) {
      const Sentence& sentence = train_part[idx];
      const std::vector<std::size_t>& rows = train_rows[idx];
      const std::vector<Vector> inputs = gather_inputs(embeddings, rows);
      const EncoderOutput out =
          encoder.encode(inputs, config.dropout, epoch_rng, RunMode::train);

      double loss = 0.0;
      if (crf) {
        loss = crf->nll_and_gradient(out.emissions, sentence.tag_ids, d_emissions);
      } else {
        d_emissions = Matrix(out.length(), num_tags);
        for (std::size_t t = 0; t < out.length(); ++t) {
          const Vector probs = softmax(out.emissions.row(t));
          const int gold = sentence.tag_ids[t];
          loss -= std::log(std::max(probs[gold], 1e-300));
          auto drow = d_emissions.row(t);
          for (std::size_t k = 0; k < num_tags; ++k) drow[k] = probs[k];
          drow[gold] -= 1.0;
        }
      }
      if (!std::isfinite(loss)) {
        throw training_error("non-finite loss at epoch " + std::to_string(epoch) +
                             ", sentence " + std::to_string(idx));
      }
      total_nll += loss;

      const Matrix d_inputs = encoder.backward(out, d_emissions);
      Matrix& emb_grad = embeddings.rows().grad;
      for (std::size_t t = 0; t < rows.size(); ++t) {
        auto grad_row = emb_grad.row(rows[t]);
        const auto d_row = d_inputs.row(t);
        for (std::size_t k = 0; k < grad_row.size(); ++k) grad_row[k] += d_row[k];
      }
      if (config.clip_norm > 0.0) clip_gradients(params, config.clip_norm);
      sgd_step(params, config.learning_rate);
    }

    EpochStats stats;
    stats.train_nll = total_nll / static_cast<double>(train_part.size());
    stats.dev_f1 = dev_micro_f1(embeddings, encoder, crf, config.output_layer, tag_set,
                                dev_rows, dev_gold);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back(stats);

    if (stats.dev_f1 > best_f1) {
      best_f1 = stats.dev_f1;
      log.best_epoch = epoch;
      best_embeddings = embeddings;
      best_encoder = encoder;
      best_crf = crf;
    }
  }

  Model model(tag_set, std::move(*best_embeddings), std::move(*best_encoder),
              std::move(best_crf), config);
  return {std::move(model), std::move(log)};
}

TrainResult train(const TrainConfig& config, const Dataset& data) {
  if (!data.fully_labeled()) throw input_error("training data must be labeled");
  auto parts = config.contiguous_split
                   ? split_contiguous(data, config.dev_fraction)
                   : split_train_dev(data, config.dev_fraction,
                                     derive_seed(config.seed, kSplitStream));
  if (parts.first.sentences.empty()) throw config_error("empty train split");
  if (parts.second.sentences.empty()) throw config_error("empty dev split");
  return train_on_split(config, data.tag_set, data.token_vocab, parts.first.sentences,
                        parts.second.sentences);
}

TrainResult train_file(const TrainConfig& config, const std::string& train_path) {
  std::ifstream in(train_path);
  if (!in) throw input_error("cannot open training file '" + train_path + "'");
  return train(config, parse_column_file(in));
}

std::vector<Sentence> predict_sentences(const Model& model, const std::vector<Sentence>& input) {
  std::vector<Sentence> out;
  out.reserve(input.size());
  for (const Sentence& s : input) {
    Sentence tagged;
    tagged.tokens = s.tokens;
    tagged.tag_ids = model.predict_tags(s.tokens);
    out.push_back(std::move(tagged));
  }
  return out;
}

EvalReport evaluate_dataset(const Model& model, const Dataset& labeled) {
  if (!labeled.fully_labeled()) throw input_error("evaluation data must be labeled");
  std::ostringstream gold_text, pred_text;
  write_column_file(labeled, gold_text);
  const std::vector<Sentence> predicted = predict_sentences(model, labeled.sentences);
  write_column_file(predicted, model.tag_set, pred_text);
  std::istringstream gold_in(gold_text.str()), pred_in(pred_text.str());
  return score_tag_files(gold_in, pred_in);
}

void TuneResult::write_table(std::ostream& out) const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%5s %5s %10s %10s %10s  %s\n", "trial", "dim", "lr",
                "dropout", "dev_f1", "status");
  out << buf;
  for (const TuneTrial& t : trials) {
    if (t.failed) {
      std::snprintf(buf, sizeof(buf), "%5zu %5zu %10.6f %10.6f %10s  failed: %s\n", t.index,
                    t.config.dim, t.config.learning_rate, t.config.dropout, "-",
                    t.error.c_str());
    } else {
      std::snprintf(buf, sizeof(buf), "%5zu %5zu %10.6f %10.6f %10.4f  %s\n", t.index,
                    t.config.dim, t.config.learning_rate, t.config.dropout, t.dev_f1,
                    t.index == best_index ? "best" : "ok");
    }
    out << buf;
  }
}

TuneResult tune(const TrainConfig& base, const Dataset& data, std::size_t trials,
                std::uint64_t seed) {
  if (trials == 0) throw config_error("tune requires at least one trial");
  if (!data.fully_labeled()) throw input_error("training data must be labeled");

  // One split for all trials, seeded independently of any trial seed.
  auto parts = base.contiguous_split
                   ? split_contiguous(data, base.dev_fraction)
                   : split_train_dev(data, base.dev_fraction, derive_seed(seed, 100));

  static constexpr std::size_t kDimGrid[4] = {50, 100, 300, 500};
  Rng sampler(derive_seed(seed, 101));

  TuneResult result;
  bool any_ok = false;
  double best_f1 = -1.0;
  for (std::size_t i = 0; i < trials; ++i) {
    TuneTrial trial;
    trial.index = i;
    trial.config = base;
    trial.config.learning_rate = sampler.uniform(0.05, 0.1);
    trial.config.dropout = sampler.uniform(0.05, 0.1);
    if (base.embeddings_path.empty()) {
      trial.config.dim = kDimGrid[sampler.below(4)];
    }
    trial.config.seed = derive_seed(seed, 200 + i);
    try {
      TrainResult run = train_on_split(trial.config, data.tag_set, data.token_vocab,
                                       parts.first.sentences, parts.second.sentences);
      trial.dev_f1 = run.log.best_dev_f1();
      if (!any_ok || trial.dev_f1 > best_f1) {
        any_ok = true;
        best_f1 = trial.dev_f1;
        result.best = trial.config;
        result.best_index = i;
      }
    } catch (const Error& e) {
      trial.failed = true;
      trial.error = e.what();
    }
    result.trials.push_back(std::move(trial));
  }
  if (!any_ok) throw training_error("all tune trials failed");
  return result;
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const Entry& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

GradCheckReport run_gradient_checks(std::uint64_t seed) {
  constexpr std::size_t kDim = 4, kHidden = 3, kTags = 4, kLen = 5;
  GradCheckReport report;

  for (CellKind kind : {CellKind::rnn, CellKind::lstm}) {
    Rng rng(derive_seed(seed, kind == CellKind::rnn ? 11 : 12));
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i < 6; ++i) vocab.push_back("tok" + std::to_string(i));
    EmbeddingTable embeddings = EmbeddingTable::random_init(vocab, kDim, rng.next_u64());
    Encoder encoder(kind, kDim, kHidden, kTags);
    encoder.init_weights(rng);
    Crf crf(kTags);
    // Random transitions so the CRF gradient is exercised away from zero.
    for (std::size_t i = 0; i < kTags + 2; ++i) {
      for (std::size_t j = 0; j < kTags + 2; ++j) {
        if (!crf.masked(i, j)) crf.transitions().value(i, j) = rng.uniform(-1.0, 1.0);
      }
    }

    std::vector<std::size_t> rows(kLen);
    std::vector<int> gold(kLen);
    for (std::size_t t = 0; t < kLen; ++t) {
      rows[t] = rng.below(vocab.size());
      gold[t] = static_cast<int>(rng.below(kTags));
    }

    const auto loss_fn = [&]() {
      Rng unused(0);
      const std::vector<Vector> inputs = gather_inputs(embeddings, rows);
      const EncoderOutput out = encoder.encode(inputs, 0.0, unused, RunMode::train);
      return crf.log_partition(out.emissions) - crf.score_sequence(out.emissions, gold);
    };

    // One analytic pass populating every gradient.
    {
      Rng unused(0);
      const std::vector<Vector> inputs = gather_inputs(embeddings, rows);
      const EncoderOutput out = encoder.encode(inputs, 0.0, unused, RunMode::train);
      Matrix d_emissions;
      crf.nll_and_gradient(out.emissions, gold, d_emissions);
      const Matrix d_inputs = encoder.backward(out, d_emissions);
      Matrix& emb_grad = embeddings.rows().grad;
      for (std::size_t t = 0; t < rows.size(); ++t) {
        auto grad_row = emb_grad.row(rows[t]);
        const auto d_row = d_inputs.row(t);
        for (std::size_t k = 0; k < grad_row.size(); ++k) grad_row[k] += d_row[k];
      }
    }

    std::vector<Param*> params;
    params.push_back(&embeddings.rows());
    for (Param* p : encoder.params()) params.push_back(p);
    params.push_back(&crf.transitions());

    const std::string prefix = to_string(kind) + ":";
    for (Param* p : params) {
      Param* group[1] = {p};
      const std::size_t samples = std::min<std::size_t>(p->value.size(), 24);
      const double err = finite_diff_check(loss_fn, group, 1e-5, samples, rng);
      report.entries.push_back({prefix + p->name, err});
    }
  }
  return report;
}

}  // namespace seqtag
