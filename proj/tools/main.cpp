#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "seqtag/corpus.hpp"
#include "seqtag/model_io.hpp"
#include "seqtag/trainer.hpp"

namespace {

struct CliOptions {
  seqtag::TrainConfig config;
  std::string cell = "lstm";
  std::string output_layer = "crf";
  std::string train_path;
  std::string input_path;
  std::string model_path;
  std::string log_path;
  std::string output_path;
  std::size_t trials = 10;
};

void add_config_flags(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--dim", opt.config.dim, "embedding dimension, one of {50, 100, 300, 500}");
  cmd->add_option("--lr", opt.config.learning_rate, "learning rate in [0.05, 0.1]");
  cmd->add_option("--dropout", opt.config.dropout, "dropout rate in [0.05, 0.1]");
  cmd->add_option("--hidden", opt.config.hidden, "recurrent hidden size");
  cmd->add_option("--epochs", opt.config.max_epochs, "epoch cap (best dev epoch is retained)");
  cmd->add_option("--dev-fraction", opt.config.dev_fraction, "held-out validation fraction");
  cmd->add_option("--seed", opt.config.seed, "run seed");
  cmd->add_option("--cell", opt.cell, "recurrent cell: rnn or lstm");
  cmd->add_option("--output-layer", opt.output_layer, "output layer: crf or softmax");
  cmd->add_option("--embeddings", opt.config.embeddings_path, "pretrained embedding text file");
  cmd->add_option("--clip-norm", opt.config.clip_norm, "global gradient-norm clip (0 disables)");
  cmd->add_flag("--constrain-transitions", opt.config.constrain_transitions,
                "forbid IOB-invalid tag transitions in the CRF");
  cmd->add_flag("--contiguous-split", opt.config.contiguous_split,
                "use a contiguous train/dev split instead of a seeded random one");
}

void resolve_config(CliOptions& opt) {
  opt.config.cell = seqtag::cell_kind_from_string(opt.cell);
  opt.config.output_layer = seqtag::output_layer_from_string(opt.output_layer);
  opt.config.validate();
}

seqtag::Dataset parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw seqtag::input_error("cannot open '" + path + "'");
  return seqtag::parse_column_file(in);
}

int run_train(CliOptions& opt) {
  resolve_config(opt);
  seqtag::TrainResult result = seqtag::train_file(opt.config, opt.train_path);
  seqtag::save_model(result.model, opt.model_path);
  if (opt.log_path.empty()) {
    result.log.write(std::cout);
  } else {
    std::ofstream log(opt.log_path);
    if (!log) throw seqtag::input_error("cannot open '" + opt.log_path + "' for writing");
    result.log.write(log);
    std::cout << "best_epoch " << result.log.best_epoch << " dev_f1 "
              << result.log.best_dev_f1() << "\n";
  }
  return 0;
}

int run_predict(CliOptions& opt) {
  seqtag::Model model = seqtag::load_model(opt.model_path);
  const seqtag::Dataset input = parse_file(opt.input_path);
  const std::vector<seqtag::Sentence> tagged = seqtag::predict_sentences(model, input.sentences);
  if (opt.output_path.empty()) {
    seqtag::write_column_file(tagged, model.tag_set, std::cout);
  } else {
    std::ofstream out(opt.output_path);
    if (!out) throw seqtag::input_error("cannot open '" + opt.output_path + "' for writing");
    seqtag::write_column_file(tagged, model.tag_set, out);
  }
  return 0;
}

int run_evaluate(CliOptions& opt) {
  seqtag::Model model = seqtag::load_model(opt.model_path);
  const seqtag::Dataset labeled = parse_file(opt.input_path);
  const seqtag::EvalReport report = seqtag::evaluate_dataset(model, labeled);
  report.render(std::cout);
  std::cout << report.summary_line() << "\n";
  return 0;
}

int run_tune(CliOptions& opt) {
  resolve_config(opt);
  const seqtag::Dataset data = parse_file(opt.train_path);
  const seqtag::TuneResult result = seqtag::tune(opt.config, data, opt.trials, opt.config.seed);
  result.write_table(std::cout);
  std::cout << "best config: " << result.best.echo() << "\n";
  return 0;
}

int run_gradcheck(CliOptions& opt) {
  const seqtag::GradCheckReport report = seqtag::run_gradient_checks(opt.config.seed);
  char buf[160];
  for (const auto& entry : report.entries) {
    std::snprintf(buf, sizeof(buf), "gradcheck %-24s max_rel_error=%.3e\n", entry.name.c_str(),
                  entry.max_rel_error);
    std::cout << buf;
  }
  const bool ok = report.passed();
  std::snprintf(buf, sizeof(buf), "gradcheck %s worst=%.3e threshold=1e-4\n",
                ok ? "PASS" : "FAIL", report.worst());
  std::cout << buf;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqtag: bidirectional LSTM-CRF sequence tagger for IOB concept extraction"};
  app.failure_message(CLI::FailureMessage::simple);
  app.require_subcommand(1);

  CliOptions opt;

  CLI::App* train_cmd = app.add_subcommand("train", "train a tagger on a labeled column file");
  train_cmd->add_option("train_file", opt.train_path, "labeled column file")->required();
  train_cmd->add_option("--model", opt.model_path, "output model archive")->required();
  train_cmd->add_option("--log", opt.log_path, "write the run log here instead of stdout");
  add_config_flags(train_cmd, opt);

  CLI::App* predict_cmd = app.add_subcommand("predict", "tag a column file with a trained model");
  predict_cmd->add_option("input_file", opt.input_path, "column file (tags optional, ignored)")
      ->required();
  predict_cmd->add_option("--model", opt.model_path, "model archive")->required();
  predict_cmd->add_option("--output", opt.output_path, "output path (default stdout)");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score a model against a labeled file");
  eval_cmd->add_option("labeled_file", opt.input_path, "labeled column file")->required();
  eval_cmd->add_option("--model", opt.model_path, "model archive")->required();

  CLI::App* tune_cmd =
      app.add_subcommand("tune", "random hyperparameter search over the protocol ranges");
  tune_cmd->add_option("train_file", opt.train_path, "labeled column file")->required();
  tune_cmd->add_option("--trials", opt.trials, "number of trials");
  add_config_flags(tune_cmd, opt);

  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient suite on a random small model");
  gradcheck_cmd->add_option("--seed", opt.config.seed, "run seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return run_train(opt);
    if (predict_cmd->parsed()) return run_predict(opt);
    if (eval_cmd->parsed()) return run_evaluate(opt);
    if (tune_cmd->parsed()) return run_tune(opt);
    if (gradcheck_cmd->parsed()) return run_gradcheck(opt);
  } catch (const seqtag::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
