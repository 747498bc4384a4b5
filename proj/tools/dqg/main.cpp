#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "dqg/errors.hpp"

namespace {

using dqg::cli::RunConfig;

struct Command {
  const char* name;
  const char* help;
  std::vector<std::string> keys;
};

const std::vector<Command>& commands() {
  static const std::vector<std::string> model_keys = {
      "variant", "position_mode", "gdc", "word_dim", "position_dim", "difficulty_dim",
      "hidden_dim", "max_distance", "max_decode_len", "beam_size", "init_seed"};
  static const std::vector<std::string> train_keys = {
      "learning_rate", "beta1", "beta2", "adam_epsilon", "clip_norm", "batch_size",
      "max_epochs", "patience", "train_seed", "stop_perplexity", "min_freq"};
  static const std::vector<Command> list = [] {
    std::vector<std::string> train = {"train", "dev", "out", "log"};
    train.insert(train.end(), model_keys.begin(), model_keys.end());
    train.insert(train.end(), train_keys.begin(), train_keys.end());
    return std::vector<Command>{
        {"synth", "Write a synthetic labeled corpus",
         {"n", "seed", "easy_max_dist", "hard_min_dist", "easy_ratio", "out"}},
        {"label", "Label a corpus Easy/Hard with k-fold reader agreement",
         {"data", "out", "report", "k", "seed", "readers"}},
        {"stats", "Question-word proximity statistics", {"data", "out"}},
        {"train", "Train a question generator", train},
        {"generate", "Generate questions from a checkpoint",
         {"checkpoint", "data", "difficulty", "out", "beam_size", "max_decode_len"}},
        {"eval", "Score generated questions",
         {"data", "test", "train", "generations", "readers", "out"}},
        {"gradcheck", "Finite-difference gradient checks", {"init_seed", "eps", "tolerance"}},
    };
  }();
  return list;
}

std::string flag_name(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

void report_error(const std::string& kind, const std::string& message) {
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped.push_back('\\');
    escaped.push_back(c == '\n' ? ' ' : c);
  }
  std::cerr << "error kind=" << kind << " message=\"" << escaped << "\"\n";
  std::cerr << "dqg: " << message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Difficulty-controllable question generation"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value settings file; flags override it");

  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    auto& values = flags[cmd.name];
    for (const auto& key : cmd.keys) sub->add_option(flag_name(key), values[key]);
    subs[cmd.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  }

  try {
    RunConfig rc = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    for (const auto& cmd : commands()) {
      CLI::App* sub = subs[cmd.name];
      if (!sub->parsed()) continue;
      for (const auto& key : cmd.keys)
        if (sub->count(flag_name(key)) > 0) rc.set(key, flags[cmd.name][key]);
      const std::string name = cmd.name;
      if (name == "synth") dqg::cli::run_synth(rc, std::cout);
      if (name == "label") dqg::cli::run_label(rc, std::cout);
      if (name == "stats") dqg::cli::run_stats(rc, std::cout);
      if (name == "train") dqg::cli::run_train(rc, std::cout);
      if (name == "generate") dqg::cli::run_generate(rc, std::cout);
      if (name == "eval") dqg::cli::run_eval(rc, std::cout);
      if (name == "gradcheck" && !dqg::cli::run_gradcheck(rc, std::cout)) {
        report_error("gradcheck", "gradient check exceeded tolerance");
        return 1;
      }
    }
  } catch (const dqg::Error& e) {
    report_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}
