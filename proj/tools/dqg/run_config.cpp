#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "dqg/errors.hpp"

namespace dqg::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      // paths
      "data", "train", "dev", "test", "out", "report", "checkpoint", "generations", "log",
      // corpus / labeling
      "n", "seed", "easy_max_dist", "hard_min_dist", "easy_ratio", "min_freq", "k", "readers",
      // model
      "variant", "position_mode", "gdc", "word_dim", "position_dim", "difficulty_dim",
      "hidden_dim", "max_distance", "max_decode_len", "beam_size", "init_seed",
      // training
      "learning_rate", "beta1", "beta2", "adam_epsilon", "clip_norm", "batch_size",
      "max_epochs", "patience", "train_seed", "stop_perplexity",
      // generation / checks
      "difficulty", "eps", "tolerance"};
  return keys;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  RunConfig rc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const auto& known = known_keys();
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError(where + ": unknown config key '" + key + "'");
    rc.set(key, trim(line.substr(eq + 1)));
  }
  return rc;
}

void RunConfig::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

std::string RunConfig::text(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  used_[key] = v;
  return v;
}

std::string RunConfig::required(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty())
    throw ContractError("missing required setting '" + key + "' (flag --" + key + ")");
  used_[key] = it->second;
  return it->second;
}

std::uint64_t RunConfig::seed(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    used_[key] = std::to_string(fallback);
    return fallback;
  }
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("setting '" + key + "' expects a non-negative integer, got '" + s + "'");
  used_[key] = s;
  return v;
}

std::size_t RunConfig::count(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(seed(key, fallback));
}

double RunConfig::real(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    used_[key] = format_real(fallback);
    return fallback;
  }
  const auto& s = it->second;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("setting '" + key + "' expects a number, got '" + s + "'");
  used_[key] = s;
  return v;
}

bool RunConfig::flag(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    used_[key] = fallback ? "true" : "false";
    return fallback;
  }
  const auto& s = it->second;
  bool v = false;
  if (s == "true" || s == "1" || s == "on" || s == "yes") {
    v = true;
  } else if (!(s == "false" || s == "0" || s == "off" || s == "no")) {
    throw ParseError("setting '" + key + "' expects true/false, got '" + s + "'");
  }
  used_[key] = v ? "true" : "false";
  return v;
}

ModelConfig model_config(const RunConfig& rc, std::size_t vocab_size) {
  ModelConfig c = ModelConfig::variant(rc.text("variant", "DLPH-GDC"));
  if (rc.has("position_mode")) c.position_mode = parse_position_mode(rc.text("position_mode", ""));
  c.global_difficulty_control = rc.flag("gdc", c.global_difficulty_control);
  rc.text("position_mode", to_string(c.position_mode));
  c.word_dim = rc.count("word_dim", c.word_dim);
  c.position_dim = rc.count("position_dim", c.position_dim);
  c.difficulty_dim = rc.count("difficulty_dim", c.difficulty_dim);
  c.hidden_dim = rc.count("hidden_dim", c.hidden_dim);
  c.max_distance = rc.count("max_distance", c.max_distance);
  c.max_decode_len = rc.count("max_decode_len", c.max_decode_len);
  c.beam_size = rc.count("beam_size", c.beam_size);
  c.init_seed = rc.seed("init_seed", c.init_seed);
  c.vocab_size = vocab_size;
  c.validate();
  return c;
}

TrainConfig train_config(const RunConfig& rc) {
  TrainConfig t;
  t.learning_rate = rc.real("learning_rate", t.learning_rate);
  t.beta1 = rc.real("beta1", t.beta1);
  t.beta2 = rc.real("beta2", t.beta2);
  t.adam_epsilon = rc.real("adam_epsilon", t.adam_epsilon);
  t.clip_norm = rc.real("clip_norm", t.clip_norm);
  t.batch_size = rc.count("batch_size", t.batch_size);
  t.max_epochs = rc.count("max_epochs", t.max_epochs);
  t.patience = rc.count("patience", t.patience);
  t.seed = rc.seed("train_seed", t.seed);
  t.stop_perplexity = rc.real("stop_perplexity", t.stop_perplexity);
  t.validate();
  return t;
}

}  // namespace dqg::cli
