#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dqg/model.hpp"
#include "dqg/trainer.hpp"

namespace dqg::cli {

// Flat key/value settings shared by every subcommand. Values come from an
// optional config file and are overridden by flags. Every lookup records
// the resolved value so a run can echo exactly what it used.
class RunConfig {
 public:
  // `key = value` per line; '#' starts a comment; blank lines ignored.
  static RunConfig from_file(const std::filesystem::path& path);
  static const std::vector<std::string>& known_keys();

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) const;
  std::string required(const std::string& key) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const;
  double real(const std::string& key, double fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& effective() const { return used_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> used_;
};

ModelConfig model_config(const RunConfig& rc, std::size_t vocab_size);
TrainConfig train_config(const RunConfig& rc);

}  // namespace dqg::cli
