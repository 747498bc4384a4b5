#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dqg/corpus.hpp"
#include "dqg/model.hpp"

namespace dqg::testing {

inline Example oxygen_example(Difficulty d = Difficulty::Easy) {
  return Example{"fig1",
                 tokenize("Oxygen is a chemical element with symbol O and atomic number 8"),
                 {11, 11},
                 tokenize("What is the atomic number of the element oxygen?"),
                 d};
}

inline ModelConfig tiny_config(PositionMode mode, bool gdc, std::size_t vocab_size,
                               std::uint64_t seed = 1) {
  ModelConfig c;
  c.word_dim = 4;
  c.position_dim = 3;
  c.difficulty_dim = 2;
  c.hidden_dim = 5;
  c.max_distance = 20;
  c.position_mode = mode;
  c.global_difficulty_control = gdc;
  c.vocab_size = vocab_size;
  c.max_decode_len = 8;
  c.beam_size = 3;
  c.init_seed = seed;
  return c;
}

inline std::vector<Example> toy_corpus() {
  return {
      oxygen_example(Difficulty::Easy),
      Example{"t2", tokenize("the river crosses the old stone bridge near the mill"), {5, 6},
              tokenize("what does the river cross near the mill ?"), Difficulty::Hard},
      Example{"t3", tokenize("copper is a soft metal with high conductivity"), {0, 0},
              tokenize("which metal has high conductivity ?"), Difficulty::Easy},
  };
}

inline std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dqg_test_" + name);
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dqg::testing
