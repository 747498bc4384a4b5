#pragma once

// Difficulty-controllable question generator.
//
// Encoder: per-token input x_i = [word embedding; position feature], fed to
// a single-layer bidirectional LSTM; h_i = [fwd_i; bwd_i].
// Decoder: LSTM initialised from u_0 = [h_m; d] (h_m = [fwd_m; bwd_1], d the
// difficulty vector when global difficulty control is on), bilinear attention
// over h_1..h_m, and a pointer-generator output mixing vocabulary generation
// with copying source tokens.
//
// The difficulty label enters the computation in exactly two places: the
// easy/hard position table selection (DLPH) and u_0 (GDC).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dqg/corpus.hpp"
#include "dqg/tensor.hpp"

namespace dqg {

enum class PositionMode { None, AnswerIndicator, QWPH, DLPH };

std::string to_string(PositionMode mode);
PositionMode parse_position_mode(std::string_view text);

struct ModelConfig {
  std::size_t word_dim = 128;        // d_w
  std::size_t position_dim = 50;     // d_p
  std::size_t difficulty_dim = 10;   // d_d
  std::size_t hidden_dim = 128;      // H, per direction
  std::size_t max_distance = 20;     // L
  PositionMode position_mode = PositionMode::DLPH;
  bool global_difficulty_control = true;
  std::size_t vocab_size = 0;
  std::size_t max_decode_len = 20;
  std::size_t beam_size = 3;
  std::uint64_t init_seed = 1;

  void validate() const;
  std::size_t encoder_input_dim() const;
  // 2H, plus d_d under global difficulty control
  std::size_t decoder_hidden_dim() const;
  // True when generation depends on the difficulty label.
  bool consumes_labels() const;
  // Named baselines / ablations: L2A, Ans, QWPH, DLPH, QWPH-GDC, DLPH-GDC.
  static ModelConfig variant(std::string_view name, ModelConfig base);
  static ModelConfig variant(std::string_view name);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Learned tensors, in a fixed order determined by the config alone.
class ModelParams {
 public:
  ModelParams() = default;
  // Uniform(-0.1, 0.1) from config.init_seed.
  static ModelParams initialize(const ModelConfig& config);
  // Names and shapes, in order, for a config.
  static std::vector<std::pair<std::string, Shape>> layout(const ModelConfig& config);
  static std::size_t parameter_count(const ModelConfig& config);

  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  bool contains(std::string_view name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  std::vector<Tensor> tensors() const;
  void zero_grad();
  ModelParams deep_copy() const;
  void add(std::string name, Tensor tensor);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct EncoderOutput {
  std::vector<Tensor> states;  // h_1..h_m, each [2H]
  Tensor states_matrix;        // [m x 2H]
  Tensor final_state;          // [fwd_m; bwd_1], [2H]
};

struct DecoderState {
  Tensor hidden;  // u_t
  Tensor cell;
};

struct AttentionResult {
  Tensor context;  // [2H]
  Tensor weights;  // [m]
};

// Extended vocabulary for one source sentence: vocabulary ids followed by
// the sentence's out-of-vocabulary tokens in order of first appearance.
struct SourceContext {
  std::vector<int> input_ids;     // encoder inputs (OOV -> UNK)
  std::vector<int> extended_ids;  // per source token, id in the extended vocabulary
  std::vector<std::string> oov_tokens;
  std::size_t vocab_size = 0;

  static SourceContext build(const Tokens& sentence, const Vocab& vocab);
  std::size_t extended_size() const { return vocab_size + oov_tokens.size(); }
  // Target id: vocab id, else source OOV slot, else UNK.
  int extended_id(const std::string& token, const Vocab& vocab) const;
  std::string token(int extended_id, const Vocab& vocab) const;
  // Feedback input id: source-only tokens feed back as UNK.
  int input_id(int extended_id) const;
};

struct StepOutput {
  DecoderState state;
  Tensor distribution;  // over the extended vocabulary
  Tensor attention;     // [m]
  Tensor copy_gate;     // p_gen, [1]
};

struct Hypothesis {
  std::vector<int> ids;  // extended ids, EOS excluded
  double log_prob = 0.0;
  DecoderState state;
  bool finished = false;
};

struct Generation {
  Tokens tokens;
  std::vector<int> ids;
  double log_prob = 0.0;
  bool finished = false;
};

class DqgModel {
 public:
  DqgModel(ModelConfig config, Vocab vocab);  // freshly initialised parameters
  DqgModel(ModelConfig config, Vocab vocab, ModelParams params);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  EncoderOutput encode(Graph& g, const Example& example, Difficulty difficulty) const;
  DecoderState init_decoder(Graph& g, const EncoderOutput& enc, Difficulty difficulty) const;
  AttentionResult attention(Graph& g, const Tensor& hidden, const EncoderOutput& enc) const;
  StepOutput decode_step(Graph& g, const DecoderState& state, int prev_extended_id,
                         const EncoderOutput& enc, const SourceContext& source) const;

  Generation beam_search(const Example& example, Difficulty difficulty,
                         std::size_t beam_size) const;
  Generation beam_search(const Example& example, Difficulty difficulty) const {
    return beam_search(example, difficulty, config_.beam_size);
  }
  Generation greedy(const Example& example, Difficulty difficulty) const;
  // Difficulty-control entry point: any label may be requested.
  Tokens generate(const Example& example, Difficulty difficulty) const;

 private:
  void check_label(Difficulty difficulty, const char* where) const;
  DecoderState start(Graph& g, const Example& example, Difficulty difficulty,
                     EncoderOutput& enc) const;

  ModelConfig config_;
  Vocab vocab_;
  ModelParams params_;
};

}  // namespace dqg
