#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dqg/corpus.hpp"
#include "dqg/model.hpp"

namespace dqg {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 5.0;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 13;
  // Stop as soon as dev perplexity reaches this value; 0 disables.
  double stop_perplexity = 0.0;

  void validate() const;
};

struct SequenceLoss {
  Tensor mean;             // summed token NLL / target length (graph-connected)
  double total = 0.0;      // summed token NLL
  std::size_t tokens = 0;  // target length including EOS
};

// Teacher forcing: encode with the gold label, feed gold previous tokens,
// score each gold target (question + EOS) under the copy-mixed distribution.
SequenceLoss teacher_forced_loss(Graph& g, const DqgModel& model, const Example& example);

// exp(total token NLL / total tokens) over the dataset.
double perplexity(std::span<const Example> dataset, const DqgModel& model);

double global_grad_norm(std::span<const Tensor> params);
// Rescales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

class Adam {
 public:
  Adam(const ModelParams& params, const TrainConfig& config);
  void step(ModelParams& params);
  std::size_t steps() const { return steps_; }

 private:
  TrainConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t steps_ = 0;
};

struct TrainingMeta {
  std::size_t epoch = 0;
  double dev_perplexity = 0.0;
  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct Checkpoint {
  static constexpr int kFormatVersion = 1;
  ModelConfig config;
  Vocab vocab;
  ModelParams params;
  TrainingMeta meta;

  DqgModel model() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-token loss over training examples
  double dev_perplexity = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> history;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Adam with global-norm clipping over sequential mini-batches (gradients
// accumulated per example, averaged per batch). Keeps the lowest dev
// perplexity checkpoint. Deterministic given train_config.seed.
TrainResult train(std::span<const Example> train_set, std::span<const Example> dev_set,
                  const Vocab& vocab, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

// Text header (version, config, vocab, parameter manifest) followed by
// little-endian float64 arrays in manifest order.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace dqg
