#include "dqg/trainer.hpp"

#include <cmath>
#include <numeric>

#include "dqg/errors.hpp"
#include "dqg/rng.hpp"

namespace dqg {

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1) ||
      !(adam_epsilon > 0) || !(clip_norm > 0)) {
    throw ContractError("train config: learning rate, betas, epsilon and clip norm must be positive");
  }
  if (batch_size < 1 || max_epochs < 1 || patience < 1) {
    throw ContractError("train config: batch_size, max_epochs and patience must be >= 1");
  }
  if (stop_perplexity < 0) throw ContractError("train config: stop_perplexity must be >= 0");
}

SequenceLoss teacher_forced_loss(Graph& g, const DqgModel& model, const Example& example) {
  if (model.config().consumes_labels() && example.difficulty == Difficulty::Unlabeled) {
    throw ContractError("teacher_forced_loss: example '" + example.id +
                        "' is unlabeled but the model variant consumes labels");
  }
  const Vocab& vocab = model.vocab();
  const SourceContext source = SourceContext::build(example.sentence, vocab);
  std::vector<int> targets;
  targets.reserve(example.question.size() + 1);
  for (const auto& tok : example.question) targets.push_back(source.extended_id(tok, vocab));
  targets.push_back(Vocab::kEos);

  const EncoderOutput enc = model.encode(g, example, example.difficulty);
  DecoderState state = model.init_decoder(g, enc, example.difficulty);
  int prev = Vocab::kSos;
  std::vector<Tensor> losses;
  losses.reserve(targets.size());
  for (int target : targets) {
    StepOutput step = model.decode_step(g, state, prev, enc, source);
    losses.push_back(g.reshape(g.nll_loss(step.distribution, target), {1}));
    state = std::move(step.state);
    prev = target;
  }
  SequenceLoss out;
  const Tensor total = g.sum(g.concat(losses));
  out.total = total.item();
  out.tokens = targets.size();
  out.mean = g.scale(total, 1.0 / static_cast<double>(targets.size()));
  return out;
}

double perplexity(std::span<const Example> dataset, const DqgModel& model) {
  if (dataset.empty()) throw ContractError("perplexity: empty dataset");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& e : dataset) {
    Graph g(Graph::Mode::Inference);
    const SequenceLoss loss = teacher_forced_loss(g, model, e);
    total += loss.total;
    tokens += loss.tokens;
  }
  return std::exp(total / static_cast<double>(tokens));
}

double global_grad_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const Tensor& p : params)
    for (double g : p.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor& p : params)
      if (p.has_grad())
        for (double& g : p.mutable_grad()) g *= factor;
  }
  return norm;
}

Adam::Adam(const ModelParams& params, const TrainConfig& config) : config_(config) {
  for (const auto& [name, t] : params.entries()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void Adam::step(ModelParams& params) {
  auto& entries = params.entries();
  if (entries.size() != m_.size()) throw ContractError("adam: parameter set changed");
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor& t = entries[k].second;
    if (!t.has_grad()) continue;
    auto values = t.mutable_values();
    const auto grad = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      values[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.adam_epsilon);
    }
  }
}

DqgModel Checkpoint::model() const { return DqgModel(config, vocab, params.deep_copy()); }

TrainResult train(std::span<const Example> train_set, std::span<const Example> dev_set,
                  const Vocab& vocab, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
  train_config.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  if (dev_set.empty()) throw ContractError("train: empty dev set");
  DqgModel model(model_config, vocab);
  Adam adam(model.params(), train_config);
  Rng rng(train_config.seed);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  bool have_best = false;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += train_config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + train_config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      model.params().zero_grad();
      try {
        for (std::size_t i = begin; i < end; ++i) {
          Graph g;
          const SequenceLoss loss = teacher_forced_loss(g, model, train_set[order[i]]);
          if (!std::isfinite(loss.mean.item())) throw NumericError("non-finite loss");
          epoch_loss += loss.mean.item();
          g.backward(g.scale(loss.mean, weight));
        }
        auto tensors = model.params().tensors();
        const double norm = clip_grad_norm(tensors, train_config.clip_norm);
        if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
        adam.step(model.params());
      } catch (const NumericError& err) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index) + ": " + err.what());
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(order.size());
    log.dev_perplexity = perplexity(dev_set, model);
    if (!std::isfinite(log.dev_perplexity)) {
      throw TrainingError("dev perplexity is not finite at epoch " + std::to_string(epoch));
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);

    if (!have_best || log.dev_perplexity < result.best.meta.dev_perplexity) {
      have_best = true;
      stale = 0;
      result.best.config = model.config();
      result.best.vocab = model.vocab();
      result.best.params = model.params().deep_copy();
      result.best.meta = {epoch, log.dev_perplexity};
    } else if (++stale >= train_config.patience) {
      break;
    }
    if (train_config.stop_perplexity > 0 && log.dev_perplexity <= train_config.stop_perplexity) break;
  }
  return result;
}

}  // namespace dqg
