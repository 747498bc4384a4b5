#include "dqg/selfcheck.hpp"

#include <functional>

#include "dqg/model.hpp"
#include "dqg/rng.hpp"
#include "dqg/tensor.hpp"
#include "dqg/trainer.hpp"

namespace dqg {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

// Reduces to a scalar with distinct weights per element.
Tensor probe(Graph& g, const Tensor& y) {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
  return g.sum(g.mul(g.reshape(y, {y.size()}), Tensor::vector(std::move(w))));
}

}  // namespace

std::vector<GradCheckResult> op_gradient_checks(std::uint64_t seed, double eps, double tolerance) {
  Rng rng(seed);
  std::vector<GradCheckResult> out;
  auto check = [&](std::string name, std::vector<Tensor> inputs, const ScalarFn& fn) {
    out.push_back({std::move(name), grad_check(fn, inputs, eps), tolerance});
  };

  Tensor a = random_tensor(rng, {3, 4}, -1, 1), b = random_tensor(rng, {4, 2}, -1, 1);
  check("matmul", {a, b}, [&](Graph& g) { return probe(g, g.matmul(a, b)); });
  Tensor x4 = random_tensor(rng, {4}, -1, 1), y3 = random_tensor(rng, {3}, -1, 1);
  check("matvec", {a, x4}, [&](Graph& g) { return probe(g, g.matvec(a, x4)); });
  check("vecmat", {y3, a}, [&](Graph& g) { return probe(g, g.vecmat(y3, a)); });
  Tensor p = random_tensor(rng, {5}, -1, 1), q = random_tensor(rng, {5}, -1, 1);
  Tensor s = random_tensor(rng, {}, -1, 1);
  check("add", {p, q}, [&](Graph& g) { return probe(g, g.add(p, q)); });
  check("sub", {p, q}, [&](Graph& g) { return probe(g, g.sub(p, q)); });
  check("mul", {p, q, s}, [&](Graph& g) { return probe(g, g.mul(g.mul(p, q), s)); });
  Tensor z = random_tensor(rng, {6}, -2, 2);
  check("tanh", {z}, [&](Graph& g) { return probe(g, g.tanh(z)); });
  check("sigmoid", {z}, [&](Graph& g) { return probe(g, g.sigmoid(z)); });
  check("scale", {z}, [&](Graph& g) { return probe(g, g.one_minus(g.scale(z, -1.3))); });
  Tensor r2 = random_tensor(rng, {2, 3}, -1, 1), r1 = random_tensor(rng, {1, 3}, -1, 1);
  check("concat", {r2, r1, p}, [&](Graph& g) {
    return g.add(probe(g, g.concat({r2, r1}, 0)), probe(g, g.concat({p, y3})));
  });
  check("slice", {p}, [&](Graph& g) { return probe(g, g.slice(p, 1, 3)); });
  check("row_stack", {r2}, [&](Graph& g) {
    return probe(g, g.stack(std::vector<Tensor>{g.row(r2, 1), g.row(r2, 0)}));
  });
  Tensor gates = random_tensor(rng, {12}, -2, 2), cell = random_tensor(rng, {3}, -1, 1);
  check("lstm_cell", {gates, cell}, [&](Graph& g) { return probe(g, g.lstm_cell(gates, cell)); });
  Tensor logits = random_tensor(rng, {5}, -3, 3);
  check("softmax", {logits}, [&](Graph& g) { return probe(g, g.softmax(logits)); });
  Tensor table = random_tensor(rng, {4, 3}, -1, 1);
  const std::vector<int> ids{2, 0, 2};
  check("embedding_lookup", {table},
        [&](Graph& g) { return probe(g, g.embedding_lookup(table, ids)); });
  Tensor att = random_tensor(rng, {4}, -1, 1);
  const std::vector<int> idx{1, 5, 1, 0};
  check("scatter_add", {att}, [&](Graph& g) { return probe(g, g.scatter_add(att, idx, 6)); });
  Tensor dist_logits = random_tensor(rng, {6}, -2, 2);
  check("nll_loss", {dist_logits}, [&](Graph& g) { return g.nll_loss(g.softmax(dist_logits), 4); });
  return out;
}

GradCheckResult composite_gradient_check(std::uint64_t seed, double eps, double tolerance) {
  const Example vocab_source{"v", {"oxygen", "is", "atomic", "8", "what"}, {3, 3}, {"what"},
                             Difficulty::Easy};
  const Vocab vocab = build_vocab(std::vector<Example>{vocab_source}, 1);
  // "zirconium" is out of vocabulary: the second target is reachable only by
  // copying. Targets: zirconium, atomic, <eos>.
  const Example example{"composite", {"oxygen", "zirconium", "atomic", "8"}, {3, 3},
                        {"zirconium", "atomic"}, Difficulty::Hard};

  ModelConfig c;
  c.word_dim = 4;
  c.position_dim = 3;
  c.difficulty_dim = 2;
  c.hidden_dim = 5;
  c.position_mode = PositionMode::DLPH;
  c.global_difficulty_control = true;
  c.vocab_size = vocab.size();
  c.init_seed = seed;
  DqgModel model(c, vocab);
  for (auto& [name, t] : model.params().entries())
    for (double& v : t.mutable_values()) v *= 5.0;
  auto inputs = model.params().tensors();
  const double err = grad_check(
      [&](Graph& g) { return teacher_forced_loss(g, model, example).mean; }, inputs, eps);
  return {"composite", err, tolerance};
}

}  // namespace dqg
