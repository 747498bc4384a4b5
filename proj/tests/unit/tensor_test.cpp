#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "dqg/errors.hpp"
#include "dqg/rng.hpp"
#include "dqg/tensor.hpp"

using namespace dqg;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

// Weighted sum with fixed, non-uniform weights so every output element
// contributes a distinct gradient.
Tensor probe(Graph& g, const Tensor& y) {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
  const Tensor flat = g.reshape(y, {y.size()});
  return g.sum(g.mul(flat, Tensor::vector(w)));
}

constexpr double kEps = 1e-6;
constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("matmul forward on a hand example") {
  Graph g(Graph::Mode::Inference);
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  const Tensor c = g.matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.values()[0] == 58);
  CHECK(c.values()[1] == 64);
  CHECK(c.values()[2] == 139);
  CHECK(c.values()[3] == 154);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Graph g;
  CHECK_THROWS_AS(g.matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
  CHECK_THROWS_AS(g.matvec(Tensor::zeros({2, 3}), Tensor::zeros({2})), DimensionError);
}

TEST_CASE("per-op gradients match central differences") {
  SUBCASE("matmul") {
    Tensor a = random_tensor({3, 4}, 1), b = random_tensor({4, 2}, 2);
    std::vector<Tensor> in{a, b};
    CHECK(grad_check([&](Graph& g) { return probe(g, g.matmul(a, b)); }, in, kEps) < kTol);
  }
  SUBCASE("matvec and vecmat") {
    Tensor m = random_tensor({3, 4}, 3), x = random_tensor({4}, 4), y = random_tensor({3}, 5);
    std::vector<Tensor> in{m, x, y};
    CHECK(grad_check([&](Graph& g) {
            return g.add(probe(g, g.matvec(m, x)), probe(g, g.vecmat(y, m)));
          },
                     in, kEps) < kTol);
  }
  SUBCASE("elementwise add sub mul with scalar broadcast") {
    Tensor a = random_tensor({5}, 6), b = random_tensor({5}, 7), s = random_tensor({}, 8);
    std::vector<Tensor> in{a, b, s};
    CHECK(grad_check([&](Graph& g) {
            return probe(g, g.mul(g.sub(g.add(a, b), g.mul(a, b)), s));
          },
                     in, kEps) < kTol);
  }
  SUBCASE("tanh sigmoid scale one_minus") {
    Tensor x = random_tensor({6}, 9, -2.0, 2.0);
    CHECK(grad_check([](Graph& g, const Tensor& t) {
            return probe(g, g.one_minus(g.scale(g.mul(g.tanh(t), g.sigmoid(t)), 1.7)));
          },
                     x, kEps) < kTol);
  }
  SUBCASE("concat slice row stack reshape") {
    Tensor a = random_tensor({2, 3}, 10), b = random_tensor({1, 3}, 11), v = random_tensor({4}, 12);
    std::vector<Tensor> in{a, b, v};
    CHECK(grad_check([&](Graph& g) {
            const Tensor rows = g.concat({a, b}, 0);  // [3 x 3]
            const Tensor r = g.row(rows, 2);
            const Tensor s = g.slice(v, 1, 3);
            const Tensor st = g.stack(std::vector<Tensor>{r, s});
            const Tensor cols = g.concat({st, g.reshape(g.slice(v, 0, 2), {2, 1})}, 1);
            return probe(g, cols);
          },
                     in, kEps) < kTol);
  }
  SUBCASE("lstm_cell") {
    Tensor gates = random_tensor({12}, 13, -2.0, 2.0), cell = random_tensor({3}, 14);
    std::vector<Tensor> in{gates, cell};
    CHECK(grad_check([&](Graph& g) { return probe(g, g.lstm_cell(gates, cell)); }, in, kEps) <
          kTol);
  }
  SUBCASE("softmax") {
    Tensor x = random_tensor({5}, 15, -3.0, 3.0);
    CHECK(grad_check([](Graph& g, const Tensor& t) { return probe(g, g.softmax(t)); }, x, kEps) <
          kTol);
  }
  SUBCASE("embedding_lookup with repeated ids") {
    Tensor table = random_tensor({4, 3}, 16);
    const std::vector<int> ids{2, 0, 2, 3};
    CHECK(grad_check([&](Graph& g, const Tensor& t) { return probe(g, g.embedding_lookup(t, ids)); },
                     table, kEps) < kTol);
  }
  SUBCASE("scatter_add with collisions") {
    Tensor x = random_tensor({4}, 17);
    const std::vector<int> idx{1, 5, 1, 0};
    CHECK(grad_check([&](Graph& g, const Tensor& t) { return probe(g, g.scatter_add(t, idx, 6)); },
                     x, kEps) < kTol);
  }
  SUBCASE("nll_loss over a softmax") {
    Tensor x = random_tensor({6}, 18, -2.0, 2.0);
    CHECK(grad_check([](Graph& g, const Tensor& t) { return g.nll_loss(g.softmax(t), 4); }, x,
                     kEps) < kTol);
  }
}

TEST_CASE("softmax sums to one and survives large logits") {
  Graph g(Graph::Mode::Inference);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = random_tensor({9}, seed, -50.0, 50.0);
    const Tensor p = g.softmax(x);
    const double s = std::accumulate(p.values().begin(), p.values().end(), 0.0);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  const Tensor big = g.softmax(Tensor::vector({1000.0, 1000.0}));
  CHECK(big.values()[0] == doctest::Approx(0.5));
}

TEST_CASE("gradients accumulate over every consumer") {
  for (std::size_t k = 1; k <= 5; ++k) {
    Tensor x = Tensor::vector({0.5, -1.5}, true);
    Graph g;
    std::vector<Tensor> uses;
    for (std::size_t i = 0; i < k; ++i) uses.push_back(g.sum(x));
    Tensor total = uses[0];
    for (std::size_t i = 1; i < k; ++i) total = g.add(total, uses[i]);
    g.backward(total);
    CHECK(x.grad()[0] == static_cast<double>(k));
    CHECK(x.grad()[1] == static_cast<double>(k));
  }
}

TEST_CASE("inference graphs record nothing") {
  Graph g(Graph::Mode::Inference);
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  const Tensor y = g.sum(g.tanh(x));
  CHECK(g.node_count() == 0);
  CHECK_THROWS_AS(g.backward(y), ContractError);
}

TEST_CASE("backward contract errors") {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  SUBCASE("non-scalar root") {
    Graph g;
    CHECK_THROWS_AS(g.backward(g.tanh(x)), ContractError);
  }
  SUBCASE("second backward on the same graph") {
    Graph g;
    const Tensor y = g.sum(x);
    g.backward(y);
    CHECK_THROWS_AS(g.backward(y), ContractError);
  }
}

TEST_CASE("non-finite results raise numeric errors") {
  Graph g;
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(g.sub(Tensor::vector({inf}), Tensor::vector({inf})), NumericError);
}

TEST_CASE("index errors on out-of-range lookups") {
  Graph g;
  const std::vector<int> bad{3};
  CHECK_THROWS_AS(g.embedding_lookup(Tensor::zeros({3, 2}), bad), IndexError);
  CHECK_THROWS_AS(g.nll_loss(Tensor::vector({0.5, 0.5}), 2), IndexError);
  CHECK_THROWS_AS(g.slice(Tensor::zeros({3}), 2, 2), DimensionError);
}

TEST_CASE("nll_loss floors zero probabilities") {
  Graph g(Graph::Mode::Inference);
  const Tensor l = g.nll_loss(Tensor::vector({1.0, 0.0}), 1);
  CHECK(l.item() == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("empty embedding lookup yields zero rows") {
  Graph g(Graph::Mode::Inference);
  const Tensor e = g.embedding_lookup(Tensor::zeros({3, 4}), std::vector<int>{});
  CHECK(e.shape() == Shape{0, 4});
}
