#include <benchmark/benchmark.h>

#include "dqg/corpus.hpp"
#include "dqg/model.hpp"
#include "dqg/rng.hpp"
#include "dqg/tensor.hpp"
#include "dqg/trainer.hpp"

namespace {

dqg::Tensor random_tensor(dqg::Shape shape, dqg::Rng& rng, bool grad = false) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-0.1, 0.1);
  return dqg::Tensor(std::move(shape), std::move(v), grad);
}

void BM_Matvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  dqg::Rng rng(1);
  const auto m = random_tensor({4 * n, 2 * n}, rng);
  const auto x = random_tensor({2 * n}, rng);
  for (auto _ : state) {
    dqg::Graph g(dqg::Graph::Mode::Inference);
    benchmark::DoNotOptimize(g.matvec(m, x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(8 * n * n));
}
BENCHMARK(BM_Matvec)->Arg(32)->Arg(128)->Arg(256);

// One recorded LSTM step (gate projection + cell) with its backward pass.
void BM_LstmStepBackward(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  dqg::Rng rng(2);
  const auto w = random_tensor({4 * h, 2 * h}, rng, true);
  const auto x = random_tensor({2 * h}, rng);
  const auto c = random_tensor({h}, rng);
  for (auto _ : state) {
    dqg::Graph g;
    const auto hc = g.lstm_cell(g.matvec(w, x), c);
    g.backward(g.sum(hc));
  }
}
BENCHMARK(BM_LstmStepBackward)->Arg(32)->Arg(128);

void BM_BeamSearch(benchmark::State& state) {
  const auto corpus = dqg::generate_synthetic_corpus(64, 3, {}, {});
  const auto vocab = dqg::build_vocab(corpus, 1);
  auto config = dqg::ModelConfig::variant("DLPH-GDC");
  config.word_dim = 32;
  config.position_dim = 16;
  config.difficulty_dim = 8;
  config.hidden_dim = 32;
  config.vocab_size = vocab.size();
  config.max_decode_len = 12;
  const dqg::DqgModel model(config, vocab);
  const auto beam = static_cast<std::size_t>(state.range(0));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& e = corpus[i++ % corpus.size()];
    benchmark::DoNotOptimize(model.beam_search(e, e.difficulty, beam));
  }
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(3)->Arg(5);

void BM_TeacherForcedStep(benchmark::State& state) {
  const auto corpus = dqg::generate_synthetic_corpus(64, 3, {}, {});
  const auto vocab = dqg::build_vocab(corpus, 1);
  auto config = dqg::ModelConfig::variant("DLPH-GDC");
  config.word_dim = 32;
  config.position_dim = 16;
  config.difficulty_dim = 8;
  config.hidden_dim = 32;
  config.vocab_size = vocab.size();
  dqg::DqgModel model(config, vocab);
  std::size_t i = 0;
  for (auto _ : state) {
    dqg::Graph g;
    const auto loss = dqg::teacher_forced_loss(g, model, corpus[i++ % corpus.size()]);
    g.backward(loss.mean);
    model.params().zero_grad();
  }
}
BENCHMARK(BM_TeacherForcedStep);

}  // namespace

BENCHMARK_MAIN();
