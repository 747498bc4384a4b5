#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dqg/errors.hpp"
#include "dqg/model.hpp"
#include "dqg/trainer.hpp"
#include "support.hpp"

using namespace dqg;
using dqg::testing::oxygen_example;
using dqg::testing::tiny_config;
using dqg::testing::toy_corpus;

namespace {

Vocab toy_vocab() { return build_vocab(toy_corpus(), 1); }

void fill(Tensor& t, double v) {
  for (auto& x : t.mutable_values()) x = v;
}

void copy_values(const Tensor& from, Tensor& to) {
  REQUIRE(from.shape() == to.shape());
  std::copy(from.values().begin(), from.values().end(), to.mutable_values().begin());
}

std::vector<double> values_of(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

double total(const Tensor& t) { return std::accumulate(t.values().begin(), t.values().end(), 0.0); }

}  // namespace

TEST_CASE("parameter count follows the closed form") {
  for (auto mode : {PositionMode::None, PositionMode::AnswerIndicator, PositionMode::QWPH,
                    PositionMode::DLPH}) {
    for (bool gdc : {false, true}) {
      const ModelConfig c = tiny_config(mode, gdc, 37);
      const std::size_t V = 37, dw = 4, dp = 3, dd = 2, H = 5, L = 20;
      const std::size_t pos = mode == PositionMode::None ? 0 : dp;
      const std::size_t in = dw + pos;
      const std::size_t D = 2 * H + (gdc ? dd : 0);
      std::size_t tables = 0;
      if (mode == PositionMode::AnswerIndicator) tables = 2 * dp;
      if (mode == PositionMode::QWPH) tables = (L + 1) * dp;
      if (mode == PositionMode::DLPH) tables = 2 * (L + 1) * dp;
      const std::size_t expected = V * dw + tables + (gdc ? 2 * dd : 0) +
                                   2 * (4 * H * (in + H) + 4 * H) + 4 * D * (dw + D) + 4 * D +
                                   2 * H * D + V * (D + 2 * H) + V + (D + 2 * H + dw) + 1;
      CHECK(ModelParams::parameter_count(c) == expected);
      CHECK(ModelParams::initialize(c).tensors().size() == ModelParams::layout(c).size());
    }
  }
}

TEST_CASE("config validation and variants") {
  ModelConfig c = tiny_config(PositionMode::DLPH, true, 0);
  CHECK_THROWS_AS(c.validate(), ContractError);
  CHECK(ModelConfig::variant("L2A").position_mode == PositionMode::None);
  CHECK_FALSE(ModelConfig::variant("L2A").consumes_labels());
  CHECK(ModelConfig::variant("Ans").position_mode == PositionMode::AnswerIndicator);
  CHECK(ModelConfig::variant("dlph-gdc").global_difficulty_control);
  CHECK_FALSE(ModelConfig::variant("QWPH").consumes_labels());
  CHECK(ModelConfig::variant("QWPH-GDC").consumes_labels());
  CHECK_THROWS_AS(ModelConfig::variant("BiDAF"), ParseError);
  CHECK(parse_position_mode("qwph") == PositionMode::QWPH);
  CHECK_THROWS_AS(parse_position_mode("absolute"), ParseError);

  ModelConfig full = ModelConfig::variant("DLPH-GDC");
  full.vocab_size = 100;
  CHECK(full.decoder_hidden_dim() == 266);
  CHECK(full.encoder_input_dim() == 178);
}

TEST_CASE("parameter initialisation is seeded and bounded") {
  const ModelConfig c = tiny_config(PositionMode::DLPH, true, 30, 9);
  const auto a = ModelParams::initialize(c);
  const auto b = ModelParams::initialize(c);
  for (std::size_t i = 0; i < a.entries().size(); ++i) {
    CHECK(values_of(a.entries()[i].second) == values_of(b.entries()[i].second));
    for (double v : a.entries()[i].second.values()) CHECK(std::abs(v) <= 0.1);
  }
}

TEST_CASE("encoder and decoder shapes") {
  const Vocab vocab = toy_vocab();
  const DqgModel m(tiny_config(PositionMode::DLPH, true, vocab.size()), vocab);
  Graph g(Graph::Mode::Inference);
  const Example e = oxygen_example();
  const auto enc = m.encode(g, e, Difficulty::Easy);
  CHECK(enc.states.size() == 12);
  for (const auto& h : enc.states) CHECK(h.shape() == Shape{10});
  CHECK(enc.states_matrix.shape() == Shape{12, 10});
  // h_m = [forward final; backward first]
  CHECK(std::equal(enc.final_state.values().begin(), enc.final_state.values().begin() + 5,
                   enc.states[11].values().begin()));
  CHECK(std::equal(enc.final_state.values().begin() + 5, enc.final_state.values().end(),
                   enc.states[0].values().begin() + 5));
  const auto u0 = m.init_decoder(g, enc, Difficulty::Easy);
  CHECK(u0.hidden.shape() == Shape{12});
  CHECK(u0.cell.shape() == Shape{12});
  for (double v : u0.cell.values()) CHECK(v == 0.0);
}

TEST_CASE("without global difficulty control u0 is h_m") {
  const Vocab vocab = toy_vocab();
  const DqgModel m(tiny_config(PositionMode::QWPH, false, vocab.size()), vocab);
  Graph g(Graph::Mode::Inference);
  const auto enc = m.encode(g, oxygen_example(), Difficulty::Unlabeled);
  const auto u0 = m.init_decoder(g, enc, Difficulty::Unlabeled);
  CHECK(values_of(u0.hidden) == values_of(enc.final_state));
}

TEST_CASE("zeroed difficulty table gives label-independent u0") {
  const Vocab vocab = toy_vocab();
  DqgModel m(tiny_config(PositionMode::QWPH, true, vocab.size()), vocab);
  fill(m.params().get("embedding.difficulty"), 0.0);
  Graph g(Graph::Mode::Inference);
  const auto enc = m.encode(g, oxygen_example(), Difficulty::Easy);
  CHECK(values_of(m.init_decoder(g, enc, Difficulty::Easy).hidden) ==
        values_of(m.init_decoder(g, enc, Difficulty::Hard).hidden));
}

TEST_CASE("labels are required where they are consumed") {
  const Vocab vocab = toy_vocab();
  const Example e = oxygen_example(Difficulty::Unlabeled);
  Graph g(Graph::Mode::Inference);
  const DqgModel dlph(tiny_config(PositionMode::DLPH, false, vocab.size()), vocab);
  CHECK_THROWS_AS(dlph.encode(g, e, Difficulty::Unlabeled), ContractError);
  const DqgModel gdc(tiny_config(PositionMode::QWPH, true, vocab.size()), vocab);
  const auto enc = gdc.encode(g, e, Difficulty::Unlabeled);
  CHECK_THROWS_AS(gdc.init_decoder(g, enc, Difficulty::Unlabeled), ContractError);
  const DqgModel plain(tiny_config(PositionMode::None, false, vocab.size()), vocab);
  CHECK_NOTHROW(plain.generate(e, Difficulty::Unlabeled));
}

TEST_CASE("tied QWPH and DLPH tables give identical encodings") {
  const Vocab vocab = toy_vocab();
  DqgModel dlph(tiny_config(PositionMode::DLPH, false, vocab.size()), vocab);
  DqgModel qwph(tiny_config(PositionMode::QWPH, false, vocab.size()), vocab);
  copy_values(dlph.params().get("embedding.position_easy"), dlph.params().get("embedding.position_hard"));
  copy_values(dlph.params().get("embedding.position_easy"), qwph.params().get("embedding.position"));
  for (const char* name : {"embedding.word", "encoder.forward.weight", "encoder.forward.bias",
                           "encoder.backward.weight", "encoder.backward.bias"}) {
    copy_values(dlph.params().get(name), qwph.params().get(name));
  }
  Graph g(Graph::Mode::Inference);
  const Example e = oxygen_example();
  const auto a = dlph.encode(g, e, Difficulty::Easy);
  const auto b = dlph.encode(g, e, Difficulty::Hard);
  const auto c = qwph.encode(g, e, Difficulty::Easy);
  CHECK(values_of(a.states_matrix) == values_of(b.states_matrix));
  CHECK(values_of(a.states_matrix) == values_of(c.states_matrix));
}

TEST_CASE("DLPH encodings differ by label when the tables differ") {
  const Vocab vocab = toy_vocab();
  const DqgModel m(tiny_config(PositionMode::DLPH, false, vocab.size()), vocab);
  Graph g(Graph::Mode::Inference);
  const auto a = m.encode(g, oxygen_example(), Difficulty::Easy);
  const auto b = m.encode(g, oxygen_example(), Difficulty::Hard);
  CHECK(values_of(a.states_matrix) != values_of(b.states_matrix));
}

TEST_CASE("the label enters only through the position tables and the difficulty vector") {
  const Vocab vocab = toy_vocab();
  DqgModel m(tiny_config(PositionMode::DLPH, true, vocab.size()), vocab);
  copy_values(m.params().get("embedding.position_easy"), m.params().get("embedding.position_hard"));
  Tensor& d = m.params().get("embedding.difficulty");
  auto v = d.mutable_values();
  std::copy(v.begin(), v.begin() + 2, v.begin() + 2);
  for (const auto& e : toy_corpus()) {
    const auto easy = m.beam_search(e, Difficulty::Easy);
    const auto hard = m.beam_search(e, Difficulty::Hard);
    CHECK(easy.ids == hard.ids);
    CHECK(easy.log_prob == hard.log_prob);
  }
}

TEST_CASE("label-free model ignores the requested label") {
  const Vocab vocab = toy_vocab();
  const DqgModel m(tiny_config(PositionMode::AnswerIndicator, false, vocab.size()), vocab);
  for (const auto& e : toy_corpus()) {
    CHECK(m.generate(e, Difficulty::Easy) == m.generate(e, Difficulty::Hard));
    CHECK(m.generate(e, Difficulty::Easy) == m.generate(e, Difficulty::Unlabeled));
  }
}

TEST_CASE("attention") {
  const Vocab vocab = toy_vocab();
  DqgModel m(tiny_config(PositionMode::QWPH, true, vocab.size()), vocab);
  Graph g(Graph::Mode::Inference);
  const auto enc = m.encode(g, oxygen_example(), Difficulty::Easy);
  const auto u0 = m.init_decoder(g, enc, Difficulty::Easy);
  const auto att = m.attention(g, u0.hidden, enc);
  CHECK(att.weights.shape() == Shape{12});
  CHECK(std::abs(total(att.weights) - 1.0) <= 1e-9);
  CHECK(att.context.shape() == Shape{10});

  fill(m.params().get("attention.weight"), 0.0);
  const auto flat = m.attention(g, u0.hidden, enc);
  for (double w : flat.weights.values()) CHECK(w == doctest::Approx(1.0 / 12.0));

  const Example single{"one", {"oxygen"}, {0, 0}, {"what", "?"}, Difficulty::Easy};
  const auto enc1 = m.encode(g, single, Difficulty::Easy);
  const auto att1 = m.attention(g, m.init_decoder(g, enc1, Difficulty::Easy).hidden, enc1);
  CHECK(values_of(att1.weights) == std::vector<double>{1.0});
  CHECK(values_of(att1.context) == values_of(enc1.states[0]));
}

TEST_CASE("decode step distribution and copy gate extremes") {
  const Vocab vocab = toy_vocab();
  DqgModel m(tiny_config(PositionMode::DLPH, true, vocab.size()), vocab);
  Example e = oxygen_example();
  e.sentence[3] = "zirconium";  // out of vocabulary
  const auto source = SourceContext::build(e.sentence, vocab);
  REQUIRE(source.oov_tokens == std::vector<std::string>{"zirconium"});
  const int oov = static_cast<int>(vocab.size());

  Graph g(Graph::Mode::Inference);
  const auto enc = m.encode(g, e, Difficulty::Easy);
  const auto u0 = m.init_decoder(g, enc, Difficulty::Easy);
  const auto step = m.decode_step(g, u0, Vocab::kSos, enc, source);
  CHECK(step.distribution.size() == vocab.size() + 1);
  CHECK(std::abs(total(step.distribution) - 1.0) <= 1e-6);
  CHECK(step.distribution[oov] > 0.0);

  SUBCASE("p_gen = 1 leaves the vocabulary distribution") {
    fill(m.params().get("copy_gate.bias"), 1000.0);
    const auto s = m.decode_step(g, u0, Vocab::kSos, enc, source);
    CHECK(s.copy_gate.item() == 1.0);
    CHECK(s.distribution[oov] == 0.0);
    const auto att = m.attention(g, s.state.hidden, enc);
    const Tensor p = g.softmax(g.add(
        g.matvec(m.params().get("output.weight"), g.concat({s.state.hidden, att.context})),
        m.params().get("output.bias")));
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(s.distribution[i] == doctest::Approx(p[i]).epsilon(1e-14));
  }
  SUBCASE("p_gen = 0 copies attention mass by token identity") {
    fill(m.params().get("copy_gate.bias"), -1000.0);
    const auto s = m.decode_step(g, u0, Vocab::kSos, enc, source);
    CHECK(s.copy_gate.item() == 0.0);
    std::vector<double> expected(source.extended_size(), 0.0);
    for (std::size_t i = 0; i < source.extended_ids.size(); ++i)
      expected[static_cast<std::size_t>(source.extended_ids[i])] += s.attention[i];
    for (std::size_t i = 0; i < expected.size(); ++i)
      CHECK(s.distribution[i] == doctest::Approx(expected[i]).epsilon(1e-14));
  }
  SUBCASE("a copied OOV token feeds back as UNK") {
    CHECK(source.input_id(oov) == Vocab::kUnk);
    CHECK(source.token(oov, vocab) == "zirconium");
    CHECK_NOTHROW(m.decode_step(g, u0, oov, enc, source));
    CHECK_THROWS_AS(m.decode_step(g, u0, oov + 1, enc, source), IndexError);
  }
}

TEST_CASE("beam search agrees with greedy at width one and never scores below it") {
  const auto corpus = toy_corpus();
  const Vocab vocab = toy_vocab();
  ModelConfig c = tiny_config(PositionMode::DLPH, true, vocab.size(), 4);
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.max_epochs = 15;
  tc.patience = 15;
  tc.batch_size = 1;
  const DqgModel m = train(corpus, corpus, vocab, c, tc).best.model();
  const DqgModel fresh(c, vocab);
  for (const DqgModel* model : {&m, &fresh}) {
    for (const auto& e : corpus) {
      for (auto d : {Difficulty::Easy, Difficulty::Hard}) {
        const auto g1 = model->greedy(e, d);
        const auto b1 = model->beam_search(e, d, 1);
        const auto b3 = model->beam_search(e, d, 3);
        CHECK(g1.ids == b1.ids);
        CHECK(g1.log_prob == doctest::Approx(b1.log_prob).epsilon(1e-12));
        CHECK(b3.log_prob >= b1.log_prob - 1e-12);
        CHECK(b3.tokens.size() <= c.max_decode_len);
      }
    }
  }
  CHECK_THROWS_AS(m.beam_search(corpus[0], Difficulty::Easy, 0), ContractError);
}

TEST_CASE("generation is deterministic") {
  const Vocab vocab = toy_vocab();
  const DqgModel a(tiny_config(PositionMode::DLPH, true, vocab.size(), 3), vocab);
  const DqgModel b(tiny_config(PositionMode::DLPH, true, vocab.size(), 3), vocab);
  for (const auto& e : toy_corpus()) {
    const auto ga = a.beam_search(e, Difficulty::Hard);
    const auto gb = b.beam_search(e, Difficulty::Hard);
    CHECK(ga.ids == gb.ids);
    CHECK(ga.log_prob == gb.log_prob);
  }
}

TEST_CASE("composite gradient check through encode, three copy steps and loss") {
  Example e = oxygen_example();
  e.sentence = {"oxygen", "zirconium", "atomic", "8"};
  e.answer = {3, 3};
  e.question = {"what", "zirconium", "atomic"};
  const std::vector<Example> corpus{oxygen_example()};
  const Vocab vocab = build_vocab(corpus, 1);
  for (auto mode : {PositionMode::DLPH, PositionMode::QWPH, PositionMode::AnswerIndicator}) {
    DqgModel m(tiny_config(mode, true, vocab.size(), 11), vocab);
    // Spread the weights to +-0.5 so few gradient entries sit at the
    // finite-difference noise floor.
    for (auto& [name, t] : m.params().entries())
      for (double& v : t.mutable_values()) v *= 5.0;
    auto inputs = m.params().tensors();
    const double err = grad_check(
        [&](Graph& g) { return teacher_forced_loss(g, m, e).mean; }, inputs, 1e-4);
    CHECK(err < 1e-4);
  }
}
