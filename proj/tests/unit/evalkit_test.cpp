#include <doctest.h>

#include <cmath>

#include "dqg/errors.hpp"
#include "dqg/evalkit.hpp"
#include "dqg/model.hpp"
#include "support.hpp"

using namespace dqg;

namespace {

std::vector<Tokens> toks(std::initializer_list<const char*> lines) {
  std::vector<Tokens> out;
  for (const char* l : lines) out.push_back(tokenize(l));
  return out;
}

class ConstantReader final : public ReaderOracle {
 public:
  explicit ConstantReader(std::string answer) : answer_(std::move(answer)) {}
  std::string name() const override { return "constant"; }
  std::unique_ptr<ReaderOracle> fresh() const override {
    return std::make_unique<ConstantReader>(answer_);
  }
  void fit(std::span<const Example>, std::span<const Example>) override { fitted_ = true; }
  bool fitted() const override { return fitted_; }
  std::string predict(const Tokens&, const Tokens&) const override { return answer_; }

 private:
  std::string answer_;
  bool fitted_ = false;
};

}  // namespace

TEST_CASE("corpus BLEU") {
  const auto ref = toks({"the cat sat on the mat", "a quick brown fox jumps"});
  const auto same = corpus_bleu(ref, ref);
  REQUIRE(same.size() == 4);
  for (double b : same) CHECK(b == doctest::Approx(1.0).epsilon(1e-15));

  const auto short_c = toks({"the cat sat"});
  const auto short_r = toks({"the cat sat down"});
  const auto b = corpus_bleu(short_c, short_r, 1);
  CHECK(std::abs(b[0] - std::exp(1.0 - 4.0 / 3.0)) < 1e-15);
  CHECK(std::abs(b[0] - 0.7165) < 1e-4);

  CHECK(corpus_bleu(toks({"x y"}), toks({"a b"}), 1)[0] == 0.0);
  // A zero bigram precision zeroes BLEU-2 and above.
  const auto no_bigram = corpus_bleu(toks({"b a"}), toks({"a b"}));
  CHECK(no_bigram[0] == 1.0);
  CHECK(no_bigram[1] == 0.0);
  CHECK(no_bigram[3] == 0.0);

  // Longer candidates are not penalised.
  CHECK(corpus_bleu(toks({"the cat sat down"}), toks({"the cat sat"}), 1)[0] ==
        doctest::Approx(0.75));

  CHECK_THROWS_AS(corpus_bleu(std::vector<Tokens>{}, std::vector<Tokens>{}), ContractError);
  CHECK_THROWS_AS(corpus_bleu(ref, short_r), ContractError);
}

TEST_CASE("BLEU is non-increasing in n") {
  const auto cands = toks({"what is the atomic number of oxygen ?", "who wrote the sonnet ?",
                           "where is the river bridge", "which metal is soft"});
  const auto refs = toks({"what is the atomic number of the element oxygen ?",
                          "who wrote this sonnet ?", "where does the river cross the bridge ?",
                          "which metal has high conductivity ?"});
  const auto b = corpus_bleu(cands, refs, 4);
  for (std::size_t n = 1; n < b.size(); ++n) CHECK(b[n] <= b[n - 1]);
  for (double v : b) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ROUGE-L") {
  const auto same = toks({"a b c"});
  CHECK(rouge_l(same, same) == 1.0);
  const double r = rouge_l(toks({"a b c"}), toks({"a c d"}));
  CHECK(std::abs(r - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(r - 0.6667) < 1e-4);
  CHECK(rouge_l(toks({"a b"}), toks({"c d"})) == 0.0);
  CHECK(rouge_l(toks({"a b c", "x"}), toks({"a c d", "x"})) == doctest::Approx(5.0 / 6.0));
  CHECK_THROWS_AS(rouge_l(std::vector<Tokens>{}, std::vector<Tokens>{}), ContractError);
}

TEST_CASE("answer occurrence rate") {
  std::vector<GenerationRecord> recs{
      {"1", Difficulty::Easy, tokenize("what is the sky ?"), {}, "blue sky"},
      {"2", Difficulty::Hard, tokenize("what number ?"), {}, "8"},
  };
  CHECK(answer_occurrence_rate(recs) == doctest::Approx(1.0 / 3.0));
  recs[0].generated = tokenize("what ?");
  CHECK(answer_occurrence_rate(recs) == 0.0);
  recs[0].generated = tokenize("is the sky blue ?");
  recs[1].generated = tokenize("why 8 ?");
  CHECK(answer_occurrence_rate(recs) == 1.0);
  recs[0].gold_answer = "";
  recs[1].gold_answer = " ";
  CHECK_THROWS_AS(answer_occurrence_rate(recs), ContractError);
}

TEST_CASE("difficulty evaluation per stratum") {
  const auto test = generate_synthetic_corpus(40, 6, HintProfile{});
  std::vector<Tokens> gold;
  for (const auto& e : test) gold.push_back(e.question);

  ConstantReader empty("");
  empty.fit({}, {});
  const ReaderOracle* none[] = {&empty};
  const auto zero = difficulty_eval(test, gold, none);
  REQUIRE(zero.readers.size() == 1);
  CHECK(zero.readers[0].easy.em == 0.0);
  CHECK(zero.readers[0].hard.em == 0.0);
  CHECK(zero.readers[0].easy.count + zero.readers[0].hard.count == test.size());

  const auto train = generate_synthetic_corpus(200, 7, HintProfile{});
  WindowReader window;
  window.fit(train, {});
  const ReaderOracle* readers[] = {&window};
  const auto report = difficulty_eval(test, gold, readers);
  CHECK(report.readers[0].easy.em > report.readers[0].hard.em + 10.0);
  for (const auto& s : {report.readers[0].easy, report.readers[0].hard}) {
    CHECK(s.em >= 0.0);
    CHECK(s.em <= 100.0);
    CHECK(s.f1 >= s.em);
  }

  WindowReader unfitted;
  const ReaderOracle* lazy[] = {&unfitted};
  CHECK_THROWS_AS(difficulty_eval(test, gold, lazy), ContractError);
  auto unlabeled = test;
  unlabeled[3].difficulty = Difficulty::Unlabeled;
  CHECK_THROWS_AS(difficulty_eval(unlabeled, gold, readers), ContractError);
}

TEST_CASE("reversed-label gap orientation and antisymmetry") {
  const auto test = generate_synthetic_corpus(40, 6, HintProfile{});
  const auto train = generate_synthetic_corpus(200, 7, HintProfile{});
  WindowReader window;
  window.fit(train, {});
  const ReaderOracle* readers[] = {&window};

  // Near-answer questions for every example vs. far ones.
  std::vector<Tokens> near_q, far_q;
  for (const auto& e : test) {
    Tokens n{"what"}, f{"what"};
    if (e.answer.start > 0) n.push_back(e.sentence[e.answer.start - 1]);
    if (e.answer.end + 1 < e.sentence.size()) n.push_back(e.sentence[e.answer.end + 1]);
    f.push_back(e.answer.start >= 8 ? e.sentence[0] : e.sentence.back());
    near_q.push_back(n);
    far_q.push_back(f);
  }
  std::vector<Tokens> as_true, as_reversed;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool easy = test[i].difficulty == Difficulty::Easy;
    as_true.push_back(easy ? near_q[i] : far_q[i]);
    as_reversed.push_back(easy ? far_q[i] : near_q[i]);
  }
  const auto gap = reversed_label_gap(test, as_true, as_reversed, readers);
  const auto swapped = reversed_label_gap(test, as_reversed, as_true, readers);
  REQUIRE(gap.readers.size() == 1);
  const auto& g = gap.readers[0];
  const auto& s = swapped.readers[0];
  CHECK(g.easy_em_gap > 0.0);
  CHECK(g.hard_em_gap > 0.0);
  CHECK(g.easy_em_gap == -s.easy_em_gap);
  CHECK(g.hard_em_gap == -s.hard_em_gap);
  CHECK(g.easy_f1_gap == -s.easy_f1_gap);
  CHECK(g.hard_f1_gap == -s.hard_f1_gap);
  CHECK(g.easy_em_gap == g.easy_true.em - g.easy_reversed.em);
  CHECK(g.hard_em_gap == g.hard_reversed.em - g.hard_true.em);

  const auto same = reversed_label_gap(test, as_true, as_true, readers);
  CHECK(same.readers[0].easy_em_gap == 0.0);
  CHECK(same.readers[0].hard_f1_gap == 0.0);
}

TEST_CASE("label-free models show no gap") {
  const auto test = generate_synthetic_corpus(12, 6, HintProfile{});
  const Vocab vocab = build_vocab(test, 1);
  const DqgModel m(dqg::testing::tiny_config(PositionMode::None, false, vocab.size()), vocab);
  WindowReader window;
  window.fit(test, {});
  const ReaderOracle* readers[] = {&window};
  const auto gap = reversed_label_gap(m, test, readers);
  CHECK(gap.readers[0].easy_em_gap == 0.0);
  CHECK(gap.readers[0].hard_em_gap == 0.0);
  CHECK(gap.readers[0].easy_f1_gap == 0.0);
  CHECK(gap.readers[0].hard_f1_gap == 0.0);
  const auto d = difficulty_eval(m, test, readers);
  CHECK(d.readers[0].easy.em == gap.readers[0].easy_true.em);
}
