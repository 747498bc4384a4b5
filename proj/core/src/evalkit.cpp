#include "dqg/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dqg/errors.hpp"
#include "dqg/model.hpp"

namespace dqg {

namespace {

void check_pairs(std::size_t candidates, std::size_t references, const char* what) {
  if (candidates == 0) throw ContractError(std::string(what) + ": empty corpus");
  if (candidates != references) {
    throw ContractError(std::string(what) + ": " + std::to_string(candidates) +
                        " candidates vs " + std::to_string(references) + " references");
  }
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++out[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void check_readers(std::span<const ReaderOracle* const> readers) {
  if (readers.empty()) throw ContractError("evaluation needs at least one reader");
  for (const auto* r : readers)
    if (!r->fitted()) throw ContractError("reader '" + r->name() + "' is not fitted");
}

void check_labeled(std::span<const Example> test) {
  for (const auto& e : test) {
    if (e.difficulty == Difficulty::Unlabeled)
      throw ContractError("test example '" + e.id + "' has no difficulty label");
  }
}

struct Accumulator {
  double em = 0.0, f1 = 0.0;
  std::size_t count = 0;
  StratumScores scores() const {
    if (count == 0) return {};
    const double n = static_cast<double>(count);
    return {100.0 * em / n, 100.0 * f1 / n, count};
  }
};

// Per reader: {easy, hard}.
std::vector<std::pair<StratumScores, StratumScores>> score_strata(
    std::span<const Example> test, std::span<const Tokens> questions,
    std::span<const ReaderOracle* const> readers) {
  std::vector<std::pair<StratumScores, StratumScores>> out;
  for (const auto* reader : readers) {
    Accumulator easy, hard;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const std::string gold = test[i].answer_text();
      const std::string pred = reader->predict(test[i].sentence, questions[i]);
      Accumulator& acc = test[i].difficulty == Difficulty::Easy ? easy : hard;
      acc.em += exact_match(pred, gold) ? 1.0 : 0.0;
      acc.f1 += token_f1(pred, gold);
      ++acc.count;
    }
    out.emplace_back(easy.scores(), hard.scores());
  }
  return out;
}

std::vector<Tokens> generate_all(const DqgModel& model, std::span<const Example> test,
                                 bool reverse) {
  std::vector<Tokens> out;
  out.reserve(test.size());
  for (const auto& e : test)
    out.push_back(model.generate(e, reverse ? reversed(e.difficulty) : e.difficulty));
  return out;
}

}  // namespace

std::vector<double> corpus_bleu(std::span<const Tokens> candidates,
                                std::span<const Tokens> references, std::size_t max_n) {
  check_pairs(candidates.size(), references.size(), "corpus_bleu");
  if (max_n < 1) throw ContractError("corpus_bleu: max_n must be >= 1");
  std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
  double c = 0.0, r = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c += static_cast<double>(candidates[i].size());
    r += static_cast<double>(references[i].size());
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto cand = ngram_counts(candidates[i], n);
      const auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) matched[n - 1] += static_cast<double>(std::min(count, it->second));
        total[n - 1] += static_cast<double>(count);
      }
    }
  }
  const double bp = c == 0.0 ? 0.0 : std::min(1.0, std::exp(1.0 - r / c));
  std::vector<double> out(max_n, 0.0);
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 1; n <= max_n; ++n) {
    if (matched[n - 1] == 0.0) zero = true;
    if (zero) continue;  // stays 0 for this and every higher order
    log_sum += std::log(matched[n - 1] / total[n - 1]);
    out[n - 1] = bp * std::exp(log_sum / static_cast<double>(n));
  }
  return out;
}

double rouge_l(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  check_pairs(candidates.size(), references.size(), "rouge_l");
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto lcs = static_cast<double>(lcs_length(candidates[i], references[i]));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(candidates[i].size());
    const double rec = lcs / static_cast<double>(references[i].size());
    sum += 2.0 * p * rec / (p + rec);
  }
  return sum / static_cast<double>(candidates.size());
}

double answer_occurrence_rate(std::span<const GenerationRecord> records) {
  std::size_t hits = 0, total = 0;
  for (const auto& rec : records) {
    const std::set<std::string> question(rec.generated.begin(), rec.generated.end());
    for (const auto& t : tokenize(rec.gold_answer)) {
      ++total;
      hits += question.count(t);
    }
  }
  if (total == 0) throw ContractError("answer_occurrence_rate: no answer tokens");
  return static_cast<double>(hits) / static_cast<double>(total);
}

DifficultyReport difficulty_eval(std::span<const Example> test, std::span<const Tokens> questions,
                                 std::span<const ReaderOracle* const> readers) {
  check_pairs(test.size(), questions.size(), "difficulty_eval");
  check_labeled(test);
  check_readers(readers);
  const auto strata = score_strata(test, questions, readers);
  DifficultyReport report;
  for (std::size_t r = 0; r < readers.size(); ++r)
    report.readers.push_back({readers[r]->name(), strata[r].first, strata[r].second});
  return report;
}

DifficultyReport difficulty_eval(const DqgModel& model, std::span<const Example> test,
                                 std::span<const ReaderOracle* const> readers) {
  check_labeled(test);
  check_readers(readers);
  const auto questions = generate_all(model, test, false);
  return difficulty_eval(test, questions, readers);
}

GapReport reversed_label_gap(std::span<const Example> test, std::span<const Tokens> true_questions,
                             std::span<const Tokens> reversed_questions,
                             std::span<const ReaderOracle* const> readers) {
  check_pairs(test.size(), true_questions.size(), "reversed_label_gap");
  check_pairs(test.size(), reversed_questions.size(), "reversed_label_gap");
  check_labeled(test);
  check_readers(readers);
  const auto with_true = score_strata(test, true_questions, readers);
  const auto with_reversed = score_strata(test, reversed_questions, readers);
  GapReport report;
  for (std::size_t r = 0; r < readers.size(); ++r) {
    ReaderGap g;
    g.reader = readers[r]->name();
    g.easy_true = with_true[r].first;
    g.hard_true = with_true[r].second;
    g.easy_reversed = with_reversed[r].first;
    g.hard_reversed = with_reversed[r].second;
    g.easy_em_gap = g.easy_true.em - g.easy_reversed.em;
    g.easy_f1_gap = g.easy_true.f1 - g.easy_reversed.f1;
    g.hard_em_gap = g.hard_reversed.em - g.hard_true.em;
    g.hard_f1_gap = g.hard_reversed.f1 - g.hard_true.f1;
    report.readers.push_back(std::move(g));
  }
  return report;
}

GapReport reversed_label_gap(const DqgModel& model, std::span<const Example> test,
                             std::span<const ReaderOracle* const> readers) {
  check_labeled(test);
  check_readers(readers);
  const auto true_q = generate_all(model, test, false);
  const auto reversed_q = generate_all(model, test, true);
  return reversed_label_gap(test, true_q, reversed_q, readers);
}

}  // namespace dqg
