#include "dqg/proximity.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <string>

#include "dqg/errors.hpp"

namespace dqg {

std::size_t distance_to_answer(std::size_t i, const TokenSpan& answer) {
  if (i < answer.start) return answer.start - i;
  if (i > answer.end) return i - answer.end;
  return 0;
}

PositionMap relative_positions(std::size_t sentence_len, const TokenSpan& answer,
                               std::size_t max_distance) {
  if (max_distance < 1) throw ContractError("relative_positions: L must be >= 1");
  if (answer.start > answer.end || answer.end >= sentence_len) {
    throw ContractError("relative_positions: span [" + std::to_string(answer.start) + "," +
                        std::to_string(answer.end) + "] invalid for length " +
                        std::to_string(sentence_len));
  }
  PositionMap map;
  map.max_distance = max_distance;
  map.distances.resize(sentence_len);
  for (std::size_t i = 0; i < sentence_len; ++i)
    map.distances[i] = std::min(max_distance, distance_to_answer(i, answer));
  return map;
}

std::optional<double> avg_question_word_distance(const Example& example,
                                                 const StopwordSet& stopwords) {
  const std::set<std::string> distinct(example.question.begin(), example.question.end());
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& word : distinct) {
    if (!stopwords.is_content(word)) continue;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < example.sentence.size(); ++i)
      if (example.sentence[i] == word) best = std::min(best, distance_to_answer(i, example.answer));
    if (best == std::numeric_limits<std::size_t>::max()) continue;
    total += static_cast<double>(best);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

std::optional<double> avg_sentence_word_distance(const Example& example,
                                                 const StopwordSet& stopwords) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < example.sentence.size(); ++i) {
    if (example.answer.contains(i) || !stopwords.is_content(example.sentence[i])) continue;
    total += static_cast<double>(distance_to_answer(i, example.answer));
    ++count;
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

namespace {

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  std::optional<double> value() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

}  // namespace

ProximityStats corpus_proximity_stats(std::span<const Example> examples,
                                      const StopwordSet& stopwords) {
  Mean easy, hard, all, sent;
  for (const auto& e : examples) {
    if (const auto d = avg_question_word_distance(e, stopwords)) {
      all.add(*d);
      if (e.difficulty == Difficulty::Easy) easy.add(*d);
      if (e.difficulty == Difficulty::Hard) hard.add(*d);
    }
    if (const auto d = avg_sentence_word_distance(e, stopwords)) sent.add(*d);
  }
  ProximityStats stats;
  stats.avg_qword_dist_easy = easy.value();
  stats.avg_qword_dist_hard = hard.value();
  stats.avg_qword_dist_all = all.value();
  stats.avg_sentword_dist = sent.value();
  stats.count_easy = easy.n;
  stats.count_hard = hard.n;
  stats.count_all = all.n;
  stats.count_sentword = sent.n;
  return stats;
}

}  // namespace dqg
