#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dqg/corpus.hpp"

namespace dqg {

inline constexpr std::size_t kDefaultMaxDistance = 20;

// Per-token distance to the nearest answer token, clipped at max_distance.
// Distance 0 marks exactly the answer tokens.
struct PositionMap {
  std::vector<std::size_t> distances;
  std::size_t max_distance = kDefaultMaxDistance;
};

PositionMap relative_positions(std::size_t sentence_len, const TokenSpan& answer,
                               std::size_t max_distance = kDefaultMaxDistance);

// Unclipped token distance from position i to the span.
std::size_t distance_to_answer(std::size_t i, const TokenSpan& answer);

// Mean distance from the answer of the distinct content question words that
// also occur in the sentence (nearest occurrence wins). Empty when no
// question word qualifies.
std::optional<double> avg_question_word_distance(const Example& example,
                                                 const StopwordSet& stopwords);

// Mean distance of the content sentence tokens outside the answer.
std::optional<double> avg_sentence_word_distance(const Example& example,
                                                 const StopwordSet& stopwords);

struct ProximityStats {
  std::optional<double> avg_qword_dist_easy;
  std::optional<double> avg_qword_dist_hard;
  std::optional<double> avg_qword_dist_all;
  std::optional<double> avg_sentword_dist;
  std::size_t count_easy = 0;
  std::size_t count_hard = 0;
  std::size_t count_all = 0;
  std::size_t count_sentword = 0;
};

// Macro averages: per-example means, then averaged within each stratum.
// "All" covers every example with a qualifying word, labeled or not.
ProximityStats corpus_proximity_stats(std::span<const Example> examples,
                                      const StopwordSet& stopwords);

}  // namespace dqg
