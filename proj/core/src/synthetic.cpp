#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "dqg/corpus.hpp"
#include "dqg/errors.hpp"
#include "dqg/rng.hpp"

namespace dqg {

namespace {

constexpr const char* kLexicon[] = {
    "acid",     "actor",    "album",    "amber",    "anchor",   "apple",    "arch",
    "army",     "atlas",    "atom",     "bakery",   "banner",   "barley",   "basin",
    "beacon",   "bishop",   "blanket",  "bridge",   "bronze",   "bucket",   "cabin",
    "canal",    "candle",   "canyon",   "carbon",   "castle",   "cedar",    "chapel",
    "chorus",   "circuit",  "citadel",  "clay",     "climate",  "cobalt",   "comet",
    "copper",   "coral",    "cotton",   "council",  "crater",   "crystal",  "delta",
    "desert",   "diamond",  "dragon",   "drum",     "dune",     "eagle",    "echo",
    "ember",    "empire",   "engine",   "fabric",   "falcon",   "ferry",    "fiber",
    "forest",   "fossil",   "fountain", "galaxy",   "garden",   "glacier",  "granite",
    "guitar",   "harbor",   "harvest",  "helium",   "heron",    "hollow",   "horizon",
    "island",   "ivory",    "jasmine",  "jungle",   "kernel",   "kettle",   "ladder",
    "lagoon",   "lantern",  "lattice",  "legend",   "lemon",    "library",  "linen",
    "lotus",    "magnet",   "maple",    "marble",   "meadow",   "mercury",  "meteor",
    "mill",     "mineral",  "mirror",   "monarch",  "mosaic",   "motor",    "museum",
    "nebula",   "needle",   "nickel",   "oasis",    "ocean",    "olive",    "orbit",
    "orchard",  "organ",    "oxygen",   "palace",   "panel",    "paper",    "parish",
    "pearl",    "pepper",   "pilgrim",  "pillar",   "pine",     "planet",   "plaza",
    "poet",     "pollen",   "portal",   "prairie",  "prism",    "quarry",   "quartz",
    "rail",     "raven",    "reactor",  "reef",     "relic",    "ribbon",   "ridge",
    "river",    "rocket",   "saddle",   "salmon",   "satellite","scholar",  "senate",
    "shadow",   "signal",   "silver",   "sodium",   "sonnet",   "spindle",  "spire",
    "statue",   "steam",    "summit",   "symbol",   "tablet",   "temple",   "thunder",
    "timber",   "tower",    "tractor",  "treaty",   "tribe",    "tulip",    "tunnel",
    "valley",   "velvet",   "violin",   "volcano",  "voyage",   "walnut",   "willow",
    "window",   "winter",   "wizard",   "zenith",
};

constexpr const char* kFillerStopwords[] = {"the", "of", "in", "and", "with", "for", "to", "a"};
constexpr const char* kWhWords[] = {"what", "which", "who", "where", "when"};

std::size_t distance_to_span(std::size_t i, const TokenSpan& span) {
  if (i < span.start) return span.start - i;
  if (i > span.end) return i - span.end;
  return 0;
}

}  // namespace

std::vector<Example> generate_synthetic_corpus(std::size_t n, std::uint64_t seed,
                                               const HintProfile& profile,
                                               const SyntheticOptions& options) {
  if (n < 1) throw ContractError("synthetic corpus: n must be >= 1");
  if (profile.easy_max_dist < 1 || profile.easy_max_dist >= profile.hard_min_dist) {
    throw ContractError("synthetic corpus: need 1 <= easy_max_dist < hard_min_dist");
  }
  if (options.min_sentence_len < 2 || options.min_sentence_len > options.max_sentence_len) {
    throw ContractError("synthetic corpus: invalid sentence length range");
  }
  if (options.hints_per_question < 1) {
    throw ContractError("synthetic corpus: hints_per_question must be >= 1");
  }
  if (options.max_sentence_len < profile.hard_min_dist + options.hints_per_question + 1) {
    throw ContractError("synthetic corpus: template of at most " +
                        std::to_string(options.max_sentence_len) +
                        " tokens is too short for hard_min_dist=" +
                        std::to_string(profile.hard_min_dist));
  }
  if (options.easy_ratio < 0.0 || options.easy_ratio > 1.0) {
    throw ContractError("synthetic corpus: easy_ratio outside [0, 1]");
  }

  Rng rng(seed);
  const std::size_t lexicon_size = std::size(kLexicon);
  const std::size_t n_easy = static_cast<std::size_t>(std::llround(options.easy_ratio * n));
  std::vector<Difficulty> labels(n, Difficulty::Hard);
  std::fill_n(labels.begin(), n_easy, Difficulty::Easy);
  rng.shuffle(labels);

  std::vector<Example> out;
  out.reserve(n);
  std::vector<std::size_t> pool(lexicon_size);
  for (std::size_t k = 0; k < n; ++k) {
    const bool easy = labels[k] == Difficulty::Easy;
    bool done = false;
    for (int attempt = 0; attempt < 1000 && !done; ++attempt) {
      const std::size_t m = options.min_sentence_len +
                            rng.index(options.max_sentence_len - options.min_sentence_len + 1);
      // Distinct content words, so every word's nearest occurrence is unique.
      for (std::size_t i = 0; i < lexicon_size; ++i) pool[i] = i;
      Tokens sentence(m);
      std::vector<bool> content(m, true);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + rng.index(lexicon_size - i);
        std::swap(pool[i], pool[j]);
        sentence[i] = kLexicon[pool[i]];
      }
      for (std::size_t i = 1; i < m; ++i) {
        if (rng.bernoulli(options.stopword_rate)) {
          sentence[i] = kFillerStopwords[rng.index(std::size(kFillerStopwords))];
          content[i] = false;
        }
      }
      const std::size_t answer_len = rng.bernoulli(0.7) ? 1 : 2;

      auto candidates_for = [&](const TokenSpan& span) {
        std::vector<std::size_t> c;
        for (std::size_t i = 0; i < m; ++i) {
          if (!content[i] || span.contains(i)) continue;
          const std::size_t d = distance_to_span(i, span);
          if (easy ? d <= profile.easy_max_dist : d >= profile.hard_min_dist) c.push_back(i);
        }
        return c;
      };
      std::vector<TokenSpan> spans;
      for (std::size_t s = 0; s + answer_len <= m; ++s) {
        const TokenSpan span{s, s + answer_len - 1};
        bool all_content = true;
        for (std::size_t i = span.start; i <= span.end; ++i) all_content = all_content && content[i];
        if (all_content && candidates_for(span).size() >= options.hints_per_question)
          spans.push_back(span);
      }
      if (spans.empty()) continue;
      const TokenSpan span = spans[rng.index(spans.size())];
      auto candidates = candidates_for(span);
      if (easy) {
        // Nearest word on each side first, then the next nearest; an answer
        // bracketed by its hints is locatable without ambiguity.
        std::vector<std::size_t> picked;
        std::optional<std::size_t> left, right;
        for (std::size_t pos : candidates) {
          if (pos < span.start) left = pos;
          if (pos > span.end && !right) right = pos;
        }
        if (left) picked.push_back(*left);
        if (right) picked.push_back(*right);
        std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
          return distance_to_span(a, span) < distance_to_span(b, span);
        });
        for (std::size_t pos : candidates) {
          if (picked.size() >= options.hints_per_question) break;
          if (std::find(picked.begin(), picked.end(), pos) == picked.end()) picked.push_back(pos);
        }
        picked.resize(std::min(picked.size(), options.hints_per_question));
        candidates = std::move(picked);
      } else {
        rng.shuffle(candidates);
        candidates.resize(options.hints_per_question);
      }
      std::sort(candidates.begin(), candidates.end());

      Example e;
      char id[32];
      std::snprintf(id, sizeof id, "syn-%06zu", k);
      e.id = id;
      e.question.push_back(kWhWords[rng.index(std::size(kWhWords))]);
      for (std::size_t pos : candidates) e.question.push_back(sentence[pos]);
      e.question.push_back("?");
      e.sentence = std::move(sentence);
      e.answer = span;
      e.difficulty = labels[k];
      out.push_back(std::move(e));
      done = true;
    }
    if (!done) {
      throw ContractError("synthetic corpus: could not place hints for example " +
                          std::to_string(k) + " under the given profile");
    }
  }
  return out;
}

}  // namespace dqg
