#include <algorithm>
#include <cctype>

#include "dqg/corpus.hpp"

namespace dqg {

namespace {

// The common NLTK English list. Frozen here so distance statistics do not
// depend on any installed resource.
constexpr const char* kEnglishStopwords[] = {
    "a",        "about",    "above",      "after",   "again",      "against", "ain",
    "all",      "am",       "an",         "and",     "any",        "are",     "aren",
    "as",       "at",       "be",         "because", "been",       "before",  "being",
    "below",    "between",  "both",       "but",     "by",         "can",     "couldn",
    "d",        "did",      "didn",       "do",      "does",       "doesn",   "doing",
    "don",      "down",     "during",     "each",    "few",        "for",     "from",
    "further",  "had",      "hadn",       "has",     "hasn",       "have",    "haven",
    "having",   "he",       "her",        "here",    "hers",       "herself", "him",
    "himself",  "his",      "how",        "i",       "if",         "in",      "into",
    "is",       "isn",      "it",         "its",     "itself",     "just",    "ll",
    "m",        "ma",       "me",         "mightn",  "more",       "most",    "mustn",
    "my",       "myself",   "needn",      "no",      "nor",        "not",     "now",
    "o",        "of",       "off",        "on",      "once",       "only",    "or",
    "other",    "our",      "ours",       "ourselves", "out",      "over",    "own",
    "re",       "s",        "same",       "shan",    "she",        "should",  "shouldn",
    "so",       "some",     "such",       "t",       "than",       "that",    "the",
    "their",    "theirs",   "them",       "themselves", "then",    "there",   "these",
    "they",     "this",     "those",      "through", "to",         "too",     "under",
    "until",    "up",       "ve",         "very",    "was",        "wasn",    "we",
    "were",     "weren",    "what",       "when",    "where",      "which",   "while",
    "who",      "whom",     "why",        "will",    "with",       "won",     "wouldn",
    "y",        "you",      "your",       "yours",   "yourself",   "yourselves",
};

}  // namespace

StopwordSet::StopwordSet() : words_(std::begin(kEnglishStopwords), std::end(kEnglishStopwords)) {
  std::sort(words_.begin(), words_.end());
}

const StopwordSet& StopwordSet::english() {
  static const StopwordSet set;
  return set;
}

bool StopwordSet::contains(std::string_view token) const {
  if (token.empty()) return true;
  if (std::all_of(token.begin(), token.end(),
                  [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }))
    return true;
  std::string lowered(token);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); });
  return std::binary_search(words_.begin(), words_.end(), lowered);
}

}  // namespace dqg
