#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dqg {

using Tokens = std::vector<std::string>;

enum class Difficulty { Easy, Hard, Unlabeled };

std::string to_string(Difficulty d);
// "easy" / "hard" (case-insensitive); anything else throws ParseError.
Difficulty parse_difficulty(std::string_view text);
// Easy <-> Hard; Unlabeled throws ContractError.
Difficulty reversed(Difficulty d);

struct TokenSpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::size_t length() const { return end - start + 1; }
  bool contains(std::size_t i) const { return i >= start && i <= end; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Example {
  std::string id;
  Tokens sentence;
  TokenSpan answer;
  Tokens question;
  Difficulty difficulty = Difficulty::Unlabeled;

  // Throws ContractError when the span or token lists are invalid.
  void validate() const;
  Tokens answer_tokens() const;
  std::string answer_text() const;
  friend bool operator==(const Example&, const Example&) = default;
};

std::string join_tokens(std::span<const std::string> tokens);

// Lowercases ASCII, splits on whitespace, and emits every ASCII punctuation
// character as its own token.
Tokens tokenize(std::string_view text);

struct TokenOffset {
  std::size_t begin = 0;  // byte offset in the original text
  std::size_t end = 0;    // one past the last byte
};
std::vector<TokenOffset> tokenize_offsets(std::string_view text);

// Maps a character-offset answer onto an inclusive token span. Throws
// AlignmentError when the answer is not at `char_start` or would split a token.
TokenSpan char_span_to_token_span(std::string_view sentence, std::size_t char_start,
                                  std::string_view answer_text);

// ---------------------------------------------------------------------------

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab();
  // `tokens` excludes the reserved entries, which are always ids 0..3.
  explicit Vocab(const std::vector<std::string>& tokens, std::size_t min_freq = 1);

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t min_freq() const { return min_freq_; }
  bool contains(std::string_view token) const;
  int id(std::string_view token) const;  // UNK when absent
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  std::vector<int> encode(std::span<const std::string> tokens) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.id_to_token_ == b.id_to_token_ && a.min_freq_ == b.min_freq_;
  }

 private:
  void add(const std::string& token);
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  std::size_t min_freq_ = 1;
};

// Shared encoder/decoder vocabulary over sentence and question tokens.
// Order: frequency descending, then lexicographic.
Vocab build_vocab(std::span<const Example> examples, std::size_t min_freq);

// ---------------------------------------------------------------------------

// JSONL record: {"id", "sentence", "answer_start", "answer_text", "question",
// "difficulty": "easy" | "hard" | null}
std::vector<Example> load_jsonl(const std::filesystem::path& path);
void save_jsonl(std::span<const Example> examples, const std::filesystem::path& path);
std::string example_to_json_line(const Example& e);
Example example_from_json_line(std::string_view line);

// ---------------------------------------------------------------------------

// Fixed, embedded list of English function words. Tokens consisting solely
// of punctuation are also treated as stop tokens.
class StopwordSet {
 public:
  static const StopwordSet& english();
  bool contains(std::string_view token) const;
  bool is_content(std::string_view token) const { return !contains(token); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  StopwordSet();
  std::vector<std::string> words_;  // sorted
};

// ---------------------------------------------------------------------------

struct HintProfile {
  std::size_t easy_max_dist = 2;
  std::size_t hard_min_dist = 6;
};

struct SyntheticOptions {
  std::size_t min_sentence_len = 14;
  std::size_t max_sentence_len = 18;
  std::size_t hints_per_question = 2;
  double easy_ratio = 0.58;
  double stopword_rate = 0.15;
};

// Templated sentences over a fixed content lexicon. Easy questions quote
// content words within easy_max_dist of the answer; Hard questions quote
// words at least hard_min_dist away. Deterministic in (n, seed, profile).
std::vector<Example> generate_synthetic_corpus(std::size_t n, std::uint64_t seed,
                                               const HintProfile& profile,
                                               const SyntheticOptions& options = {});

}  // namespace dqg
