#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dqg/corpus.hpp"

namespace dqg {

// SQuAD-style answer normalisation: lowercase, drop punctuation, drop the
// articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);
bool exact_match(std::string_view prediction, std::string_view gold);
// Multiset token overlap F1 over normalised tokens. Both empty -> 1, one
// empty -> 0.
double token_f1(std::string_view prediction, std::string_view gold);

// Trainable extractive reader used to judge question difficulty.
class ReaderOracle {
 public:
  virtual ~ReaderOracle() = default;
  virtual std::string name() const = 0;
  // Unfitted instance with the same hyperparameters.
  virtual std::unique_ptr<ReaderOracle> fresh() const = 0;
  virtual void fit(std::span<const Example> train, std::span<const Example> dev) = 0;
  virtual bool fitted() const = 0;
  // Predicted answer text (tokens joined by spaces).
  virtual std::string predict(const Tokens& sentence, const Tokens& question) const = 0;
};

// Candidate answer span shared by the built-in readers: at most
// max_span_len tokens, neither boundary a stop token.
struct SpanFeatures {
  TokenSpan span;
  double proximity_overlap = 0.0;  // sum idf(t) / distance over window hits
  double window_overlap = 0.0;     // sum idf(t) over window hits
  double inside_overlap = 0.0;     // sum idf(t) over question words inside the span
  double length = 0.0;
};

class IdfTable {
 public:
  void fit(std::span<const Example> examples);
  double idf(const std::string& token) const;
  bool empty() const { return documents_ == 0; }

 private:
  std::unordered_map<std::string, std::size_t> df_;
  std::size_t documents_ = 0;
};

std::vector<SpanFeatures> candidate_spans(const Tokens& sentence, const Tokens& question,
                                          const IdfTable& idf, std::size_t window,
                                          std::size_t max_span_len);

// Scores spans by distance-weighted idf overlap between the question and a
// fixed window around the span, minus overlap inside the span. Argmax,
// leftmost (then shortest) on ties.
class WindowReader final : public ReaderOracle {
 public:
  explicit WindowReader(std::size_t window = 3, std::size_t max_span_len = 5)
      : window_(window), max_span_len_(max_span_len) {}
  std::string name() const override { return "window_reader"; }
  std::unique_ptr<ReaderOracle> fresh() const override;
  void fit(std::span<const Example> train, std::span<const Example> dev) override;
  bool fitted() const override { return fitted_; }
  std::string predict(const Tokens& sentence, const Tokens& question) const override;

 private:
  std::size_t window_;
  std::size_t max_span_len_;
  IdfTable idf_;
  bool fitted_ = false;
};

// Logistic scorer over SpanFeatures trained on gold spans (gold vs. every
// other candidate), full-batch gradient descent from zero weights.
class FeatureReader final : public ReaderOracle {
 public:
  explicit FeatureReader(std::size_t window = 4, std::size_t max_span_len = 5,
                         std::size_t iterations = 300, double learning_rate = 0.5)
      : window_(window), max_span_len_(max_span_len), iterations_(iterations),
        learning_rate_(learning_rate) {}
  std::string name() const override { return "feature_reader"; }
  std::unique_ptr<ReaderOracle> fresh() const override;
  void fit(std::span<const Example> train, std::span<const Example> dev) override;
  bool fitted() const override { return fitted_; }
  std::string predict(const Tokens& sentence, const Tokens& question) const override;
  const std::vector<double>& weights() const { return weights_; }

 private:
  double score(const SpanFeatures& f) const;
  std::size_t window_;
  std::size_t max_span_len_;
  std::size_t iterations_;
  double learning_rate_;
  IdfTable idf_;
  std::vector<double> weights_;  // proximity, window, inside, length, bias
  bool fitted_ = false;
};

std::unique_ptr<ReaderOracle> make_reader(std::string_view name);

// ---------------------------------------------------------------------------

enum class LabelOutcome { Easy, Hard, Dropped };
std::string to_string(LabelOutcome o);

struct ReaderVerdict {
  std::string reader;
  std::string prediction;
  bool exact_match = false;
  std::vector<std::size_t> train_folds;  // folds the reader was fit on
  std::size_t validation_fold = 0;
};

struct LabelEntry {
  std::string id;
  std::size_t fold = 0;
  std::vector<ReaderVerdict> verdicts;
  LabelOutcome label = LabelOutcome::Dropped;
};

struct LabelReport {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<LabelEntry> entries;  // input order
  std::size_t easy = 0;
  std::size_t hard = 0;
  std::size_t dropped = 0;

  // True when no reader labeled an example from a fold it was fit or
  // validated on.
  bool no_leak() const;
  // Copies of the examples with difficulty set; Dropped -> Unlabeled.
  std::vector<Example> apply(std::span<const Example> examples) const;
};

// k-fold protocol: each fold is labeled by readers fit on k-2 other folds
// with the cyclically preceding fold as validation. Easy if every reader is
// exact-match correct, Hard if every reader is wrong, Dropped otherwise.
LabelReport label_dataset(std::span<const Example> examples,
                          std::span<const ReaderOracle* const> readers, std::size_t k = 9,
                          std::uint64_t seed = 0);

}  // namespace dqg
