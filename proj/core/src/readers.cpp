#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "dqg/errors.hpp"
#include "dqg/labeler.hpp"

namespace dqg {

void IdfTable::fit(std::span<const Example> examples) {
  df_.clear();
  documents_ = examples.size();
  for (const auto& e : examples) {
    const std::set<std::string> seen(e.sentence.begin(), e.sentence.end());
    for (const auto& t : seen) ++df_[t];
  }
}

double IdfTable::idf(const std::string& token) const {
  auto it = df_.find(token);
  const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + df)) + 1.0;
}

std::vector<SpanFeatures> candidate_spans(const Tokens& sentence, const Tokens& question,
                                          const IdfTable& idf, std::size_t window,
                                          std::size_t max_span_len) {
  const StopwordSet& stop = StopwordSet::english();
  std::set<std::string> qwords;
  for (const auto& t : question)
    if (stop.is_content(t)) qwords.insert(t);
  // Sentence positions of each question word.
  std::vector<std::pair<double, std::vector<std::size_t>>> hits;
  for (const auto& q : qwords) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < sentence.size(); ++i)
      if (sentence[i] == q) pos.push_back(i);
    if (!pos.empty()) hits.emplace_back(idf.idf(q), std::move(pos));
  }

  std::vector<SpanFeatures> out;
  const std::size_t m = sentence.size();
  for (std::size_t s = 0; s < m; ++s) {
    if (!stop.is_content(sentence[s])) continue;
    for (std::size_t e = s; e < m && e - s + 1 <= max_span_len; ++e) {
      if (!stop.is_content(sentence[e])) continue;
      SpanFeatures f;
      f.span = {s, e};
      f.length = static_cast<double>(e - s + 1);
      for (const auto& [weight, positions] : hits) {
        std::size_t nearest = std::numeric_limits<std::size_t>::max();
        bool inside = false;
        for (std::size_t p : positions) {
          if (p >= s && p <= e) {
            inside = true;
            continue;
          }
          nearest = std::min(nearest, p < s ? s - p : p - e);
        }
        if (inside) f.inside_overlap += weight;
        if (nearest <= window) {
          f.window_overlap += weight;
          f.proximity_overlap += weight / static_cast<double>(nearest);
        }
      }
      out.push_back(f);
    }
  }
  return out;
}

namespace {

// Highest score wins; ties go to the leftmost, then shortest span.
template <typename ScoreFn>
const SpanFeatures* best_span(const std::vector<SpanFeatures>& spans, ScoreFn score) {
  const SpanFeatures* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& f : spans) {
    const double s = score(f);
    if (s > best_score) {
      best = &f;
      best_score = s;
    }
  }
  return best;
}

std::string span_text(const Tokens& sentence, const TokenSpan& span) {
  return join_tokens(std::span<const std::string>(sentence).subspan(span.start, span.length()));
}

}  // namespace

// ---------------------------------------------------------------------------

std::unique_ptr<ReaderOracle> WindowReader::fresh() const {
  return std::make_unique<WindowReader>(window_, max_span_len_);
}

void WindowReader::fit(std::span<const Example> train, std::span<const Example> /*dev*/) {
  idf_.fit(train);
  fitted_ = true;
}

std::string WindowReader::predict(const Tokens& sentence, const Tokens& question) const {
  if (!fitted_) throw ContractError("window_reader: predict before fit");
  const auto spans = candidate_spans(sentence, question, idf_, window_, max_span_len_);
  const auto* best = best_span(spans, [](const SpanFeatures& f) {
    return f.proximity_overlap - f.inside_overlap;
  });
  return best ? span_text(sentence, best->span) : std::string();
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kFeatureCount = 5;

std::array<double, kFeatureCount> feature_vector(const SpanFeatures& f) {
  return {f.proximity_overlap, f.window_overlap, f.inside_overlap, f.length, 1.0};
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

std::unique_ptr<ReaderOracle> FeatureReader::fresh() const {
  return std::make_unique<FeatureReader>(window_, max_span_len_, iterations_, learning_rate_);
}

double FeatureReader::score(const SpanFeatures& f) const {
  const auto x = feature_vector(f);
  double s = 0.0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) s += weights_[i] * x[i];
  return s;
}

void FeatureReader::fit(std::span<const Example> train, std::span<const Example> dev) {
  idf_.fit(train);
  struct Instance {
    std::vector<SpanFeatures> spans;
    std::size_t gold;
  };
  std::vector<Instance> data;
  for (const auto& e : train) {
    auto spans = candidate_spans(e.sentence, e.question, idf_, window_, max_span_len_);
    auto it = std::find_if(spans.begin(), spans.end(),
                           [&](const SpanFeatures& f) { return f.span == e.answer; });
    if (it == spans.end() || spans.size() < 2) continue;
    const auto gold = static_cast<std::size_t>(it - spans.begin());
    data.push_back({std::move(spans), gold});
  }
  weights_.assign(kFeatureCount, 0.0);
  fitted_ = true;
  if (data.empty()) return;

  auto dev_accuracy = [&] {
    std::size_t correct = 0;
    for (const auto& e : dev) correct += exact_match(predict(e.sentence, e.question), e.answer_text());
    return dev.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(dev.size());
  };
  std::vector<double> best_weights = weights_;
  double best_acc = -1.0;
  const std::size_t check_every = std::max<std::size_t>(1, iterations_ / 10);
  for (std::size_t it = 1; it <= iterations_; ++it) {
    std::array<double, kFeatureCount> grad{};
    for (const auto& inst : data) {
      // Gold and negatives weigh equally per example.
      const double neg_weight = 1.0 / static_cast<double>(inst.spans.size() - 1);
      for (std::size_t c = 0; c < inst.spans.size(); ++c) {
        const auto x = feature_vector(inst.spans[c]);
        const bool positive = c == inst.gold;
        const double err = sigmoid(score(inst.spans[c])) - (positive ? 1.0 : 0.0);
        const double w = positive ? 1.0 : neg_weight;
        for (std::size_t i = 0; i < kFeatureCount; ++i) grad[i] += w * err * x[i];
      }
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i)
      weights_[i] -= learning_rate_ * grad[i] / static_cast<double>(data.size());
    if (it % check_every == 0 || it == iterations_) {
      const double acc = dev_accuracy();
      if (acc > best_acc) {
        best_acc = acc;
        best_weights = weights_;
      }
    }
  }
  weights_ = best_weights;
}

std::string FeatureReader::predict(const Tokens& sentence, const Tokens& question) const {
  if (!fitted_) throw ContractError("feature_reader: predict before fit");
  const auto spans = candidate_spans(sentence, question, idf_, window_, max_span_len_);
  const auto* best = best_span(spans, [this](const SpanFeatures& f) { return score(f); });
  return best ? span_text(sentence, best->span) : std::string();
}

std::unique_ptr<ReaderOracle> make_reader(std::string_view name) {
  if (name == "window_reader" || name == "window") return std::make_unique<WindowReader>();
  if (name == "feature_reader" || name == "feature") return std::make_unique<FeatureReader>();
  throw ParseError("unknown reader '" + std::string(name) + "'");
}

}  // namespace dqg
