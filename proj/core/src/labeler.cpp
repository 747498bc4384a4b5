#include "dqg/labeler.hpp"

#include <algorithm>
#include <numeric>

#include "dqg/errors.hpp"
#include "dqg/rng.hpp"

namespace dqg {

std::string to_string(LabelOutcome o) {
  switch (o) {
    case LabelOutcome::Easy: return "easy";
    case LabelOutcome::Hard: return "hard";
    case LabelOutcome::Dropped: return "dropped";
  }
  return "dropped";
}

bool LabelReport::no_leak() const {
  for (const auto& e : entries) {
    for (const auto& v : e.verdicts) {
      if (v.validation_fold == e.fold) return false;
      if (std::find(v.train_folds.begin(), v.train_folds.end(), e.fold) != v.train_folds.end())
        return false;
    }
  }
  return true;
}

std::vector<Example> LabelReport::apply(std::span<const Example> examples) const {
  if (examples.size() != entries.size()) {
    throw ContractError("label report covers " + std::to_string(entries.size()) +
                        " examples, got " + std::to_string(examples.size()));
  }
  std::vector<Example> out(examples.begin(), examples.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].id != entries[i].id) {
      throw ContractError("label report entry " + std::to_string(i) + " is '" + entries[i].id +
                          "', example is '" + out[i].id + "'");
    }
    switch (entries[i].label) {
      case LabelOutcome::Easy: out[i].difficulty = Difficulty::Easy; break;
      case LabelOutcome::Hard: out[i].difficulty = Difficulty::Hard; break;
      case LabelOutcome::Dropped: out[i].difficulty = Difficulty::Unlabeled; break;
    }
  }
  return out;
}

LabelReport label_dataset(std::span<const Example> examples,
                          std::span<const ReaderOracle* const> readers, std::size_t k,
                          std::uint64_t seed) {
  if (k < 3) throw ContractError("label_dataset: k must be >= 3");
  if (examples.size() < k) {
    throw ContractError("label_dataset: " + std::to_string(examples.size()) +
                        " examples cannot fill " + std::to_string(k) + " folds");
  }
  if (readers.size() < 2) throw ContractError("label_dataset: at least two readers are required");

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> fold_of(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = i % k;

  LabelReport report;
  report.k = k;
  report.seed = seed;
  report.entries.resize(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    report.entries[i].id = examples[i].id;
    report.entries[i].fold = fold_of[i];
  }

  for (std::size_t fold = 0; fold < k; ++fold) {
    const std::size_t validation = (fold + k - 1) % k;
    std::vector<std::size_t> train_folds;
    for (std::size_t f = 0; f < k; ++f)
      if (f != fold && f != validation) train_folds.push_back(f);
    std::vector<Example> train, dev;
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (fold_of[i] == fold) {
        targets.push_back(i);
      } else if (fold_of[i] == validation) {
        dev.push_back(examples[i]);
      } else {
        train.push_back(examples[i]);
      }
    }
    for (const ReaderOracle* prototype : readers) {
      auto reader = prototype->fresh();
      reader->fit(train, dev);
      for (std::size_t i : targets) {
        ReaderVerdict v;
        v.reader = reader->name();
        v.prediction = reader->predict(examples[i].sentence, examples[i].question);
        v.exact_match = exact_match(v.prediction, examples[i].answer_text());
        v.train_folds = train_folds;
        v.validation_fold = validation;
        report.entries[i].verdicts.push_back(std::move(v));
      }
    }
  }

  for (auto& entry : report.entries) {
    const bool all_right = std::all_of(entry.verdicts.begin(), entry.verdicts.end(),
                                       [](const ReaderVerdict& v) { return v.exact_match; });
    const bool all_wrong = std::none_of(entry.verdicts.begin(), entry.verdicts.end(),
                                        [](const ReaderVerdict& v) { return v.exact_match; });
    if (all_right) {
      entry.label = LabelOutcome::Easy;
      ++report.easy;
    } else if (all_wrong) {
      entry.label = LabelOutcome::Hard;
      ++report.hard;
    } else {
      entry.label = LabelOutcome::Dropped;
      ++report.dropped;
    }
  }
  return report;
}

}  // namespace dqg
