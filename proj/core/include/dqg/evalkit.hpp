#pragma once

#include <span>
#include <string>
#include <vector>

#include "dqg/corpus.hpp"
#include "dqg/labeler.hpp"

namespace dqg {

class DqgModel;

struct GenerationRecord {
  std::string id;
  Difficulty label_used = Difficulty::Unlabeled;
  Tokens generated;
  Tokens gold_question;
  std::string gold_answer;
};

// Corpus BLEU with one reference per candidate, no smoothing. Entry n-1 is
// BLEU-n; any zero n-gram precision up to n makes BLEU-n zero.
std::vector<double> corpus_bleu(std::span<const Tokens> candidates,
                                std::span<const Tokens> references, std::size_t max_n = 4);

// Macro-averaged LCS F1 (beta = 1).
double rouge_l(std::span<const Tokens> candidates, std::span<const Tokens> references);

// Fraction of answer-token instances that appear in their own generated
// question.
double answer_occurrence_rate(std::span<const GenerationRecord> records);

// EM / F1 in percent.
struct StratumScores {
  double em = 0.0;
  double f1 = 0.0;
  std::size_t count = 0;
};

struct ReaderDifficulty {
  std::string reader;
  StratumScores easy;
  StratumScores hard;
};

struct DifficultyReport {
  std::vector<ReaderDifficulty> readers;
};

// Runs every fitted reader on (sentence, question_i) against the gold answer
// of test[i], splitting by the gold label.
DifficultyReport difficulty_eval(std::span<const Example> test, std::span<const Tokens> questions,
                                 std::span<const ReaderOracle* const> readers);
// Generates with the true labels first.
DifficultyReport difficulty_eval(const DqgModel& model, std::span<const Example> test,
                                 std::span<const ReaderOracle* const> readers);

struct ReaderGap {
  std::string reader;
  StratumScores easy_true, easy_reversed;
  StratumScores hard_true, hard_reversed;
  // easy: true - reversed; hard: reversed - true
  double easy_em_gap = 0.0, easy_f1_gap = 0.0;
  double hard_em_gap = 0.0, hard_f1_gap = 0.0;
};

struct GapReport {
  std::vector<ReaderGap> readers;
};

GapReport reversed_label_gap(std::span<const Example> test, std::span<const Tokens> true_questions,
                             std::span<const Tokens> reversed_questions,
                             std::span<const ReaderOracle* const> readers);
GapReport reversed_label_gap(const DqgModel& model, std::span<const Example> test,
                             std::span<const ReaderOracle* const> readers);

}  // namespace dqg
