#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dqg/errors.hpp"
#include "dqg/evalkit.hpp"
#include "dqg/labeler.hpp"
#include "dqg/proximity.hpp"
#include "dqg/selfcheck.hpp"
#include "dqg/trainer.hpp"

namespace dqg::cli {

using json = nlohmann::ordered_json;

namespace {

// Written next to the target and renamed into place, so a failed run never
// leaves a partial artifact behind.
void write_file(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string jsonl(std::span<const Example> examples) {
  std::string s;
  for (const auto& e : examples) s += example_to_json_line(e) + "\n";
  return s;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json label_json(Difficulty d) {
  return d == Difficulty::Unlabeled ? json(nullptr) : json(to_string(d));
}

void finish(std::ostream& out, const std::string& command, const RunConfig& rc, json result) {
  json line;
  line["command"] = command;
  line["result"] = std::move(result);
  line["config"] = rc.effective();
  out << line.dump() << '\n';
}

std::vector<std::unique_ptr<ReaderOracle>> make_readers(const RunConfig& rc) {
  std::vector<std::unique_ptr<ReaderOracle>> readers;
  std::stringstream names(rc.text("readers", "window_reader,feature_reader"));
  std::string name;
  while (std::getline(names, name, ',')) {
    if (!name.empty()) readers.push_back(make_reader(name));
  }
  if (readers.empty()) throw ContractError("no readers configured");
  return readers;
}

std::vector<const ReaderOracle*> pointers(const std::vector<std::unique_ptr<ReaderOracle>>& rs) {
  std::vector<const ReaderOracle*> out;
  for (const auto& r : rs) out.push_back(r.get());
  return out;
}

json stratum_json(const StratumScores& s) {
  return json{{"em", s.em}, {"f1", s.f1}, {"count", s.count}};
}

struct GenerationLine {
  std::string id;
  Difficulty label_used = Difficulty::Unlabeled;
  Tokens question;
};

std::vector<GenerationLine> load_generations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<GenerationLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    try {
      const auto j = json::parse(line);
      GenerationLine g;
      g.id = j.at("id").get<std::string>();
      const auto& label = j.at("label_used");
      g.label_used = label.is_null() ? Difficulty::Unlabeled : parse_difficulty(label.get<std::string>());
      g.question = tokenize(j.at("question").get<std::string>());
      out.push_back(std::move(g));
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
  }
  return out;
}

}  // namespace

void run_synth(const RunConfig& rc, std::ostream& out) {
  const std::size_t n = rc.count("n", 200);
  const std::uint64_t seed = rc.seed("seed", 7);
  HintProfile profile;
  profile.easy_max_dist = rc.count("easy_max_dist", profile.easy_max_dist);
  profile.hard_min_dist = rc.count("hard_min_dist", profile.hard_min_dist);
  SyntheticOptions options;
  options.easy_ratio = rc.real("easy_ratio", options.easy_ratio);
  const std::string path = rc.required("out");
  const auto corpus = generate_synthetic_corpus(n, seed, profile, options);
  write_file(path, jsonl(corpus));
  std::size_t easy = 0;
  for (const auto& e : corpus) easy += e.difficulty == Difficulty::Easy;
  finish(out, "synth", rc, json{{"examples", corpus.size()}, {"easy", easy},
                               {"hard", corpus.size() - easy}, {"out", path}});
}

void run_label(const RunConfig& rc, std::ostream& out) {
  const auto data = load_jsonl(rc.required("data"));
  const std::size_t k = rc.count("k", 9);
  const std::uint64_t seed = rc.seed("seed", 0);
  const auto readers = make_readers(rc);
  const std::string out_path = rc.required("out");
  const std::string report_path = rc.text("report", out_path + ".report.json");
  const auto ptrs = pointers(readers);
  const LabelReport report = label_dataset(data, ptrs, k, seed);
  if (!report.no_leak()) throw ContractError("label audit failed: a reader saw its own fold");

  json entries = json::array();
  for (const auto& e : report.entries) {
    json verdicts = json::array();
    for (const auto& v : e.verdicts) {
      verdicts.push_back(json{{"reader", v.reader}, {"prediction", v.prediction},
                              {"exact_match", v.exact_match}, {"train_folds", v.train_folds},
                              {"validation_fold", v.validation_fold}});
    }
    entries.push_back(json{{"id", e.id}, {"fold", e.fold}, {"label", to_string(e.label)},
                           {"verdicts", std::move(verdicts)}});
  }
  json rep{{"k", report.k}, {"seed", report.seed}, {"easy", report.easy}, {"hard", report.hard},
           {"dropped", report.dropped}, {"no_leak", report.no_leak()}, {"entries", std::move(entries)}};
  write_file(out_path, jsonl(report.apply(data)));
  write_file(report_path, rep.dump(2) + "\n");
  finish(out, "label", rc, json{{"examples", data.size()}, {"easy", report.easy},
                               {"hard", report.hard}, {"dropped", report.dropped},
                               {"no_leak", true}, {"out", out_path}, {"report", report_path}});
}

void run_stats(const RunConfig& rc, std::ostream& out) {
  const auto data = load_jsonl(rc.required("data"));
  const auto s = corpus_proximity_stats(data, StopwordSet::english());
  json result{{"examples", data.size()},
              {"avg_qword_dist_easy", optional_number(s.avg_qword_dist_easy)},
              {"avg_qword_dist_hard", optional_number(s.avg_qword_dist_hard)},
              {"avg_qword_dist_all", optional_number(s.avg_qword_dist_all)},
              {"avg_sentword_dist", optional_number(s.avg_sentword_dist)},
              {"count_easy", s.count_easy},
              {"count_hard", s.count_hard},
              {"count_all", s.count_all},
              {"count_sentword", s.count_sentword}};
  const std::string path = rc.text("out", "");
  if (!path.empty()) write_file(path, result.dump(2) + "\n");
  finish(out, "stats", rc, std::move(result));
}

void run_train(const RunConfig& rc, std::ostream& out) {
  const std::string train_path = rc.required("train");
  const std::string dev_path = rc.text("dev", train_path);
  auto train_set = load_jsonl(train_path);
  auto dev_set = load_jsonl(dev_path);
  const Vocab vocab = build_vocab(train_set, rc.count("min_freq", 1));
  const ModelConfig mc = model_config(rc, vocab.size());
  const TrainConfig tc = train_config(rc);
  const std::string ckpt_path = rc.required("out");
  const std::string log_path = rc.text("log", "");

  // Examples the labeler dropped carry no label; label-consuming variants
  // cannot use them.
  std::size_t skipped = 0;
  if (mc.consumes_labels()) {
    auto drop = [&](std::vector<Example>& v) {
      const auto before = v.size();
      std::erase_if(v, [](const Example& e) { return e.difficulty == Difficulty::Unlabeled; });
      return before - v.size();
    };
    skipped = drop(train_set);
    drop(dev_set);
  }

  std::string log;
  const auto result = train(train_set, dev_set, vocab, mc, tc, [&](const EpochLog& l) {
    const std::string line =
        json{{"epoch", l.epoch}, {"train_loss", l.train_loss}, {"dev_perplexity", l.dev_perplexity}}
            .dump();
    log += line + "\n";
    out << line << '\n';
  });
  write_file(ckpt_path, serialize_checkpoint(result.best));
  if (!log_path.empty()) write_file(log_path, log);
  finish(out, "train", rc, json{{"train_examples", train_set.size()},
                               {"dev_examples", dev_set.size()},
                               {"skipped_unlabeled", skipped},
                               {"vocab_size", vocab.size()},
                               {"parameters", ModelParams::parameter_count(mc)},
                               {"epochs", result.history.size()},
                               {"best_epoch", result.best.meta.epoch},
                               {"best_dev_perplexity", result.best.meta.dev_perplexity},
                               {"out", ckpt_path}});
}

void run_generate(const RunConfig& rc, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(rc.required("checkpoint"));
  const auto data = load_jsonl(rc.required("data"));
  const std::string mode = rc.text("difficulty", "gold");
  if (mode != "gold" && mode != "reversed" && mode != "easy" && mode != "hard")
    throw ParseError("difficulty must be gold, reversed, easy or hard; got '" + mode + "'");
  DqgModel model = ckpt.model();
  if (rc.has("beam_size")) model.mutable_config().beam_size = rc.count("beam_size", 3);
  if (rc.has("max_decode_len")) model.mutable_config().max_decode_len = rc.count("max_decode_len", 20);
  const std::string path = rc.required("out");

  std::string lines;
  for (const auto& e : data) {
    Difficulty label = Difficulty::Unlabeled;
    if (mode == "gold") {
      label = e.difficulty;
    } else if (mode == "reversed") {
      if (e.difficulty == Difficulty::Unlabeled)
        throw ContractError("example '" + e.id + "' has no difficulty label to reverse");
      label = reversed(e.difficulty);
    } else {
      label = parse_difficulty(mode);
    }
    const Tokens q = model.generate(e, label);
    lines += json{{"id", e.id}, {"label_used", label_json(label)}, {"question", join_tokens(q)}}.dump() +
             "\n";
  }
  write_file(path, lines);
  finish(out, "generate", rc, json{{"generations", data.size()}, {"out", path}});
}

void run_eval(const RunConfig& rc, std::ostream& out) {
  const auto test = load_jsonl(rc.has("test") ? rc.required("test") : rc.required("data"));
  const auto train_set = load_jsonl(rc.required("train"));
  std::vector<GenerationLine> gens;
  std::stringstream files(rc.required("generations"));
  std::string file;
  while (std::getline(files, file, ',')) {
    auto part = load_generations(file);
    gens.insert(gens.end(), part.begin(), part.end());
  }

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!index.emplace(test[i].id, i).second)
      throw ContractError("duplicate example id '" + test[i].id + "'");
  }
  // Per example: generation under its own label, and under the flipped one.
  std::vector<const Tokens*> as_true(test.size(), nullptr), as_reversed(test.size(), nullptr);
  for (const auto& g : gens) {
    auto it = index.find(g.id);
    if (it == index.end()) throw ContractError("generation for unknown example id '" + g.id + "'");
    const Example& e = test[it->second];
    if (g.label_used == e.difficulty) {
      as_true[it->second] = &g.question;
    } else if (e.difficulty != Difficulty::Unlabeled && g.label_used == reversed(e.difficulty)) {
      as_reversed[it->second] = &g.question;
    }
  }

  std::vector<Tokens> cands, refs;
  std::vector<GenerationRecord> records;
  std::vector<Example> labeled_true, labeled_both;
  std::vector<Tokens> q_true, q_both_true, q_both_reversed;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!as_true[i]) continue;
    cands.push_back(*as_true[i]);
    refs.push_back(test[i].question);
    records.push_back({test[i].id, test[i].difficulty, *as_true[i], test[i].question,
                       test[i].answer_text()});
    if (test[i].difficulty == Difficulty::Unlabeled) continue;
    labeled_true.push_back(test[i]);
    q_true.push_back(*as_true[i]);
    if (as_reversed[i]) {
      labeled_both.push_back(test[i]);
      q_both_true.push_back(*as_true[i]);
      q_both_reversed.push_back(*as_reversed[i]);
    }
  }
  if (cands.empty()) throw ContractError("no generation matches the gold label of any example");

  const auto readers = make_readers(rc);
  const std::size_t dev_n = std::max<std::size_t>(1, train_set.size() / 10);
  if (train_set.size() <= dev_n) throw ContractError("reader training set is too small");
  const std::span<const Example> train_span(train_set);
  for (const auto& r : readers)
    r->fit(train_span.first(train_set.size() - dev_n), train_span.last(dev_n));
  const auto ptrs = pointers(readers);

  const auto bleu = corpus_bleu(cands, refs, 4);
  json result;
  result["examples"] = test.size();
  result["generations_true_label"] = cands.size();
  result["generations_reversed_label"] = labeled_both.size();
  result["bleu"] = json{{"bleu1", 100 * bleu[0]}, {"bleu2", 100 * bleu[1]},
                        {"bleu3", 100 * bleu[2]}, {"bleu4", 100 * bleu[3]}};
  result["rouge_l"] = 100 * rouge_l(cands, refs);
  result["answer_occurrence_rate"] = 100 * answer_occurrence_rate(records);

  json difficulty = json::array();
  if (!labeled_true.empty()) {
    for (const auto& r : difficulty_eval(labeled_true, q_true, ptrs).readers) {
      difficulty.push_back(json{{"reader", r.reader}, {"easy", stratum_json(r.easy)},
                                {"hard", stratum_json(r.hard)}});
    }
  }
  result["difficulty"] = std::move(difficulty);

  if (labeled_both.empty()) {
    result["gap"] = nullptr;
  } else {
    json gap = json::array();
    for (const auto& g : reversed_label_gap(labeled_both, q_both_true, q_both_reversed, ptrs).readers) {
      gap.push_back(json{
          {"reader", g.reader},
          {"easy", json{{"true", stratum_json(g.easy_true)}, {"reversed", stratum_json(g.easy_reversed)},
                        {"em_gap", g.easy_em_gap}, {"f1_gap", g.easy_f1_gap}}},
          {"hard", json{{"true", stratum_json(g.hard_true)}, {"reversed", stratum_json(g.hard_reversed)},
                        {"em_gap", g.hard_em_gap}, {"f1_gap", g.hard_f1_gap}}}});
    }
    result["gap"] = std::move(gap);
  }
  const std::string path = rc.text("out", "");
  if (!path.empty()) write_file(path, result.dump(2) + "\n");
  finish(out, "eval", rc, std::move(result));
}

bool run_gradcheck(const RunConfig& rc, std::ostream& out) {
  const std::uint64_t seed = rc.seed("init_seed", 1);
  const double eps = rc.real("eps", 1e-4);
  const double tolerance = rc.real("tolerance", 1e-4);
  bool pass = true;
  double worst_op = 0.0;
  json ops = json::object();
  for (const auto& r : op_gradient_checks(seed)) {
    ops[r.name] = r.error;
    worst_op = std::max(worst_op, r.error);
    pass = pass && r.pass();
  }
  const auto composite = composite_gradient_check(seed, eps, tolerance);
  pass = pass && composite.pass();
  finish(out, "gradcheck", rc, json{{"pass", pass}, {"composite_error", composite.error},
                                   {"composite_tolerance", tolerance}, {"worst_op_error", worst_op},
                                   {"op_tolerance", 1e-6}, {"ops", std::move(ops)}});
  return pass;
}

}  // namespace dqg::cli
