#include "dqg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dqg/errors.hpp"

namespace dqg {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

}  // namespace

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Hard: return "hard";
    case Difficulty::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Difficulty parse_difficulty(std::string_view text) {
  const std::string t = lowercase(text);
  if (t == "easy") return Difficulty::Easy;
  if (t == "hard") return Difficulty::Hard;
  throw ParseError("unknown difficulty label '" + std::string(text) + "'");
}

Difficulty reversed(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return Difficulty::Hard;
    case Difficulty::Hard: return Difficulty::Easy;
    case Difficulty::Unlabeled: break;
  }
  throw ContractError("cannot reverse an unlabeled difficulty");
}

void Example::validate() const {
  if (sentence.empty()) throw ContractError("example '" + id + "': empty sentence");
  if (question.empty()) throw ContractError("example '" + id + "': empty question");
  if (answer.start > answer.end || answer.end >= sentence.size()) {
    throw ContractError("example '" + id + "': answer span [" + std::to_string(answer.start) +
                        "," + std::to_string(answer.end) + "] invalid for " +
                        std::to_string(sentence.size()) + " tokens");
  }
}

Tokens Example::answer_tokens() const {
  return Tokens(sentence.begin() + static_cast<std::ptrdiff_t>(answer.start),
                sentence.begin() + static_cast<std::ptrdiff_t>(answer.end) + 1);
}

std::string Example::answer_text() const { return join_tokens(answer_tokens()); }

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<TokenOffset> tokenize_offsets(std::string_view text) {
  std::vector<TokenOffset> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
    } else if (is_punct(text[i])) {
      out.push_back({i, i + 1});
      ++i;
    } else {
      const std::size_t begin = i;
      while (i < text.size() && !is_space(text[i]) && !is_punct(text[i])) ++i;
      out.push_back({begin, i});
    }
  }
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  for (const auto& off : tokenize_offsets(text))
    out.push_back(lowercase(text.substr(off.begin, off.end - off.begin)));
  return out;
}

TokenSpan char_span_to_token_span(std::string_view sentence, std::size_t char_start,
                                  std::string_view answer_text) {
  // Surrounding whitespace in the answer is not significant.
  std::size_t lead = 0;
  while (lead < answer_text.size() && is_space(answer_text[lead])) ++lead;
  std::size_t trail = answer_text.size();
  while (trail > lead && is_space(answer_text[trail - 1])) --trail;
  if (trail == lead) throw AlignmentError("answer text is empty");
  if (char_start > sentence.size() ||
      sentence.substr(char_start, answer_text.size()) != answer_text) {
    throw AlignmentError("answer '" + std::string(answer_text) + "' not found at offset " +
                         std::to_string(char_start) + " of '" + std::string(sentence) + "'");
  }
  const std::size_t begin = char_start + lead;
  const std::size_t end = char_start + trail;
  const auto offsets = tokenize_offsets(sentence);
  std::optional<std::size_t> first, last;
  for (std::size_t t = 0; t < offsets.size(); ++t) {
    if (offsets[t].end <= begin || offsets[t].begin >= end) continue;
    if (!first) first = t;
    last = t;
  }
  if (!first || offsets[*first].begin != begin || offsets[*last].end != end) {
    throw AlignmentError("answer '" + std::string(answer_text) + "' at offset " +
                         std::to_string(char_start) + " splits a token in '" +
                         std::string(sentence) + "'");
  }
  return {*first, *last};
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<unk>", "<sos>", "<eos>"}) add(t);
}

Vocab::Vocab(const std::vector<std::string>& tokens, std::size_t min_freq) : Vocab() {
  min_freq_ = min_freq;
  for (const auto& t : tokens) {
    if (token_to_id_.count(t)) {
      throw ContractError("vocab: duplicate or reserved token '" + t + "'");
    }
    add(t);
  }
}

void Vocab::add(const std::string& token) {
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

bool Vocab::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw IndexError("vocab: id " + std::to_string(id) + " outside [0, " +
                     std::to_string(id_to_token_.size()) + ")");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Vocab build_vocab(std::span<const Example> examples, std::size_t min_freq) {
  if (min_freq < 1) throw ContractError("build_vocab: min_freq must be >= 1");
  if (examples.empty()) throw ContractError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& e : examples) {
    for (const auto& t : e.sentence) ++counts[t];
    for (const auto& t : e.question) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_freq && tok != "<pad>" && tok != "<unk>" && tok != "<sos>" && tok != "<eos>")
      kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocab(tokens, min_freq);
}

// ---------------------------------------------------------------------------
// JSONL

std::string example_to_json_line(const Example& e) {
  e.validate();
  const std::string sentence = join_tokens(e.sentence);
  std::size_t answer_start = 0;
  for (std::size_t i = 0; i < e.answer.start; ++i) answer_start += e.sentence[i].size() + 1;
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["sentence"] = sentence;
  j["answer_start"] = answer_start;
  j["answer_text"] = e.answer_text();
  j["question"] = join_tokens(e.question);
  if (e.difficulty == Difficulty::Unlabeled) {
    j["difficulty"] = nullptr;
  } else {
    j["difficulty"] = to_string(e.difficulty);
  }
  return j.dump();
}

Example example_from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(std::string("invalid JSON: ") + err.what());
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  auto field = [&](const char* name) -> const nlohmann::json& {
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'");
    return *it;
  };
  Example e;
  try {
    e.id = field("id").get<std::string>();
    const auto sentence = field("sentence").get<std::string>();
    const auto start = field("answer_start").get<std::size_t>();
    const auto answer = field("answer_text").get<std::string>();
    e.question = tokenize(field("question").get<std::string>());
    const auto& diff = field("difficulty");
    e.difficulty = diff.is_null() ? Difficulty::Unlabeled : parse_difficulty(diff.get<std::string>());
    e.sentence = tokenize(sentence);
    try {
      e.answer = char_span_to_token_span(sentence, start, answer);
    } catch (const AlignmentError& err) {
      throw AlignmentError("example '" + e.id + "': " + err.what());
    }
  } catch (const nlohmann::json::exception& err) {
    throw ParseError(std::string("bad field type: ") + err.what());
  }
  try {
    e.validate();
  } catch (const ContractError& err) {
    throw ParseError(err.what());
  }
  return e;
}

std::vector<Example> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(example_from_json_line(line));
    } catch (const AlignmentError& err) {
      throw AlignmentError(path.string() + ":" + std::to_string(lineno) + ": " + err.what());
    } catch (const ParseError& err) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + err.what());
    }
  }
  return out;
}

void save_jsonl(std::span<const Example> examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& e : examples) out << example_to_json_line(e) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace dqg
