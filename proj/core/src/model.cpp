#include "dqg/model.hpp"

#include <algorithm>
#include <cmath>

#include "dqg/errors.hpp"
#include "dqg/proximity.hpp"
#include "dqg/rng.hpp"

namespace dqg {

std::string to_string(PositionMode mode) {
  switch (mode) {
    case PositionMode::None: return "none";
    case PositionMode::AnswerIndicator: return "answer_indicator";
    case PositionMode::QWPH: return "qwph";
    case PositionMode::DLPH: return "dlph";
  }
  return "none";
}

PositionMode parse_position_mode(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](char c) {
    return c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  });
  if (t == "none") return PositionMode::None;
  if (t == "answer_indicator" || t == "ans") return PositionMode::AnswerIndicator;
  if (t == "qwph") return PositionMode::QWPH;
  if (t == "dlph") return PositionMode::DLPH;
  throw ParseError("unknown position mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ContractError(std::string("model config: ") + name + " must be >= 1");
  };
  positive(word_dim, "word_dim");
  positive(position_dim, "position_dim");
  positive(difficulty_dim, "difficulty_dim");
  positive(hidden_dim, "hidden_dim");
  positive(max_distance, "max_distance");
  positive(max_decode_len, "max_decode_len");
  positive(beam_size, "beam_size");
  if (vocab_size < Vocab::kReserved) {
    throw ContractError("model config: vocab_size " + std::to_string(vocab_size) +
                        " smaller than the reserved token count");
  }
}

std::size_t ModelConfig::encoder_input_dim() const {
  return word_dim + (position_mode == PositionMode::None ? 0 : position_dim);
}

std::size_t ModelConfig::decoder_hidden_dim() const {
  return 2 * hidden_dim + (global_difficulty_control ? difficulty_dim : 0);
}

bool ModelConfig::consumes_labels() const {
  return position_mode == PositionMode::DLPH || global_difficulty_control;
}

ModelConfig ModelConfig::variant(std::string_view name, ModelConfig base) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(),
                 [](char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); });
  base.global_difficulty_control = false;
  if (n == "L2A") {
    base.position_mode = PositionMode::None;
  } else if (n == "ANS") {
    base.position_mode = PositionMode::AnswerIndicator;
  } else if (n == "QWPH") {
    base.position_mode = PositionMode::QWPH;
  } else if (n == "DLPH") {
    base.position_mode = PositionMode::DLPH;
  } else if (n == "QWPH-GDC") {
    base.position_mode = PositionMode::QWPH;
    base.global_difficulty_control = true;
  } else if (n == "DLPH-GDC") {
    base.position_mode = PositionMode::DLPH;
    base.global_difficulty_control = true;
  } else {
    throw ParseError("unknown model variant '" + std::string(name) + "'");
  }
  return base;
}

ModelConfig ModelConfig::variant(std::string_view name) { return variant(name, ModelConfig{}); }

// ---------------------------------------------------------------------------
// ModelParams

std::vector<std::pair<std::string, Shape>> ModelParams::layout(const ModelConfig& c) {
  c.validate();
  const std::size_t h = c.hidden_dim;
  const std::size_t in = c.encoder_input_dim();
  const std::size_t dec = c.decoder_hidden_dim();
  const std::size_t positions = c.max_distance + 1;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embedding.word", Shape{c.vocab_size, c.word_dim});
  switch (c.position_mode) {
    case PositionMode::None: break;
    case PositionMode::AnswerIndicator:
      out.emplace_back("embedding.answer_indicator", Shape{2, c.position_dim});
      break;
    case PositionMode::QWPH:
      out.emplace_back("embedding.position", Shape{positions, c.position_dim});
      break;
    case PositionMode::DLPH:
      out.emplace_back("embedding.position_easy", Shape{positions, c.position_dim});
      out.emplace_back("embedding.position_hard", Shape{positions, c.position_dim});
      break;
  }
  if (c.global_difficulty_control) {
    out.emplace_back("embedding.difficulty", Shape{2, c.difficulty_dim});
  }
  out.emplace_back("encoder.forward.weight", Shape{4 * h, in + h});
  out.emplace_back("encoder.forward.bias", Shape{4 * h});
  out.emplace_back("encoder.backward.weight", Shape{4 * h, in + h});
  out.emplace_back("encoder.backward.bias", Shape{4 * h});
  out.emplace_back("decoder.weight", Shape{4 * dec, c.word_dim + dec});
  out.emplace_back("decoder.bias", Shape{4 * dec});
  out.emplace_back("attention.weight", Shape{2 * h, dec});
  out.emplace_back("output.weight", Shape{c.vocab_size, dec + 2 * h});
  out.emplace_back("output.bias", Shape{c.vocab_size});
  out.emplace_back("copy_gate.weight", Shape{1, dec + 2 * h + c.word_dim});
  out.emplace_back("copy_gate.bias", Shape{1});
  return out;
}

std::size_t ModelParams::parameter_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& [name, shape] : layout(config)) n += shape_numel(shape);
  return n;
}

ModelParams ModelParams::initialize(const ModelConfig& config) {
  Rng rng(config.init_seed);
  ModelParams p;
  for (auto& [name, shape] : layout(config)) {
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = rng.uniform(-0.1, 0.1);
    p.add(name, Tensor(shape, std::move(values), true));
  }
  return p;
}

void ModelParams::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ContractError("model params: duplicate tensor '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("model params: no tensor named '" + std::string(name) + "'");
}

Tensor& ModelParams::get(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

ModelParams ModelParams::deep_copy() const {
  ModelParams p;
  for (const auto& [n, t] : entries_) p.add(n, t.clone(t.requires_grad()));
  return p;
}

// ---------------------------------------------------------------------------
// SourceContext

SourceContext SourceContext::build(const Tokens& sentence, const Vocab& vocab) {
  SourceContext s;
  s.vocab_size = vocab.size();
  for (const auto& tok : sentence) {
    const int id = vocab.id(tok);
    s.input_ids.push_back(id);
    if (id != Vocab::kUnk || tok == "<unk>") {
      s.extended_ids.push_back(id);
      continue;
    }
    auto it = std::find(s.oov_tokens.begin(), s.oov_tokens.end(), tok);
    if (it == s.oov_tokens.end()) {
      s.oov_tokens.push_back(tok);
      it = s.oov_tokens.end() - 1;
    }
    s.extended_ids.push_back(static_cast<int>(s.vocab_size) +
                             static_cast<int>(it - s.oov_tokens.begin()));
  }
  return s;
}

int SourceContext::extended_id(const std::string& token, const Vocab& vocab) const {
  if (vocab.contains(token)) return vocab.id(token);
  auto it = std::find(oov_tokens.begin(), oov_tokens.end(), token);
  if (it == oov_tokens.end()) return Vocab::kUnk;
  return static_cast<int>(vocab_size) + static_cast<int>(it - oov_tokens.begin());
}

std::string SourceContext::token(int extended_id, const Vocab& vocab) const {
  if (extended_id >= 0 && static_cast<std::size_t>(extended_id) < vocab_size)
    return vocab.token(extended_id);
  const auto slot = static_cast<std::size_t>(extended_id) - vocab_size;
  if (extended_id < 0 || slot >= oov_tokens.size()) {
    throw IndexError("extended id " + std::to_string(extended_id) + " outside [0, " +
                     std::to_string(extended_size()) + ")");
  }
  return oov_tokens[slot];
}

int SourceContext::input_id(int extended_id) const {
  return static_cast<std::size_t>(extended_id) < vocab_size ? extended_id : Vocab::kUnk;
}

// ---------------------------------------------------------------------------
// DqgModel

DqgModel::DqgModel(ModelConfig config, Vocab vocab)
    : config_(config), vocab_(std::move(vocab)) {
  if (config_.vocab_size != vocab_.size()) {
    throw ContractError("model: config vocab_size " + std::to_string(config_.vocab_size) +
                        " != vocabulary size " + std::to_string(vocab_.size()));
  }
  params_ = ModelParams::initialize(config_);
}

DqgModel::DqgModel(ModelConfig config, Vocab vocab, ModelParams params)
    : config_(config), vocab_(std::move(vocab)), params_(std::move(params)) {
  if (config_.vocab_size != vocab_.size()) {
    throw ContractError("model: config vocab_size " + std::to_string(config_.vocab_size) +
                        " != vocabulary size " + std::to_string(vocab_.size()));
  }
  const auto expected = ModelParams::layout(config_);
  const auto& have = params_.entries();
  if (expected.size() != have.size()) {
    throw ContractError("model: expected " + std::to_string(expected.size()) +
                        " parameter tensors, got " + std::to_string(have.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].first != have[i].first || expected[i].second != have[i].second.shape()) {
      throw ContractError("model: parameter " + std::to_string(i) + " is '" + have[i].first +
                          "' " + shape_to_string(have[i].second.shape()) + ", expected '" +
                          expected[i].first + "' " + shape_to_string(expected[i].second));
    }
  }
}

void DqgModel::check_label(Difficulty difficulty, const char* where) const {
  if (difficulty == Difficulty::Unlabeled) {
    throw ContractError(std::string(where) +
                        ": this model variant needs an easy/hard difficulty label");
  }
}

namespace {

// Runs one LSTM direction over rows of x; returns hidden states in x order.
std::vector<Tensor> run_lstm(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias,
                             std::size_t hidden, bool reverse) {
  const std::size_t m = x.dim(0);
  std::vector<Tensor> states(m);
  Tensor h = Tensor::zeros({hidden});
  Tensor c = Tensor::zeros({hidden});
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = reverse ? m - 1 - k : k;
    const Tensor z = g.add(g.matvec(weight, g.concat({g.row(x, i), h})), bias);
    const Tensor hc = g.lstm_cell(z, c);
    h = g.slice(hc, 0, hidden);
    c = g.slice(hc, hidden, hidden);
    states[i] = h;
  }
  return states;
}

}  // namespace

EncoderOutput DqgModel::encode(Graph& g, const Example& example, Difficulty difficulty) const {
  if (config_.position_mode == PositionMode::DLPH) check_label(difficulty, "encode");
  example.validate();
  const std::size_t m = example.sentence.size();
  const std::size_t h = config_.hidden_dim;
  const auto ids = vocab_.encode(example.sentence);
  Tensor x = g.embedding_lookup(params_.get("embedding.word"), ids);

  if (config_.position_mode != PositionMode::None) {
    std::vector<int> pos_ids(m);
    const Tensor* table = nullptr;
    if (config_.position_mode == PositionMode::AnswerIndicator) {
      for (std::size_t i = 0; i < m; ++i) pos_ids[i] = example.answer.contains(i) ? 1 : 0;
      table = &params_.get("embedding.answer_indicator");
    } else {
      const auto map = relative_positions(m, example.answer, config_.max_distance);
      for (std::size_t i = 0; i < m; ++i) pos_ids[i] = static_cast<int>(map.distances[i]);
      if (config_.position_mode == PositionMode::QWPH) {
        table = &params_.get("embedding.position");
      } else {
        table = &params_.get(difficulty == Difficulty::Easy ? "embedding.position_easy"
                                                            : "embedding.position_hard");
      }
    }
    x = g.concat({x, g.embedding_lookup(*table, pos_ids)}, 1);
  }

  const auto fwd = run_lstm(g, x, params_.get("encoder.forward.weight"),
                            params_.get("encoder.forward.bias"), h, false);
  const auto bwd = run_lstm(g, x, params_.get("encoder.backward.weight"),
                            params_.get("encoder.backward.bias"), h, true);
  EncoderOutput out;
  out.states.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.states.push_back(g.concat({fwd[i], bwd[i]}));
  out.states_matrix = g.stack(out.states);
  out.final_state = g.concat({fwd[m - 1], bwd[0]});
  return out;
}

DecoderState DqgModel::init_decoder(Graph& g, const EncoderOutput& enc,
                                    Difficulty difficulty) const {
  DecoderState s;
  if (config_.global_difficulty_control) {
    check_label(difficulty, "init_decoder");
    const Tensor d = g.row(params_.get("embedding.difficulty"),
                           difficulty == Difficulty::Easy ? 0 : 1);
    s.hidden = g.concat({enc.final_state, d});
  } else {
    s.hidden = enc.final_state;
  }
  s.cell = Tensor::zeros({config_.decoder_hidden_dim()});
  return s;
}

AttentionResult DqgModel::attention(Graph& g, const Tensor& hidden,
                                    const EncoderOutput& enc) const {
  const Tensor projected = g.matvec(params_.get("attention.weight"), hidden);
  const Tensor scores = g.matvec(enc.states_matrix, projected);
  AttentionResult r;
  r.weights = g.softmax(scores);
  r.context = g.vecmat(r.weights, enc.states_matrix);
  return r;
}

StepOutput DqgModel::decode_step(Graph& g, const DecoderState& state, int prev_extended_id,
                                 const EncoderOutput& enc, const SourceContext& source) const {
  const std::size_t dec = config_.decoder_hidden_dim();
  const std::size_t extended = source.extended_size();
  if (prev_extended_id < 0 || static_cast<std::size_t>(prev_extended_id) >= extended) {
    throw IndexError("decode_step: previous token " + std::to_string(prev_extended_id) +
                     " outside extended vocabulary of size " + std::to_string(extended));
  }
  const Tensor input =
      g.row(params_.get("embedding.word"), static_cast<std::size_t>(source.input_id(prev_extended_id)));
  const Tensor z = g.add(g.matvec(params_.get("decoder.weight"), g.concat({input, state.hidden})),
                         params_.get("decoder.bias"));
  const Tensor hc = g.lstm_cell(z, state.cell);
  StepOutput out;
  out.state.hidden = g.slice(hc, 0, dec);
  out.state.cell = g.slice(hc, dec, dec);

  const AttentionResult att = attention(g, out.state.hidden, enc);
  const Tensor features = g.concat({out.state.hidden, att.context});
  const Tensor vocab_dist = g.softmax(
      g.add(g.matvec(params_.get("output.weight"), features), params_.get("output.bias")));
  out.copy_gate = g.sigmoid(g.add(
      g.matvec(params_.get("copy_gate.weight"), g.concat({features, input})),
      params_.get("copy_gate.bias")));

  Tensor generated = vocab_dist;
  if (extended > vocab_dist.size()) {
    generated = g.concat({vocab_dist, Tensor::zeros({extended - vocab_dist.size()})});
  }
  const Tensor copied = g.scatter_add(att.weights, source.extended_ids, extended);
  out.distribution =
      g.add(g.mul(out.copy_gate, generated), g.mul(g.one_minus(out.copy_gate), copied));
  out.attention = att.weights;
  return out;
}

DecoderState DqgModel::start(Graph& g, const Example& example, Difficulty difficulty,
                             EncoderOutput& enc) const {
  enc = encode(g, example, difficulty);
  return init_decoder(g, enc, difficulty);
}

namespace {

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.ids < b.ids;
}

double log_of(double p) { return std::log(std::max(p, Graph::kLogFloor)); }

}  // namespace

Generation DqgModel::beam_search(const Example& example, Difficulty difficulty,
                                 std::size_t beam_size) const {
  if (beam_size < 1) throw ContractError("beam_search: beam_size must be >= 1");
  Graph g(Graph::Mode::Inference);
  const SourceContext source = SourceContext::build(example.sentence, vocab_);
  EncoderOutput enc;
  std::vector<Hypothesis> alive;
  alive.push_back(Hypothesis{{}, 0.0, start(g, example, difficulty, enc), false});
  std::vector<Hypothesis> finished;

  for (std::size_t step = 0; step < config_.max_decode_len && !alive.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& hyp : alive) {
      const int prev = hyp.ids.empty() ? Vocab::kSos : hyp.ids.back();
      const StepOutput out = decode_step(g, hyp.state, prev, enc, source);
      const auto dist = out.distribution.values();
      std::vector<int> order(dist.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      const std::size_t k = std::min(beam_size, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](int a, int b) {
                          if (dist[a] != dist[b]) return dist[a] > dist[b];
                          return a < b;
                        });
      for (std::size_t j = 0; j < k; ++j) {
        Hypothesis next;
        next.ids = hyp.ids;
        next.log_prob = hyp.log_prob + log_of(dist[static_cast<std::size_t>(order[j])]);
        next.state = out.state;
        next.finished = order[j] == Vocab::kEos;
        if (!next.finished) next.ids.push_back(order[j]);
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    candidates.resize(std::min(candidates.size(), beam_size));
    alive.clear();
    for (auto& c : candidates) (c.finished ? finished : alive).push_back(std::move(c));
    // Log-probabilities never increase, so no live hypothesis can overtake
    // a finished one that already scores at least as well.
    if (!finished.empty() && !alive.empty()) {
      const auto best_finished = std::min_element(finished.begin(), finished.end(), better);
      const auto best_alive = std::min_element(alive.begin(), alive.end(), better);
      if (best_finished->log_prob >= best_alive->log_prob) break;
    }
  }

  const Hypothesis* best = nullptr;
  if (!finished.empty()) {
    best = &*std::min_element(finished.begin(), finished.end(), better);
  } else {
    best = &*std::min_element(alive.begin(), alive.end(), better);
  }
  Generation out;
  out.ids = best->ids;
  out.log_prob = best->log_prob;
  out.finished = best->finished;
  for (int id : out.ids) out.tokens.push_back(source.token(id, vocab_));
  return out;
}

Generation DqgModel::greedy(const Example& example, Difficulty difficulty) const {
  Graph g(Graph::Mode::Inference);
  const SourceContext source = SourceContext::build(example.sentence, vocab_);
  EncoderOutput enc;
  DecoderState state = start(g, example, difficulty, enc);
  Generation out;
  int prev = Vocab::kSos;
  for (std::size_t step = 0; step < config_.max_decode_len; ++step) {
    const StepOutput s = decode_step(g, state, prev, enc, source);
    const auto dist = s.distribution.values();
    const auto best = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    out.log_prob += log_of(dist[static_cast<std::size_t>(best)]);
    state = s.state;
    if (best == Vocab::kEos) {
      out.finished = true;
      break;
    }
    out.ids.push_back(best);
    prev = best;
  }
  for (int id : out.ids) out.tokens.push_back(source.token(id, vocab_));
  return out;
}

Tokens DqgModel::generate(const Example& example, Difficulty difficulty) const {
  return beam_search(example, difficulty).tokens;
}

}  // namespace dqg
