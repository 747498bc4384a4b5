#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "dqg/errors.hpp"
#include "dqg/trainer.hpp"

namespace dqg {

namespace {

constexpr const char* kMagic = "DQG-CHECKPOINT";

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::map<std::string, std::string> parse_fields(std::istringstream& line) {
  std::map<std::string, std::string> fields;
  std::string kv;
  while (line >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CheckpointManifestError("malformed header field '" + kv + "'");
    fields[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return fields;
}

const std::string& field(const std::map<std::string, std::string>& f, const std::string& key) {
  auto it = f.find(key);
  if (it == f.end()) throw CheckpointManifestError("header is missing '" + key + "'");
  return it->second;
}

std::size_t to_size(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw CheckpointManifestError("bad integer '" + s + "'");
  return static_cast<std::size_t>(v);
}

double to_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) throw CheckpointManifestError("bad number '" + s + "'");
  return v;
}

// Reads one '\n'-terminated header line starting at pos.
std::string next_line(const std::string& bytes, std::size_t& pos) {
  const auto nl = bytes.find('\n', pos);
  if (nl == std::string::npos) throw CheckpointTruncatedError("header ends before the data section");
  std::string line = bytes.substr(pos, nl - pos);
  pos = nl + 1;
  return line;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.config;
  std::ostringstream h;
  h << kMagic << '\n';
  h << "version " << Checkpoint::kFormatVersion << '\n';
  h << "config word_dim=" << c.word_dim << " position_dim=" << c.position_dim
    << " difficulty_dim=" << c.difficulty_dim << " hidden_dim=" << c.hidden_dim
    << " max_distance=" << c.max_distance << " position_mode=" << to_string(c.position_mode)
    << " gdc=" << (c.global_difficulty_control ? 1 : 0) << " vocab_size=" << c.vocab_size
    << " max_decode_len=" << c.max_decode_len << " beam_size=" << c.beam_size
    << " init_seed=" << c.init_seed << '\n';
  h << "meta epoch=" << ckpt.meta.epoch << " dev_perplexity=" << hexfloat(ckpt.meta.dev_perplexity)
    << '\n';
  h << "vocab count=" << ckpt.vocab.size() << " min_freq=" << ckpt.vocab.min_freq() << '\n';
  for (std::size_t i = Vocab::kReserved; i < ckpt.vocab.size(); ++i)
    h << ckpt.vocab.token(static_cast<int>(i)) << '\n';
  const auto& entries = ckpt.params.entries();
  h << "params count=" << entries.size() << '\n';
  std::size_t offset = 0;
  for (const auto& [name, t] : entries) {
    h << name << " shape=";
    for (std::size_t d = 0; d < t.rank(); ++d) h << (d ? "x" : "") << t.dim(d);
    h << " offset=" << offset << '\n';
    offset += t.size() * sizeof(double);
  }
  h << "data bytes=" << offset << '\n';
  std::string out = h.str();
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : entries)
    for (double v : t.values()) append_le(out, v);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_line(bytes, pos) != kMagic) throw CheckpointManifestError("not a checkpoint file");
  {
    std::istringstream line(next_line(bytes, pos));
    std::string tag;
    int version = -1;
    line >> tag >> version;
    if (tag != "version") throw CheckpointManifestError("missing version line");
    if (version != Checkpoint::kFormatVersion) {
      throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                   " is not supported (expected " +
                                   std::to_string(Checkpoint::kFormatVersion) + ")");
    }
  }
  auto section = [&](const char* expected) {
    std::istringstream line(next_line(bytes, pos));
    std::string tag;
    line >> tag;
    if (tag != expected) throw CheckpointManifestError(std::string("expected '") + expected + "' line");
    return parse_fields(line);
  };

  Checkpoint ckpt;
  {
    const auto f = section("config");
    ModelConfig& c = ckpt.config;
    c.word_dim = to_size(field(f, "word_dim"));
    c.position_dim = to_size(field(f, "position_dim"));
    c.difficulty_dim = to_size(field(f, "difficulty_dim"));
    c.hidden_dim = to_size(field(f, "hidden_dim"));
    c.max_distance = to_size(field(f, "max_distance"));
    try {
      c.position_mode = parse_position_mode(field(f, "position_mode"));
    } catch (const ParseError& e) {
      throw CheckpointManifestError(e.what());
    }
    c.global_difficulty_control = to_size(field(f, "gdc")) != 0;
    c.vocab_size = to_size(field(f, "vocab_size"));
    c.max_decode_len = to_size(field(f, "max_decode_len"));
    c.beam_size = to_size(field(f, "beam_size"));
    c.init_seed = to_size(field(f, "init_seed"));
  }
  {
    const auto f = section("meta");
    ckpt.meta.epoch = to_size(field(f, "epoch"));
    ckpt.meta.dev_perplexity = to_double(field(f, "dev_perplexity"));
  }
  {
    const auto f = section("vocab");
    const std::size_t count = to_size(field(f, "count"));
    if (count < Vocab::kReserved) throw CheckpointManifestError("vocab count too small");
    std::vector<std::string> tokens;
    for (std::size_t i = Vocab::kReserved; i < count; ++i) tokens.push_back(next_line(bytes, pos));
    try {
      ckpt.vocab = Vocab(tokens, to_size(field(f, "min_freq")));
    } catch (const ContractError& e) {
      throw CheckpointManifestError(e.what());
    }
  }
  if (ckpt.vocab.size() != ckpt.config.vocab_size) {
    throw CheckpointManifestError("vocab holds " + std::to_string(ckpt.vocab.size()) +
                                  " tokens but config says " +
                                  std::to_string(ckpt.config.vocab_size));
  }
  std::vector<std::pair<std::string, Shape>> expected;
  try {
    expected = ModelParams::layout(ckpt.config);
  } catch (const ContractError& e) {
    throw CheckpointManifestError(e.what());
  }
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> manifest;
  {
    const auto f = section("params");
    const std::size_t count = to_size(field(f, "count"));
    if (count != expected.size()) {
      throw CheckpointManifestError("manifest lists " + std::to_string(count) +
                                    " tensors, config implies " + std::to_string(expected.size()));
    }
    std::size_t running = 0;
    for (std::size_t i = 0; i < count; ++i) {
      std::istringstream line(next_line(bytes, pos));
      Entry e;
      line >> e.name;
      const auto fields = parse_fields(line);
      std::string dims = field(fields, "shape");
      std::size_t start = 0;
      while (start <= dims.size()) {
        const auto x = dims.find('x', start);
        e.shape.push_back(to_size(dims.substr(start, x == std::string::npos ? std::string::npos : x - start)));
        if (x == std::string::npos) break;
        start = x + 1;
      }
      e.offset = to_size(field(fields, "offset"));
      if (e.name != expected[i].first || e.shape != expected[i].second) {
        throw CheckpointManifestError("manifest entry " + std::to_string(i) + " is '" + e.name +
                                      "' " + shape_to_string(e.shape) + ", config implies '" +
                                      expected[i].first + "' " + shape_to_string(expected[i].second));
      }
      if (e.offset != running) {
        throw CheckpointManifestError("manifest offset for '" + e.name + "' is " +
                                      std::to_string(e.offset) + ", expected " + std::to_string(running));
      }
      running += shape_numel(e.shape) * sizeof(double);
      manifest.push_back(std::move(e));
    }
    const auto data = section("data");
    if (to_size(field(data, "bytes")) != running) {
      throw CheckpointManifestError("data section size disagrees with manifest");
    }
    const std::size_t available = bytes.size() - pos;
    if (available < running) {
      throw CheckpointTruncatedError("data section holds " + std::to_string(available) +
                                     " bytes, manifest needs " + std::to_string(running));
    }
    if (available > running) {
      throw CheckpointManifestError(std::to_string(available - running) +
                                    " unexpected trailing bytes after data section");
    }
  }
  const char* data = bytes.data() + pos;
  for (const auto& e : manifest) {
    std::vector<double> values(shape_numel(e.shape));
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = read_le(data + e.offset + 8 * i);
    try {
      ckpt.params.add(e.name, Tensor(e.shape, std::move(values), true));
    } catch (const NumericError& err) {
      throw CheckpointManifestError("tensor '" + e.name + "': " + err.what());
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace dqg
