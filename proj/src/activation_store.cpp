#include "probekit/activation_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <zlib.h>

#include "json.hpp"
#include "probekit/error.hpp"

namespace probekit {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'S', '1'};
constexpr std::uint8_t kLittleEndian = 1;
constexpr std::uint8_t kFloat32 = 1;

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large stores.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    if (s.size() > UINT32_MAX) throw DataError("string too long for store header");
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, const std::string& source) : data_(data), source_(source) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DataError(source_ + ": truncated store header");
  }

 private:
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> data_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits JSONL into (line number, parsed object) skipping blank lines.
std::vector<std::pair<std::size_t, nlohmann::json>> parse_jsonl(const std::filesystem::path& path) {
  std::vector<std::pair<std::size_t, nlohmann::json>> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.emplace_back(n, nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": parse error: " + e.what());
    }
  }
  return out;
}

const nlohmann::json& expect_header(const std::vector<std::pair<std::size_t, nlohmann::json>>& lines,
                                    std::string_view format, const std::filesystem::path& path) {
  if (lines.empty() || !lines.front().second.is_object() ||
      lines.front().second.value("format", std::string()) != format) {
    throw DataError(path.string() + ": first line must be a header with format \"" + std::string(format) + "\"");
  }
  return lines.front().second;
}

}  // namespace

std::string_view to_string(Role r) { return r == Role::Good ? "good" : "bad"; }

Role parse_role(std::string_view s) {
  if (s == "good") return Role::Good;
  if (s == "bad") return Role::Bad;
  throw DataError("unknown sentence role '" + std::string(s) + "'");
}

std::string SentenceId::str() const { return pair_id + "/" + std::string(to_string(role)); }

void validate_header(const StoreHeader& h) {
  if (h.n_layers < 1) throw DataError("store header: n_layers must be >= 1");
  if (h.hidden_dim < 1) throw DataError("store header: hidden_dim must be >= 1");
  std::set<SentenceId> seen;
  for (const auto& id : h.sentences) {
    if (!seen.insert(id).second) throw DataError("store header: duplicate sentence id " + id.str());
  }
}

std::span<const float> StoreData::row(std::uint32_t layer, std::size_t sentence) const {
  const std::size_t dim = header.hidden_dim;
  return {values.data() + (static_cast<std::size_t>(layer) * header.n_sentences() + sentence) * dim, dim};
}

std::span<float> StoreData::row(std::uint32_t layer, std::size_t sentence) {
  const std::size_t dim = header.hidden_dim;
  return {values.data() + (static_cast<std::size_t>(layer) * header.n_sentences() + sentence) * dim, dim};
}

std::size_t payload_bytes(const StoreHeader& h) {
  return static_cast<std::size_t>(h.n_layers) * h.n_sentences() * h.hidden_dim * sizeof(float);
}

StoreData assemble_store(const StoreHeader& header, std::span<const ActivationRecord> records) {
  validate_header(header);
  std::map<SentenceId, std::size_t> index;
  for (std::size_t i = 0; i < header.sentences.size(); ++i) index.emplace(header.sentences[i], i);

  StoreData data{header, std::vector<float>(payload_bytes(header) / sizeof(float))};
  std::vector<bool> filled(static_cast<std::size_t>(header.n_layers) * header.n_sentences(), false);
  for (const auto& r : records) {
    auto it = index.find(r.sentence);
    if (it == index.end()) throw DataError("record for unknown sentence " + r.sentence.str());
    if (r.layer >= header.n_layers) {
      throw DataError("record for " + r.sentence.str() + " has layer " + std::to_string(r.layer) + " out of range");
    }
    if (r.vector.size() != header.hidden_dim) {
      throw DataError("record for " + r.sentence.str() + " has dimension " + std::to_string(r.vector.size()));
    }
    const std::size_t slot = static_cast<std::size_t>(r.layer) * header.n_sentences() + it->second;
    if (filled[slot]) {
      throw DataError("duplicate record for " + r.sentence.str() + " layer " + std::to_string(r.layer));
    }
    for (float v : r.vector) {
      if (!std::isfinite(v)) {
        throw DataError("non-finite value in " + r.sentence.str() + " layer " + std::to_string(r.layer));
      }
    }
    filled[slot] = true;
    std::copy(r.vector.begin(), r.vector.end(), data.row(r.layer, it->second).begin());
  }
  for (std::size_t slot = 0; slot < filled.size(); ++slot) {
    if (!filled[slot]) {
      const auto layer = slot / std::max<std::size_t>(header.n_sentences(), 1);
      const auto& id = header.sentences[slot % header.n_sentences()];
      throw DataError("missing record for " + id.str() + " layer " + std::to_string(layer));
    }
  }
  return data;
}

std::vector<std::uint8_t> encode_store(const StoreData& data) {
  const auto& h = data.header;
  validate_header(h);
  if (data.values.size() * sizeof(float) != payload_bytes(h)) {
    throw DataError("store payload size does not match header");
  }
  for (float v : data.values) {
    if (!std::isfinite(v)) throw DataError("store contains a non-finite value");
  }

  std::vector<std::uint8_t> out;
  out.reserve(64 + payload_bytes(h) + h.n_sentences() * 24);
  ByteWriter w(out);
  w.bytes(std::string_view(kMagic, 4));
  w.u8(kLittleEndian);
  w.u8(kFloat32);
  w.u16(0);
  w.u32(h.n_layers);
  w.u32(h.hidden_dim);
  w.u32(static_cast<std::uint32_t>(h.n_sentences()));
  w.str(h.model_name);
  w.str(h.metadata);
  for (const auto& id : h.sentences) {
    w.str(id.pair_id);
    w.u8(static_cast<std::uint8_t>(id.role));
  }
  if constexpr (std::endian::native == std::endian::little) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.values.data());
    out.insert(out.end(), p, p + data.values.size() * sizeof(float));
  } else {
    for (float v : data.values) w.f32(v);
  }
  w.u32(crc32_of(out.data(), out.size()));
  return out;
}

void write_store(const std::filesystem::path& path, const StoreData& data) {
  const auto bytes = encode_store(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void write_store(const std::filesystem::path& path, const StoreHeader& header,
                 std::span<const ActivationRecord> records) {
  write_store(path, assemble_store(header, records));
}

std::size_t ActivationStore::IdHash::operator()(const SentenceId& id) const {
  return std::hash<std::string>{}(id.pair_id) * 2 + static_cast<std::size_t>(id.role);
}

ActivationStore ActivationStore::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open store " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(std::move(bytes), path.string());
}

ActivationStore ActivationStore::decode(std::vector<std::uint8_t> bytes, std::string source) {
  ActivationStore s;
  s.source_ = std::move(source);
  if (bytes.size() < 4 + 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError(s.source_ + ": not an MPS1 store (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i) stored_crc |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  if (crc32_of(bytes.data(), body) != stored_crc) throw DataError(s.source_ + ": CRC mismatch (corrupt or truncated store)");

  ByteReader r(std::span<const std::uint8_t>(bytes.data(), body), s.source_);
  r.need(4);
  for (int i = 0; i < 4; ++i) r.u8();
  if (r.u8() != kLittleEndian) throw DataError(s.source_ + ": unsupported byte order");
  if (r.u8() != kFloat32) throw DataError(s.source_ + ": unsupported dtype");
  r.u16();
  s.header_.n_layers = r.u32();
  s.header_.hidden_dim = r.u32();
  const auto n_sentences = r.u32();
  s.header_.model_name = r.str();
  s.header_.metadata = r.str();
  s.header_.sentences.reserve(n_sentences);
  for (std::uint32_t i = 0; i < n_sentences; ++i) {
    SentenceId id;
    id.pair_id = r.str();
    const auto role = r.u8();
    if (role > 1) throw DataError(s.source_ + ": invalid sentence role byte");
    id.role = static_cast<Role>(role);
    s.header_.sentences.push_back(std::move(id));
  }
  validate_header(s.header_);
  s.payload_offset_ = r.pos();
  if (body - s.payload_offset_ != payload_bytes(s.header_)) {
    throw DataError(s.source_ + ": payload length does not match declared sizes");
  }
  for (std::size_t i = 0; i < s.header_.sentences.size(); ++i) s.index_.emplace(s.header_.sentences[i], i);
  s.checksum_ = stored_crc;
  s.bytes_ = std::move(bytes);
  return s;
}

LayerMatrix ActivationStore::read_layer(std::uint32_t layer) const {
  if (layer >= header_.n_layers) {
    throw std::out_of_range(source_ + ": layer " + std::to_string(layer) + " out of range (n_layers " +
                            std::to_string(header_.n_layers) + ")");
  }
  LayerMatrix m;
  m.layer = layer;
  m.rows = header_.n_sentences();
  m.cols = header_.hidden_dim;
  m.row_ids = &header_.sentences;
  m.values.resize(m.rows * m.cols);
  const std::size_t n_bytes = m.values.size() * sizeof(float);
  const std::uint8_t* src = bytes_.data() + payload_offset_ + static_cast<std::size_t>(layer) * n_bytes;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(m.values.data(), src, n_bytes);
  } else {
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(src[4 * i + b]) << (8 * b);
      m.values[i] = std::bit_cast<float>(v);
    }
  }
  return m;
}

std::optional<std::size_t> ActivationStore::find(const SentenceId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

IntegrityReport integrity_check(const std::filesystem::path& path) {
  IntegrityReport rep;
  try {
    const auto store = ActivationStore::open(path);
    rep.n_layers = store.header().n_layers;
    rep.hidden_dim = store.header().hidden_dim;
    rep.n_sentences = store.header().n_sentences();
    for (std::uint32_t l = 0; l < rep.n_layers; ++l) {
      const auto m = store.read_layer(l);
      for (std::size_t i = 0; i < m.values.size(); ++i) {
        if (!std::isfinite(m.values[i])) {
          rep.message = "non-finite value at layer " + std::to_string(l) + ", sentence " +
                        (*m.row_ids)[i / m.cols].str();
          return rep;
        }
      }
    }
    rep.ok = true;
    rep.message = "ok";
  } catch (const std::exception& e) {
    rep.message = e.what();
  }
  return rep;
}

// ---------------------------------------------------------------------------

StoreData synthesize_activations(const Dataset& dataset, std::uint32_t n_layers, std::uint32_t hidden_dim,
                                 std::optional<std::uint32_t> signal_layer, double separation,
                                 std::uint64_t seed, std::string model_name) {
  StoreHeader h;
  h.model_name = std::move(model_name);
  h.n_layers = n_layers;
  h.hidden_dim = hidden_dim;
  nlohmann::ordered_json meta;
  meta["generator"] = "synthetic";
  meta["tap_point"] = "synthetic";
  meta["signal_layer"] = signal_layer ? nlohmann::ordered_json(*signal_layer) : nlohmann::ordered_json(nullptr);
  meta["separation"] = separation;
  h.metadata = meta.dump();
  h.sentences.reserve(dataset.size() * 2);
  for (const auto& p : dataset) {
    h.sentences.push_back({p.pair_id, Role::Good});
    h.sentences.push_back({p.pair_id, Role::Bad});
  }
  validate_header(h);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> direction(hidden_dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : direction) {
      v = normal(rng);
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& v : direction) v /= norm;

  StoreData data{h, std::vector<float>(payload_bytes(h) / sizeof(float))};
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const bool planted = signal_layer && l >= *signal_layer;
    for (std::size_t s = 0; s < h.n_sentences(); ++s) {
      const double sign = h.sentences[s].role == Role::Good ? 1.0 : -1.0;
      auto row = data.row(l, s);
      for (std::uint32_t d = 0; d < hidden_dim; ++d) {
        double v = normal(rng);
        if (planted) v += sign * separation * direction[d];
        row[d] = static_cast<float>(v);
      }
    }
  }
  return data;
}

SyntheticWorld generate_synthetic(const SyntheticConfig& c) {
  if (c.n_layers < 1 || c.hidden_dim < 1) throw DataError("synthetic: n_layers and hidden_dim must be >= 1");
  if (c.signal_layer >= c.n_layers) throw DataError("synthetic: signal_layer must be < n_layers");
  if (!(c.separation > 0.0)) throw DataError("synthetic: separation must be > 0");

  SyntheticWorld w;
  w.dataset.reserve(c.n_pairs);
  for (std::size_t i = 0; i < c.n_pairs; ++i) {
    MinimalPair p;
    p.pair_id = c.task_id + "_" + std::to_string(i + 1);
    p.task_id = c.task_id;
    p.sentence_good = "Synthetic sentence " + std::to_string(i + 1) + " of " + c.task_id + ", acceptable.";
    p.sentence_bad = "Synthetic sentence " + std::to_string(i + 1) + " of " + c.task_id + ", unacceptable.";
    p.language = "en";
    p.duality = Duality::Form;
    p.phenomenon = "synthetic";
    p.level = Level::Unlabeled;
    w.dataset.push_back(std::move(p));
  }
  w.store = synthesize_activations(w.dataset, c.n_layers, c.hidden_dim, c.signal_layer, c.separation, c.seed,
                                   c.model_name);
  return w;
}

// ---------------------------------------------------------------------------

double TokenScoreRecord::total() const {
  double sum = 0.0;
  for (const auto& t : tokens) sum += t.logprob;
  return sum;
}

TokenScoreFile load_token_scores(const std::filesystem::path& path) {
  const auto lines = parse_jsonl(path);
  const auto& head = expect_header(lines, "probekit.token_scores", path);
  TokenScoreFile f;
  f.model_name = head.value("model_name", std::string());
  f.bos_convention = head.value("bos_convention", std::string());
  std::set<SentenceId> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line, o] = lines[i];
    const auto where = path.string() + ":" + std::to_string(line);
    try {
      TokenScoreRecord r;
      r.sentence.pair_id = o.at("pair_id").get<std::string>();
      r.sentence.role = parse_role(o.at("role").get<std::string>());
      for (const auto& t : o.at("tokens")) {
        const double lp = t.at("logprob").get<double>();
        if (!std::isfinite(lp) || lp > 0.0) throw DataError("logprob must be finite and <= 0");
        r.tokens.push_back({t.at("token_text").get<std::string>(), lp});
      }
      if (r.tokens.empty()) throw DataError("empty token list");
      if (!seen.insert(r.sentence).second) throw DataError("duplicate record for " + r.sentence.str());
      f.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return f;
}

void save_token_scores(const TokenScoreFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  nlohmann::ordered_json head;
  head["format"] = "probekit.token_scores";
  head["version"] = 1;
  head["model_name"] = file.model_name;
  head["bos_convention"] = file.bos_convention;
  out << head.dump() << '\n';
  for (const auto& r : file.records) {
    nlohmann::ordered_json j;
    j["pair_id"] = r.sentence.pair_id;
    j["role"] = to_string(r.sentence.role);
    j["tokens"] = nlohmann::ordered_json::array();
    for (const auto& t : r.tokens) {
      nlohmann::ordered_json tok;
      tok["token_text"] = t.token_text;
      tok["logprob"] = t.logprob;
      j["tokens"].push_back(std::move(tok));
    }
    out << j.dump() << '\n';
  }
}

ContinuationScoreFile load_continuation_scores(const std::filesystem::path& path) {
  const auto lines = parse_jsonl(path);
  const auto& head = expect_header(lines, "probekit.continuation_scores", path);
  ContinuationScoreFile f;
  f.model_name = head.value("model_name", std::string());
  f.prompt_mode = head.value("prompt_mode", std::string("raw"));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line, o] = lines[i];
    const auto where = path.string() + ":" + std::to_string(line);
    try {
      ContinuationScore c{o.at("prompt_id").get<std::string>(), o.at("option_label").get<std::string>(),
                          o.at("logprob").get<double>()};
      if (!std::isfinite(c.logprob)) throw DataError("logprob must be finite");
      f.records.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return f;
}

void save_continuation_scores(const ContinuationScoreFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  nlohmann::ordered_json head;
  head["format"] = "probekit.continuation_scores";
  head["version"] = 1;
  head["model_name"] = file.model_name;
  head["prompt_mode"] = file.prompt_mode;
  out << head.dump() << '\n';
  for (const auto& c : file.records) {
    nlohmann::ordered_json j;
    j["prompt_id"] = c.prompt_id;
    j["option_label"] = c.option_label;
    j["logprob"] = c.logprob;
    out << j.dump() << '\n';
  }
}

}  // namespace probekit
