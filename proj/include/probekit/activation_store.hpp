#pragma once

// Binary container for per-layer last-token hidden states (".mps"), the
// JSONL sidecars for token and continuation log-probabilities, and a
// synthetic generator with a planted linear signal.
//
// .mps layout (all integers little-endian):
//
//   "MPS1"                     magic
//   u8  byte order             1 = little-endian (the only accepted value)
//   u8  dtype                  1 = IEEE-754 float32
//   u16 reserved               0
//   u32 n_layers               includes the embedding output as layer 0
//   u32 hidden_dim
//   u32 n_sentences
//   u32 len, bytes             model_name (UTF-8)
//   u32 len, bytes             metadata (UTF-8, JSON object text or empty)
//   n_sentences x { u32 len, bytes pair_id, u8 role (0 good, 1 bad) }
//   float32[n_layers][n_sentences][hidden_dim]   layer-major payload
//   u32 CRC-32 (IEEE) of every preceding byte

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "probekit/corpus.hpp"

namespace probekit {

enum class Role : std::uint8_t { Good = 0, Bad = 1 };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);

struct SentenceId {
  std::string pair_id;
  Role role = Role::Good;

  auto operator<=>(const SentenceId&) const = default;
  bool operator==(const SentenceId&) const = default;
  std::string str() const;  // "pair_id/good"
};

struct StoreHeader {
  std::string model_name;
  std::string metadata;
  std::uint32_t n_layers = 0;
  std::uint32_t hidden_dim = 0;
  std::vector<SentenceId> sentences;

  std::size_t n_sentences() const { return sentences.size(); }
  bool operator==(const StoreHeader&) const = default;
};

/// Throws DataError on n_layers/hidden_dim of zero or duplicate sentence ids.
void validate_header(const StoreHeader& header);

struct ActivationRecord {
  SentenceId sentence;
  std::uint32_t layer = 0;
  std::vector<float> vector;
};

/// Store contents held in memory, layer-major.
struct StoreData {
  StoreHeader header;
  std::vector<float> values;

  std::span<const float> row(std::uint32_t layer, std::size_t sentence) const;
  std::span<float> row(std::uint32_t layer, std::size_t sentence);
};

std::size_t payload_bytes(const StoreHeader& header);

/// Places records by (layer, sentence). Throws DataError on unknown,
/// missing or duplicate records, wrong vector length and non-finite values.
StoreData assemble_store(const StoreHeader& header, std::span<const ActivationRecord> records);

std::vector<std::uint8_t> encode_store(const StoreData& data);
void write_store(const std::filesystem::path& path, const StoreData& data);
void write_store(const std::filesystem::path& path, const StoreHeader& header,
                 std::span<const ActivationRecord> records);

struct LayerMatrix {
  std::uint32_t layer = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;               // row-major rows x cols
  const std::vector<SentenceId>* row_ids = nullptr;  // header order, owned by the store

  std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

/// Read-only view of a decoded .mps file. Opening verifies magic, sizes and CRC.
class ActivationStore {
 public:
  static ActivationStore open(const std::filesystem::path& path);
  static ActivationStore decode(std::vector<std::uint8_t> bytes, std::string source = "<memory>");

  const StoreHeader& header() const { return header_; }

  /// Throws std::out_of_range when layer >= n_layers.
  LayerMatrix read_layer(std::uint32_t layer) const;

  std::optional<std::size_t> find(const SentenceId& id) const;

  /// The CRC-32 trailer; identifies the file contents.
  std::uint32_t checksum() const { return checksum_; }

 private:
  struct IdHash {
    std::size_t operator()(const SentenceId& id) const;
  };

  std::string source_;
  StoreHeader header_;
  std::vector<std::uint8_t> bytes_;
  std::size_t payload_offset_ = 0;
  std::uint32_t checksum_ = 0;
  std::unordered_map<SentenceId, std::size_t, IdHash> index_;
};

struct IntegrityReport {
  bool ok = false;
  std::string message;
  std::uint32_t n_layers = 0;
  std::uint32_t hidden_dim = 0;
  std::size_t n_sentences = 0;
};

/// Full check of a store file: decodes it and scans every value for NaN/Inf.
/// Never throws for bad files.
IntegrityReport integrity_check(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic activations

struct SyntheticConfig {
  std::size_t n_pairs = 500;
  std::uint32_t n_layers = 12;
  std::uint32_t hidden_dim = 64;
  std::uint32_t signal_layer = 4;
  double separation = 3.0;
  std::uint64_t seed = 0;
  std::string task_id = "synthetic";
  std::string model_name = "synthetic";
};

struct SyntheticWorld {
  StoreData store;
  Dataset dataset;
};

/// Layers below signal_layer hold i.i.d. N(0, I) vectors for both roles;
/// from signal_layer on, good rows are shifted by +separation*u and bad rows
/// by -separation*u for one fixed random unit direction u.
SyntheticWorld generate_synthetic(const SyntheticConfig& config);

/// Same draw for an existing dataset (rows ordered pair by pair, good first).
/// Without a signal layer every layer is pure noise.
StoreData synthesize_activations(const Dataset& dataset, std::uint32_t n_layers, std::uint32_t hidden_dim,
                                 std::optional<std::uint32_t> signal_layer, double separation,
                                 std::uint64_t seed, std::string model_name);

// ---------------------------------------------------------------------------
// JSONL sidecars. The first line of each file is a header object.

struct TokenScore {
  std::string token_text;
  double logprob = 0.0;  // natural log, <= 0
};

struct TokenScoreRecord {
  SentenceId sentence;
  std::vector<TokenScore> tokens;

  double total() const;
};

struct TokenScoreFile {
  std::string model_name;
  std::string bos_convention;  // declared by whoever produced the dump
  std::vector<TokenScoreRecord> records;
};

struct ContinuationScore {
  std::string prompt_id;
  std::string option_label;
  double logprob = 0.0;
};

struct ContinuationScoreFile {
  std::string model_name;
  std::string prompt_mode;  // "raw" or a wrapper name
  std::vector<ContinuationScore> records;
};

TokenScoreFile load_token_scores(const std::filesystem::path& path);
void save_token_scores(const TokenScoreFile& file, const std::filesystem::path& path);
ContinuationScoreFile load_continuation_scores(const std::filesystem::path& path);
void save_continuation_scores(const ContinuationScoreFile& file, const std::filesystem::path& path);

}  // namespace probekit
