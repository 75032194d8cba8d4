#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "s2p/corpus.hpp"
#include "s2p/error.hpp"

namespace s2p {

// ------------------------------------------------------------------ vocab

/// Splits on whitespace; runs of letters, digits and `_` form one token and
/// every other character is a token of its own.
std::vector<std::string> tokenize_code(std::string_view text);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocab();
  /// Reserved entries are prepended; `tokens` must not repeat.
  explicit Vocab(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::string_view text) const;
  /// Joins tokens with single spaces, skipping reserved ids.
  std::string decode(const std::vector<int>& ids) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

/// Token inventory over both sides of the corpus, ordered by descending
/// frequency then lexicographically; tokens seen fewer than `min_freq` times
/// are left out (they encode as UNK).
Vocab build_vocab(const std::vector<ParallelPair>& pairs, int min_freq = 1);

// ------------------------------------------------------------------ dense math

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  bool operator==(const Matrix&) const = default;
};

/// visible(i, j) != 0 when query i may attend to key j.
struct AttentionMask {
  int rows = 0;
  int cols = 0;
  std::vector<char> visible;

  static AttentionMask full(int rows, int cols);
  static AttentionMask causal(int size);
  bool operator()(int r, int c) const { return visible[static_cast<std::size_t>(r) * cols + c] != 0; }
};

/// Softmax over masked, scaled scores q·kᵀ/√d. A row with no visible key
/// gets all-zero weights. Throws ModelError on shape mismatch.
Matrix attention_weights(const Matrix& queries, const Matrix& keys, const AttentionMask& mask);
/// Single-head scaled dot-product attention: attention_weights(...) · values.
Matrix attention(const Matrix& queries, const Matrix& keys, const Matrix& values, const AttentionMask& mask);

// ------------------------------------------------------------------ model

struct ModelConfig {
  int d_model = 64;
  int heads = 4;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int ffn_dim = 128;
  int max_len = 64;
  double dropout = 0.0;
  std::uint64_t seed = 13;

  void validate() const;  // throws ConfigError
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  int epochs = 5;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 1;

  void validate() const;
};

/// Location of one tensor inside ModelParams::values.
struct Slice {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct NormSlices {
  Slice gain, bias;
};
struct AttentionSlices {
  Slice wq, wk, wv, wo;
};
struct FeedForwardSlices {
  Slice w1, b1, w2, b2;
};
struct EncoderLayerSlices {
  NormSlices norm1;
  AttentionSlices self_attn;
  NormSlices norm2;
  FeedForwardSlices ffn;
};
struct DecoderLayerSlices {
  NormSlices norm1;
  AttentionSlices self_attn;
  NormSlices norm2;
  AttentionSlices cross_attn;
  NormSlices norm3;
  FeedForwardSlices ffn;
};

/// Tensor order: embedding, encoder layers, encoder norm, decoder layers,
/// decoder norm. The embedding is shared by source and target and doubles
/// as the output projection.
struct ParamLayout {
  Slice embedding;
  std::vector<EncoderLayerSlices> encoder;
  NormSlices encoder_norm;
  std::vector<DecoderLayerSlices> decoder;
  NormSlices decoder_norm;
  std::size_t total = 0;

  static ParamLayout make(const ModelConfig& config, int vocab_size);
};

struct ModelParams {
  ModelConfig config;
  int vocab_size = 0;
  ParamLayout layout;
  std::vector<double> values;

  std::span<double> view(const Slice& s) { return {values.data() + s.offset, s.size()}; }
  std::span<const double> view(const Slice& s) const { return {values.data() + s.offset, s.size()}; }
  bool all_finite() const;
};

/// Weight matrices uniform in ±1/√d_model from the seeded generator; biases
/// zero; layer-norm gains one.
ModelParams init_params(const ModelConfig& config, int vocab_size);

/// Logits (target_len x vocab) for a source and a BOS-initial target prefix.
Matrix forward(const ModelParams& params, const std::vector<int>& source_ids, const std::vector<int>& target_ids);

/// Mean cross-entropy of next-token prediction over non-PAD labels (0 if all
/// labels are PAD). `target_in` starts with BOS; `labels` has the same length.
/// When `grads` is given, d(loss)/d(params) is added into it.
double sequence_loss(const ModelParams& params, const std::vector<int>& source_ids,
                     const std::vector<int>& target_in, const std::vector<int>& labels,
                     std::vector<double>* grads = nullptr);

struct TrainingExample {
  std::vector<int> source;
  std::vector<int> target_in;  // BOS y1 .. yn
  std::vector<int> labels;     // y1 .. yn EOS
};

/// Encodes one pair; throws ModelError if either side does not fit max_len
/// or the source has no tokens.
TrainingExample make_example(const Vocab& vocab, const ModelConfig& config, const ParallelPair& pair);

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;
  double final_train_bleu = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;  // informational; not part of the report text
};

struct TrainedModel {
  Vocab vocab;
  ModelParams params;
};

/// Teacher-forced training with Adam. Throws ModelError if the loss stops
/// being finite.
TrainedModel train(const std::vector<ParallelPair>& pairs, const Vocab& vocab, const ModelConfig& config,
                   const TrainConfig& train_config, TrainReport& report);

/// Greedy decoding from BOS until EOS or max_len. Sources longer than max_len
/// are truncated. Throws ModelError if the source has no tokens.
std::string translate(const TrainedModel& model, std::string_view source);

/// Deterministic report text (everything except wall time).
std::string format_train_report(const TrainReport& report);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::vector<std::size_t> indices;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Central finite differences on `count` distinct parameters chosen with
/// `seed`, compared against sequence_loss gradients. Relative error is
/// |a-f| / max(|a|, |f|, 1e-8).
GradCheckResult grad_check(const ModelParams& params, const TrainingExample& sample, double epsilon = 1e-5,
                           std::size_t count = 200, std::uint64_t seed = 3);

// Model file: "S2PMODEL", u32 version, u32 d_model heads encoder_layers
// decoder_layers ffn_dim max_len, f64 dropout, u64 seed, u32 vocab size and
// (u32 length, bytes) per token, u64 parameter count, f64 parameters. All
// little-endian.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view bytes);

}  // namespace s2p
