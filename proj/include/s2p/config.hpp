#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "s2p/corpus.hpp"
#include "s2p/metric.hpp"
#include "s2p/retrieval.hpp"
#include "s2p/tinyformer.hpp"

namespace s2p {

enum class Engine { Rules, Model, Retrieval };

const char* to_string(Engine engine);
/// Accepts "rules", "model" and "retrieval". Throws ConfigError otherwise.
Engine parse_engine(std::string_view name);

/// Flat key=value settings. `#` starts a comment line. Keys:
///
///   stage1.corpus            task corpus (JSONL)
///   stage1.index_cache       optional index cache file
///   stage1.boost.<tag>       tag weight, tag in noun verb adj num func other
///   stage1.stopword_weight   multiplier for stopwords (0.3)
///   stage2.engine            rules | model
///   stage2.rules             rule table; the built-in table when unset
///   stage2.model             model file, required for engine=model
///   bleu.max_n               4
///   bleu.smoothing           false
///   split.seed               13
///   split.ratios             0.9,0.05,0.05
///   output.dir               report directory (".")
///   model.<field>            d_model heads encoder_layers decoder_layers
///                            ffn_dim max_len dropout seed
///   train.<field>            epochs learning_rate beta1 beta2 eps
///                            batch_size min_freq
///
/// Relative paths are relative to the directory holding the config file.
struct PipelineConfig {
  std::filesystem::path base_dir = ".";

  std::string corpus;
  std::string index_cache;
  IndexOptions index;

  Engine engine = Engine::Rules;
  std::string rules;
  std::string model;

  BleuSettings bleu;
  std::uint64_t split_seed = kDefaultSplitSeed;
  SplitRatios split_ratios = kDefaultSplitRatios;
  std::string output_dir = ".";

  ModelConfig model_config;
  TrainConfig train_config;
  int min_freq = 1;

  /// Joins a configured path with base_dir; empty stays empty.
  std::filesystem::path resolve(const std::string& configured) const;

  /// Sets split.seed and model.seed together.
  void set_seed(std::uint64_t seed);

  /// Canonical key=value listing of every setting (paths as written).
  std::string canonical() const;
  /// FNV-1a of canonical(), 16 hex digits.
  std::string hash() const;

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);

/// The --config path if given, else $STORY2PSEUDO_CONFIG if set and
/// non-empty, else nothing.
std::optional<std::filesystem::path> config_path_from(const std::optional<std::string>& flag);

}  // namespace s2p
