#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2p/config.hpp"
#include "s2p/metric.hpp"
#include "s2p/retrieval.hpp"
#include "s2p/ruleconv.hpp"
#include "s2p/tinyformer.hpp"

namespace s2p {

enum class Stage { Config, Stage1, Stage2, Metric };

const char* to_string(Stage stage);
/// 2 config, 3 stage 1, 4 stage 2, 5 metric.
int exit_code(Stage stage);

/// Any failure inside run_pipeline or evaluate_*, prefixed with the stage
/// name ("stage2: ruleset not found: ...").
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& detail)
      : Error(std::string(to_string(stage)) + ": " + detail), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

/// Collapses runs of identical consecutive lines, strips trailing whitespace
/// and squeezes inner runs of blanks to one space. Leading indentation is
/// kept as is. Idempotent.
std::string simplify_text(std::string_view pseudo);

/// Stage 1 index for the configured corpus, read from stage1.index_cache
/// when that cache is current (and written there otherwise).
TfIdfIndex load_stage1(const PipelineConfig& config);

/// Code to pseudocode with either the rule table or a trained model. The
/// model translates each code line on its own; block END lines come from the
/// same indentation scan the rule engine uses.
class Stage2Converter {
 public:
  static Stage2Converter with_rules(RuleSet rules);
  static Stage2Converter with_model(TrainedModel model);

  Engine engine() const { return engine_; }
  PseudoDoc convert(std::string_view code) const;
  /// One line, no block structure (used to score line-aligned corpora).
  RenderedLine convert_line(std::string_view line) const;

 private:
  Engine engine_ = Engine::Rules;
  std::optional<RuleSet> rules_;
  std::optional<TrainedModel> model_;
};

Stage2Converter load_stage2(const PipelineConfig& config);

struct StageTimings {
  double stage1_ms = 0.0;
  double stage2_ms = 0.0;
};

struct PipelineResult {
  std::string story;
  std::string code;  // exactly what stage 2 consumed
  double similarity = 0.0;
  std::int64_t source_id = 0;
  std::vector<SyntaxFix> syntax_fixes;
  std::string raw_pseudocode;
  std::string pseudocode;  // simplify_text(raw_pseudocode)
  Engine engine = Engine::Rules;
  std::size_t fallback_lines = 0;
  StageTimings timings;
};

PipelineResult run_pipeline(std::string_view story, const PipelineConfig& config);
PipelineResult run_pipeline(std::string_view story, const TfIdfIndex& index, const Stage2Converter& stage2);

/// JSON record of a result; timings are left out unless asked for.
std::string result_json(const PipelineResult& result, bool include_timings = false);

// ------------------------------------------------------------------ evaluation

struct EvalSample {
  std::string source;
  std::string reference;
  std::string hypothesis;
  double sentence_bleu = 0.0;
};

struct EvalReport {
  Engine engine = Engine::Rules;
  BleuReport corpus;
  double mean_sentence_bleu = 0.0;
  std::vector<EvalSample> samples;
  std::size_t fallback_lines = 0;
  std::string config_hash;
};

/// Maps a source to a hypothesis and whether a fallback produced it.
using Hypothesizer = std::function<RenderedLine(const std::string& source)>;

enum class ScoreTokens {
  Whitespace,  // split on blanks, as written
  Code,        // re-split both sides with tokenize_code
};

/// Generates a hypothesis per pair (in parallel), then scores the set with
/// corpus_bleu and the mean of smoothed sentence_bleu. An empty hypothesis
/// is scored as a single empty token. Throws StageError(Metric) on an empty
/// corpus.
EvalReport evaluate_stage(const std::vector<ParallelPair>& pairs, const Hypothesizer& hypothesize, Engine engine,
                          const BleuSettings& settings, ScoreTokens tokens = ScoreTokens::Whitespace);

/// Line pairs through the rule table or the model.
EvalReport evaluate_stage2(const std::vector<ParallelPair>& pairs, const Stage2Converter& stage2,
                           const BleuSettings& settings);
/// Descriptions through retrieval, scored against the stored code.
EvalReport evaluate_stage1(const std::vector<TaskSample>& samples, const TfIdfIndex& index,
                           const BleuSettings& settings);

std::string format_eval_report(const EvalReport& report);
std::string eval_json(const EvalReport& report);
/// Writes <dir>/<stem>.txt and <dir>/<stem>.json.
void write_eval_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& stem);

}  // namespace s2p
