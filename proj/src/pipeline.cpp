#include "s2p/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>

#include <json.hpp>

#include "s2p/pylex.hpp"

namespace s2p {

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Config: return "config";
    case Stage::Stage1: return "stage1";
    case Stage::Stage2: return "stage2";
    case Stage::Metric: return "metric";
  }
  return "?";
}

int exit_code(Stage stage) {
  switch (stage) {
    case Stage::Config: return 2;
    case Stage::Stage1: return 3;
    case Stage::Stage2: return 4;
    case Stage::Metric: return 5;
  }
  return 1;
}

std::string simplify_text(std::string_view pseudo) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < pseudo.size()) {
    std::size_t end = pseudo.find('\n', pos);
    if (end == std::string_view::npos) end = pseudo.size();
    std::string_view raw = pseudo.substr(pos, end - pos);
    pos = end + 1;

    const std::size_t indent = std::min(raw.find_first_not_of(" \t"), raw.size());
    std::string line(raw.substr(0, indent));
    bool pending_space = false;
    for (char c : raw.substr(indent)) {
      if (c == ' ' || c == '\t' || c == '\r') {
        pending_space = true;
        continue;
      }
      if (pending_space) line += ' ';
      pending_space = false;
      line += c;
    }
    if (indent == raw.size()) line.clear();  // whitespace-only line
    if (!lines.empty() && lines.back() == line) continue;
    lines.push_back(std::move(line));
  }
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += lines[i];
    if (i + 1 < lines.size() || (!pseudo.empty() && pseudo.back() == '\n')) out += '\n';
  }
  return out;
}

TfIdfIndex load_stage1(const PipelineConfig& config) {
  try {
    if (config.corpus.empty()) throw ConfigError("stage1.corpus is not set");
    const auto samples = load_task_corpus(config.resolve(config.corpus));
    if (!config.index_cache.empty()) {
      const auto cache = config.resolve(config.index_cache);
      if (auto cached = load_index(cache, samples, config.index)) return std::move(*cached);
      TfIdfIndex built = build_index(samples, config.index);
      save_index(built, cache);
      return built;
    }
    return build_index(samples, config.index);
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(Stage::Config, e.what());
  } catch (const std::exception& e) {
    throw StageError(Stage::Stage1, e.what());
  }
}

Stage2Converter Stage2Converter::with_rules(RuleSet rules) {
  Stage2Converter c;
  c.engine_ = Engine::Rules;
  c.rules_ = std::move(rules);
  return c;
}

Stage2Converter Stage2Converter::with_model(TrainedModel model) {
  Stage2Converter c;
  c.engine_ = Engine::Model;
  c.model_ = std::move(model);
  return c;
}

namespace {

std::string strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

RenderedLine model_line(const TrainedModel& model, const std::string& code) {
  const std::string text = strip(code);
  if (model.vocab.encode(text).empty()) return {"EXECUTE: " + text, true};
  return {translate(model, text), false};
}

}  // namespace

PseudoDoc Stage2Converter::convert(std::string_view code) const {
  if (engine_ == Engine::Model) {
    return convert_program(code, [this](const LineNode& node) { return model_line(*model_, node.raw); });
  }
  return convert_program(code, *rules_);
}

RenderedLine Stage2Converter::convert_line(std::string_view line) const {
  const std::string text = strip(line);
  if (engine_ == Engine::Model) return model_line(*model_, text);
  const auto nodes = parse_program(text);
  for (const auto& node : nodes) {
    if (node.kind != LineKind::Blank && node.kind != LineKind::Comment) return apply_rules(node, *rules_);
  }
  return {"", false};
}

Stage2Converter load_stage2(const PipelineConfig& config) {
  try {
    if (config.engine == Engine::Model) {
      if (config.model.empty()) throw ConfigError("stage2.engine=model requires stage2.model");
      return Stage2Converter::with_model(load_model(config.resolve(config.model)));
    }
    if (config.engine != Engine::Rules) throw ConfigError("stage2.engine must be rules or model");
    std::optional<std::filesystem::path> path;
    if (!config.rules.empty()) path = config.resolve(config.rules);
    return Stage2Converter::with_rules(load_ruleset(path));
  } catch (const ConfigError& e) {
    throw StageError(Stage::Config, e.what());
  } catch (const std::exception& e) {
    throw StageError(Stage::Stage2, e.what());
  }
}

PipelineResult run_pipeline(std::string_view story, const TfIdfIndex& index, const Stage2Converter& stage2) {
  using Clock = std::chrono::steady_clock;
  PipelineResult result;
  result.story = std::string(story);
  result.engine = stage2.engine();

  const auto t0 = Clock::now();
  try {
    auto candidates = generate_code(story, index, 1);
    if (candidates.empty()) throw Error("no candidate retrieved");
    CodeCandidate& top = candidates.front();
    result.code = std::move(top.code);
    result.similarity = top.similarity;
    result.source_id = top.source_id;
    result.syntax_fixes = std::move(top.syntax_fixes);
  } catch (const std::exception& e) {
    throw StageError(Stage::Stage1, e.what());
  }
  const auto t1 = Clock::now();
  try {
    const PseudoDoc doc = stage2.convert(result.code);
    result.raw_pseudocode = format_txt(doc);
    result.fallback_lines = doc.fallback_count();
  } catch (const std::exception& e) {
    throw StageError(Stage::Stage2, e.what());
  }
  result.pseudocode = simplify_text(result.raw_pseudocode);
  const auto t2 = Clock::now();
  result.timings.stage1_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  result.timings.stage2_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
  return result;
}

PipelineResult run_pipeline(std::string_view story, const PipelineConfig& config) {
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw StageError(Stage::Config, e.what());
  }
  const TfIdfIndex index = load_stage1(config);
  const Stage2Converter stage2 = load_stage2(config);
  return run_pipeline(story, index, stage2);
}

std::string result_json(const PipelineResult& r, bool include_timings) {
  nlohmann::ordered_json j;
  j["story"] = r.story;
  j["engine"] = to_string(r.engine);
  nlohmann::ordered_json s1;
  s1["engine"] = "retrieval";
  s1["source_id"] = r.source_id;
  // Six decimals keep the record identical across libm implementations.
  s1["similarity"] = std::round(r.similarity * 1e6) / 1e6;
  s1["code"] = r.code;
  auto fixes = nlohmann::ordered_json::array();
  for (const auto& f : r.syntax_fixes) fixes.push_back(describe(f));
  s1["syntax_fixes"] = fixes;
  j["stage1"] = s1;
  nlohmann::ordered_json s2;
  s2["raw"] = r.raw_pseudocode;
  s2["fallback_lines"] = r.fallback_lines;
  j["stage2"] = s2;
  j["pseudocode"] = r.pseudocode;
  if (include_timings) {
    j["timings_ms"] = {{"stage1", r.timings.stage1_ms}, {"stage2", r.timings.stage2_ms}};
  }
  return j.dump(2) + "\n";
}

// ------------------------------------------------------------------ evaluation

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

EvalReport evaluate_stage(const std::vector<ParallelPair>& pairs, const Hypothesizer& hypothesize, Engine engine,
                          const BleuSettings& settings, ScoreTokens tokens) {
  if (pairs.empty()) throw StageError(Stage::Metric, "empty corpus");
  const std::size_t n = pairs.size();
  std::vector<RenderedLine> hyps(n);
  std::vector<std::exception_ptr> errors(n);

  // Per-sample work is independent; the first error in corpus order wins.
#pragma omp parallel for schedule(dynamic) if (n > 16)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      hyps[i] = hypothesize(pairs[i].source);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.engine = engine;
  std::vector<BleuPair> scored;
  scored.reserve(n);
  try {
    double sentence_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      TokenSeq cand, ref;
      if (tokens == ScoreTokens::Code) {
        cand = tokenize_code(hyps[i].text);
        ref = tokenize_code(pairs[i].target);
      } else {
        cand = tokenize_for_bleu(hyps[i].text);
        ref = tokenize_for_bleu(pairs[i].target);
      }
      if (cand.empty()) cand.push_back("");
      EvalSample sample{pairs[i].source, join(ref), join(cand), 0.0};
      sample.sentence_bleu = sentence_bleu(cand, {ref}, {.max_n = settings.max_n, .smoothing = true}).score;
      sentence_sum += sample.sentence_bleu;
      report.samples.push_back(std::move(sample));
      report.fallback_lines += hyps[i].fallback ? 1 : 0;
      scored.push_back({std::move(cand), {std::move(ref)}});
    }
    report.corpus = corpus_bleu(scored, settings);
    report.mean_sentence_bleu = sentence_sum / static_cast<double>(n);
  } catch (const std::exception& e) {
    throw StageError(Stage::Metric, e.what());
  }
  return report;
}

EvalReport evaluate_stage2(const std::vector<ParallelPair>& pairs, const Stage2Converter& stage2,
                           const BleuSettings& settings) {
  const Hypothesizer h = [&stage2](const std::string& source) {
    try {
      return stage2.convert_line(source);
    } catch (const LexError&) {
      return RenderedLine{"EXECUTE: " + strip(source), true};
    } catch (const std::exception& e) {
      throw StageError(Stage::Stage2, e.what());
    }
  };
  const ScoreTokens tokens = stage2.engine() == Engine::Model ? ScoreTokens::Code : ScoreTokens::Whitespace;
  return evaluate_stage(pairs, h, stage2.engine(), settings, tokens);
}

EvalReport evaluate_stage1(const std::vector<TaskSample>& samples, const TfIdfIndex& index,
                           const BleuSettings& settings) {
  std::vector<ParallelPair> pairs;
  pairs.reserve(samples.size());
  for (const auto& s : samples) pairs.push_back({s.description, s.code});
  const Hypothesizer h = [&index](const std::string& query) {
    try {
      return RenderedLine{generate_code(query, index, 1).front().code, false};
    } catch (const std::exception& e) {
      throw StageError(Stage::Stage1, e.what());
    }
  };
  return evaluate_stage(pairs, h, Engine::Retrieval, settings);
}

std::string format_eval_report(const EvalReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "engine        %12s\nconfig_hash   %s\nsamples       %12zu\nfallbacks     %12zu\n",
                to_string(r.engine), r.config_hash.empty() ? "-" : r.config_hash.c_str(), r.samples.size(),
                r.fallback_lines);
  out += buf;
  out += format_report(r.corpus);
  std::snprintf(buf, sizeof buf, "sentence_mean %12.6f\n", r.mean_sentence_bleu);
  out += buf;
  return out;
}

std::string eval_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["engine"] = to_string(r.engine);
  j["config_hash"] = r.config_hash;
  j["samples"] = r.samples.size();
  j["fallback_lines"] = r.fallback_lines;
  j["corpus"] = nlohmann::ordered_json::parse(report_json(r.corpus));
  j["sentence_mean"] = r.mean_sentence_bleu;
  auto records = nlohmann::ordered_json::array();
  for (const auto& s : r.samples) {
    records.push_back({{"source", s.source},
                       {"reference", s.reference},
                       {"hypothesis", s.hypothesis},
                       {"sentence_bleu", s.sentence_bleu}});
  }
  j["records"] = records;
  return j.dump(2) + "\n";
}

void write_eval_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  write_file(dir / (stem + ".txt"), format_eval_report(report));
  write_file(dir / (stem + ".json"), eval_json(report));
}

}  // namespace s2p
