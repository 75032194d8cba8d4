#include <doctest.h>

#include <cstdlib>

#include <json.hpp>

#include "s2p/pipeline.hpp"
#include "support.hpp"

using namespace s2p;

namespace {

std::string stage_error(const std::function<void()>& body) {
  try {
    body();
  } catch (const StageError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("simplify_text examples") {
    CHECK(simplify_text("DISPLAY x\nDISPLAY x") == "DISPLAY x");
    CHECK(simplify_text("  SET  x  TO  1 ") == "  SET x TO 1");
    CHECK(simplify_text("A\n\n\nB\n") == "A\n\nB\n");
    CHECK(simplify_text("") == "");
    const std::string done = "FUNCTION f\n    RETURN 1\nEND FUNCTION\n";
    CHECK(simplify_text(done) == done);
  }

  TEST_CASE("simplify_text is idempotent and keeps distinct lines") {
    SeededRng rng(4);
    const std::vector<std::string> pool{"SET x TO 1", "  DISPLAY  y", "END IF   ", "", "    RETURN\tz", "A  B"};
    for (int i = 0; i < 500; ++i) {
      std::string text;
      const auto n = rng.below(10);
      for (std::uint64_t k = 0; k < n; ++k) text += test::pick(rng, pool) + "\n";
      const auto once = simplify_text(text);
      CHECK(simplify_text(once) == once);
      // Every distinct non-blank input line survives in simplified form.
      for (const auto& l : pool) {
        if (l.empty() || text.find(l + "\n") == std::string::npos) continue;
        CHECK(once.find(simplify_text(l)) != std::string::npos);
      }
    }
  }

  TEST_CASE("stage error prefixes and exit codes") {
    CHECK(std::string(StageError(Stage::Stage2, "boom").what()) == "stage2: boom");
    CHECK(exit_code(Stage::Config) == 2);
    CHECK(exit_code(Stage::Stage1) == 3);
    CHECK(exit_code(Stage::Stage2) == 4);
    CHECK(exit_code(Stage::Metric) == 5);
  }

  TEST_CASE("story equal to an indexed description") {
    const auto corpus = load_task_corpus(test::fixture("tasks/mbpp_sample.jsonl"));
    const auto index = build_index(corpus);
    const auto stage2 = Stage2Converter::with_rules(builtin_ruleset());
    for (const auto& s : corpus) {
      const auto r = run_pipeline(s.description, index, stage2);
      CHECK(r.source_id == s.id);
      CHECK(r.code == correct_syntax(s.code).code);
      CHECK(r.raw_pseudocode == format_txt(convert_program(r.code, builtin_ruleset())));
      CHECK(r.pseudocode == simplify_text(r.raw_pseudocode));
      CHECK(r.timings.stage1_ms >= 0.0);
      CHECK(r.timings.stage2_ms >= 0.0);
    }
  }

  TEST_CASE("demo story reproduces the golden record") {
    const auto config = load_config(test::fixture("demo/demo.cfg"));
    const auto story = test::demo_story();
    const auto first = result_json(run_pipeline(story, config));
    CHECK(first == test::slurp(test::fixture("demo/golden_result.json")));
    CHECK(result_json(run_pipeline(story, config)) == first);
    const auto timed = nlohmann::json::parse(result_json(run_pipeline(story, config), true));
    CHECK(timed.contains("timings_ms"));
  }

  TEST_CASE("missing rule table is a stage 2 error") {
    auto config = load_config(test::fixture("demo/demo.cfg"));
    config.rules = "no-such.rules";
    const auto msg = stage_error([&] { run_pipeline("compute the median", config); });
    CHECK(msg.rfind("stage2: ruleset not found", 0) == 0);
  }

  TEST_CASE("missing corpus is a stage 1 error and a bad config a config error") {
    auto config = load_config(test::fixture("demo/demo.cfg"));
    config.corpus = "missing.jsonl";
    CHECK(stage_error([&] { run_pipeline("x", config); }).rfind("stage1: ", 0) == 0);
    config.corpus.clear();
    CHECK(stage_error([&] { run_pipeline("x", config); }).rfind("config: ", 0) == 0);
    config = load_config(test::fixture("demo/demo.cfg"));
    config.engine = Engine::Model;
    CHECK(stage_error([&] { run_pipeline("x", config); }).rfind("config: ", 0) == 0);
  }

  TEST_CASE("index cache is written and reused") {
    test::ScratchDir dir("cache");
    auto config = load_config(test::fixture("demo/demo.cfg"));
    config.index_cache = (dir / "idx.txt").string();
    const auto a = load_stage1(config);
    CHECK(std::filesystem::exists(dir / "idx.txt"));
    const auto b = load_stage1(config);
    CHECK(a.doc_vectors() == b.doc_vectors());
  }

  TEST_CASE("rule engine scored against its own output") {
    const auto stage2 = Stage2Converter::with_rules(builtin_ruleset());
    std::vector<ParallelPair> pairs;
    SeededRng rng(12);
    for (int i = 0; i < 200; ++i) {
      const auto line = test::random_statement(rng);
      if (line.front() == '#') continue;
      pairs.push_back({line, stage2.convert_line(line).text});
    }
    const auto report = evaluate_stage2(pairs, stage2, {});
    CHECK(report.corpus.score == 1.0);
    CHECK(report.samples.size() == pairs.size());
    CHECK(report.engine == Engine::Rules);
  }

  TEST_CASE("evaluation errors and fallbacks") {
    const auto stage2 = Stage2Converter::with_rules(builtin_ruleset());
    CHECK(stage_error([&] { evaluate_stage2({}, stage2, {}); }) == "metric: empty corpus");
    const auto r = evaluate_stage2({{"s = 'open", "SET s TO 'open"}, {"x = 1", "SET x TO 1"}}, stage2, {});
    CHECK(r.fallback_lines == 1);
    CHECK(r.samples[0].hypothesis == "EXECUTE: s = 'open");
    const Hypothesizer empty = [](const std::string&) { return RenderedLine{"", false}; };
    const auto e = evaluate_stage({{"a", "b c"}}, empty, Engine::Rules, {});
    CHECK(e.corpus.score == 0.0);
  }

  TEST_CASE("stage 1 evaluation and report files") {
    const auto corpus = load_task_corpus(test::fixture("tasks/mbpp_sample.jsonl"));
    const auto index = build_index(corpus);
    auto report = evaluate_stage1(corpus, index, {});
    CHECK(report.engine == Engine::Retrieval);
    CHECK(report.corpus.score == 1.0);
    report.config_hash = "0123456789abcdef";
    test::ScratchDir dir("eval");
    write_eval_report(report, dir.path(), "s1");
    CHECK(test::slurp(dir / "s1.txt") == format_eval_report(report));
    CHECK(test::slurp(dir / "s1.txt").find("config_hash   0123456789abcdef") != std::string::npos);
    const auto j = nlohmann::json::parse(test::slurp(dir / "s1.json"));
    CHECK(j["config_hash"] == "0123456789abcdef");
    CHECK(j["records"].size() == corpus.size());
    CHECK(j["corpus"]["score"].get<double>() == 1.0);
  }
}

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const auto c = parse_config("");
    CHECK(c.engine == Engine::Rules);
    CHECK(c.bleu.max_n == 4);
    CHECK_FALSE(c.bleu.smoothing);
    CHECK(c.split_seed == 13);
    CHECK(c.split_ratios == kDefaultSplitRatios);
    CHECK(c.train_config.epochs == 5);
    CHECK(c.index == IndexOptions{});
  }

  TEST_CASE("keys parse") {
    const auto c = parse_config(
        "# comment\n"
        "stage1.corpus = tasks.jsonl\n"
        "stage1.boost.noun = 2.5\n"
        "stage1.stopword_weight = 0.5\n"
        "stage2.engine = model\n"
        "stage2.model = m.bin\n"
        "bleu.max_n = 2\n"
        "bleu.smoothing = true\n"
        "split.seed = 7\n"
        "split.ratios = 0.8,0.1,0.1\n"
        "model.d_model = 32\n"
        "model.heads = 2\n"
        "train.epochs = 40\n"
        "train.learning_rate = 0.001\n"
        "train.batch_size = 4\n"
        "train.min_freq = 2\n",
        "/base");
    CHECK(c.resolve(c.corpus) == std::filesystem::path("/base/tasks.jsonl"));
    CHECK(c.resolve("/abs/x") == std::filesystem::path("/abs/x"));
    CHECK(c.resolve("").empty());
    CHECK(c.index.tag_boost[static_cast<int>(PosTag::Noun)] == 2.5);
    CHECK(c.index.stopword_weight == 0.5);
    CHECK(c.engine == Engine::Model);
    CHECK(c.bleu.max_n == 2);
    CHECK(c.bleu.smoothing);
    CHECK(c.split_seed == 7);
    CHECK(c.split_ratios == SplitRatios{0.8, 0.1, 0.1});
    CHECK(c.model_config.d_model == 32);
    CHECK(c.model_config.heads == 2);
    CHECK(c.train_config.epochs == 40);
    CHECK(c.train_config.learning_rate == 0.001);
    CHECK(c.train_config.batch_size == 4);
    CHECK(c.min_freq == 2);
  }

  TEST_CASE("errors name the line") {
    auto message = [](const std::string& text) {
      try {
        parse_config(text).validate();
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("a.b = 1").find("config line 1: unknown key") != std::string::npos);
    CHECK(message("\nsplit.seed = 1\nsplit.seed = 2").find("config line 3") != std::string::npos);
    CHECK(message("bleu.max_n = four").find("bad value") != std::string::npos);
    CHECK(message("just words").find("expected key=value") != std::string::npos);
    CHECK(message("bleu.smoothing = maybe").find("bad boolean") != std::string::npos);
    CHECK(message("split.ratios = 0.5,0.5").find("three values") != std::string::npos);
    CHECK(message("split.ratios = 0.5,0.4,0.4").find("sum to 1") != std::string::npos);
    CHECK(message("stage2.engine = neural").find("unknown engine") != std::string::npos);
    CHECK(message("stage2.engine = model").find("requires stage2.model") != std::string::npos);
    CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), ConfigError);
  }

  TEST_CASE("hash follows the canonical listing") {
    auto a = parse_config("split.seed = 1\n");
    auto b = parse_config("# same\nsplit.seed=1\n");
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.set_seed(2);
    CHECK(b.split_seed == 2);
    CHECK(b.model_config.seed == 2);
    CHECK(a.hash() != b.hash());
  }

  TEST_CASE("config path from flag or environment") {
    ::unsetenv("STORY2PSEUDO_CONFIG");
    CHECK_FALSE(config_path_from(std::nullopt).has_value());
    ::setenv("STORY2PSEUDO_CONFIG", "/tmp/env.cfg", 1);
    CHECK(config_path_from(std::nullopt) == std::filesystem::path("/tmp/env.cfg"));
    CHECK(config_path_from(std::string("/tmp/flag.cfg")) == std::filesystem::path("/tmp/flag.cfg"));
    ::setenv("STORY2PSEUDO_CONFIG", "", 1);
    CHECK_FALSE(config_path_from(std::nullopt).has_value());
    ::unsetenv("STORY2PSEUDO_CONFIG");
  }
}
