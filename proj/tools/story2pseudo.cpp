// story2pseudo: user story -> code -> pseudocode, plus the tools around it.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "s2p/config.hpp"
#include "s2p/corpus.hpp"
#include "s2p/hash.hpp"
#include "s2p/pipeline.hpp"
#include "s2p/retrieval.hpp"
#include "s2p/ruleconv.hpp"
#include "s2p/tinyformer.hpp"

namespace fs = std::filesystem;
using namespace s2p;

namespace {

struct Globals {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

Globals g;

void note(const std::string& msg) {
  if (g.verbose) std::cerr << "[story2pseudo] " << msg << "\n";
}

// Paths given on the command line are relative to the working directory.
std::string cli_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

PipelineConfig effective_config() {
  PipelineConfig config;
  if (const auto path = config_path_from(g.config_path)) {
    note("config " + path->string());
    config = load_config(*path);
  }
  if (g.seed) config.set_seed(*g.seed);
  return config;
}

int guarded(Stage default_stage, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.stage());
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return exit_code(Stage::Config);
  } catch (const MetricError& e) {
    std::cerr << "error: metric: " << e.what() << "\n";
    return exit_code(Stage::Metric);
  } catch (const std::exception& e) {
    std::cerr << "error: " << to_string(default_stage) << ": " << e.what() << "\n";
    return exit_code(default_stage);
  }
}

template <class T, class Key>
std::string members_hash(const std::vector<T>& items, Key key) {
  Fnv1a h;
  for (const auto& it : items) h.field(key(it));
  return h.hex();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convert user stories to pseudocode: retrieval for text->code, rules or a small transformer for "
               "code->pseudocode."};
  app.require_subcommand(1);
  app.add_option("--config", g.config_path, "key=value config file (default: $STORY2PSEUDO_CONFIG)");
  app.add_option("--seed", g.seed, "Overrides split.seed and model.seed");
  app.add_flag("--verbose", g.verbose, "Progress notes on stderr");

  int status = 0;

  // ---- convert
  auto* convert = app.add_subcommand("convert", "Story text to pseudocode through both stages");
  std::string story, story_file, convert_out, convert_corpus, convert_engine, convert_rules, convert_model;
  bool with_timings = false;
  auto* story_opt = convert->add_option("--story", story, "Story text");
  convert->add_option("--story-file", story_file, "File holding the story text")->excludes(story_opt);
  convert->add_option("--corpus", convert_corpus, "Task corpus (overrides stage1.corpus)");
  convert->add_option("--engine", convert_engine, "rules or model (overrides stage2.engine)");
  convert->add_option("--rules", convert_rules, "Rule table (overrides stage2.rules)");
  convert->add_option("--model", convert_model, "Model file (overrides stage2.model)");
  convert->add_option("--out", convert_out, "Write the result record (JSON) here");
  convert->add_flag("--timings", with_timings, "Include stage timings in the record");
  convert->callback([&] {
    status = guarded(Stage::Config, [&] {
      PipelineConfig config = effective_config();
      if (!convert_corpus.empty()) config.corpus = cli_path(convert_corpus);
      if (!convert_engine.empty()) config.engine = parse_engine(convert_engine);
      if (!convert_rules.empty()) config.rules = cli_path(convert_rules);
      if (!convert_model.empty()) config.model = cli_path(convert_model);
      std::string text = story;
      if (!story_file.empty()) {
        try {
          text = read_file(story_file);
        } catch (const Error& e) {
          throw ConfigError(std::string("story file: ") + e.what());
        }
      }
      while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
      if (text.empty()) throw ConfigError("no story given (--story or --story-file)");
      const PipelineResult result = run_pipeline(text, config);
      note("retrieved sample " + std::to_string(result.source_id) + " similarity " +
           std::to_string(result.similarity));
      std::cout << result.pseudocode;
      if (!convert_out.empty()) write_file(convert_out, result_json(result, with_timings));
    });
  });

  // ---- stage1
  auto* stage1 = app.add_subcommand("stage1", "Retrieve code for a task description");
  std::string s1_corpus, s1_query;
  int s1_k = 1;
  stage1->add_option("--corpus", s1_corpus, "Task corpus (overrides stage1.corpus)");
  stage1->add_option("--query", s1_query, "Task description")->required();
  stage1->add_option("--k", s1_k, "Number of candidates")->check(CLI::PositiveNumber);
  stage1->callback([&] {
    status = guarded(Stage::Stage1, [&] {
      PipelineConfig config = effective_config();
      if (!s1_corpus.empty()) config.corpus = cli_path(s1_corpus);
      const TfIdfIndex index = load_stage1(config);
      note("index: " + std::to_string(index.samples().size()) + " samples, " +
           std::to_string(index.vocabulary_size()) + " terms");
      int rank = 0;
      for (const auto& c : generate_code(s1_query, index, s1_k)) {
        std::printf("# rank %d  id %lld  similarity %.6f  engine retrieval\n", ++rank,
                    static_cast<long long>(c.source_id), c.similarity);
        for (const auto& f : c.syntax_fixes) std::printf("# fix %s\n", describe(f).c_str());
        std::printf("%s%s", c.code.c_str(), !c.code.empty() && c.code.back() == '\n' ? "" : "\n");
      }
    });
  });

  // ---- rulegen
  auto* rulegen = app.add_subcommand("rulegen", "Rule-based conversion of a .py file to .txt");
  std::string rg_in, rg_out, rg_rules;
  rulegen->add_option("--in", rg_in, "Source file")->required();
  rulegen->add_option("--out", rg_out, "Output .txt (stdout when omitted)");
  rulegen->add_option("--rules", rg_rules, "Rule table (overrides stage2.rules)");
  rulegen->callback([&] {
    status = guarded(Stage::Stage2, [&] {
      PipelineConfig config = effective_config();
      config.engine = Engine::Rules;
      if (!rg_rules.empty()) config.rules = cli_path(rg_rules);
      const Stage2Converter conv = load_stage2(config);
      const PseudoDoc doc = conv.convert(read_file(rg_in));
      note(std::to_string(doc.fallback_count()) + " fallback line(s)");
      if (rg_out.empty()) {
        std::cout << format_txt(doc);
      } else {
        emit_txt(doc, rg_out);
      }
    });
  });

  // ---- train
  auto* train_cmd = app.add_subcommand("train", "Train the transformer on a parallel corpus");
  std::vector<std::string> tr_pairs;
  std::string tr_out, tr_report;
  std::optional<int> tr_epochs;
  train_cmd->add_option("--pairs", tr_pairs, "Source and target files")->expected(2)->required();
  train_cmd->add_option("--out", tr_out, "Model file to write")->required();
  train_cmd->add_option("--epochs", tr_epochs, "Overrides train.epochs");
  train_cmd->add_option("--report", tr_report, "Training report (default <out>.report.txt)");
  train_cmd->callback([&] {
    status = guarded(Stage::Stage2, [&] {
      PipelineConfig config = effective_config();
      if (tr_epochs) config.train_config.epochs = *tr_epochs;
      config.validate();
      const ParallelCorpus corpus = load_parallel_corpus(tr_pairs[0], tr_pairs[1]);
      note(std::to_string(corpus.pairs.size()) + " pairs (" + std::to_string(corpus.dropped()) + " blank dropped)");
      const Vocab vocab = build_vocab(corpus.pairs, config.min_freq);
      TrainReport report;
      const TrainedModel model = train(corpus.pairs, vocab, config.model_config, config.train_config, report);
      note("trained in " + std::to_string(report.wall_seconds) + " s");
      save_model(model, tr_out);
      std::string text = "config_hash    " + config.hash() + "\nvocab_size     " + std::to_string(vocab.size()) +
                         "\npairs          " + std::to_string(corpus.pairs.size()) + "\n" +
                         format_train_report(report);
      Fnv1a h;
      h.update(serialize_model(model));
      text += "model_hash     " + h.hex() + "\n";
      write_file(tr_report.empty() ? tr_out + ".report.txt" : tr_report, text);
      std::cout << text;
    });
  });

  // ---- translate
  auto* translate_cmd = app.add_subcommand("translate", "Model-based conversion of a .py file to .txt");
  std::string tl_model, tl_in, tl_out;
  translate_cmd->add_option("--model", tl_model, "Model file (overrides stage2.model)");
  translate_cmd->add_option("--in", tl_in, "Source file")->required();
  translate_cmd->add_option("--out", tl_out, "Output .txt (stdout when omitted)");
  translate_cmd->callback([&] {
    status = guarded(Stage::Stage2, [&] {
      PipelineConfig config = effective_config();
      config.engine = Engine::Model;
      if (!tl_model.empty()) config.model = cli_path(tl_model);
      if (config.model.empty()) throw ConfigError("no model given (--model or stage2.model)");
      const Stage2Converter conv = load_stage2(config);
      const PseudoDoc doc = conv.convert(read_file(tl_in));
      if (tl_out.empty()) {
        std::cout << format_txt(doc);
      } else {
        emit_txt(doc, tl_out);
      }
    });
  });

  // ---- eval
  auto* eval = app.add_subcommand("eval", "BLEU evaluation of one engine");
  std::string ev_engine = "rules", ev_tasks, ev_rules, ev_model, ev_dir, ev_name = "eval", ev_subset = "all";
  std::vector<std::string> ev_pairs;
  std::optional<int> ev_max_n;
  bool ev_smoothing = false;
  eval->add_option("--engine", ev_engine, "rules, model or retrieval")->check(CLI::IsMember({"rules", "model", "retrieval"}));
  auto* ev_pairs_opt = eval->add_option("--pairs", ev_pairs, "Source and reference files (rules, model)")->expected(2);
  eval->add_option("--tasks", ev_tasks, "Task corpus (retrieval)")->excludes(ev_pairs_opt);
  eval->add_option("--rules", ev_rules, "Rule table (overrides stage2.rules)");
  eval->add_option("--model", ev_model, "Model file (overrides stage2.model)");
  eval->add_option("--subset", ev_subset, "all, train, valid or test of the seeded split")
      ->check(CLI::IsMember({"all", "train", "valid", "test"}));
  eval->add_option("--max-n", ev_max_n, "Overrides bleu.max_n");
  eval->add_flag("--smoothing", ev_smoothing, "Smooth corpus-level precisions");
  eval->add_option("--report-dir", ev_dir, "Report directory (overrides output.dir)");
  eval->add_option("--name", ev_name, "Report file stem");
  eval->callback([&] {
    status = guarded(Stage::Metric, [&] {
      PipelineConfig config = effective_config();
      config.engine = parse_engine(ev_engine);
      if (!ev_rules.empty()) config.rules = cli_path(ev_rules);
      if (!ev_model.empty()) config.model = cli_path(ev_model);
      if (ev_max_n) config.bleu.max_n = *ev_max_n;
      if (ev_smoothing) config.bleu.smoothing = true;
      if (!ev_dir.empty()) config.output_dir = cli_path(ev_dir);
      config.validate();

      auto pick = [&](const auto& items) {
        if (ev_subset == "all") return items;
        auto split = split_corpus(items, config.split_ratios, config.split_seed);
        return ev_subset == "train" ? split.train : ev_subset == "valid" ? split.valid : split.test;
      };

      EvalReport report;
      if (config.engine == Engine::Retrieval) {
        if (ev_tasks.empty()) throw ConfigError("eval --engine retrieval needs --tasks");
        std::vector<TaskSample> samples;
        try {
          samples = load_task_corpus(ev_tasks);
        } catch (const Error& e) {
          throw StageError(Stage::Stage1, e.what());
        }
        if (config.corpus.empty()) config.corpus = cli_path(ev_tasks);
        const TfIdfIndex index = load_stage1(config);
        report = evaluate_stage1(pick(samples), index, config.bleu);
      } else {
        if (ev_pairs.size() != 2) throw ConfigError("eval --engine " + ev_engine + " needs --pairs SRC REF");
        ParallelCorpus corpus;
        try {
          corpus = load_parallel_corpus(ev_pairs[0], ev_pairs[1]);
        } catch (const Error& e) {
          throw StageError(Stage::Metric, e.what());
        }
        const Stage2Converter conv = load_stage2(config);
        report = evaluate_stage2(pick(corpus.pairs), conv, config.bleu);
      }
      report.config_hash = config.hash();
      write_eval_report(report, config.resolve(config.output_dir), ev_name);
      std::cout << format_eval_report(report);
    });
  });

  // ---- split
  auto* split = app.add_subcommand("split", "Seeded train/valid/test split of a corpus");
  std::string sp_tasks, sp_out;
  std::vector<std::string> sp_pairs;
  auto* sp_pairs_opt = split->add_option("--pairs", sp_pairs, "Source and target files")->expected(2);
  split->add_option("--tasks", sp_tasks, "Task corpus")->excludes(sp_pairs_opt);
  split->add_option("--out-dir", sp_out, "Directory for the split files")->required();
  split->callback([&] {
    const Stage stage = sp_tasks.empty() ? Stage::Stage2 : Stage::Stage1;
    status = guarded(stage, [&] {
      PipelineConfig config = effective_config();
      config.validate();
      const fs::path dir(sp_out);
      fs::create_directories(dir);
      std::string report = "config_hash   " + config.hash() + "\nseed          " + std::to_string(config.split_seed) +
                           "\n";
      char buf[128];
      std::snprintf(buf, sizeof buf, "ratios        %.17g,%.17g,%.17g\n", config.split_ratios[0],
                    config.split_ratios[1], config.split_ratios[2]);
      report += buf;
      auto describe_part = [&](const char* name, std::size_t size, const std::string& hash) {
        std::snprintf(buf, sizeof buf, "%-13s %8zu  %s\n", name, size, hash.c_str());
        report += buf;
      };
      if (!sp_tasks.empty()) {
        const auto samples = load_task_corpus(sp_tasks);
        const auto parts = split_corpus(samples, config.split_ratios, config.split_seed);
        const auto key = [](const TaskSample& s) { return std::to_string(s.id); };
        for (const auto& [name, part] : {std::pair{"train", &parts.train}, {"valid", &parts.valid}, {"test", &parts.test}}) {
          write_task_corpus(dir / (std::string(name) + ".jsonl"), *part);
          describe_part(name, part->size(), members_hash(*part, key));
        }
      } else {
        if (sp_pairs.size() != 2) throw ConfigError("split needs --tasks FILE or --pairs SRC TGT");
        const auto corpus = load_parallel_corpus(sp_pairs[0], sp_pairs[1]);
        const auto parts = split_corpus(corpus.pairs, config.split_ratios, config.split_seed);
        const auto key = [](const ParallelPair& p) { return p.source + "\n" + p.target; };
        for (const auto& [name, part] : {std::pair{"train", &parts.train}, {"valid", &parts.valid}, {"test", &parts.test}}) {
          write_parallel_corpus(dir / (std::string(name) + ".src"), dir / (std::string(name) + ".tgt"), *part);
          describe_part(name, part->size(), members_hash(*part, key));
        }
      }
      write_file(dir / "split.txt", report);
      std::cout << report;
    });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(Stage::Config);
  }
  return status;
}
