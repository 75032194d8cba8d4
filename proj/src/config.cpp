#include "s2p/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>

#include "s2p/hash.hpp"

namespace s2p {

const char* to_string(Engine engine) {
  switch (engine) {
    case Engine::Rules: return "rules";
    case Engine::Model: return "model";
    case Engine::Retrieval: return "retrieval";
  }
  return "?";
}

Engine parse_engine(std::string_view name) {
  if (name == "rules") return Engine::Rules;
  if (name == "model") return Engine::Model;
  if (name == "retrieval") return Engine::Retrieval;
  throw ConfigError("unknown engine `" + std::string(name) + "` (expected rules, model or retrieval)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("bad value `" + std::string(value) + "` for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("bad boolean `" + std::string(value) + "` for " + std::string(key));
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kBoostNames[6] = {"noun", "verb", "adj", "num", "func", "other"};

using Setter = std::function<void(PipelineConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const auto table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto text = [](std::string PipelineConfig::*field) {
      return [field](PipelineConfig& c, std::string_view, std::string_view v) { c.*field = std::string(v); };
    };
    auto model_int = [](int ModelConfig::*field) {
      return [field](PipelineConfig& c, std::string_view k, std::string_view v) {
        c.model_config.*field = parse_number<int>(k, v);
      };
    };
    auto train_double = [](double TrainConfig::*field) {
      return [field](PipelineConfig& c, std::string_view k, std::string_view v) {
        c.train_config.*field = parse_number<double>(k, v);
      };
    };

    t["stage1.corpus"] = text(&PipelineConfig::corpus);
    t["stage1.index_cache"] = text(&PipelineConfig::index_cache);
    for (std::size_t i = 0; i < 6; ++i) {
      t[std::string("stage1.boost.") + kBoostNames[i]] = [i](PipelineConfig& c, std::string_view k,
                                                             std::string_view v) {
        c.index.tag_boost[i] = parse_number<double>(k, v);
      };
    }
    t["stage1.stopword_weight"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.index.stopword_weight = parse_number<double>(k, v);
    };
    t["stage2.engine"] = [](PipelineConfig& c, std::string_view, std::string_view v) { c.engine = parse_engine(v); };
    t["stage2.rules"] = text(&PipelineConfig::rules);
    t["stage2.model"] = text(&PipelineConfig::model);
    t["bleu.max_n"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.bleu.max_n = parse_number<int>(k, v);
    };
    t["bleu.smoothing"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.bleu.smoothing = parse_bool(k, v);
    };
    t["split.seed"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.split_seed = parse_number<std::uint64_t>(k, v);
    };
    t["split.ratios"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      SplitRatios r{};
      std::size_t i = 0;
      std::size_t pos = 0;
      while (true) {
        const auto comma = v.find(',', pos);
        if (i == 3) throw ConfigError("split.ratios needs exactly three values");
        r[i++] = parse_number<double>(k, trim(v.substr(pos, comma == std::string_view::npos ? v.npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
      }
      if (i != 3) throw ConfigError("split.ratios needs exactly three values");
      c.split_ratios = r;
    };
    t["output.dir"] = text(&PipelineConfig::output_dir);

    t["model.d_model"] = model_int(&ModelConfig::d_model);
    t["model.heads"] = model_int(&ModelConfig::heads);
    t["model.encoder_layers"] = model_int(&ModelConfig::encoder_layers);
    t["model.decoder_layers"] = model_int(&ModelConfig::decoder_layers);
    t["model.ffn_dim"] = model_int(&ModelConfig::ffn_dim);
    t["model.max_len"] = model_int(&ModelConfig::max_len);
    t["model.dropout"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.model_config.dropout = parse_number<double>(k, v);
    };
    t["model.seed"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.model_config.seed = parse_number<std::uint64_t>(k, v);
    };

    t["train.epochs"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.train_config.epochs = parse_number<int>(k, v);
    };
    t["train.learning_rate"] = train_double(&TrainConfig::learning_rate);
    t["train.beta1"] = train_double(&TrainConfig::beta1);
    t["train.beta2"] = train_double(&TrainConfig::beta2);
    t["train.eps"] = train_double(&TrainConfig::adam_eps);
    t["train.batch_size"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.train_config.batch_size = parse_number<int>(k, v);
    };
    t["train.min_freq"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.min_freq = parse_number<int>(k, v);
    };
    return t;
  }();
  return table;
}

}  // namespace

std::filesystem::path PipelineConfig::resolve(const std::string& configured) const {
  if (configured.empty()) return {};
  const std::filesystem::path p(configured);
  return p.is_absolute() ? p : base_dir / p;
}

void PipelineConfig::set_seed(std::uint64_t seed) {
  split_seed = seed;
  model_config.seed = seed;
}

std::string PipelineConfig::canonical() const {
  std::string out;
  auto line = [&out](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  line("bleu.max_n", std::to_string(bleu.max_n));
  line("bleu.smoothing", bleu.smoothing ? "true" : "false");
  line("model.d_model", std::to_string(model_config.d_model));
  line("model.decoder_layers", std::to_string(model_config.decoder_layers));
  line("model.dropout", fmt_double(model_config.dropout));
  line("model.encoder_layers", std::to_string(model_config.encoder_layers));
  line("model.ffn_dim", std::to_string(model_config.ffn_dim));
  line("model.heads", std::to_string(model_config.heads));
  line("model.max_len", std::to_string(model_config.max_len));
  line("model.seed", std::to_string(model_config.seed));
  line("output.dir", output_dir);
  line("split.ratios", fmt_double(split_ratios[0]) + "," + fmt_double(split_ratios[1]) + "," +
                           fmt_double(split_ratios[2]));
  line("split.seed", std::to_string(split_seed));
  for (std::size_t i = 0; i < 6; ++i) line(std::string("stage1.boost.") + kBoostNames[i], fmt_double(index.tag_boost[i]));
  line("stage1.corpus", corpus);
  line("stage1.index_cache", index_cache);
  line("stage1.stopword_weight", fmt_double(index.stopword_weight));
  line("stage2.engine", to_string(engine));
  line("stage2.model", model);
  line("stage2.rules", rules);
  line("train.batch_size", std::to_string(train_config.batch_size));
  line("train.beta1", fmt_double(train_config.beta1));
  line("train.beta2", fmt_double(train_config.beta2));
  line("train.epochs", std::to_string(train_config.epochs));
  line("train.eps", fmt_double(train_config.adam_eps));
  line("train.learning_rate", fmt_double(train_config.learning_rate));
  line("train.min_freq", std::to_string(min_freq));
  return out;
}

std::string PipelineConfig::hash() const {
  Fnv1a h;
  h.update(canonical());
  return h.hex();
}

void PipelineConfig::validate() const {
  if (engine == Engine::Model && model.empty()) throw ConfigError("stage2.engine=model requires stage2.model");
  if (bleu.max_n < 1) throw ConfigError("bleu.max_n must be at least 1");
  double sum = 0.0;
  for (double r : split_ratios) {
    if (!(r >= 0.0)) throw ConfigError("split.ratios must be nonnegative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split.ratios must sum to 1");
  for (double b : index.tag_boost) {
    if (!(b > 0.0)) throw ConfigError("stage1.boost values must be positive");
  }
  if (!(index.stopword_weight > 0.0)) throw ConfigError("stage1.stopword_weight must be positive");
  if (min_freq < 1) throw ConfigError("train.min_freq must be at least 1");
  model_config.validate();
  train_config.validate();
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  PipelineConfig config;
  config.base_dir = base_dir;
  std::map<std::string, int, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key `" + std::string(key) + "`");
    }
    if (const auto [prev, fresh] = seen.emplace(std::string(key), line_no); !fresh) {
      throw ConfigError("config line " + std::to_string(line_no) + ": `" + std::string(key) +
                        "` already set at line " + std::to_string(prev->second));
    }
    try {
      it->second(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw ConfigError("config file not found: " + path.string());
  }
  return parse_config(text, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::optional<std::filesystem::path> config_path_from(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return std::filesystem::path(*flag);
  if (const char* env = std::getenv("STORY2PSEUDO_CONFIG"); env != nullptr && *env != '\0') {
    return std::filesystem::path(env);
  }
  return std::nullopt;
}

}  // namespace s2p
