#include "s2p/corpus.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace s2p {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\f\v") == std::string::npos;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw CorpusError("cannot read " + path.string());
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << contents;
  if (!out) throw Error("cannot write " + path.string());
}

std::vector<TaskSample> parse_task_corpus(const std::string& contents) {
  std::vector<TaskSample> samples;
  std::set<std::int64_t> seen;
  const auto lines = split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (is_blank(line)) continue;
    const std::string where = "line " + std::to_string(i + 1);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError("malformed record at " + where + ": " + e.what());
    }
    if (!rec.is_object()) throw CorpusError("malformed record at " + where + ": not an object");
    for (const char* key : {"id", "text", "code"}) {
      if (!rec.contains(key)) {
        throw CorpusError("malformed record at " + where + ": missing `" + key + "`");
      }
    }
    if (!rec["id"].is_number_integer()) {
      throw CorpusError("malformed record at " + where + ": `id` must be an integer");
    }
    if (!rec["text"].is_string() || !rec["code"].is_string()) {
      throw CorpusError("malformed record at " + where + ": `text` and `code` must be strings");
    }
    TaskSample s;
    s.id = rec["id"].get<std::int64_t>();
    s.description = rec["text"].get<std::string>();
    s.code = rec["code"].get<std::string>();
    if (is_blank(s.description)) throw CorpusError("malformed record at " + where + ": empty `text`");
    if (s.code.empty()) throw CorpusError("malformed record at " + where + ": empty `code`");
    if (!seen.insert(s.id).second) {
      throw CorpusError("duplicate id " + std::to_string(s.id) + " at " + where);
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw CorpusError("no records");
  return samples;
}

std::vector<TaskSample> load_task_corpus(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CorpusError("missing file " + path.string());
  try {
    return parse_task_corpus(read_file(path));
  } catch (const CorpusError& e) {
    throw CorpusError(path.string() + ": " + e.what());
  }
}

std::string format_task_record(const TaskSample& sample) {
  nlohmann::ordered_json rec;
  rec["id"] = sample.id;
  rec["text"] = sample.description;
  rec["code"] = sample.code;
  return rec.dump();
}

void write_task_corpus(const std::filesystem::path& path, const std::vector<TaskSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += format_task_record(s) + "\n";
  write_file(path, out);
}

ParallelCorpus load_parallel_corpus(const std::filesystem::path& source_path,
                                    const std::filesystem::path& target_path) {
  for (const auto& p : {source_path, target_path}) {
    if (!std::filesystem::exists(p)) throw CorpusError("missing file " + p.string());
  }
  const auto src = split_lines(read_file(source_path));
  const auto tgt = split_lines(read_file(target_path));
  if (src.size() != tgt.size()) {
    throw CorpusError("line-count mismatch: " + std::to_string(src.size()) + " vs " +
                      std::to_string(tgt.size()));
  }
  ParallelCorpus corpus;
  corpus.total_lines = src.size();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (is_blank(src[i]) || is_blank(tgt[i])) continue;
    corpus.pairs.push_back({src[i], tgt[i]});
  }
  return corpus;
}

void write_parallel_corpus(const std::filesystem::path& source_path,
                           const std::filesystem::path& target_path,
                           const std::vector<ParallelPair>& pairs) {
  std::string src, tgt;
  for (const auto& p : pairs) {
    src += p.source + "\n";
    tgt += p.target + "\n";
  }
  write_file(source_path, src);
  write_file(target_path, tgt);
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  if (n == 0) throw CorpusError("cannot split an empty corpus");
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw CorpusError("split ratios must be non-negative");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw CorpusError("split ratios must sum to 1");
  // The 1e-9 slack keeps products like 10 * 0.1 from flooring one short.
  auto take = [n](double r) {
    return std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9)));
  };
  const std::size_t valid = take(ratios[1]);
  const std::size_t test = std::min(n - valid, take(ratios[2]));
  return {n - valid - test, valid, test};
}

}  // namespace s2p
