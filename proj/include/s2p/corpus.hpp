#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "s2p/error.hpp"
#include "s2p/random.hpp"

namespace s2p {

/// One text-to-code record: a task description and its reference program.
struct TaskSample {
  std::int64_t id = 0;
  std::string description;
  std::string code;

  bool operator==(const TaskSample&) const = default;
};

/// One aligned code/pseudocode unit. Neither side contains a newline.
struct ParallelPair {
  std::string source;
  std::string target;

  bool operator==(const ParallelPair&) const = default;
};

struct ParallelCorpus {
  std::vector<ParallelPair> pairs;  // blank-flagged pairs already removed
  std::size_t total_lines = 0;      // aligned lines before blank filtering
  std::size_t dropped() const { return total_lines - pairs.size(); }
};

using SplitRatios = std::array<double, 3>;  // train, valid, test

inline constexpr SplitRatios kDefaultSplitRatios{0.9, 0.05, 0.05};
inline constexpr std::uint64_t kDefaultSplitSeed = 13;

template <class T>
struct CorpusSplit {
  std::vector<T> train;
  std::vector<T> valid;
  std::vector<T> test;
  std::uint64_t seed = 0;
  SplitRatios ratios{};
};

// Task corpus: one JSON object per line with keys "id", "text", "code".
std::vector<TaskSample> load_task_corpus(const std::filesystem::path& path);
std::vector<TaskSample> parse_task_corpus(const std::string& contents);
std::string format_task_record(const TaskSample& sample);
void write_task_corpus(const std::filesystem::path& path, const std::vector<TaskSample>& samples);

// Parallel corpus: two line-aligned plain-text files. A pair with a blank or
// whitespace-only side is dropped.
ParallelCorpus load_parallel_corpus(const std::filesystem::path& source_path,
                                    const std::filesystem::path& target_path);
void write_parallel_corpus(const std::filesystem::path& source_path,
                           const std::filesystem::path& target_path,
                           const std::vector<ParallelPair>& pairs);

/// Split sizes for n items: valid and test are floor(n * ratio), train takes
/// the remainder. Throws CorpusError on bad ratios or n == 0.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

template <class T>
CorpusSplit<T> split_corpus(const std::vector<T>& samples, const SplitRatios& ratios,
                            std::uint64_t seed) {
  const auto sizes = split_sizes(samples.size(), ratios);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SeededRng rng(seed);
  rng.shuffle(order);

  CorpusSplit<T> out;
  out.seed = seed;
  out.ratios = ratios;
  std::size_t k = 0;
  for (; k < sizes[0]; ++k) out.train.push_back(samples[order[k]]);
  for (; k < sizes[0] + sizes[1]; ++k) out.valid.push_back(samples[order[k]]);
  for (; k < order.size(); ++k) out.test.push_back(samples[order[k]]);
  return out;
}

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace s2p
