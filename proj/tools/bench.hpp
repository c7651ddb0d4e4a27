#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"
#include "tome/config.hpp"
#include "tome/vit.hpp"
#include "tome/weights.hpp"

namespace tome::tools {

struct BenchSettings {
  int trials = 10;
  int batch = 4;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = auto; always capped by TOME_THREADS
};

/// One benchmark measurement. Timing covers forward passes only; weight
/// loading and input generation happen beforehand.
struct BenchRow {
  std::string schedule_desc;
  int r = -1;
  long total_merged = 0;
  int final_tokens = 0;
  double gflops = 0.0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double img_per_s = 0.0;
  std::string config_hash;
  std::string logits_hash;
};

/// Runs `trials` timed passes of a `batch` of seeded random images through
/// the model under the given schedule. Logits are independent of the thread
/// count; their hash is taken once during an untimed warmup pass.
BenchRow run_bench(const ModelConfig& cfg, const ModelWeights<float>& weights,
                   const ScheduleSpec& spec, const BenchSettings& settings);

std::string bench_csv_header();
std::string bench_csv_row(const BenchRow& row);

}  // namespace tome::tools
