#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "tome/config_json.hpp"
#include "tome/rng.hpp"

namespace tome::tools {

namespace {

using Clock = std::chrono::steady_clock;

double percentile(std::vector<double> sorted, double q) {
  const auto idx = static_cast<std::size_t>(
      std::llround(q * static_cast<double>(sorted.size() - 1)));
  return sorted[std::min(idx, sorted.size() - 1)];
}

void forward_batch(const std::vector<Image<float>>& images,
                   const ModelConfig& cfg, const ModelWeights<float>& weights,
                   std::uint64_t seed, int threads,
                   std::vector<VectorX<float>>* logits_out) {
  const auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto result = model_forward(images[i], cfg, weights, mix_seed(seed, i));
      if (logits_out) (*logits_out)[i] = std::move(result.logits);
    }
  };
  if (threads <= 1) {
    run_range(0, images.size());
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t per = (images.size() + static_cast<std::size_t>(threads) - 1) /
                          static_cast<std::size_t>(threads);
  for (int t = 0; t < threads; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * per;
    const std::size_t end = std::min(images.size(), begin + per);
    if (begin >= end) break;
    workers.emplace_back(run_range, begin, end);
  }
  for (auto& w : workers) w.join();
}

}  // namespace

BenchRow run_bench(const ModelConfig& cfg, const ModelWeights<float>& weights,
                   const ScheduleSpec& spec, const BenchSettings& settings) {
  if (settings.trials < 1 || settings.batch < 1) {
    throw std::invalid_argument("bench: trials and batch must be >= 1");
  }
  ModelConfig run_cfg = cfg;
  run_cfg.tome.schedule = spec.schedule;
  run_cfg.validate();

  std::vector<Image<float>> images;
  images.reserve(static_cast<std::size_t>(settings.batch));
  for (int b = 0; b < settings.batch; ++b) {
    images.push_back(random_image<float>(
        run_cfg, mix_seed(settings.seed, 0x1000u + static_cast<std::uint64_t>(b))));
  }
  const int threads = resolve_thread_count(settings.threads, settings.batch);

  BenchRow row;
  row.schedule_desc = spec.descriptor;
  row.r = spec.r;

  // untimed warmup: token accounting and the logits hash
  std::vector<VectorX<float>> logits(images.size());
  forward_batch(images, run_cfg, weights, settings.seed, threads, &logits);
  {
    const auto traced =
        model_forward(images.front(), run_cfg, weights, mix_seed(settings.seed, 0));
    row.total_merged = traced.trace.total_merged();
    row.final_tokens = run_cfg.n_tokens() - static_cast<int>(row.total_merged);
  }
  std::uint64_t h = fnv1a64("logits");
  for (const auto& l : logits) {
    h = fnv1a64(l.data(), static_cast<std::size_t>(l.size()) * sizeof(float), h);
  }
  row.logits_hash = hex64(h);
  row.config_hash = hex64(fnv1a64(config_to_json(run_cfg)));
  row.gflops = flop_estimate(run_cfg, run_cfg.tome.schedule) * 1e-9;

  std::vector<double> times_ms;
  times_ms.reserve(static_cast<std::size_t>(settings.trials));
  for (int t = 0; t < settings.trials; ++t) {
    const auto start = Clock::now();
    forward_batch(images, run_cfg, weights, settings.seed, threads, nullptr);
    const auto stop = Clock::now();
    times_ms.push_back(
        std::chrono::duration<double, std::milli>(stop - start).count());
  }
  std::sort(times_ms.begin(), times_ms.end());
  double sum = 0.0;
  for (double t : times_ms) sum += t;
  row.mean_ms = sum / static_cast<double>(times_ms.size());
  row.p50_ms = percentile(times_ms, 0.50);
  row.p95_ms = percentile(times_ms, 0.95);
  row.img_per_s = 1000.0 * settings.batch / row.mean_ms;
  return row;
}

std::string bench_csv_header() {
  return "schedule,r,total_merged,final_tokens,gflops,mean_ms,p50_ms,p95_ms,"
         "img_per_s,config_hash,logits_hash";
}

std::string bench_csv_row(const BenchRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%ld,%d,%.6f,%.6f,%.6f,%.6f,%.3f",
                row.r, row.total_merged, row.final_tokens, row.gflops,
                row.mean_ms, row.p50_ms, row.p95_ms, row.img_per_s);
  return csv_field(row.schedule_desc) + "," + buf + "," + row.config_hash +
         "," + row.logits_hash;
}

}  // namespace tome::tools
