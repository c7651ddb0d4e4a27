#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bench.hpp"
#include "common.hpp"
#include "tome/config_json.hpp"
#include "tome/ppm.hpp"
#include "tome/vit.hpp"
#include "tome/weights.hpp"
#include "verify.hpp"
#include "visualize.hpp"

namespace {

using namespace tome;
using namespace tome::tools;

struct ModelArgs {
  std::string config_path;
  std::string weights_path;
  std::uint64_t seed = 0;
};

void add_model_options(CLI::App* cmd, ModelArgs& args) {
  cmd->add_option("--config", args.config_path, "model config JSON")->required();
  cmd->add_option("--weights", args.weights_path,
                  "weight container; omit to initialize from --seed");
  cmd->add_option("--seed", args.seed, "seed for weights, inputs and sampling");
}

std::pair<ModelConfig, ModelWeights<float>> load_model(const ModelArgs& args) {
  ModelConfig cfg = load_config(args.config_path);
  TensorStore store = args.weights_path.empty()
                          ? init_weights(cfg, args.seed)
                          : load_weights(args.weights_path);
  return {cfg, ModelWeights<float>::from_store(store, cfg)};
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + out_path + " for writing");
  f << text;
}

int cmd_verify(const VerifyOptions& options) {
  const VerifyReport report = run_verify(options);
  std::cout << report.text;
  return report.ok ? 0 : 1;
}

int cmd_bench(const ModelArgs& args, const std::vector<std::string>& schedules,
              const BenchSettings& settings, const std::string& out_path) {
  const auto [cfg, weights] = load_model(args);
  std::string csv = bench_csv_header() + "\n";
  for (const std::string& spec_text : schedules) {
    const ScheduleSpec spec = parse_schedule_spec(spec_text, cfg.depth);
    csv += bench_csv_row(run_bench(cfg, weights, spec, settings)) + "\n";
  }
  emit(csv, out_path);
  return 0;
}

int cmd_sweep(const ModelArgs& args, long total, int samples,
              const BenchSettings& settings, const std::string& out_path) {
  const auto [cfg, weights] = load_model(args);
  std::string csv = "label," + bench_csv_header() + "\n";
  const auto add_row = [&](const std::string& label, const Schedule& schedule,
                           int r_label) {
    ScheduleSpec spec;
    spec.schedule = schedule;
    spec.descriptor = schedule_to_list_string(schedule);
    spec.r = r_label;
    csv += label + "," + bench_csv_row(run_bench(cfg, weights, spec, settings)) + "\n";
  };
  add_row("constant", constant_composition(total, cfg.depth),
          total % cfg.depth == 0 ? static_cast<int>(total / cfg.depth) : -1);
  add_row("decreasing", decreasing_composition(total, cfg.depth),
          total % cfg.depth == 0 ? static_cast<int>(total / cfg.depth) : -1);
  for (int i = 0; i < samples; ++i) {
    add_row("sample" + std::to_string(i),
            sample_random_schedule(total, cfg.depth,
                                   mix_seed(settings.seed, 0x5eedu + static_cast<std::uint64_t>(i))),
            -1);
  }
  emit(csv, out_path);
  return 0;
}

int cmd_visualize(const ModelArgs& args, const std::string& image_path,
                  const std::string& out_path,
                  const std::string& schedule_override) {
  auto [cfg, weights] = load_model(args);
  if (!schedule_override.empty()) {
    cfg.tome.schedule = parse_schedule_spec(schedule_override, cfg.depth).schedule;
  }
  const PpmImage input = read_ppm(image_path);
  const VisualizeResult result = render_merge_map(cfg, weights, input, args.seed);
  write_ppm(result.image, out_path);
  std::cout << "wrote " << out_path << ": " << result.n_regions
            << " token regions over " << cfg.n_patches() << " patches\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"token-merging ViT: verification, benchmarks and visualization"};
  app.require_subcommand(1);

  VerifyOptions verify_options;
  auto* verify = app.add_subcommand("verify", "run the oracle suites");
  verify->add_option("--seed", verify_options.seed, "base seed");
  verify->add_option("--cases", verify_options.cases, "cases per suite")
      ->check(CLI::PositiveNumber);
  verify->add_option("--fault-inject", verify_options.fault,
                     "deliberately break an invariant (test hook)")
      ->group("");  // hidden

  ModelArgs bench_args;
  BenchSettings bench_settings;
  std::vector<std::string> bench_schedules;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "time forward passes, emit CSV");
  add_model_options(bench, bench_args);
  bench->add_option("--schedule", bench_schedules,
                    "const:R | dec:R | list:a,b,... (repeatable)")
      ->required();
  bench->add_option("--trials", bench_settings.trials)->check(CLI::PositiveNumber);
  bench->add_option("--batch", bench_settings.batch)->check(CLI::PositiveNumber);
  bench->add_option("--threads", bench_settings.threads,
                    "0 = hardware concurrency; TOME_THREADS caps this");
  bench->add_option("--out", bench_out, "CSV output path (default stdout)");

  ModelArgs sweep_args;
  BenchSettings sweep_settings;
  sweep_settings.trials = 3;
  sweep_settings.batch = 1;
  long sweep_total = 0;
  int sweep_samples = 0;
  std::string sweep_out;
  auto* sweep = app.add_subcommand(
      "sweep", "sample schedules at a fixed merge total, emit CSV");
  add_model_options(sweep, sweep_args);
  sweep->add_option("--total", sweep_total, "tokens merged over the whole model")
      ->required()
      ->check(CLI::NonNegativeNumber);
  sweep->add_option("--samples", sweep_samples, "random schedules to draw")
      ->check(CLI::NonNegativeNumber);
  sweep->add_option("--trials", sweep_settings.trials)->check(CLI::PositiveNumber);
  sweep->add_option("--batch", sweep_settings.batch)->check(CLI::PositiveNumber);
  sweep->add_option("--threads", sweep_settings.threads);
  sweep->add_option("--out", sweep_out, "CSV output path (default stdout)");

  ModelArgs vis_args;
  std::string vis_image, vis_out, vis_schedule;
  auto* visualize = app.add_subcommand(
      "visualize", "render patch-to-token provenance of an image");
  add_model_options(visualize, vis_args);
  visualize->add_option("--image", vis_image, "input PPM (P6)")->required();
  visualize->add_option("--out", vis_out, "output PPM path")->required();
  visualize->add_option("--schedule", vis_schedule, "override config schedule");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) return cmd_verify(verify_options);
    if (bench->parsed()) {
      bench_settings.seed = bench_args.seed;
      return cmd_bench(bench_args, bench_schedules, bench_settings, bench_out);
    }
    if (sweep->parsed()) {
      sweep_settings.seed = sweep_args.seed;
      return cmd_sweep(sweep_args, sweep_total, sweep_samples, sweep_settings,
                       sweep_out);
    }
    if (visualize->parsed()) {
      return cmd_visualize(vis_args, vis_image, vis_out, vis_schedule);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
