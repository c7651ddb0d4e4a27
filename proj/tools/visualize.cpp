#include "visualize.hpp"

#include <array>
#include <cmath>

#include "tome/rng.hpp"

namespace tome::tools {

namespace {

std::array<std::uint8_t, 3> border_color(int min_source_id) {
  Rng rng(mix_seed(0x544f4d45u, static_cast<std::uint64_t>(min_source_id)));
  return {static_cast<std::uint8_t>(rng.bounded(256)),
          static_cast<std::uint8_t>(rng.bounded(256)),
          static_cast<std::uint8_t>(rng.bounded(256))};
}

}  // namespace

VisualizeResult render_merge_map(const ModelConfig& cfg,
                                 const ModelWeights<float>& weights,
                                 const PpmImage& input, std::uint64_t seed) {
  if (input.width != cfg.image_size || input.height != cfg.image_size) {
    throw ConfigError("image is " + std::to_string(input.width) + "x" +
                      std::to_string(input.height) + ", config expects " +
                      std::to_string(cfg.image_size) + "x" +
                      std::to_string(cfg.image_size));
  }
  if (cfg.channels_in != 3) {
    throw ConfigError("visualize needs channels_in = 3 (PPM input is RGB)");
  }

  Image<float> model_input;
  model_input.planes.resize(3);
  for (auto& plane : model_input.planes) {
    plane.resize(cfg.image_size, cfg.image_size);
  }
  for (int y = 0; y < cfg.image_size; ++y) {
    for (int x = 0; x < cfg.image_size; ++x) {
      for (int c = 0; c < 3; ++c) {
        model_input.planes[static_cast<std::size_t>(c)](y, x) =
            static_cast<float>(input.at(y, x, c)) / 255.0f;
      }
    }
  }
  const auto result = model_forward(model_input, cfg, weights, seed);
  const auto& sources = result.trace.final_sources;
  const int grid = cfg.grid();
  const int ps = cfg.patch_size;
  const int n_patches = cfg.n_patches();

  VisualizeResult out;
  out.patch_token.assign(static_cast<std::size_t>(n_patches), -1);
  for (std::size_t t = 0; t < sources.size(); ++t) {
    for (int s : sources[t]) {
      if (s < n_patches) out.patch_token[static_cast<std::size_t>(s)] = static_cast<int>(t);
    }
  }
  for (int t : out.patch_token) {
    if (t < 0) throw std::logic_error("token provenance does not cover the patch grid");
  }

  // mean color per patch, then per token region
  std::vector<std::array<double, 3>> patch_mean(static_cast<std::size_t>(n_patches));
  for (int p = 0; p < n_patches; ++p) {
    const int py = p / grid, px = p % grid;
    std::array<double, 3> acc{};
    for (int y = 0; y < ps; ++y) {
      for (int x = 0; x < ps; ++x) {
        for (int c = 0; c < 3; ++c) {
          acc[static_cast<std::size_t>(c)] +=
              input.at(py * ps + y, px * ps + x, c);
        }
      }
    }
    for (auto& v : acc) v /= static_cast<double>(ps) * ps;
    patch_mean[static_cast<std::size_t>(p)] = acc;
  }

  std::vector<std::array<double, 3>> region_sum(sources.size(), {0, 0, 0});
  std::vector<int> region_count(sources.size(), 0);
  std::vector<int> region_min_source(sources.size(), -1);
  for (int p = 0; p < n_patches; ++p) {
    const auto t = static_cast<std::size_t>(out.patch_token[static_cast<std::size_t>(p)]);
    for (int c = 0; c < 3; ++c) {
      region_sum[t][static_cast<std::size_t>(c)] +=
          patch_mean[static_cast<std::size_t>(p)][static_cast<std::size_t>(c)];
    }
    region_count[t] += 1;
    if (region_min_source[t] < 0 || p < region_min_source[t]) {
      region_min_source[t] = p;
    }
  }
  for (int c : region_count) out.n_regions += c > 0 ? 1 : 0;

  out.image.width = input.width;
  out.image.height = input.height;
  out.image.rgb.assign(static_cast<std::size_t>(input.width) * input.height * 3, 0);
  for (int p = 0; p < n_patches; ++p) {
    const int py = p / grid, px = p % grid;
    const auto t = static_cast<std::size_t>(out.patch_token[static_cast<std::size_t>(p)]);
    std::array<std::uint8_t, 3> fill;
    for (int c = 0; c < 3; ++c) {
      fill[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(
          std::lround(region_sum[t][static_cast<std::size_t>(c)] / region_count[t]));
    }
    for (int y = 0; y < ps; ++y) {
      for (int x = 0; x < ps; ++x) {
        for (int c = 0; c < 3; ++c) {
          out.image.at(py * ps + y, px * ps + x, c) = fill[static_cast<std::size_t>(c)];
        }
      }
    }
  }

  // 1px border where a patch meets a different token or the image edge
  const auto token_at = [&](int py, int px) {
    if (py < 0 || py >= grid || px < 0 || px >= grid) return -1;
    return out.patch_token[static_cast<std::size_t>(py * grid + px)];
  };
  for (int p = 0; p < n_patches; ++p) {
    const int py = p / grid, px = p % grid;
    const int t = out.patch_token[static_cast<std::size_t>(p)];
    const auto color = border_color(region_min_source[static_cast<std::size_t>(t)]);
    const auto draw = [&](int y, int x) {
      for (int c = 0; c < 3; ++c) {
        out.image.at(y, x, c) = color[static_cast<std::size_t>(c)];
      }
    };
    if (token_at(py - 1, px) != t) {
      for (int x = 0; x < ps; ++x) draw(py * ps, px * ps + x);
    }
    if (token_at(py + 1, px) != t) {
      for (int x = 0; x < ps; ++x) draw(py * ps + ps - 1, px * ps + x);
    }
    if (token_at(py, px - 1) != t) {
      for (int y = 0; y < ps; ++y) draw(py * ps + y, px * ps);
    }
    if (token_at(py, px + 1) != t) {
      for (int y = 0; y < ps; ++y) draw(py * ps + y, px * ps + ps - 1);
    }
  }
  return out;
}

}  // namespace tome::tools
