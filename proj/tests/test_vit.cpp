#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "reference_vit.hpp"
#include "tome/config_json.hpp"
#include "tome/rng.hpp"
#include "tome/vit.hpp"
#include "tome/weights.hpp"

using namespace tome;

namespace {

ModelConfig tiny_config(int depth = 4, int schedule_r = 0) {
  ModelConfig cfg;
  cfg.image_size = 64;
  cfg.patch_size = 16;
  cfg.channels_in = 3;
  cfg.width = 32;
  cfg.depth = depth;
  cfg.heads = 4;
  cfg.mlp_ratio = 2;
  cfg.num_classes = 7;
  cfg.tome.schedule = constant_schedule(schedule_r, depth);
  return cfg;
}

bool sources_partition(const std::vector<std::vector<int>>& sources, int n_ids) {
  std::vector<int> seen(static_cast<std::size_t>(n_ids), 0);
  long listed = 0;
  for (const auto& src : sources) {
    for (int s : src) {
      if (s < 0 || s >= n_ids || seen[static_cast<std::size_t>(s)]++) return false;
      ++listed;
    }
  }
  return listed == n_ids;
}

}  // namespace

TEST_CASE("patch embedding geometry") {
  SUBCASE("224px at patch 16 yields 197 tokens") {
    ModelConfig cfg = tiny_config();
    cfg.image_size = 224;
    cfg.tome.schedule = constant_schedule(0, cfg.depth);
    CHECK(cfg.n_tokens() == 197);
    CHECK(cfg.n_patches() == 196);
  }
  SUBCASE("32px at patch 16 yields 5 tokens") {
    ModelConfig cfg = tiny_config();
    cfg.image_size = 32;
    CHECK(cfg.n_tokens() == 5);
  }
  SUBCASE("zero weights give zero features, unit sizes") {
    ModelConfig cfg = tiny_config();
    auto store = init_weights(cfg, 1);
    for (auto& [name, tensor] : store) {
      std::fill(tensor.data.begin(), tensor.data.end(), 0.0f);
    }
    const auto w = ModelWeights<float>::from_store(store, cfg);
    const auto state = patch_embed(random_image<float>(cfg, 2), cfg, w);
    CHECK(state.n_tokens() == cfg.n_tokens());
    CHECK(state.features.cwiseAbs().maxCoeff() == 0.0f);
    CHECK(state.sizes.minCoeff() == 1);
    CHECK(state.sizes.maxCoeff() == 1);
    CHECK(state.sources[0] == std::vector<int>{cfg.n_patches()});
    CHECK(state.sources[1] == std::vector<int>{0});
  }
  SUBCASE("image dimensions must match the config") {
    ModelConfig cfg = tiny_config();
    const auto w = ModelWeights<float>::from_store(init_weights(cfg, 1), cfg);
    ModelConfig other = cfg;
    other.image_size = 32;
    CHECK_THROWS_AS(patch_embed(random_image<float>(other, 2), cfg, w),
                    std::invalid_argument);
  }
}

TEST_CASE("r=0 block leaves sizes untouched; r=1 conserves total size") {
  ModelConfig cfg = tiny_config();
  const auto w = ModelWeights<float>::from_store(init_weights(cfg, 3), cfg);
  auto state = patch_embed(random_image<float>(cfg, 4), cfg, w);
  const long total = state.total_size();

  auto trace0 = block_forward(state, 0, w.blocks[0], cfg, 0);
  CHECK(trace0.r_effective == 0);
  CHECK(state.n_tokens() == cfg.n_tokens());
  CHECK(state.sizes.maxCoeff() == 1);

  auto trace1 = block_forward(state, 1, w.blocks[1], cfg, 0);
  CHECK(trace1.r_effective == 1);
  CHECK(state.n_tokens() == cfg.n_tokens() - 1);
  CHECK(state.total_size() == total);
}

TEST_CASE("similarity feature choice changes the plan") {
  // keys vote to merge tokens 2 and 1; features vote for 2 and 3
  ModelConfig cfg = tiny_config(1);
  cfg.tome.schedule = constant_schedule(1, 1);
  const auto w = ModelWeights<float>::from_store(init_weights(cfg, 5), cfg);
  const auto image = random_image<float>(cfg, 6);

  cfg.tome.feature = SimilarityFeature::k;
  auto state_k = patch_embed(image, cfg, w);
  const auto trace_k = block_forward(state_k, 1, w.blocks[0], cfg, 0);

  cfg.tome.feature = SimilarityFeature::x;
  auto state_x = patch_embed(image, cfg, w);
  const auto trace_x = block_forward(state_x, 1, w.blocks[0], cfg, 0);

  // with random weights the K-space and X-space argmaxes almost surely differ;
  // both plans are valid single merges either way
  CHECK(trace_k.plan.r_effective == 1);
  CHECK(trace_x.plan.r_effective == 1);
  CHECK(trace_k.plan.edges != trace_x.plan.edges);
}

TEST_CASE("model forward: schedule accounting and conservation") {
  ModelConfig cfg = tiny_config(3, 2);
  const auto w = ModelWeights<float>::from_store(init_weights(cfg, 7), cfg);
  const auto result = model_forward(random_image<float>(cfg, 8), cfg, w);

  CHECK(result.logits.size() == cfg.num_classes);
  REQUIRE(result.trace.blocks.size() == 3);
  int tokens = cfg.n_tokens();
  for (const auto& b : result.trace.blocks) {
    CHECK(b.tokens_in == tokens);
    CHECK(b.tokens_out == tokens - b.r_effective);
    CHECK(b.r_effective <= b.r_requested);
    tokens = b.tokens_out;
  }
  CHECK(sources_partition(result.trace.final_sources, cfg.n_patches() + 1));

  // class token survives at index 0
  const auto& cls_sources = result.trace.final_sources[0];
  CHECK(std::find(cls_sources.begin(), cls_sources.end(), cfg.n_patches()) !=
        cls_sources.end());
}

TEST_CASE("aggressive schedules clamp at the per-layer matching capacity") {
  // 17 tokens, r=16: layer 1 can merge at most 8, then 4, 2, 1, 1, ...
  ModelConfig cfg = tiny_config(4, 16);
  cfg.image_size = 64;
  const auto w = ModelWeights<float>::from_store(init_weights(cfg, 9), cfg);
  const auto result = model_forward(random_image<float>(cfg, 10), cfg, w);
  const std::vector<int> expect_eff{8, 4, 2, 1};
  for (int i = 0; i < 4; ++i) {
    CHECK(result.trace.blocks[static_cast<std::size_t>(i)].r_effective ==
          expect_eff[static_cast<std::size_t>(i)]);
  }
  CHECK(sources_partition(result.trace.final_sources, cfg.n_patches() + 1));
}

TEST_CASE("the r=8, depth-24 run merges to the bipartite floor") {
  // 197 tokens, constant 8: 23 full layers then a 13-token layer whose
  // alternating split holds 7 A-tokens (one protected), capping the last
  // merge at 6 and the final count at 7
  ModelConfig cfg;
  cfg.image_size = 224;
  cfg.patch_size = 16;
  cfg.width = 16;
  cfg.depth = 24;
  cfg.heads = 2;
  cfg.mlp_ratio = 1;
  cfg.num_classes = 2;
  cfg.tome.schedule = constant_schedule(8, 24);
  const auto w = ModelWeights<float>::from_store(init_weights(cfg, 11), cfg);
  const auto result = model_forward(random_image<float>(cfg, 12), cfg, w);

  CHECK(result.trace.total_merged() == 190);
  CHECK(result.trace.final_sources.size() == 7);
  for (int i = 0; i < 23; ++i) {
    CHECK(result.trace.blocks[static_cast<std::size_t>(i)].r_effective == 8);
  }
  CHECK(result.trace.blocks[23].r_effective == 6);
  CHECK(sources_partition(result.trace.final_sources, 197));
}

TEST_CASE("schedule zero forward is bitwise equal to the reference ViT") {
  ModelConfig cfg = tiny_config(3, 0);
  const auto w = ModelWeights<float>::from_store(init_weights(cfg, 21), cfg);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto image = random_image<float>(cfg, 100 + s);
    const auto got = model_forward(image, cfg, w);
    const auto want = reference::ref_forward(image, cfg, w);
    REQUIRE(got.logits.size() == want.size());
    for (Eigen::Index i = 0; i < want.size(); ++i) {
      CHECK(got.logits[i] == want[i]);  // exact float equality
    }
  }
}

TEST_CASE("permuting identical patches does not change the logits") {
  ModelConfig cfg = tiny_config(3, 2);
  const auto w = ModelWeights<float>::from_store(init_weights(cfg, 31), cfg);
  auto image = random_image<float>(cfg, 32);
  // duplicate patch 3 into patch 7, then swap the two in the permuted copy
  const int ps = cfg.patch_size;
  const auto patch_origin = [&](int p) {
    return std::pair{p / cfg.grid() * ps, p % cfg.grid() * ps};
  };
  const auto [y3, x3] = patch_origin(3);
  const auto [y7, x7] = patch_origin(7);
  for (auto& plane : image.planes) {
    plane.block(y7, x7, ps, ps) = plane.block(y3, x3, ps, ps);
  }
  Image<float> permuted = image;
  for (auto& plane : permuted.planes) {
    const MatrixX<float> tmp = plane.block(y3, x3, ps, ps);
    plane.block(y3, x3, ps, ps) = plane.block(y7, x7, ps, ps);
    plane.block(y7, x7, ps, ps) = tmp;
  }
  const auto a = model_forward(image, cfg, w);
  const auto b = model_forward(permuted, cfg, w);
  for (Eigen::Index i = 0; i < a.logits.size(); ++i) {
    CHECK(a.logits[i] == b.logits[i]);
  }
}

TEST_CASE("every reduction/partition/combine knob runs and conserves") {
  ModelConfig cfg = tiny_config(3, 2);
  const auto w = ModelWeights<float>::from_store(init_weights(cfg, 41), cfg);
  const auto image = random_image<float>(cfg, 42);

  for (const auto partition : {PartitionStyle::alternating, PartitionStyle::sequential,
                               PartitionStyle::random}) {
    for (const auto feature : {SimilarityFeature::k, SimilarityFeature::q,
                               SimilarityFeature::v, SimilarityFeature::x,
                               SimilarityFeature::x_pre}) {
      cfg.tome.partition = partition;
      cfg.tome.feature = feature;
      const auto result = model_forward(image, cfg, w, 99);
      CHECK(result.trace.final_sources.size() ==
            static_cast<std::size_t>(cfg.n_tokens() - result.trace.total_merged()));
      CHECK(sources_partition(result.trace.final_sources, cfg.n_patches() + 1));
      // the class token never moves off index 0
      const auto& cls = result.trace.final_sources[0];
      CHECK(std::find(cls.begin(), cls.end(), cfg.n_patches()) != cls.end());
    }
  }

  cfg.tome = ToMeConfig{};
  cfg.tome.schedule = constant_schedule(2, 3);
  cfg.tome.reduction = ReductionKind::prune_random;
  const auto pruned = model_forward(image, cfg, w, 7);
  CHECK(pruned.trace.total_merged() == 6);
  CHECK(pruned.trace.final_sources.size() == static_cast<std::size_t>(cfg.n_tokens() - 6));
  // pruning loses provenance on purpose
  long listed = 0;
  for (const auto& src : pruned.trace.final_sources) listed += static_cast<long>(src.size());
  CHECK(listed < cfg.n_tokens());

  // prune path is deterministic per seed
  const auto pruned2 = model_forward(image, cfg, w, 7);
  for (Eigen::Index i = 0; i < pruned.logits.size(); ++i) {
    CHECK(pruned.logits[i] == pruned2.logits[i]);
  }
}

TEST_CASE("weight init is deterministic and glorot-bounded") {
  ModelConfig cfg = tiny_config();
  const auto a = init_weights(cfg, 77);
  const auto b = init_weights(cfg, 77);
  CHECK(a.size() == b.size());
  for (const auto& [name, tensor] : a) {
    const auto& other = b.at(name);
    CHECK(tensor.dims == other.dims);
    CHECK(tensor.data == other.data);
  }
  const auto c = init_weights(cfg, 78);
  CHECK(a.at("cls_token").data != c.at("cls_token").data);

  const auto& qkv = a.at("blocks.0.qkv.weight");
  const double bound = std::sqrt(6.0 / (3 * 32 + 32));
  for (float v : qkv.data) {
    CHECK(std::abs(v) <= bound);
  }
}

TEST_CASE("weight container round trip and error paths") {
  namespace fs = std::filesystem;
  ModelConfig cfg = tiny_config(2);
  const auto store = init_weights(cfg, 5);
  const fs::path path = fs::temp_directory_path() / "tome_test_weights.bin";

  SUBCASE("save/load round trip is bitwise") {
    save_weights(store, path);
    const auto loaded = load_weights(path);
    REQUIRE(loaded.size() == store.size());
    for (const auto& [name, tensor] : store) {
      const auto& got = loaded.at(name);
      CHECK(got.dims == tensor.dims);
      CHECK(got.data == tensor.data);
    }
    CHECK_NOTHROW(ModelWeights<float>::from_store(loaded, cfg));
  }
  SUBCASE("truncation names the tensor being read") {
    save_weights(store, path);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    try {
      load_weights(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("tensor '") != std::string::npos);
      CHECK(e.offset() > 0);
    }
  }
  SUBCASE("bad magic is rejected at offset zero") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOPE";
    out.close();
    try {
      load_weights(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("shape mismatch against the config is a config error") {
    ModelConfig other = cfg;
    other.width = 64;
    other.tome.schedule = constant_schedule(0, other.depth);
    CHECK_THROWS_AS(ModelWeights<float>::from_store(store, other), ConfigError);
  }
  SUBCASE("missing tensor is a config error") {
    auto broken = store;
    broken.erase("cls_token");
    CHECK_THROWS_AS(ModelWeights<float>::from_store(broken, cfg), ConfigError);
  }
  fs::remove(path);
}

TEST_CASE("config json round trip and validation") {
  ModelConfig cfg = tiny_config(2, 1);
  cfg.tome.metric = Metric::euclidean;
  cfg.tome.prop_attn = false;
  const auto text = config_to_json(cfg);
  const auto back = config_from_json(text);
  CHECK(back == cfg);

  CHECK_THROWS_AS(config_from_json("{"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"width": 33, "heads": 4})"), ConfigError);
  CHECK_THROWS_AS(
      config_from_json(R"({"depth": 2, "tome": {"schedule": [1, 2, 3]}})"),
      ConfigError);
  CHECK_THROWS_AS(
      config_from_json(R"({"tome": {"metric": "manhattan"}})"), ConfigError);

  // missing tome block defaults to a zero schedule at the configured depth
  const auto minimal = config_from_json(R"({"depth": 3})");
  CHECK(minimal.tome.schedule.per_layer == std::vector<int>{0, 0, 0});
  CHECK(minimal.tome.combine == CombineMode::weighted_avg);
  CHECK(minimal.tome.metric == Metric::cosine);
  CHECK(minimal.tome.feature == SimilarityFeature::k);
  CHECK(minimal.tome.prop_attn);
}
