#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "tome/attention.hpp"
#include "tome/matching.hpp"
#include "tome/merging.hpp"
#include "tome/rng.hpp"
#include "tome/schedule.hpp"
#include "tome/vit.hpp"
#include "tome/weights.hpp"

namespace tome::tools {

namespace {

// --- brute-force matching oracle -------------------------------------------
// Scores every (a, b) pair directly from the similarity vectors, takes the
// per-a argmax and ranks edges globally, independent of the library's
// score-matrix path.

double oracle_pair_score(const SimilarityInput<double>& sim, int a, int b) {
  const auto va = sim.vectors.row(a);
  const auto vb = sim.vectors.row(b);
  switch (sim.metric) {
    case Metric::cosine:
    case Metric::dot: {
      double s = 0.0;
      for (Eigen::Index j = 0; j < va.size(); ++j) s += va[j] * vb[j];
      return s;
    }
    case Metric::euclidean: {
      double s = 0.0;
      for (Eigen::Index j = 0; j < va.size(); ++j) {
        const double d = va[j] - vb[j];
        s += d * d;
      }
      return -std::sqrt(s);
    }
    case Metric::softmax_sim:
      break;
  }
  throw std::invalid_argument("oracle: unsupported metric");
}

MergePlan oracle_bipartite(const SimilarityInput<double>& sim, int r,
                           const TokenPartition& part) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  const auto excluded = [&](int t) {
    if (std::binary_search(sim.protected_ids.begin(), sim.protected_ids.end(), t)) {
      return true;
    }
    return sim.metric == Metric::cosine && sim.vectors.row(t).norm() < 1e-12;
  };

  struct Edge {
    double score;
    int src, dst;
  };
  std::vector<Edge> best_edges;
  for (int a : part.set_a) {
    if (excluded(a)) continue;
    double best = ninf;
    int best_b = -1;
    for (int b : part.set_b) {
      if (excluded(b)) continue;
      const double s = oracle_pair_score(sim, a, b);
      if (s > best) {
        best = s;
        best_b = b;
      }
    }
    if (best_b >= 0) best_edges.push_back({best, a, best_b});
  }
  std::sort(best_edges.begin(), best_edges.end(), [](const Edge& x, const Edge& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.src < y.src;
  });

  MergePlan plan;
  plan.n_in = sim.n_tokens();
  plan.r_requested = r;
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(r),
                                          best_edges.size());
  for (std::size_t i = 0; i < keep; ++i) {
    plan.edges.push_back({best_edges[i].src, best_edges[i].dst});
  }
  plan.r_effective = static_cast<int>(plan.edges.size());
  std::vector<bool> merged(static_cast<std::size_t>(plan.n_in), false);
  for (const auto& e : plan.edges) merged[static_cast<std::size_t>(e.src)] = true;
  for (int a : part.set_a) {
    if (!merged[static_cast<std::size_t>(a)]) plan.unmerged_a.push_back(a);
  }
  std::sort(plan.unmerged_a.begin(), plan.unmerged_a.end());
  plan.set_b = part.set_b;
  return plan;
}

bool matching_suite(std::uint64_t seed, int cases, std::ostringstream& log) {
  Rng rng(mix_seed(seed, 0xA));
  const Metric metrics[] = {Metric::cosine, Metric::euclidean, Metric::dot};
  for (int i = 0; i < cases; ++i) {
    const int n = 2 + static_cast<int>(rng.bounded(15));  // 2..16
    const int c = 1 + static_cast<int>(rng.bounded(6));
    MatrixX<double> keys(n, c);
    for (Eigen::Index y = 0; y < keys.rows(); ++y) {
      for (Eigen::Index x = 0; x < keys.cols(); ++x) {
        keys(y, x) = rng.uniform(-1.0, 1.0);
      }
    }
    const Metric metric = metrics[i % 3];
    const int r = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n) + 1));
    const auto sim = prepare_similarity(std::vector<MatrixX<double>>{keys},
                                        HeadAgg::mean, metric);
    const auto part = partition_alternating(n);
    const MergePlan got = bipartite_soft_matching(sim, r, part);
    const MergePlan want = oracle_bipartite(sim, r, part);
    if (got != want) {
      log << "suite matching-brute-force: FAIL at case " << i << " (n=" << n
          << ", r=" << r << ", metric=" << to_string(metric) << ")\n";
      return false;
    }
  }
  log << "suite matching-brute-force: " << cases << "/" << cases << " ok\n";
  return true;
}

// --- duplicate-key attention oracle -----------------------------------------
// Standard attention over the instance with every key/value row repeated
// size-many times must match proportional attention on the compact instance.

bool attention_suite(std::uint64_t seed, int cases, std::ostringstream& log) {
  Rng rng(mix_seed(seed, 0xB));
  for (int i = 0; i < cases; ++i) {
    const int n = 1 + static_cast<int>(rng.bounded(8));
    const int d = 1 + static_cast<int>(rng.bounded(8));
    const int h = 1 + static_cast<int>(rng.bounded(3));
    AttentionInputs<double> in;
    in.sizes.resize(n);
    for (int t = 0; t < n; ++t) {
      in.sizes[t] = 1 + static_cast<int>(rng.bounded(4));
    }
    for (int head = 0; head < h; ++head) {
      MatrixX<double> q(n, d), k(n, d), v(n, d);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < d; ++x) {
          q(y, x) = rng.uniform(-1.0, 1.0);
          k(y, x) = rng.uniform(-1.0, 1.0);
          v(y, x) = rng.uniform(-1.0, 1.0);
        }
      }
      in.q.push_back(std::move(q));
      in.k.push_back(std::move(k));
      in.v.push_back(std::move(v));
    }

    const auto got = proportional_attention(in, true);
    for (int head = 0; head < h; ++head) {
      // size-expanded reference, plain softmax attention
      for (int row = 0; row < n; ++row) {
        std::vector<double> logits;
        std::vector<int> owner;
        for (int j = 0; j < n; ++j) {
          double dot = 0.0;
          for (int x = 0; x < d; ++x) {
            dot += in.q[static_cast<std::size_t>(head)](row, x) *
                   in.k[static_cast<std::size_t>(head)](j, x);
          }
          dot /= std::sqrt(static_cast<double>(d));
          for (int copy = 0; copy < in.sizes[j]; ++copy) {
            logits.push_back(dot);
            owner.push_back(j);
          }
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double& l : logits) {
          l = std::exp(l - m);
          denom += l;
        }
        for (int x = 0; x < d; ++x) {
          double expect = 0.0;
          for (std::size_t e = 0; e < logits.size(); ++e) {
            expect += logits[e] / denom *
                      in.v[static_cast<std::size_t>(head)](owner[e], x);
          }
          const double actual = got[static_cast<std::size_t>(head)](row, x);
          const double rel = std::abs(actual - expect) /
                             std::max(1e-30, std::abs(expect));
          if (!(rel <= 1e-6 || std::abs(actual - expect) <= 1e-9)) {
            log << "suite attention-duplicate-key: FAIL at case " << i
                << " (head " << head << ", token " << row << ", rel " << rel
                << ")\n";
            return false;
          }
        }
      }
    }
  }
  log << "suite attention-duplicate-key: " << cases << "/" << cases << " ok\n";
  return true;
}

// --- conservation suite ------------------------------------------------------

bool check_conservation(const TokenState<float>& state, long expect_total,
                        int n_ids, std::string& why) {
  if (state.total_size() != expect_total) {
    why = "conservation: token sizes sum to " +
          std::to_string(state.total_size()) + ", expected " +
          std::to_string(expect_total);
    return false;
  }
  std::vector<int> seen(static_cast<std::size_t>(n_ids), 0);
  long listed = 0;
  for (std::size_t t = 0; t < state.sources.size(); ++t) {
    if (static_cast<long>(state.sources[t].size()) != state.sizes[static_cast<Eigen::Index>(t)]) {
      why = "conservation: token " + std::to_string(t) +
            " size disagrees with its source count";
      return false;
    }
    for (int s : state.sources[t]) {
      if (s < 0 || s >= n_ids || seen[static_cast<std::size_t>(s)]++) {
        why = "conservation: source id " + std::to_string(s) +
              " missing or duplicated";
        return false;
      }
      ++listed;
    }
  }
  if (listed != n_ids) {
    why = "conservation: sources cover " + std::to_string(listed) + " of " +
          std::to_string(n_ids) + " ids";
    return false;
  }
  return true;
}

bool conservation_suite(std::uint64_t seed, int cases, bool inject_fault,
                        std::ostringstream& log) {
  Rng rng(mix_seed(seed, 0xC));
  const CombineMode modes[] = {CombineMode::weighted_avg, CombineMode::avg,
                               CombineMode::max, CombineMode::keep_one};
  for (int i = 0; i < cases; ++i) {
    ModelConfig cfg;
    cfg.image_size = 48;
    cfg.patch_size = 16;
    cfg.channels_in = 1;
    cfg.width = 32;
    cfg.depth = 3 + static_cast<int>(rng.bounded(3));
    cfg.heads = 4;
    cfg.num_classes = 5;
    cfg.tome.combine = modes[i % 4];
    const int r = 1 + static_cast<int>(rng.bounded(3));
    cfg.tome.schedule = (i % 2 == 0) ? constant_schedule(r, cfg.depth)
                                     : decreasing_schedule(r, cfg.depth);

    const auto store = init_weights(cfg, rng.next_u64());
    const auto weights = ModelWeights<float>::from_store(store, cfg);
    auto state = patch_embed(random_image<float>(cfg, rng.next_u64()), cfg, weights);
    const long expect_total = state.total_size();
    const int n_ids = cfg.n_patches() + 1;

    for (int layer = 0; layer < cfg.depth; ++layer) {
      block_forward(state, cfg.tome.schedule.per_layer[static_cast<std::size_t>(layer)],
                    weights.blocks[static_cast<std::size_t>(layer)], cfg,
                    mix_seed(seed, static_cast<std::uint64_t>(layer)));
      if (inject_fault && i == 0 && layer == cfg.depth / 2) {
        state.sizes[state.sizes.size() - 1] += 1;  // break conservation on purpose
      }
      std::string why;
      if (!check_conservation(state, expect_total, n_ids, why)) {
        log << "suite conservation: FAIL at case " << i << ", layer " << layer
            << ": " << why << "\n";
        return false;
      }
    }
  }
  log << "suite conservation: " << cases << "/" << cases << " ok\n";
  return true;
}

}  // namespace

VerifyReport run_verify(const VerifyOptions& options) {
  if (!options.fault.empty() && options.fault != "conservation") {
    throw std::invalid_argument("unknown fault '" + options.fault +
                                "' (supported: conservation)");
  }
  std::ostringstream log;
  int passed = 0, failed = 0;
  const int forward_cases = std::max(1, options.cases / 10);

  matching_suite(options.seed, options.cases, log) ? ++passed : ++failed;
  attention_suite(options.seed, options.cases, log) ? ++passed : ++failed;
  conservation_suite(options.seed, forward_cases,
                     options.fault == "conservation", log)
      ? ++passed
      : ++failed;

  VerifyReport report;
  report.ok = failed == 0;
  log << "verify: " << (report.ok ? "PASS" : "FAIL") << " (" << passed
      << " suites passed, " << failed << " failed)\n";
  report.text = log.str();
  return report;
}

}  // namespace tome::tools
