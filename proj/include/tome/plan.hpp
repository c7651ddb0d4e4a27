#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace tome {

/// One merge: token `src` (a member of set A) is folded into token `dst`
/// (a member of set B). Indices refer to the token order before the merge.
struct MergeEdge {
  int src = 0;
  int dst = 0;

  friend bool operator==(const MergeEdge&, const MergeEdge&) = default;
};

/// Result of a matching algorithm. Records which tokens merge where and the
/// order of the surviving tokens.
///
/// Output ordering: all unmerged A tokens by ascending original index,
/// followed by all B tokens by ascending original index. A destination keeps
/// its B position; its group also contains every src merged into it. The
/// empty plan (no edges) is a no-op and leaves the token order untouched.
struct MergePlan {
  int n_in = 0;
  int r_requested = 0;
  int r_effective = 0;  // == edges.size(), <= r_requested
  std::vector<MergeEdge> edges;  // ranked, most similar first
  std::vector<int> unmerged_a;   // ascending
  std::vector<int> set_b;        // ascending

  int n_out() const { return n_in - r_effective; }
  bool is_noop() const { return edges.empty(); }

  /// Original token index each output row descends from (the group
  /// representative: the token itself for unmerged A rows, the destination
  /// for B rows). Identity when the plan is a no-op.
  std::vector<int> output_order() const;

  /// For each output row, every original token index folded into it,
  /// ascending. Singleton groups for unmerged rows.
  std::vector<std::vector<int>> output_groups() const;

  friend bool operator==(const MergePlan&, const MergePlan&) = default;
};

/// Result of a pruning baseline: the surviving token indices, ascending.
struct PrunePlan {
  int n_in = 0;
  std::vector<int> kept;  // ascending

  friend bool operator==(const PrunePlan&, const PrunePlan&) = default;
};

// ---------------------------------------------------------------------------

inline std::vector<int> MergePlan::output_order() const {
  std::vector<int> order;
  if (is_noop()) {
    order.resize(static_cast<std::size_t>(n_in));
    for (int i = 0; i < n_in; ++i) order[static_cast<std::size_t>(i)] = i;
    return order;
  }
  order.reserve(unmerged_a.size() + set_b.size());
  order.insert(order.end(), unmerged_a.begin(), unmerged_a.end());
  order.insert(order.end(), set_b.begin(), set_b.end());
  return order;
}

inline std::vector<std::vector<int>> MergePlan::output_groups() const {
  std::vector<std::vector<int>> groups;
  if (is_noop()) {
    groups.resize(static_cast<std::size_t>(n_in));
    for (int i = 0; i < n_in; ++i) groups[static_cast<std::size_t>(i)] = {i};
    return groups;
  }
  groups.reserve(unmerged_a.size() + set_b.size());
  for (int a : unmerged_a) groups.push_back({a});
  for (int b : set_b) {
    std::vector<int> group{b};
    for (const MergeEdge& e : edges) {
      if (e.dst == b) group.push_back(e.src);
    }
    // group starts as {dst}; srcs join in ascending order
    std::sort(group.begin() + 1, group.end());
    groups.push_back(std::move(group));
  }
  return groups;
}

}  // namespace tome
