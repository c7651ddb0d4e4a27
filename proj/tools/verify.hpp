#pragma once

#include <cstdint>
#include <string>

namespace tome::tools {

struct VerifyOptions {
  std::uint64_t seed = 1;
  int cases = 200;
  std::string fault;  // test hook: name of an invariant to break on purpose
};

struct VerifyReport {
  std::string text;
  bool ok = false;
};

/// Runs the oracle suites: bipartite matching against a brute-force
/// reference, proportional attention against size-expanded standard
/// attention, and size/source conservation across random forwards. The
/// report text is deterministic for fixed seed and case count.
VerifyReport run_verify(const VerifyOptions& options);

}  // namespace tome::tools
