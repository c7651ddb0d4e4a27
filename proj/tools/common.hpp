#pragma once

#include <cstdint>
#include <string>

#include "tome/config.hpp"
#include "tome/schedule.hpp"

namespace tome::tools {

/// Parsed --schedule value. r is the descriptor's rate for const/dec forms
/// and -1 for explicit lists.
struct ScheduleSpec {
  Schedule schedule;
  std::string descriptor;
  int r = -1;
};

/// Accepts "const:R", "dec:R" or "list:a,b,c,...". List length must equal
/// the model depth.
ScheduleSpec parse_schedule_spec(const std::string& spec, int depth);

/// Even composition of `total` over `depth` layers (earlier layers take the
/// remainder); the constant-schedule reference for arbitrary totals.
Schedule constant_composition(long total, int depth);

/// Linearly decreasing composition with the same total.
Schedule decreasing_composition(long total, int depth);

std::string schedule_to_list_string(const Schedule& s);

std::string hex64(std::uint64_t v);

/// RFC 4180 quoting: fields containing commas or quotes are wrapped in
/// double quotes (needed for list-form schedule descriptors).
std::string csv_field(const std::string& s);

/// Number of benchmark worker threads: the requested count (0 = hardware
/// concurrency), capped by the TOME_THREADS environment variable and the
/// batch size.
int resolve_thread_count(int requested, int batch);

}  // namespace tome::tools
