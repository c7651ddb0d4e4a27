#include "common.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace tome::tools {

namespace {

int parse_int(const std::string& text, const std::string& what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad " + what + ": '" + text + "'");
  }
  return value;
}

}  // namespace

ScheduleSpec parse_schedule_spec(const std::string& spec, int depth) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument(
        "schedule must look like const:R, dec:R or list:a,b,... (got '" +
        spec + "')");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);

  ScheduleSpec out;
  out.descriptor = spec;
  if (kind == "const") {
    out.r = parse_int(rest, "schedule rate");
    out.schedule = constant_schedule(out.r, depth);
  } else if (kind == "dec") {
    out.r = parse_int(rest, "schedule rate");
    out.schedule = decreasing_schedule(out.r, depth);
  } else if (kind == "list") {
    std::vector<int> values;
    std::size_t start = 0;
    while (start <= rest.size()) {
      const auto comma = rest.find(',', start);
      const auto end = comma == std::string::npos ? rest.size() : comma;
      values.push_back(parse_int(rest.substr(start, end - start), "schedule entry"));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(values.size()) != depth) {
      throw std::invalid_argument(
          "schedule list has " + std::to_string(values.size()) +
          " entries, model depth is " + std::to_string(depth));
    }
    out.schedule.per_layer = std::move(values);
  } else {
    throw std::invalid_argument("unknown schedule kind '" + kind + "'");
  }
  return out;
}

Schedule constant_composition(long total, int depth) {
  Schedule s{std::vector<int>(static_cast<std::size_t>(depth),
                              static_cast<int>(total / depth))};
  for (long i = 0; i < total % depth; ++i) {
    s.per_layer[static_cast<std::size_t>(i)] += 1;
  }
  return s;
}

Schedule decreasing_composition(long total, int depth) {
  if (depth < 2) return constant_composition(total, depth);
  return Schedule{detail::decreasing_profile(
      2.0 * static_cast<double>(total) / depth, total, depth)};
}

std::string schedule_to_list_string(const Schedule& s) {
  std::string out = "list:";
  for (std::size_t i = 0; i < s.per_layer.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s.per_layer[i]);
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

int resolve_thread_count(int requested, int batch) {
  int threads = requested > 0
                    ? requested
                    : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (const char* cap = std::getenv("TOME_THREADS")) {
    try {
      threads = std::min(threads, std::max(1, parse_int(cap, "TOME_THREADS")));
    } catch (const std::invalid_argument&) {
      // unparsable cap: ignore
    }
  }
  return std::max(1, std::min(threads, batch));
}

}  // namespace tome::tools
