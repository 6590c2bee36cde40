#pragma once

// Small text parsing helpers shared by the config and grid readers.

#include <cerrno>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "shrinkpred/errors.hpp"

namespace shrinkpred::text {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) {
      return out;
    }
    start = pos + 1;
  }
}

inline double to_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError(what + ": '" + s + "' is not a number");
  }
  return v;
}

inline std::uint64_t to_unsigned(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError(what + ": '" + s + "' is not a nonnegative integer");
  }
  return v;
}

inline std::vector<double> to_doubles(const std::string& s, const std::string& what, char sep = ',') {
  std::vector<double> out;
  for (const auto& part : split(s, sep)) {
    out.push_back(to_double(part, what));
  }
  return out;
}

inline std::vector<std::size_t> to_sizes(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& part : split(s, ',')) {
    out.push_back(static_cast<std::size_t>(to_unsigned(part, what)));
  }
  return out;
}

/// %.17g, which round-trips doubles.
inline std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) {
      out += sep;
    }
    out += parts[i];
  }
  return out;
}

}  // namespace shrinkpred::text

namespace shrinkpred::text {

/// Shortest %g form that reads back to the same double.
inline std::string shortest(double v) {
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) {
      break;
    }
  }
  return buf;
}

}  // namespace shrinkpred::text
