#include "evnet/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace evnet {

std::string format_number(double value, int significant_digits) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  if (significant_digits <= 0) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
  }
  std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, value);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

double round_significant(double value, int significant_digits) {
  if (significant_digits <= 0 || !std::isfinite(value)) return value;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, value);
  double out = 0.0;
  std::from_chars(buf, buf + std::char_traits<char>::length(buf), out);
  return out == 0.0 ? 0.0 : out;
}

}  // namespace evnet
