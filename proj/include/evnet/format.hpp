#pragma once

#include <string>

namespace evnet {

// Shortest decimal text for `value` rounded to `significant_digits`
// (<= 0 selects round-trip precision). Integral values print without ".0".
std::string format_number(double value, int significant_digits = 6);

// `value` rounded to `significant_digits`, for JSON emission.
double round_significant(double value, int significant_digits = 6);

}  // namespace evnet
