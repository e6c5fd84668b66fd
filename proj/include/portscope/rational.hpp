// Copyright 2026 The portscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

// Boost 1.74's mixed rational/integer comparisons recurse forever once C++20
// synthesizes reversed operator== candidates. Exact non-template overloads
// win overload resolution and sidestep the templates.
namespace boost {
#define PORTSCOPE_RATIONAL_CMP(op)                                                       \
  inline bool operator op(const rational<std::int64_t>& a, int b) {                      \
    return a op rational<std::int64_t>(b);                                               \
  }                                                                                      \
  inline bool operator op(int a, const rational<std::int64_t>& b) {                      \
    return rational<std::int64_t>(a) op b;                                               \
  }
PORTSCOPE_RATIONAL_CMP(==)
PORTSCOPE_RATIONAL_CMP(!=)
PORTSCOPE_RATIONAL_CMP(<)
PORTSCOPE_RATIONAL_CMP(>)
PORTSCOPE_RATIONAL_CMP(<=)
PORTSCOPE_RATIONAL_CMP(>=)
#undef PORTSCOPE_RATIONAL_CMP
}  // namespace boost

namespace portscope {

// All cycle counts in the model are exact. Floating point only appears when a
// value is printed.
using Rational = boost::rational<std::int64_t>;

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool negative = false;
  if (s.front() == '-' || s.front() == '+') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  std::int64_t value = 0;
  for (char c : s) {
    if (!is_digit(c)) return std::nullopt;
    if (value > (INT64_MAX - (c - '0')) / 10) return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return negative ? -value : value;
}

}  // namespace detail

/// Parses "3", "-0.25", "0.553" or "1/3" into an exact rational.
inline std::optional<Rational> parse_rational(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    auto num = detail::parse_int(text.substr(0, slash));
    auto den = detail::parse_int(text.substr(slash + 1));
    if (!num || !den || *den <= 0) return std::nullopt;
    return Rational(*num, *den);
  }

  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() && frac.empty()) return std::nullopt;
  if (frac.size() > 15) return std::nullopt;

  std::int64_t numerator = 0;
  if (!whole.empty()) {
    auto w = detail::parse_int(whole);
    if (!w || whole.front() == '-' || whole.front() == '+') return std::nullopt;
    numerator = *w;
  }
  std::int64_t denominator = 1;
  for (char c : frac) {
    if (!detail::is_digit(c)) return std::nullopt;
    if (numerator > (INT64_MAX - 9) / 10) return std::nullopt;
    numerator = numerator * 10 + (c - '0');
    denominator *= 10;
  }
  Rational r(numerator, denominator);
  return negative ? -r : r;
}

/// True when the value has a finite decimal expansion.
inline bool is_terminating(const Rational& r) {
  std::int64_t d = r.denominator();
  while (d % 2 == 0) d /= 2;
  while (d % 5 == 0) d /= 5;
  return d == 1;
}

/// Shortest exact text: "0", "2", "0.5", "0.125", or "1/3" when the decimal
/// expansion does not terminate. `min_decimals` pads terminating values, so
/// format_exact(4, 1) == "4.0".
inline std::string format_exact(const Rational& r, int min_decimals = 0) {
  if (!is_terminating(r)) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
  }
  std::string out;
  std::int64_t num = r.numerator();
  if (num < 0) {
    out += '-';
    num = -num;
  }
  const std::int64_t den = r.denominator();
  out += std::to_string(num / den);
  std::int64_t rem = num % den;
  std::string frac;
  while (rem != 0) {
    rem *= 10;
    frac += static_cast<char>('0' + rem / den);
    rem %= den;
  }
  while (static_cast<int>(frac.size()) < min_decimals) frac += '0';
  if (!frac.empty()) out += "." + frac;
  return out;
}

/// Fixed-point text with round-half-even, computed on the exact value.
inline std::string format_fixed(const Rational& r, int decimals) {
  std::int64_t scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  bool negative = r < 0;
  Rational scaled = (negative ? -r : r) * scale;
  std::int64_t q = scaled.numerator() / scaled.denominator();
  std::int64_t rem = scaled.numerator() % scaled.denominator();
  std::int64_t twice = 2 * rem;
  if (twice > scaled.denominator() || (twice == scaled.denominator() && q % 2 == 1)) ++q;

  std::string digits = std::to_string(q);
  if (decimals > 0) {
    if (static_cast<int>(digits.size()) <= decimals) {
      digits.insert(0, static_cast<std::size_t>(decimals) + 1 - digits.size(), '0');
    }
    digits.insert(digits.size() - static_cast<std::size_t>(decimals), ".");
  }
  if (negative && q != 0) digits.insert(0, "-");
  return digits;
}

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

}  // namespace portscope
