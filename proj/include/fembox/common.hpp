// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_COMMON_HPP
#define FEMBOX_COMMON_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fembox {

/// Physical coordinates. Entries past the mesh dimension are kept at zero.
using Point = std::array<double, 3>;

/// Scalar field over the physical domain.
using ScalarFunc = std::function<double(const Point&)>;

/// Vector field (e.g. a gradient) over the physical domain.
using VectorFunc = std::function<Point(const Point&)>;

namespace detail {

template <class... Args>
std::string format_msg(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

/// Precondition violations (bad arguments, contract breaches).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numeric failures detected at run time (singular matrix, non-SPD pivot, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FEMBOX_REQUIRE(cond, ...)                                           \
  do {                                                                      \
    if (!(cond))                                                            \
      throw ::fembox::InvalidArgument(::fembox::detail::format_msg(__VA_ARGS__)); \
  } while (0)

#define FEMBOX_NUMERIC_CHECK(cond, ...)                                     \
  do {                                                                      \
    if (!(cond))                                                            \
      throw ::fembox::NumericError(::fembox::detail::format_msg(__VA_ARGS__)); \
  } while (0)

inline double dot(const Point& a, const Point& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm2(const Point& a) { return std::sqrt(dot(a, a)); }

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace fembox

#endif  // FEMBOX_COMMON_HPP
