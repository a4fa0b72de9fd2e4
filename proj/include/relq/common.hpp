/*
 * Copyright 2026 The relq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace relq {

using Id = std::int64_t;     // external user / item id, as found in the data
using Index = std::uint32_t; // dense internal index

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double r) const { return r >= min && r <= max; }
  double clamp(double r) const { return std::clamp(r, min, max); }
  bool operator==(const RatingScale&) const = default;
};

// Portable random helpers on top of a raw 64-bit engine. The standard
// distributions are implementation-defined; these are not, so seeded runs
// reproduce across toolchains.
namespace rng {

template <class Engine>
double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n).
template <class Engine>
std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

template <class Engine>
double normal(Engine& eng) {
  // Box-Muller, one value per call.
  double u1 = uniform01(eng);
  while (u1 <= 0.0) u1 = uniform01(eng);
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <class T, class Engine>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(eng, i)]);
  }
}

}  // namespace rng

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is owned
// by exactly one call, so callers writing into slot i get results that do
// not depend on scheduling.
inline void parallel_for(std::size_t n, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nthreads = std::min<std::size_t>(workers, n);
  std::vector<std::jthread> pool;
  pool.reserve(nthreads);
  std::vector<std::exception_ptr> errors(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += nthreads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace relq
