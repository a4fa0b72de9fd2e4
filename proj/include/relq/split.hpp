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

#include <filesystem>
#include <fstream>
#include <random>
#include <unordered_set>

#include "relq/ratings.hpp"

namespace relq {

struct TestTriple {
  Id user = 0;
  Id item = 0;
  double rating = 0.0;

  bool operator==(const TestTriple&) const = default;
};

struct SplitRatios {
  double user_test_fraction = 0.2;
  double item_test_fraction = 0.2;
};

/// Train/test partition with a double holdout: a random subset of users and a
/// random subset of items are marked as test, and the ratings at their
/// intersection are held out. Test users keep their ratings on train items.
struct Split {
  RatingsMatrix train;
  std::vector<TestTriple> test;         // held out and predictable in principle
  std::vector<TestTriple> uncoverable;  // held out, but user or item absent from train
  std::vector<Id> test_users;           // sorted
  std::vector<Id> test_items;           // sorted
  std::uint64_t seed = 0;
  SplitRatios ratios;

  std::size_t total_held_out() const { return test.size() + uncoverable.size(); }
};

namespace detail {

inline std::size_t holdout_count(double fraction, std::size_t n) {
  // guards 0.2 * 10 evaluating a hair above 2
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

inline std::vector<Id> pick_ids(std::span<const Id> ids, double fraction, std::mt19937_64& eng) {
  std::vector<Id> pool(ids.begin(), ids.end());
  rng::shuffle(pool, eng);
  pool.resize(std::min(pool.size(), holdout_count(fraction, pool.size())));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace detail

inline Split split(const RatingsMatrix& matrix, SplitRatios ratios, std::uint64_t seed) {
  if (matrix.num_users() < 5 || matrix.num_items() < 5) {
    throw Error("split needs at least 5 users and 5 items");
  }
  for (double f : {ratios.user_test_fraction, ratios.item_test_fraction}) {
    if (!(f >= 0.0 && f < 1.0)) throw Error("test fractions must be in [0, 1)");
  }

  Split out;
  out.seed = seed;
  out.ratios = ratios;
  std::mt19937_64 eng(seed);
  out.test_users = detail::pick_ids(matrix.user_ids(), ratios.user_test_fraction, eng);
  out.test_items = detail::pick_ids(matrix.item_ids(), ratios.item_test_fraction, eng);

  const std::unordered_set<Id> users(out.test_users.begin(), out.test_users.end());
  const std::unordered_set<Id> items(out.test_items.begin(), out.test_items.end());

  std::vector<Rating> train;
  std::vector<TestTriple> held;
  for (const auto& r : matrix.ratings()) {
    if (users.count(r.user) && items.count(r.item)) {
      held.push_back({r.user, r.item, r.value});
    } else {
      train.push_back(r);
    }
  }
  if (held.empty()) throw Error("split left zero test triples");

  out.train = RatingsMatrix::from_ratings(std::move(train), matrix.scale());
  for (const auto& t : held) {
    if (out.train.user_index(t.user) && out.train.item_index(t.item)) {
      out.test.push_back(t);
    } else {
      out.uncoverable.push_back(t);
    }
  }
  if (out.test.empty()) throw Error("split left zero coverable test triples");
  return out;
}

/// Writes train.csv, test.csv and uncoverable.csv (generic-csv layout) into `dir`.
inline void write_split(const Split& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream train(dir / "train.csv");
  write_ratings(train, s.train, Format::GenericCsv);
  auto write_triples = [&](const std::filesystem::path& path, const std::vector<TestTriple>& triples) {
    std::ofstream out(path);
    out << "user,item,rating\n";
    for (const auto& t : triples) out << t.user << ',' << t.item << ',' << format_double(t.rating) << '\n';
    if (!out) throw Error("failed writing " + path.string());
  };
  write_triples(dir / "test.csv", s.test);
  write_triples(dir / "uncoverable.csv", s.uncoverable);
  if (!train) throw Error("failed writing split to " + dir.string());
}

}  // namespace relq
