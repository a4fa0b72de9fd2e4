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

// Deliberately unoptimised reference implementations used as test oracles.
// They work on a dense copy of the matrix and recompute everything from
// scratch; nothing here is shared with the library's fast paths except the
// RatingsMatrix container and the seeded RNG helpers.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "relq/ratings.hpp"
#include "relq/split.hpp"

namespace relq::oracle {

struct Dense {
  std::size_t users = 0, items = 0;
  std::vector<std::vector<std::optional<double>>> cells;  // [user index][item index]
  RatingScale scale;
};

inline Dense densify(const RatingsMatrix& m) {
  Dense d{m.num_users(), m.num_items(), {}, m.scale()};
  d.cells.assign(d.users, std::vector<std::optional<double>>(d.items));
  for (const auto& r : m.ratings()) d.cells[*m.user_index(r.user)][*m.item_index(r.item)] = r.value;
  return d;
}

inline double row_mean(const Dense& d, std::size_t u) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < d.items; ++i) {
    if (d.cells[u][i]) {
      sum += *d.cells[u][i];
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline std::optional<double> pearson(const Dense& d, std::size_t u, std::size_t v, std::size_t min_overlap) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < d.items; ++i) {
    if (d.cells[u][i] && d.cells[v][i]) {
      a.push_back(*d.cells[u][i]);
      b.push_back(*d.cells[v][i]);
    }
  }
  if (a.size() < min_overlap || a.empty()) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    ma += a[j];
    mb += b[j];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double c = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    c += (a[j] - ma) * (b[j] - mb);
    va += (a[j] - ma) * (a[j] - ma);
    vb += (b[j] - mb) * (b[j] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return std::nullopt;
  return c / std::sqrt(va * vb);
}

struct Nb {
  std::size_t user;
  double sim;
};

/// Top-k positive-similarity neighbors of every user by full sort.
inline std::vector<std::vector<Nb>> neighbors(const Dense& d, std::size_t k, std::size_t min_overlap) {
  std::vector<std::vector<Nb>> out(d.users);
  for (std::size_t u = 0; u < d.users; ++u) {
    for (std::size_t v = 0; v < d.users; ++v) {
      if (u == v) continue;
      auto s = pearson(d, u, v, min_overlap);
      if (s && *s > 0.0) out[u].push_back({v, *s});
    }
    std::sort(out[u].begin(), out[u].end(), [](const Nb& a, const Nb& b) {
      return a.sim != b.sim ? a.sim > b.sim : a.user < b.user;
    });
    if (out[u].size() > k) out[u].resize(k);
  }
  return out;
}

inline std::optional<double> predict(const Dense& d, const std::vector<std::vector<Nb>>& nbs, std::size_t u,
                                     std::size_t i) {
  double num = 0.0, den = 0.0;
  for (const auto& nb : nbs[u]) {
    if (!d.cells[nb.user][i]) continue;
    num += nb.sim * (*d.cells[nb.user][i] - row_mean(d, nb.user));
    den += nb.sim;
  }
  if (den == 0.0) return std::nullopt;
  return std::clamp(row_mean(d, u) + num / den, d.scale.min, d.scale.max);
}

inline std::optional<double> knn_variability(const Dense& d, const std::vector<std::vector<Nb>>& nbs,
                                             std::size_t u, std::size_t i, double eps) {
  std::vector<double> votes;
  for (const auto& nb : nbs[u]) {
    if (d.cells[nb.user][i]) votes.push_back(*d.cells[nb.user][i]);
  }
  if (votes.empty()) return std::nullopt;
  double mean = 0.0;
  for (double v : votes) mean += v;
  mean /= static_cast<double>(votes.size());
  double dev = 0.0;
  for (double v : votes) dev += std::abs(v - mean);
  return static_cast<double>(votes.size()) / (eps + dev);
}

/// Fast resample recomputed from scratch: resample n draws
/// floor(alpha * #ratings) ratings with a partial Fisher-Yates shuffle seeded
/// by seed + n, then neighbors and predictions are rebuilt densely.
inline std::vector<std::optional<double>> fast_resample(const RatingsMatrix& train, std::size_t k,
                                                        std::size_t min_overlap,
                                                        const std::vector<TestTriple>& test, std::size_t resamples,
                                                        double alpha, std::uint64_t seed, double eps) {
  std::vector<std::vector<double>> preds(test.size());
  for (std::size_t n = 1; n <= resamples; ++n) {
    auto all = train.ratings();
    const auto keep = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(all.size())));
    std::mt19937_64 eng(seed + n);
    for (std::size_t j = 0; j < keep; ++j) std::swap(all[j], all[j + rng::uniform_index(eng, all.size() - j)]);
    all.resize(keep);
    const auto sub = RatingsMatrix::from_ratings(all, train.scale());
    const auto d = densify(sub);
    const auto nbs = neighbors(d, k, min_overlap);
    for (std::size_t t = 0; t < test.size(); ++t) {
      auto u = sub.user_index(test[t].user);
      auto i = sub.item_index(test[t].item);
      if (!u || !i) continue;
      if (auto p = predict(d, nbs, *u, *i)) preds[t].push_back(*p);
    }
  }
  std::vector<std::optional<double>> out(test.size());
  for (std::size_t t = 0; t < test.size(); ++t) {
    const auto& ps = preds[t];
    if (ps.size() < 2) continue;
    double m = 0.0;
    for (double p : ps) m += p;
    m /= static_cast<double>(ps.size());
    double ss = 0.0;
    for (double p : ps) ss += (p - m) * (p - m);
    out[t] = 1.0 / (eps + std::sqrt(ss / static_cast<double>(ps.size())));
  }
  return out;
}

}  // namespace relq::oracle
