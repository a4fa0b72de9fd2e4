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

#include <optional>
#include <span>
#include <vector>

#include "relq/ratings.hpp"
#include "relq/split.hpp"

namespace relq {

struct Neighbor {
  Index user;
  double similarity;

  bool operator==(const Neighbor&) const = default;
};

/// Pearson correlation over the items both rows rated, using means over the
/// co-rated items only. Empty when the overlap is below `min_overlap` or
/// either side has zero variance on the overlap.
inline std::optional<double> pearson(std::span<const RatingsMatrix::Entry> a,
                                     std::span<const RatingsMatrix::Entry> b,
                                     std::size_t min_overlap) {
  thread_local std::vector<std::pair<double, double>> common;
  common.clear();
  for (std::size_t x = 0, y = 0; x < a.size() && y < b.size();) {
    if (a[x].index < b[y].index) {
      ++x;
    } else if (b[y].index < a[x].index) {
      ++y;
    } else {
      common.emplace_back(a[x++].value, b[y++].value);
    }
  }
  if (common.size() < std::max<std::size_t>(min_overlap, 1)) return std::nullopt;

  double mean_a = 0.0, mean_b = 0.0;
  for (const auto& [ra, rb] : common) {
    mean_a += ra;
    mean_b += rb;
  }
  mean_a /= static_cast<double>(common.size());
  mean_b /= static_cast<double>(common.size());

  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (const auto& [ra, rb] : common) {
    cov += (ra - mean_a) * (rb - mean_b);
    var_a += (ra - mean_a) * (ra - mean_a);
    var_b += (rb - mean_b) * (rb - mean_b);
  }
  if (var_a <= 0.0 || var_b <= 0.0) return std::nullopt;
  const double sim = cov / std::sqrt(var_a * var_b);
  if (!std::isfinite(sim)) return std::nullopt;
  return sim;
}

/// Per-user ranked neighbor lists for user-based KNN.
///
/// Lists hold users with positive similarity, sorted by descending similarity
/// with ties broken by ascending user index (which follows ascending user id).
class NeighborModel {
 public:
  NeighborModel() = default;
  NeighborModel(std::size_t k, std::size_t min_overlap, std::vector<std::vector<Neighbor>> lists)
      : k_(k), min_overlap_(min_overlap), lists_(std::move(lists)) {
    for (auto& l : lists_) {
      if (l.size() > k_) l.resize(k_);
    }
  }

  std::size_t k() const { return k_; }
  std::size_t min_overlap() const { return min_overlap_; }
  std::size_t num_users() const { return lists_.size(); }

  std::span<const Neighbor> neighbors(Index u) const { return lists_.at(u); }

  /// The same model with every list cut to its first k entries. Valid because
  /// ranking does not depend on k.
  NeighborModel truncated(std::size_t k) const {
    if (k > k_) throw Error("cannot widen a neighbor model from k=" + std::to_string(k_));
    return NeighborModel(k, min_overlap_, lists_);
  }

 private:
  std::size_t k_ = 0;
  std::size_t min_overlap_ = 2;
  std::vector<std::vector<Neighbor>> lists_;
};

inline bool neighbor_order(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.user < b.user;
}

/// Builds top-k Pearson neighborhoods for every user of `train`. Each pair is
/// scored once; the work is split across `workers` threads by first user.
inline NeighborModel build_model(const RatingsMatrix& train, std::size_t k,
                                 std::size_t min_overlap = 2, unsigned workers = 1) {
  if (k < 1) throw Error("k must be at least 1");
  const std::size_t n = train.num_users();
  std::vector<std::vector<Neighbor>> upper(n);  // upper[u] holds pairs (u, v > u)
  parallel_for(n, workers, [&](std::size_t u) {
    const auto row_u = train.user_row(static_cast<Index>(u));
    for (std::size_t v = u + 1; v < n; ++v) {
      auto sim = pearson(row_u, train.user_row(static_cast<Index>(v)), min_overlap);
      if (sim && *sim > 0.0) upper[u].push_back({static_cast<Index>(v), *sim});
    }
  });

  std::vector<std::vector<Neighbor>> lists(n);
  for (std::size_t u = 0; u < n; ++u) {
    for (const auto& nb : upper[u]) {
      lists[u].push_back(nb);
      lists[nb.user].push_back({static_cast<Index>(u), nb.similarity});
    }
    upper[u] = {};
  }
  parallel_for(n, workers, [&](std::size_t u) {
    auto& l = lists[u];
    if (l.size() > k) {
      std::partial_sort(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(k), l.end(), neighbor_order);
      l.resize(k);
    } else {
      std::sort(l.begin(), l.end(), neighbor_order);
    }
    l.shrink_to_fit();
  });
  return NeighborModel(k, min_overlap, std::move(lists));
}

/// One member of V(u, i): a neighbor of u that rated i.
struct NeighborVote {
  Index user;
  double similarity;
  double rating;
  double mean;  // neighbor's mean train rating
};

/// Neighbors of u (within the model's k) that rated item i, in neighbor order.
inline std::vector<NeighborVote> neighbor_votes(const NeighborModel& model, const RatingsMatrix& train,
                                                Index u, Index i) {
  std::vector<NeighborVote> votes;
  for (const auto& nb : model.neighbors(u)) {
    if (auto r = train.rating(nb.user, i)) votes.push_back({nb.user, nb.similarity, *r, train.user_mean(nb.user)});
  }
  return votes;
}

/// Mean-centred weighted-deviation prediction. Empty when no neighbor rated
/// the item.
inline std::optional<double> predict_index(const NeighborModel& model, const RatingsMatrix& train,
                                           Index u, Index i) {
  double num = 0.0, den = 0.0;
  for (const auto& v : neighbor_votes(model, train, u, i)) {
    num += v.similarity * (v.rating - v.mean);
    den += v.similarity;
  }
  if (den == 0.0) return std::nullopt;
  return train.scale().clamp(train.user_mean(u) + num / den);
}

/// Throws Error if `user` is not in train. An item nobody rated in train has
/// no prediction.
inline std::optional<double> predict(const NeighborModel& model, const RatingsMatrix& train, Id user, Id item) {
  auto u = train.user_index(user);
  if (!u) throw Error("unknown user " + std::to_string(user));
  auto i = train.item_index(item);
  if (!i) return std::nullopt;
  return predict_index(model, train, *u, *i);
}

struct ScoredPrediction {
  Id user = 0;
  Id item = 0;
  double p = 0.0;  // predicted rating
  double r = 0.0;  // held-out true rating
  double e = 0.0;  // |p - r|

  bool operator==(const ScoredPrediction&) const = default;
};

inline ScoredPrediction score(Id user, Id item, double p, double r) {
  return {user, item, p, r, std::abs(p - r)};
}

/// Predictions for every test triple, aligned with `test`; empty slots are
/// coverage gaps.
inline std::vector<std::optional<ScoredPrediction>> predict_all(const NeighborModel& model,
                                                                const RatingsMatrix& train,
                                                                std::span<const TestTriple> test,
                                                                unsigned workers = 1) {
  std::vector<std::optional<ScoredPrediction>> out(test.size());
  parallel_for(test.size(), workers, [&](std::size_t t) {
    const auto& tt = test[t];
    auto u = train.user_index(tt.user);
    auto i = train.item_index(tt.item);
    if (!u || !i) return;
    if (auto p = predict_index(model, train, *u, *i)) out[t] = score(tt.user, tt.item, *p, tt.rating);
  });
  return out;
}

struct RecommendedItem {
  Id item;
  double p;

  bool operator==(const RecommendedItem&) const = default;
};

struct RecommendationList {
  Id user = 0;
  std::size_t n = 0;
  std::vector<RecommendedItem> items;  // descending p, ties by ascending item id
};

/// Top-n of already-scored candidates.
inline RecommendationList top_n(Id user, std::vector<RecommendedItem> scored, std::size_t n) {
  if (n < 1) throw Error("n must be at least 1");
  auto order = [](const RecommendedItem& a, const RecommendedItem& b) {
    return a.p != b.p ? a.p > b.p : a.item < b.item;
  };
  const auto keep = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), order);
  scored.resize(keep);
  return {user, n, std::move(scored)};
}

/// Recommends up to n of `candidates` that the user has not rated in train,
/// ranked by predicted rating. Unpredictable candidates are skipped.
inline RecommendationList recommend(const NeighborModel& model, const RatingsMatrix& train, Id user,
                                    std::span<const Id> candidates, std::size_t n) {
  if (n < 1) throw Error("n must be at least 1");
  auto u = train.user_index(user);
  if (!u) throw Error("unknown user " + std::to_string(user));
  std::vector<RecommendedItem> scored;
  for (Id item : candidates) {
    auto i = train.item_index(item);
    if (!i) continue;
    if (train.rating(*u, *i)) continue;
    if (auto p = predict_index(model, train, *u, *i)) scored.push_back({item, *p});
  }
  return top_n(user, std::move(scored), n);
}

}  // namespace relq
