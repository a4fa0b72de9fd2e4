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

#include <map>
#include <random>

#include "relq/knn.hpp"

namespace relq {

enum class Measure { SupportUser, SupportItem, KnnVariability, FastResample };

inline constexpr Measure kAllMeasures[] = {Measure::SupportUser, Measure::SupportItem,
                                           Measure::KnnVariability, Measure::FastResample};

inline std::string_view measure_name(Measure m) {
  switch (m) {
    case Measure::SupportUser: return "support_user";
    case Measure::SupportItem: return "support_item";
    case Measure::KnnVariability: return "knn_variability";
    case Measure::FastResample: return "fast_resample";
  }
  return "";
}

inline Measure parse_measure(std::string_view s) {
  for (Measure m : kAllMeasures) {
    if (measure_name(m) == s) return m;
  }
  throw Error("unknown reliability measure '" + std::string(s) + "'");
}

struct MeasureConfig {
  double epsilon = 1.0;          // guard on inverse-dispersion denominators, one rating step
  std::size_t resamples = 20;    // number of resampled matrices
  double alpha = 0.8;            // fraction of train ratings kept per resample
  std::uint64_t resample_seed = 0;

  void validate() const {
    if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
    if (resamples < 2) throw Error("at least 2 resamples are required");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must be in (0, 1)");
  }
};

/// Reliability values l(u, i) for one measure, keyed by (user id, item id).
struct ReliabilityVector {
  Measure measure = Measure::SupportUser;
  MeasureConfig config;
  std::map<std::pair<Id, Id>, double> values;

  std::optional<double> find(Id user, Id item) const {
    auto it = values.find({user, item});
    if (it == values.end()) return std::nullopt;
    return it->second;
  }
};

/// Number of train ratings made by the user. Unknown users have support 0.
inline double support_for_user(const RatingsMatrix& train, Id user, Id /*item*/) {
  auto u = train.user_index(user);
  return u ? static_cast<double>(train.user_row(*u).size()) : 0.0;
}

/// Number of train ratings received by the item.
inline double support_for_item(const RatingsMatrix& train, Id /*user*/, Id item) {
  auto i = train.item_index(item);
  return i ? static_cast<double>(train.item_column(*i).size()) : 0.0;
}

/// #V / (epsilon + sum over V of |r(s, i) - mean of V|), where V is the set of
/// u's neighbors that rated i. Empty when V is empty.
inline std::optional<double> knn_variability(const NeighborModel& model, const RatingsMatrix& train,
                                             Id user, Id item, double epsilon) {
  auto u = train.user_index(user);
  auto i = train.item_index(item);
  if (!u || !i) return std::nullopt;
  const auto votes = neighbor_votes(model, train, *u, *i);
  if (votes.empty()) return std::nullopt;
  double mean = 0.0;
  for (const auto& v : votes) mean += v.rating;
  mean /= static_cast<double>(votes.size());
  double spread = 0.0;
  for (const auto& v : votes) spread += std::abs(v.rating - mean);
  return static_cast<double>(votes.size()) / (epsilon + spread);
}

/// Uniformly samples floor(alpha * #ratings) ratings without replacement.
inline RatingsMatrix resample_ratings(const RatingsMatrix& train, double alpha, std::uint64_t seed) {
  auto all = train.ratings();
  const auto keep = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(all.size())));
  std::mt19937_64 eng(seed);
  for (std::size_t j = 0; j < keep; ++j) {
    std::swap(all[j], all[j + rng::uniform_index(eng, all.size() - j)]);
  }
  all.resize(keep);
  return RatingsMatrix::from_ratings(std::move(all), train.scale());
}

/// 1 / (epsilon + population stdev) of the defined resample predictions;
/// empty when fewer than two are defined.
inline std::optional<double> inverse_spread(std::span<const double> preds, double epsilon) {
  if (preds.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double p : preds) mean += p;
  mean /= static_cast<double>(preds.size());
  double ss = 0.0;
  for (double p : preds) ss += (p - mean) * (p - mean);
  return 1.0 / (epsilon + std::sqrt(ss / static_cast<double>(preds.size())));
}

/// The resampled matrices and their neighbor models for fast resample,
/// built once at the largest k of a sweep. Resample n uses seed
/// resample_seed + n for n in 1..resamples.
class ResampleEnsemble {
 public:
  ResampleEnsemble(const RatingsMatrix& train, std::size_t k_max, std::size_t min_overlap,
                   const MeasureConfig& config, unsigned workers = 1)
      : config_(config), k_max_(k_max) {
    config.validate();
    matrices_.resize(config.resamples);
    models_.resize(config.resamples);
    parallel_for(config.resamples, workers, [&](std::size_t n) {
      matrices_[n] = resample_ratings(train, config.alpha, config.resample_seed + n + 1);
      models_[n] = build_model(matrices_[n], k_max, min_overlap);
    });
  }

  std::size_t k_max() const { return k_max_; }

  ReliabilityVector reliability(std::size_t k, std::span<const TestTriple> test, unsigned workers = 1) const {
    std::vector<std::vector<std::optional<double>>> preds(models_.size());
    parallel_for(models_.size(), workers, [&](std::size_t n) {
      const auto model = models_[n].truncated(k);
      preds[n].resize(test.size());
      for (std::size_t t = 0; t < test.size(); ++t) {
        auto u = matrices_[n].user_index(test[t].user);
        auto i = matrices_[n].item_index(test[t].item);
        if (u && i) preds[n][t] = predict_index(model, matrices_[n], *u, *i);
      }
    });
    ReliabilityVector out{Measure::FastResample, config_, {}};
    std::vector<double> defined;
    for (std::size_t t = 0; t < test.size(); ++t) {
      defined.clear();
      for (const auto& run : preds) {
        if (run[t]) defined.push_back(*run[t]);
      }
      if (auto l = inverse_spread(defined, config_.epsilon)) out.values[{test[t].user, test[t].item}] = *l;
    }
    return out;
  }

 private:
  MeasureConfig config_;
  std::size_t k_max_;
  std::vector<RatingsMatrix> matrices_;
  std::vector<NeighborModel> models_;
};

inline ReliabilityVector fast_resample(const RatingsMatrix& train, std::size_t k,
                                       std::span<const TestTriple> test, const MeasureConfig& config,
                                       std::size_t min_overlap = 2, unsigned workers = 1) {
  return ResampleEnsemble(train, k, min_overlap, config, workers).reliability(k, test, workers);
}

/// Reliability of every test triple under one of the cheap measures. Fast
/// resample goes through ResampleEnsemble instead.
inline ReliabilityVector compute_reliability(Measure measure, const NeighborModel& model,
                                             const RatingsMatrix& train, std::span<const TestTriple> test,
                                             const MeasureConfig& config) {
  config.validate();
  ReliabilityVector out{measure, config, {}};
  for (const auto& t : test) {
    std::optional<double> l;
    switch (measure) {
      case Measure::SupportUser: l = support_for_user(train, t.user, t.item); break;
      case Measure::SupportItem: l = support_for_item(train, t.user, t.item); break;
      case Measure::KnnVariability: l = knn_variability(model, train, t.user, t.item, config.epsilon); break;
      case Measure::FastResample:
        throw Error("fast_resample needs a ResampleEnsemble");
    }
    if (l) out.values[{t.user, t.item}] = *l;
  }
  return out;
}

}  // namespace relq
