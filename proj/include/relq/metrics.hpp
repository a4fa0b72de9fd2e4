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
#include <optional>
#include <span>
#include <vector>

#include "relq/knn.hpp"
#include "relq/reliability.hpp"

namespace relq {

/// A scored test prediction together with its reliability value.
struct EvaluatedPrediction {
  Id user = 0;
  Id item = 0;
  double p = 0.0;  // prediction
  double r = 0.0;  // true rating
  double e = 0.0;  // absolute error
  double l = 0.0;  // reliability

  bool operator==(const EvaluatedPrediction&) const = default;
};

/// The covered test set T with the summary statistics the quality metrics
/// share. Spreads are mean absolute deviations, not standard deviations.
class EvaluationSet {
 public:
  /// Throws Error on an empty set or duplicate (user, item) keys.
  explicit EvaluationSet(std::vector<EvaluatedPrediction> items) : items_(std::move(items)) {
    if (items_.empty()) throw Error("evaluation set is empty");
    const double n = static_cast<double>(items_.size());
    for (std::size_t k = 0; k < items_.size(); ++k) {
      const auto& it = items_[k];
      if (!std::isfinite(it.e) || !std::isfinite(it.l)) throw Error("non-finite error or reliability");
      if (!index_.emplace(std::make_pair(it.user, it.item), k).second) {
        throw Error("duplicate prediction for user " + std::to_string(it.user) + ", item " +
                    std::to_string(it.item));
      }
      mean_error_ += it.e;
      mean_reliability_ += it.l;
    }
    mean_error_ /= n;
    mean_reliability_ /= n;
    for (const auto& it : items_) {
      error_spread_ += std::abs(it.e - mean_error_);
      reliability_spread_ += std::abs(mean_reliability_ - it.l);
    }
    error_spread_ /= n;
    reliability_spread_ /= n;
  }

  /// Test helper: a set with the given errors and reliabilities, keyed
  /// (k, 0) for position k.
  static EvaluationSet from_values(std::span<const double> errors, std::span<const double> reliability) {
    if (errors.size() != reliability.size()) throw Error("errors and reliabilities differ in length");
    std::vector<EvaluatedPrediction> items;
    items.reserve(errors.size());
    for (std::size_t k = 0; k < errors.size(); ++k) {
      items.push_back({static_cast<Id>(k), 0, errors[k], 0.0, errors[k], reliability[k]});
    }
    return EvaluationSet(std::move(items));
  }

  /// Pairs predictions with reliability values. Test cells lacking either are
  /// left out (coverage gaps).
  static EvaluationSet join(std::span<const std::optional<ScoredPrediction>> predictions,
                            const ReliabilityVector& reliability) {
    std::vector<EvaluatedPrediction> items;
    for (const auto& p : predictions) {
      if (!p) continue;
      if (auto l = reliability.find(p->user, p->item)) items.push_back({p->user, p->item, p->p, p->r, p->e, *l});
    }
    return EvaluationSet(std::move(items));
  }

  const std::vector<EvaluatedPrediction>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  double mean_error() const { return mean_error_; }
  double mean_reliability() const { return mean_reliability_; }
  double error_spread() const { return error_spread_; }
  double reliability_spread() const { return reliability_spread_; }

  const EvaluatedPrediction* find(Id user, Id item) const {
    auto it = index_.find({user, item});
    return it == index_.end() ? nullptr : &items_[it->second];
  }

 private:
  std::vector<EvaluatedPrediction> items_;
  std::map<std::pair<Id, Id>, std::size_t> index_;
  double mean_error_ = 0.0;
  double mean_reliability_ = 0.0;
  double error_spread_ = 0.0;
  double reliability_spread_ = 0.0;
};

inline double mae(const EvaluationSet& set) { return set.mean_error(); }

/// Reliability Prediction Improvement.
///
///   RPI = [ sum_T e (e - e_mean) (l_mean - l) / (s_e * s_l * #T) ] / e_mean
///
/// with s_e, s_l the mean absolute deviations of errors and reliabilities.
/// Positive when high reliability goes with low error. Returns 0 when either
/// spread or the mean error is zero.
inline double rpi(const EvaluationSet& set) {
  const double e_mean = set.mean_error();
  const double l_mean = set.mean_reliability();
  const double s_e = set.error_spread();
  const double s_l = set.reliability_spread();
  if (s_e == 0.0 || s_l == 0.0 || e_mean == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& it : set.items()) sum += it.e * (it.e - e_mean) * (l_mean - it.l);
  return sum / (s_e * s_l * static_cast<double>(set.size())) / e_mean;
}

/// Reliability Recommendation Improvement: the mean standardised excess
/// reliability (l - l_mean) / s_l over recommended items whose true rating is
/// at least theta. l_mean and s_l come from the whole evaluation set.
///
/// Empty when no recommendation is relevant; 0 when s_l is 0. Every
/// recommended (user, item) must be in the set.
inline std::optional<double> rri(const EvaluationSet& set, std::span<const RecommendationList> recommendations,
                                 double theta) {
  double excess = 0.0;
  std::size_t relevant = 0;
  for (const auto& list : recommendations) {
    for (const auto& rec : list.items) {
      const auto* it = set.find(list.user, rec.item);
      if (!it) {
        throw Error("recommended item " + std::to_string(rec.item) + " for user " + std::to_string(list.user) +
                    " has no evaluated prediction");
      }
      if (it->r >= theta) {
        excess += it->l - set.mean_reliability();
        ++relevant;
      }
    }
  }
  if (relevant == 0) return std::nullopt;
  if (set.reliability_spread() == 0.0) return 0.0;
  return excess / set.reliability_spread() / static_cast<double>(relevant);
}

/// Top-n lists for every user in the set, drawn from that user's evaluated
/// (held-out) items.
inline std::vector<RecommendationList> recommend_from_set(const EvaluationSet& set, std::size_t n) {
  std::map<Id, std::vector<RecommendedItem>> by_user;
  for (const auto& it : set.items()) by_user[it.user].push_back({it.item, it.p});
  std::vector<RecommendationList> out;
  out.reserve(by_user.size());
  for (auto& [user, scored] : by_user) out.push_back(top_n(user, std::move(scored), n));
  return out;
}

// ---------------------------------------------------------------------------
// Confidence-curve baseline

enum class TrimScope { Bin, Global };

inline TrimScope parse_trim_scope(std::string_view s) {
  if (s == "bin") return TrimScope::Bin;
  if (s == "global") return TrimScope::Global;
  throw Error("unknown trim scope '" + std::string(s) + "'");
}

struct CurveBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;    // predictions in the bin before trimming
  std::size_t kept = 0;     // after trimming
  double amplitude = 0.0;   // largest kept error, 0 when nothing is kept
  bool empty = false;       // nothing kept
};

struct ConfidenceCurve {
  std::vector<CurveBin> bins;
  double quality = 0.0;  // amplitude of the first bin minus that of the last
};

namespace detail {

inline std::size_t trim_count(double trim, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(trim * static_cast<double>(n) - 1e-9));
}

}  // namespace detail

/// Confidence curve over `bins` equal-width reliability intervals spanning
/// [min l, max l]. The largest `trim` fraction of errors is dropped, per bin
/// or over the whole set, and each bin's amplitude is its largest remaining
/// error. A set with a single reliability value has no curve to speak of and
/// reports quality 0.
inline ConfidenceCurve baseline_quality(const EvaluationSet& set, std::size_t bins = 10, double trim = 0.05,
                                        TrimScope scope = TrimScope::Bin) {
  if (bins < 1) throw Error("need at least one bin");
  if (set.size() < bins) throw Error("fewer predictions than confidence bins");
  if (!(trim >= 0.0 && trim < 1.0)) throw Error("trim must be in [0, 1)");

  const auto& items = set.items();
  double lo = items.front().l, hi = items.front().l;
  for (const auto& it : items) {
    lo = std::min(lo, it.l);
    hi = std::max(hi, it.l);
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  auto bin_of = [&](double l) -> std::size_t {
    if (width <= 0.0) return 0;
    auto b = static_cast<std::size_t>((l - lo) / width);
    return std::min(b, bins - 1);
  };

  ConfidenceCurve curve;
  curve.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    curve.bins[b].lo = lo + static_cast<double>(b) * width;
    curve.bins[b].hi = b + 1 == bins ? hi : lo + static_cast<double>(b + 1) * width;
  }

  std::vector<std::vector<double>> errors(bins);
  std::vector<bool> dropped(items.size(), false);
  if (scope == TrimScope::Global) {
    std::vector<std::size_t> order(items.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return items[a].e > items[b].e; });
    const auto drop = detail::trim_count(trim, items.size());
    for (std::size_t k = 0; k < drop; ++k) dropped[order[k]] = true;
  }
  for (std::size_t k = 0; k < items.size(); ++k) {
    auto b = bin_of(items[k].l);
    ++curve.bins[b].count;
    if (!dropped[k]) errors[b].push_back(items[k].e);
  }

  for (std::size_t b = 0; b < bins; ++b) {
    auto& errs = errors[b];
    std::sort(errs.begin(), errs.end(), std::greater<>());
    const std::size_t drop = scope == TrimScope::Bin ? std::min(errs.size(), detail::trim_count(trim, errs.size())) : 0;
    auto& bin = curve.bins[b];
    bin.kept = errs.size() - drop;
    bin.empty = bin.kept == 0;
    bin.amplitude = bin.empty ? 0.0 : errs[drop];
  }
  curve.quality = width > 0.0 ? curve.bins.front().amplitude - curve.bins.back().amplitude : 0.0;
  return curve;
}

/// One experiment cell's scores.
struct QualityReport {
  std::string dataset;
  std::uint64_t seed = 0;
  std::string measure;
  std::size_t k = 0;
  std::optional<std::size_t> n;    // recommendation runs only
  std::optional<double> theta;     // recommendation runs only
  double coverage = 0.0;           // evaluated / all held-out test cells
  double mae = 0.0;
  double rpi = 0.0;
  std::optional<double> rri;
  double baseline_quality = 0.0;
};

}  // namespace relq
