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

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relq/common.hpp"

namespace relq {

struct Rating {
  Id user = 0;
  Id item = 0;
  double value = 0.0;

  bool operator==(const Rating&) const = default;
};

/// Immutable sparse user x item rating store.
///
/// External ids are re-indexed densely in ascending id order, so two matrices
/// built from the same set of ratings are identical regardless of the order
/// the ratings arrived in. A missing (user, item) cell means "not rated".
class RatingsMatrix {
 public:
  struct Entry {
    Index index;  // item index in a user row, user index in an item column
    double value;
  };

  RatingsMatrix() = default;

  /// Throws Error on a duplicate (user, item) pair or a rating outside scale.
  static RatingsMatrix from_ratings(std::vector<Rating> ratings, RatingScale scale = {}) {
    RatingsMatrix m;
    m.scale_ = scale;
    for (const auto& r : ratings) {
      if (!std::isfinite(r.value) || !scale.contains(r.value)) {
        throw Error("rating " + std::to_string(r.value) + " for (" + std::to_string(r.user) +
                    ", " + std::to_string(r.item) + ") is outside the rating scale");
      }
      m.user_ids_.push_back(r.user);
      m.item_ids_.push_back(r.item);
    }
    auto dedupe = [](std::vector<Id>& ids, std::unordered_map<Id, Index>& lookup) {
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      lookup.reserve(ids.size());
      for (std::size_t k = 0; k < ids.size(); ++k) lookup.emplace(ids[k], static_cast<Index>(k));
    };
    dedupe(m.user_ids_, m.user_lookup_);
    dedupe(m.item_ids_, m.item_lookup_);

    struct Cell {
      Index u, i;
      double v;
    };
    std::vector<Cell> cells;
    cells.reserve(ratings.size());
    for (const auto& r : ratings) {
      cells.push_back({m.user_lookup_.at(r.user), m.item_lookup_.at(r.item), r.value});
    }
    std::sort(cells.begin(), cells.end(),
              [](const Cell& a, const Cell& b) { return a.u != b.u ? a.u < b.u : a.i < b.i; });
    for (std::size_t k = 1; k < cells.size(); ++k) {
      if (cells[k].u == cells[k - 1].u && cells[k].i == cells[k - 1].i) {
        throw Error("duplicate rating for user " + std::to_string(m.user_ids_[cells[k].u]) +
                    ", item " + std::to_string(m.item_ids_[cells[k].i]));
      }
    }

    const std::size_t nu = m.user_ids_.size(), ni = m.item_ids_.size();
    m.row_start_.assign(nu + 1, 0);
    m.col_start_.assign(ni + 1, 0);
    for (const auto& c : cells) {
      ++m.row_start_[c.u + 1];
      ++m.col_start_[c.i + 1];
    }
    for (std::size_t k = 0; k < nu; ++k) m.row_start_[k + 1] += m.row_start_[k];
    for (std::size_t k = 0; k < ni; ++k) m.col_start_[k + 1] += m.col_start_[k];

    m.rows_.resize(cells.size());
    m.cols_.resize(cells.size());
    std::vector<std::size_t> col_fill(m.col_start_.begin(), m.col_start_.end() - 1);
    for (std::size_t k = 0; k < cells.size(); ++k) {
      m.rows_[k] = {cells[k].i, cells[k].v};
      // cells are user-major, so each column is filled in ascending user order
      m.cols_[col_fill[cells[k].i]++] = {cells[k].u, cells[k].v};
    }

    m.user_means_.assign(nu, 0.0);
    for (std::size_t u = 0; u < nu; ++u) {
      double sum = 0.0;
      for (const auto& e : m.user_row(static_cast<Index>(u))) sum += e.value;
      const auto n = m.row_start_[u + 1] - m.row_start_[u];
      m.user_means_[u] = n > 0 ? sum / static_cast<double>(n) : 0.0;
    }
    return m;
  }

  std::size_t num_users() const { return user_ids_.size(); }
  std::size_t num_items() const { return item_ids_.size(); }
  std::size_t num_ratings() const { return rows_.size(); }
  const RatingScale& scale() const { return scale_; }

  Id user_id(Index u) const { return user_ids_.at(u); }
  Id item_id(Index i) const { return item_ids_.at(i); }
  std::span<const Id> user_ids() const { return user_ids_; }
  std::span<const Id> item_ids() const { return item_ids_; }

  std::optional<Index> user_index(Id user) const {
    auto it = user_lookup_.find(user);
    if (it == user_lookup_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<Index> item_index(Id item) const {
    auto it = item_lookup_.find(item);
    if (it == item_lookup_.end()) return std::nullopt;
    return it->second;
  }

  /// Ratings made by user u, sorted by item index.
  std::span<const Entry> user_row(Index u) const {
    return std::span(rows_).subspan(row_start_[u], row_start_[u + 1] - row_start_[u]);
  }
  /// Ratings received by item i, sorted by user index.
  std::span<const Entry> item_column(Index i) const {
    return std::span(cols_).subspan(col_start_[i], col_start_[i + 1] - col_start_[i]);
  }

  std::optional<double> rating(Index u, Index i) const {
    auto row = user_row(u);
    auto it = std::lower_bound(row.begin(), row.end(), i,
                               [](const Entry& e, Index x) { return e.index < x; });
    if (it == row.end() || it->index != i) return std::nullopt;
    return it->value;
  }

  double user_mean(Index u) const { return user_means_.at(u); }

  /// All ratings, ordered by (user id, item id).
  std::vector<Rating> ratings() const {
    std::vector<Rating> out;
    out.reserve(rows_.size());
    for (Index u = 0; u < num_users(); ++u) {
      for (const auto& e : user_row(u)) out.push_back({user_ids_[u], item_ids_[e.index], e.value});
    }
    return out;
  }

  bool operator==(const RatingsMatrix& o) const {
    return scale_ == o.scale_ && user_ids_ == o.user_ids_ && item_ids_ == o.item_ids_ &&
           ratings() == o.ratings();
  }

 private:
  RatingScale scale_;
  std::vector<Id> user_ids_, item_ids_;
  std::unordered_map<Id, Index> user_lookup_, item_lookup_;
  std::vector<std::size_t> row_start_{0}, col_start_{0};
  std::vector<Entry> rows_, cols_;
  std::vector<double> user_means_;
};

struct DatasetMeta {
  std::string name;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_ratings = 0;
  RatingScale scale;
};

inline DatasetMeta describe(const RatingsMatrix& m, std::string name) {
  return {std::move(name), m.num_users(), m.num_items(), m.num_ratings(), m.scale()};
}

// ---------------------------------------------------------------------------
// Text formats

enum class Format { Ml1mDoubleColon, Ml100kTab, GenericCsv };

inline Format parse_format(std::string_view s) {
  if (s == "ml1m-double-colon" || s == "ml1m") return Format::Ml1mDoubleColon;
  if (s == "ml100k-tab" || s == "ml100k") return Format::Ml100kTab;
  if (s == "generic-csv" || s == "csv") return Format::GenericCsv;
  throw Error("unknown dataset format '" + std::string(s) + "'");
}

inline std::string_view format_name(Format f) {
  switch (f) {
    case Format::Ml1mDoubleColon: return "ml1m-double-colon";
    case Format::Ml100kTab: return "ml100k-tab";
    case Format::GenericCsv: return "generic-csv";
  }
  return "";
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(trim(line.substr(pos)));
      return out;
    }
    out.push_back(trim(line.substr(pos, next - pos)));
    pos = next + sep.size();
  }
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses ratings from a stream. Timestamps, when present, are ignored.
/// Throws ParseError (with the 1-based line number) on malformed records,
/// duplicate ratings and out-of-scale values.
inline RatingsMatrix read_ratings(std::istream& in, Format format, RatingScale scale = {}) {
  std::vector<Rating> ratings;
  std::unordered_map<Id, std::unordered_map<Id, std::size_t>> seen;
  std::string line;
  std::size_t lineno = 0;
  bool header_pending = format == Format::GenericCsv;
  const std::string_view sep = format == Format::Ml1mDoubleColon ? "::"
                               : format == Format::Ml100kTab     ? "\t"
                                                                 : ",";
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(line);
    if (text.empty()) continue;
    if (header_pending) {
      header_pending = false;
      auto cols = detail::split_fields(text, ",");
      if (cols.size() < 3 || cols[0] != "user" || cols[1] != "item" || cols[2] != "rating") {
        throw ParseError(lineno, "expected header 'user,item,rating'");
      }
      continue;
    }
    auto fields = detail::split_fields(text, sep);
    const std::size_t expected_min = 3, expected_max = format == Format::GenericCsv ? 3 : 4;
    if (fields.size() < expected_min || fields.size() > expected_max) {
      throw ParseError(lineno, "expected " + std::to_string(expected_min) + "-" +
                                   std::to_string(expected_max) + " fields, got " +
                                   std::to_string(fields.size()));
    }
    Rating r;
    if (!detail::parse_number(fields[0], r.user)) throw ParseError(lineno, "bad user id");
    if (!detail::parse_number(fields[1], r.item)) throw ParseError(lineno, "bad item id");
    if (!detail::parse_number(fields[2], r.value) || !std::isfinite(r.value)) {
      throw ParseError(lineno, "bad rating value");
    }
    if (!scale.contains(r.value)) {
      throw ParseError(lineno, "rating " + std::string(fields[2]) + " outside scale [" +
                                   format_double(scale.min) + ", " + format_double(scale.max) + "]");
    }
    auto [it, inserted] = seen[r.user].emplace(r.item, lineno);
    if (!inserted) {
      throw ParseError(lineno, "duplicate rating for user " + std::to_string(r.user) + ", item " +
                                   std::to_string(r.item) + " (first seen on line " +
                                   std::to_string(it->second) + ")");
    }
    ratings.push_back(r);
  }
  return RatingsMatrix::from_ratings(std::move(ratings), scale);
}

inline RatingsMatrix load_movielens(const std::string& path, Format format, RatingScale scale = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  return read_ratings(in, format, scale);
}

/// Writes ratings in the given layout. The MovieLens layouts get a zero
/// timestamp column.
inline void write_ratings(std::ostream& out, const RatingsMatrix& m, Format format) {
  if (format == Format::GenericCsv) out << "user,item,rating\n";
  for (const auto& r : m.ratings()) {
    const auto v = format_double(r.value);
    switch (format) {
      case Format::Ml1mDoubleColon: out << r.user << "::" << r.item << "::" << v << "::0\n"; break;
      case Format::Ml100kTab: out << r.user << '\t' << r.item << '\t' << v << "\t0\n"; break;
      case Format::GenericCsv: out << r.user << ',' << r.item << ',' << v << '\n'; break;
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticParams {
  std::size_t num_users = 100;
  std::size_t num_items = 50;
  double density = 0.1;
  double noise = 0.5;
  std::uint64_t seed = 1;
  RatingScale scale;
};

/// Latent-factor rating generator: each rating is a global offset plus a user
/// preference bias, an item quality bias and a 2-d taste affinity, with
/// Gaussian noise, rounded and clamped to the scale. Each cell is observed
/// independently with probability `density`. Bit-reproducible per params.
inline RatingsMatrix generate_synthetic(const SyntheticParams& p) {
  if (p.num_users == 0 || p.num_items == 0) throw Error("synthetic dataset needs users and items");
  if (!(p.density > 0.0 && p.density <= 1.0)) throw Error("density must be in (0, 1]");
  if (!(p.noise >= 0.0)) throw Error("noise must be non-negative");
  if (p.density * static_cast<double>(p.num_users) * static_cast<double>(p.num_items) < 1.0) {
    throw Error("density too low to expect a single rating");
  }

  std::mt19937_64 eng(p.seed);
  constexpr int kDims = 2;
  std::vector<double> user_bias(p.num_users), item_quality(p.num_items);
  std::vector<double> user_taste(p.num_users * kDims), item_traits(p.num_items * kDims);
  for (auto& b : user_bias) b = 0.5 * rng::normal(eng);
  for (auto& q : item_quality) q = 0.7 * rng::normal(eng);
  for (auto& t : user_taste) t = rng::normal(eng);
  for (auto& t : item_traits) t = 0.6 * rng::normal(eng);

  const double center = 0.5 * (p.scale.min + p.scale.max);
  std::vector<Rating> ratings;
  for (std::size_t u = 0; u < p.num_users; ++u) {
    for (std::size_t i = 0; i < p.num_items; ++i) {
      // always draw both values so the stream layout is independent of density
      const double keep = rng::uniform01(eng);
      const double eps = rng::normal(eng);
      if (keep >= p.density) continue;
      double affinity = 0.0;
      for (int d = 0; d < kDims; ++d) affinity += user_taste[u * kDims + d] * item_traits[i * kDims + d];
      const double raw = center + user_bias[u] + item_quality[i] + affinity + p.noise * eps;
      ratings.push_back({static_cast<Id>(u + 1), static_cast<Id>(i + 1),
                         p.scale.clamp(std::round(raw))});
    }
  }
  return RatingsMatrix::from_ratings(std::move(ratings), p.scale);
}

}  // namespace relq
