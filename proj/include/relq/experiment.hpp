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
#include <functional>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "relq/metrics.hpp"
#include "relq/split.hpp"

namespace relq {

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string dataset;                       // path
  Format format = Format::Ml100kTab;
  std::string dataset_name;                  // defaults to the file stem
  RatingScale scale;
  std::vector<std::uint64_t> seeds{1};
  SplitRatios ratios;
  std::vector<std::size_t> k_sweep;          // prediction sweep
  std::size_t k = 200;                       // recommendation run
  double theta = 4.0;
  std::vector<std::size_t> n_sweep;
  std::vector<Measure> measures{std::begin(kAllMeasures), std::end(kAllMeasures)};
  MeasureConfig measure_config;
  std::size_t min_overlap = 2;
  std::size_t bins = 10;
  double trim = 0.05;
  TrimScope trim_scope = TrimScope::Bin;
  unsigned workers = 1;

  ExperimentConfig() {
    for (std::size_t k = 20; k <= 400; k += 20) k_sweep.push_back(k);
    for (std::size_t n = 2; n <= 20; n += 2) n_sweep.push_back(n);
  }

  void validate() const {
    if (measures.empty()) throw Error("no reliability measures selected");
    if (seeds.empty()) throw Error("no seeds given");
    if (k_sweep.empty()) throw Error("empty k sweep");
    if (n_sweep.empty()) throw Error("empty n sweep");
    for (auto k : k_sweep) {
      if (k < 1) throw Error("k values must be at least 1");
    }
    for (auto n : n_sweep) {
      if (n < 1) throw Error("n values must be at least 1");
    }
    if (k < 1) throw Error("k must be at least 1");
    // theta above the scale is allowed: nothing is relevant and RRI is null
    if (!std::isfinite(theta) || theta < scale.min) throw Error("theta must not lie below the rating scale");
    if (bins < 1) throw Error("bins must be at least 1");
    if (!(trim >= 0.0 && trim < 1.0)) throw Error("trim must be in [0, 1)");
    if (workers < 1) throw Error("workers must be at least 1");
    measure_config.validate();
  }

  std::string name() const {
    if (!dataset_name.empty()) return dataset_name;
    return std::filesystem::path(dataset).stem().string();
  }
};

namespace detail {

inline double to_double(std::string_view key, std::string_view v) {
  double out;
  if (!parse_number(trim(v), out)) throw Error("bad number for " + std::string(key) + ": '" + std::string(v) + "'");
  return out;
}

inline std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out;
  if (!parse_number(trim(v), out)) throw Error("bad integer for " + std::string(key) + ": '" + std::string(v) + "'");
  return out;
}

}  // namespace detail

/// Parses "a,b,c" or an inclusive range "start:stop:step".
inline std::vector<std::size_t> parse_sweep(std::string_view text) {
  std::vector<std::size_t> out;
  if (text.find(':') != std::string_view::npos) {
    auto parts = detail::split_fields(text, ":");
    if (parts.size() != 3) throw Error("sweep range must be start:stop:step");
    const auto start = detail::to_uint("sweep", parts[0]);
    const auto stop = detail::to_uint("sweep", parts[1]);
    const auto step = detail::to_uint("sweep", parts[2]);
    if (step == 0) throw Error("sweep step must be positive");
    for (auto v = start; v <= stop; v += step) out.push_back(v);
  } else {
    for (auto part : detail::split_fields(text, ",")) {
      if (!part.empty()) out.push_back(detail::to_uint("sweep", part));
    }
  }
  return out;
}

/// Applies one `key = value` setting. Keys match the CLI long flag names.
inline void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const auto v = detail::trim(value);
  if (key == "dataset") {
    cfg.dataset = std::string(v);
  } else if (key == "format") {
    cfg.format = parse_format(v);
  } else if (key == "name") {
    cfg.dataset_name = std::string(v);
  } else if (key == "seed") {
    cfg.seeds.clear();
    for (auto s : detail::split_fields(v, ",")) cfg.seeds.push_back(detail::to_uint(key, s));
  } else if (key == "user-test-frac") {
    cfg.ratios.user_test_fraction = detail::to_double(key, v);
  } else if (key == "item-test-frac") {
    cfg.ratios.item_test_fraction = detail::to_double(key, v);
  } else if (key == "k-sweep") {
    cfg.k_sweep = parse_sweep(v);
  } else if (key == "k") {
    cfg.k = detail::to_uint(key, v);
  } else if (key == "theta") {
    cfg.theta = detail::to_double(key, v);
  } else if (key == "n-sweep") {
    cfg.n_sweep = parse_sweep(v);
  } else if (key == "measure") {
    cfg.measures.clear();
    for (auto m : detail::split_fields(v, ",")) {
      if (m == "all") {
        cfg.measures.assign(std::begin(kAllMeasures), std::end(kAllMeasures));
      } else if (!m.empty()) {
        cfg.measures.push_back(parse_measure(m));
      }
    }
  } else if (key == "alpha") {
    cfg.measure_config.alpha = detail::to_double(key, v);
  } else if (key == "resamples") {
    cfg.measure_config.resamples = detail::to_uint(key, v);
  } else if (key == "resample-seed") {
    cfg.measure_config.resample_seed = detail::to_uint(key, v);
  } else if (key == "epsilon") {
    cfg.measure_config.epsilon = detail::to_double(key, v);
  } else if (key == "min-overlap") {
    cfg.min_overlap = detail::to_uint(key, v);
  } else if (key == "bins") {
    cfg.bins = detail::to_uint(key, v);
  } else if (key == "trim") {
    cfg.trim = detail::to_double(key, v);
  } else if (key == "trim-scope") {
    cfg.trim_scope = parse_trim_scope(v);
  } else if (key == "workers") {
    cfg.workers = static_cast<unsigned>(detail::to_uint(key, v));
  } else {
    throw Error("unknown setting '" + std::string(key) + "'");
  }
}

/// Reads flat `key = value` lines; '#' starts a comment.
inline void read_config(std::istream& in, ExperimentConfig& cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(std::string_view(line).substr(0, line.find('#')));
    if (text.empty()) continue;
    auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError(lineno, "expected key = value");
    try {
      apply_setting(cfg, detail::trim(text.substr(0, eq)), text.substr(eq + 1));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Sweeps

using RowSink = std::function<void(const QualityReport&)>;
using CurveSink = std::function<void(std::uint64_t seed, const std::string& measure, std::size_t k,
                                     const ConfidenceCurve&)>;

/// Scores of one measure on one prediction set.
struct CellResult {
  QualityReport report;
  ConfidenceCurve curve;
  std::optional<EvaluationSet> set;
};

namespace detail {

inline CellResult score_cell(const ExperimentConfig& cfg, const Split& split, std::uint64_t seed, Measure measure,
                             std::size_t k, std::span<const std::optional<ScoredPrediction>> predictions,
                             const ReliabilityVector& reliability) {
  CellResult cell;
  auto& rep = cell.report;
  rep.dataset = cfg.name();
  rep.seed = seed;
  rep.measure = std::string(measure_name(measure));
  rep.k = k;
  cell.set.emplace(EvaluationSet::join(predictions, reliability));
  const auto& set = *cell.set;
  rep.coverage = static_cast<double>(set.size()) / static_cast<double>(split.total_held_out());
  rep.mae = mae(set);
  rep.rpi = rpi(set);
  cell.curve = baseline_quality(set, cfg.bins, cfg.trim, cfg.trim_scope);
  rep.baseline_quality = cell.curve.quality;
  return cell;
}

}  // namespace detail

inline RatingsMatrix load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw Error("no dataset given");
  return load_movielens(cfg.dataset, cfg.format, cfg.scale);
}

/// RPI, MAE and baseline quality for every (seed, measure, k). Rows are
/// emitted per seed, ordered by measure (config order) then k.
inline void run_prediction_sweep(const ExperimentConfig& cfg, const RatingsMatrix& data, const RowSink& rows,
                                 const CurveSink& curves = {}) {
  cfg.validate();
  const auto k_max = *std::max_element(cfg.k_sweep.begin(), cfg.k_sweep.end());
  const bool needs_resample =
      std::find(cfg.measures.begin(), cfg.measures.end(), Measure::FastResample) != cfg.measures.end();
  for (auto seed : cfg.seeds) {
    const auto split = relq::split(data, cfg.ratios, seed);
    const auto model = build_model(split.train, k_max, cfg.min_overlap, cfg.workers);
    std::optional<ResampleEnsemble> ensemble;
    if (needs_resample) ensemble.emplace(split.train, k_max, cfg.min_overlap, cfg.measure_config, cfg.workers);

    const std::size_t nk = cfg.k_sweep.size(), nm = cfg.measures.size();
    std::vector<std::optional<CellResult>> cells(nk * nm);
    parallel_for(nk, cfg.workers, [&](std::size_t ki) {
      const auto k = cfg.k_sweep[ki];
      const auto model_k = model.truncated(k);
      const auto predictions = predict_all(model_k, split.train, split.test);
      for (std::size_t mi = 0; mi < nm; ++mi) {
        const auto m = cfg.measures[mi];
        const auto rel = m == Measure::FastResample
                             ? ensemble->reliability(k, split.test)
                             : compute_reliability(m, model_k, split.train, split.test, cfg.measure_config);
        auto cell = detail::score_cell(cfg, split, seed, m, k, predictions, rel);
        cell.set.reset();
        cells[mi * nk + ki] = std::move(cell);
      }
    });
    for (std::size_t mi = 0; mi < nm; ++mi) {
      for (std::size_t ki = 0; ki < nk; ++ki) {
        const auto& cell = *cells[mi * nk + ki];
        rows(cell.report);
        if (curves) curves(seed, cell.report.measure, cell.report.k, cell.curve);
      }
    }
  }
}

inline void run_prediction_sweep(const ExperimentConfig& cfg, const RowSink& rows, const CurveSink& curves = {}) {
  cfg.validate();
  run_prediction_sweep(cfg, load_dataset(cfg), rows, curves);
}

/// RRI at a fixed k and theta for every (seed, measure, n). Candidates for a
/// user are their held-out test items, so relevance is judged on true
/// ratings.
inline void run_recommendation_sweep(const ExperimentConfig& cfg, const RatingsMatrix& data, const RowSink& rows) {
  cfg.validate();
  for (auto seed : cfg.seeds) {
    const auto split = relq::split(data, cfg.ratios, seed);
    const auto model = build_model(split.train, cfg.k, cfg.min_overlap, cfg.workers);
    const auto predictions = predict_all(model, split.train, split.test, cfg.workers);

    const std::size_t nm = cfg.measures.size(), nn = cfg.n_sweep.size();
    std::vector<QualityReport> out(nm * nn);
    parallel_for(nm, cfg.workers, [&](std::size_t mi) {
      const auto m = cfg.measures[mi];
      const auto rel = m == Measure::FastResample
                           ? fast_resample(split.train, cfg.k, split.test, cfg.measure_config, cfg.min_overlap)
                           : compute_reliability(m, model, split.train, split.test, cfg.measure_config);
      const auto cell = detail::score_cell(cfg, split, seed, m, cfg.k, predictions, rel);
      for (std::size_t ni = 0; ni < nn; ++ni) {
        auto rep = cell.report;
        rep.n = cfg.n_sweep[ni];
        rep.theta = cfg.theta;
        const auto lists = recommend_from_set(*cell.set, cfg.n_sweep[ni]);
        rep.rri = rri(*cell.set, lists, cfg.theta);
        out[mi * nn + ni] = std::move(rep);
      }
    });
    for (const auto& rep : out) rows(rep);
  }
}

inline void run_recommendation_sweep(const ExperimentConfig& cfg, const RowSink& rows) {
  cfg.validate();
  run_recommendation_sweep(cfg, load_dataset(cfg), rows);
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kReportHeader =
    "dataset,seed,measure,K,N,theta,coverage,MAE,RPI,RRI,baseline_quality";
inline constexpr std::string_view kCurveHeader = "measure,K,bin_index,bin_lo,bin_hi,count,amplitude";

/// Not-applicable fields are empty; an undefined RRI in a recommendation row
/// is written as `null`.
inline void write_report_row(std::ostream& out, const QualityReport& r) {
  out << r.dataset << ',' << r.seed << ',' << r.measure << ',' << r.k << ',';
  if (r.n) out << *r.n;
  out << ',';
  if (r.theta) out << format_double(*r.theta);
  out << ',' << format_double(r.coverage) << ',' << format_double(r.mae) << ',' << format_double(r.rpi) << ',';
  if (r.rri) {
    out << format_double(*r.rri);
  } else if (r.n) {
    out << "null";
  }
  out << ',' << format_double(r.baseline_quality) << '\n';
}

inline void write_curve(std::ostream& out, const std::string& measure, std::size_t k, const ConfidenceCurve& c) {
  for (std::size_t b = 0; b < c.bins.size(); ++b) {
    const auto& bin = c.bins[b];
    out << measure << ',' << k << ',' << b + 1 << ',' << format_double(bin.lo) << ',' << format_double(bin.hi)
        << ',' << bin.count << ',' << format_double(bin.amplitude) << '\n';
  }
}

inline std::vector<QualityReport> read_report(std::istream& in) {
  std::vector<QualityReport> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (text == kReportHeader) continue;
    auto f = detail::split_fields(text, ",");
    if (f.size() != 11) throw ParseError(lineno, "expected 11 report fields");
    try {
      QualityReport r;
      r.dataset = std::string(f[0]);
      r.seed = detail::to_uint("seed", f[1]);
      r.measure = std::string(f[2]);
      r.k = detail::to_uint("K", f[3]);
      if (!f[4].empty()) r.n = detail::to_uint("N", f[4]);
      if (!f[5].empty()) r.theta = detail::to_double("theta", f[5]);
      r.coverage = detail::to_double("coverage", f[6]);
      r.mae = detail::to_double("MAE", f[7]);
      r.rpi = detail::to_double("RPI", f[8]);
      if (!f[9].empty() && f[9] != "null") r.rri = detail::to_double("RRI", f[9]);
      r.baseline_quality = detail::to_double("baseline_quality", f[10]);
      rows.push_back(std::move(r));
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return rows;
}

// Intermediate artifacts: predictions and reliability vectors.

/// `user,item,prediction,rating,error`; coverage gaps have empty prediction
/// and error fields.
inline void write_predictions(std::ostream& out, std::span<const TestTriple> held_out,
                              std::span<const std::optional<ScoredPrediction>> predictions) {
  out << "user,item,prediction,rating,error\n";
  for (std::size_t t = 0; t < held_out.size(); ++t) {
    const auto& tt = held_out[t];
    out << tt.user << ',' << tt.item << ',';
    if (t < predictions.size() && predictions[t]) {
      out << format_double(predictions[t]->p) << ',' << format_double(tt.rating) << ','
          << format_double(predictions[t]->e) << '\n';
    } else {
      out << ',' << format_double(tt.rating) << ",\n";
    }
  }
}

struct PredictionFile {
  std::vector<TestTriple> held_out;
  std::vector<std::optional<ScoredPrediction>> predictions;  // aligned with held_out
};

inline PredictionFile read_predictions(std::istream& in) {
  PredictionFile out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(line);
    if (text.empty() || lineno == 1) continue;
    auto f = detail::split_fields(text, ",");
    if (f.size() != 5) throw ParseError(lineno, "expected 5 prediction fields");
    TestTriple tt;
    if (!detail::parse_number(f[0], tt.user) || !detail::parse_number(f[1], tt.item) ||
        !detail::parse_number(f[3], tt.rating)) {
      throw ParseError(lineno, "bad prediction record");
    }
    out.held_out.push_back(tt);
    if (f[2].empty()) {
      out.predictions.emplace_back();
    } else {
      double p;
      if (!detail::parse_number(f[2], p)) throw ParseError(lineno, "bad prediction value");
      out.predictions.push_back(score(tt.user, tt.item, p, tt.rating));
    }
  }
  return out;
}

/// `user,item,measure,l`
inline void write_reliability(std::ostream& out, const ReliabilityVector& rel) {
  out << "user,item,measure,l\n";
  for (const auto& [key, l] : rel.values) {
    out << key.first << ',' << key.second << ',' << measure_name(rel.measure) << ',' << format_double(l) << '\n';
  }
}

inline ReliabilityVector read_reliability(std::istream& in) {
  ReliabilityVector out;
  bool measure_seen = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(line);
    if (text.empty() || lineno == 1) continue;
    auto f = detail::split_fields(text, ",");
    if (f.size() != 4) throw ParseError(lineno, "expected 4 reliability fields");
    Id user, item;
    double l;
    if (!detail::parse_number(f[0], user) || !detail::parse_number(f[1], item) || !detail::parse_number(f[3], l)) {
      throw ParseError(lineno, "bad reliability record");
    }
    const auto m = parse_measure(f[2]);
    if (measure_seen && m != out.measure) throw ParseError(lineno, "mixed measures in one reliability file");
    out.measure = m;
    measure_seen = true;
    if (!out.values.emplace(std::make_pair(user, item), l).second) throw ParseError(lineno, "duplicate key");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summary

struct MeasureSummary {
  std::string measure;
  std::size_t rows = 0;
  std::size_t best_k = 0;  // k of the highest-RPI row
  double rpi_min = 0.0, rpi_max = 0.0;
  std::optional<double> rri_min, rri_max;
  std::optional<std::size_t> best_n;  // n of the highest-RRI row
  double coverage_min = 0.0, coverage_mean = 0.0, coverage_max = 0.0;
};

/// Per-measure aggregates, in order of first appearance. Throws on no rows.
inline std::vector<MeasureSummary> report_summary(std::span<const QualityReport> rows) {
  if (rows.empty()) throw Error("no report rows to summarise");
  std::vector<MeasureSummary> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const MeasureSummary& s) { return s.measure == r.measure; });
    if (it == out.end()) {
      MeasureSummary s;
      s.measure = r.measure;
      s.best_k = r.k;
      s.rpi_min = s.rpi_max = r.rpi;
      s.coverage_min = s.coverage_max = r.coverage;
      out.push_back(s);
      it = out.end() - 1;
    }
    auto& s = *it;
    ++s.rows;
    if (r.rpi > s.rpi_max) s.best_k = r.k;
    s.rpi_min = std::min(s.rpi_min, r.rpi);
    s.rpi_max = std::max(s.rpi_max, r.rpi);
    if (r.rri) {
      if (!s.rri_max || *r.rri > *s.rri_max) {
        s.rri_max = *r.rri;
        s.best_n = r.n;
      }
      s.rri_min = s.rri_min ? std::min(*s.rri_min, *r.rri) : *r.rri;
    }
    s.coverage_min = std::min(s.coverage_min, r.coverage);
    s.coverage_max = std::max(s.coverage_max, r.coverage);
    s.coverage_mean += r.coverage;
  }
  for (auto& s : out) s.coverage_mean /= static_cast<double>(s.rows);
  return out;
}

inline std::string summary_table(std::span<const MeasureSummary> summary) {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream o;
    if (v) {
      o << std::fixed << std::setprecision(4) << *v;
    } else {
      o << "-";
    }
    return o.str();
  };
  os << std::left << std::setw(16) << "measure" << std::right << std::setw(6) << "rows" << std::setw(8) << "best_k"
     << std::setw(10) << "RPI_min" << std::setw(10) << "RPI_max" << std::setw(10) << "RRI_min" << std::setw(10)
     << "RRI_max" << std::setw(10) << "cov_min" << std::setw(10) << "cov_mean" << std::setw(10) << "cov_max"
     << '\n';
  for (const auto& s : summary) {
    os << std::left << std::setw(16) << s.measure << std::right << std::setw(6) << s.rows << std::setw(8)
       << s.best_k << std::setw(10) << opt(s.rpi_min) << std::setw(10) << opt(s.rpi_max) << std::setw(10)
       << opt(s.rri_min) << std::setw(10) << opt(s.rri_max) << std::setw(10) << opt(s.coverage_min)
       << std::setw(10) << opt(s.coverage_mean) << std::setw(10) << opt(s.coverage_max) << '\n';
  }
  return os.str();
}

inline nlohmann::json summary_json(std::span<const MeasureSummary> summary) {
  auto j = nlohmann::json::array();
  for (const auto& s : summary) {
    nlohmann::json e{{"measure", s.measure},
                     {"rows", s.rows},
                     {"best_k", s.best_k},
                     {"rpi_min", s.rpi_min},
                     {"rpi_max", s.rpi_max},
                     {"coverage_min", s.coverage_min},
                     {"coverage_mean", s.coverage_mean},
                     {"coverage_max", s.coverage_max}};
    e["rri_min"] = s.rri_min ? nlohmann::json(*s.rri_min) : nlohmann::json(nullptr);
    e["rri_max"] = s.rri_max ? nlohmann::json(*s.rri_max) : nlohmann::json(nullptr);
    e["best_n"] = s.best_n ? nlohmann::json(*s.best_n) : nlohmann::json(nullptr);
    j.push_back(std::move(e));
  }
  return j;
}

}  // namespace relq
