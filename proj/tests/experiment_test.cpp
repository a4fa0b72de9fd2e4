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

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <gtest/gtest.h>

#include "oracles/oracle_set.hpp"
#include "relq/relq.hpp"

using relq::ExperimentConfig;
using relq::Measure;
using relq::QualityReport;

namespace {

relq::RatingsMatrix small_data() {
  relq::SyntheticParams sp;
  sp.num_users = 120;
  sp.num_items = 80;
  sp.density = 0.25;
  sp.seed = 11;
  return relq::generate_synthetic(sp);
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.dataset_name = "synthetic";
  cfg.seeds = {1, 2};
  cfg.k_sweep = {5, 10, 20};
  cfg.k = 20;
  cfg.measure_config.resamples = 3;
  return cfg;
}

std::string prediction_csv(const ExperimentConfig& cfg, const relq::RatingsMatrix& data) {
  std::ostringstream rows, curves;
  rows << relq::kReportHeader << '\n';
  relq::run_prediction_sweep(cfg, data, [&](const QualityReport& r) { relq::write_report_row(rows, r); },
                             [&](std::uint64_t seed, const std::string& m, std::size_t k,
                                 const relq::ConfidenceCurve& c) {
                               curves << seed << ',';
                               relq::write_curve(curves, m, k, c);
                             });
  return rows.str() + curves.str();
}

std::vector<QualityReport> recommendation_rows(const ExperimentConfig& cfg, const relq::RatingsMatrix& data) {
  std::vector<QualityReport> out;
  relq::run_recommendation_sweep(cfg, data, [&](const QualityReport& r) { out.push_back(r); });
  return out;
}

std::string recommendation_csv(const ExperimentConfig& cfg, const relq::RatingsMatrix& data) {
  std::ostringstream os;
  for (const auto& r : recommendation_rows(cfg, data)) relq::write_report_row(os, r);
  return os.str();
}

}  // namespace

TEST(Config, ParseSweep) {
  EXPECT_EQ(relq::parse_sweep("20:200:20").size(), 10u);
  EXPECT_EQ(relq::parse_sweep("20:200:20").back(), 200u);
  EXPECT_EQ(relq::parse_sweep("2:7:2"), (std::vector<std::size_t>{2, 4, 6}));
  EXPECT_EQ(relq::parse_sweep("3, 1,2"), (std::vector<std::size_t>{3, 1, 2}));
  EXPECT_THROW(relq::parse_sweep("1:2"), relq::Error);
  EXPECT_THROW(relq::parse_sweep("1:5:0"), relq::Error);
  EXPECT_THROW(relq::parse_sweep("a,b"), relq::Error);
}

TEST(Config, Defaults) {
  ExperimentConfig cfg;
  EXPECT_EQ(cfg.k_sweep.size(), 20u);
  EXPECT_EQ(cfg.k_sweep.front(), 20u);
  EXPECT_EQ(cfg.k_sweep.back(), 400u);
  EXPECT_EQ(cfg.n_sweep.size(), 10u);
  EXPECT_EQ(cfg.n_sweep.back(), 20u);
  EXPECT_EQ(cfg.k, 200u);
  EXPECT_DOUBLE_EQ(cfg.theta, 4.0);
  EXPECT_EQ(cfg.measures.size(), 4u);
}

TEST(Config, FileAndOverride) {
  std::istringstream in(
      "# sweep\n"
      "dataset = /data/u.data\n"
      "seed = 3,4   # two seeds\n"
      "k-sweep = 10:30:10\n"
      "measure = knn_variability, support_user\n"
      "theta = 3.5\n"
      "\n"
      "trim-scope = global\n");
  ExperimentConfig cfg;
  relq::read_config(in, cfg);
  EXPECT_EQ(cfg.dataset, "/data/u.data");
  EXPECT_EQ(cfg.name(), "u");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(cfg.k_sweep, (std::vector<std::size_t>{10, 20, 30}));
  EXPECT_EQ(cfg.measures, (std::vector<Measure>{Measure::KnnVariability, Measure::SupportUser}));
  EXPECT_DOUBLE_EQ(cfg.theta, 3.5);
  EXPECT_EQ(cfg.trim_scope, relq::TrimScope::Global);

  relq::apply_setting(cfg, "theta", "4");
  relq::apply_setting(cfg, "measure", "all");
  EXPECT_DOUBLE_EQ(cfg.theta, 4.0);
  EXPECT_EQ(cfg.measures.size(), 4u);
}

TEST(Config, Errors) {
  ExperimentConfig cfg;
  std::istringstream unknown("k = 5\nbogus = 1\n");
  try {
    relq::read_config(unknown, cfg);
    FAIL();
  } catch (const relq::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream no_eq("k 5\n");
  EXPECT_THROW(relq::read_config(no_eq, cfg), relq::ParseError);
  EXPECT_THROW(relq::apply_setting(cfg, "k", "-3"), relq::Error);
  EXPECT_THROW(relq::apply_setting(cfg, "measure", "oracle"), relq::Error);

  cfg = ExperimentConfig{};
  cfg.theta = 0.5;
  EXPECT_THROW(cfg.validate(), relq::Error);
  cfg = ExperimentConfig{};
  cfg.k_sweep.clear();
  EXPECT_THROW(cfg.validate(), relq::Error);
  cfg = ExperimentConfig{};
  cfg.measure_config.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), relq::Error);
}

TEST(PredictionSweep, EmptyMeasuresFailBeforeWork) {
  auto cfg = small_config();
  cfg.measures.clear();
  int rows = 0;
  EXPECT_THROW(relq::run_prediction_sweep(cfg, small_data(), [&](const QualityReport&) { ++rows; }), relq::Error);
  EXPECT_THROW(relq::run_recommendation_sweep(cfg, small_data(), [&](const QualityReport&) { ++rows; }),
               relq::Error);
  EXPECT_EQ(rows, 0);
}

TEST(PredictionSweep, RowsAndKeys) {
  const auto cfg = small_config();
  std::vector<QualityReport> rows;
  std::size_t curves = 0;
  relq::run_prediction_sweep(
      cfg, small_data(), [&](const QualityReport& r) { rows.push_back(r); },
      [&](std::uint64_t, const std::string&, std::size_t, const relq::ConfidenceCurve& c) {
        EXPECT_EQ(c.bins.size(), cfg.bins);
        ++curves;
      });
  ASSERT_EQ(rows.size(), cfg.seeds.size() * cfg.measures.size() * cfg.k_sweep.size());
  EXPECT_EQ(curves, rows.size());
  std::set<std::tuple<std::string, std::size_t, std::uint64_t>> keys;
  for (const auto& r : rows) {
    EXPECT_TRUE(keys.emplace(r.measure, r.k, r.seed).second);
    EXPECT_EQ(r.dataset, "synthetic");
    EXPECT_FALSE(r.n);
    EXPECT_FALSE(r.rri);
    EXPECT_GE(r.coverage, 0.0);
    EXPECT_LE(r.coverage, 1.0);
  }
  // measure-major, k-minor within a seed
  EXPECT_EQ(rows[0].measure, "support_user");
  EXPECT_EQ(rows[1].k, 10u);
}

TEST(PredictionSweep, ByteIdenticalAcrossRunsAndWorkers) {
  const auto data = small_data();
  auto cfg = small_config();
  const auto first = prediction_csv(cfg, data);
  EXPECT_EQ(first, prediction_csv(cfg, data));
  cfg.workers = 3;
  EXPECT_EQ(first, prediction_csv(cfg, data));
  cfg.seeds = {5};
  EXPECT_NE(first, prediction_csv(cfg, data));
}

TEST(PredictionSweep, MatchesMetricsOnExportedIntermediates) {
  const auto data = small_data();
  auto cfg = small_config();
  cfg.seeds = {2};
  cfg.k_sweep = {10};
  cfg.measures = {Measure::KnnVariability, Measure::SupportItem};
  std::ostringstream csv;
  relq::run_prediction_sweep(cfg, data, [&](const QualityReport& r) { relq::write_report_row(csv, r); });
  std::istringstream back(csv.str());
  const auto rows = relq::read_report(back);
  ASSERT_EQ(rows.size(), 2u);

  const auto s = relq::split(data, cfg.ratios, 2);
  const auto model = relq::build_model(s.train, 10);
  const auto preds = relq::predict_all(model, s.train, s.test);
  std::vector<relq::TestTriple> held(s.test.begin(), s.test.end());
  held.insert(held.end(), s.uncoverable.begin(), s.uncoverable.end());
  std::stringstream pred_file;
  relq::write_predictions(pred_file, held, preds);
  const auto pf = relq::read_predictions(pred_file);

  for (std::size_t m = 0; m < 2; ++m) {
    std::stringstream rel_file;
    relq::write_reliability(rel_file,
                            relq::compute_reliability(cfg.measures[m], model, s.train, s.test, cfg.measure_config));
    const auto set = relq::EvaluationSet::join(pf.predictions, relq::read_reliability(rel_file));
    EXPECT_EQ(rows[m].rpi, relq::rpi(set));
    EXPECT_EQ(rows[m].mae, relq::mae(set));
    EXPECT_EQ(rows[m].baseline_quality, relq::baseline_quality(set).quality);
    EXPECT_EQ(rows[m].coverage, static_cast<double>(set.size()) / static_cast<double>(pf.held_out.size()));
  }
}

TEST(RecommendationSweep, RowsPerMeasure) {
  auto cfg = small_config();
  cfg.seeds = {1};
  cfg.measures = {Measure::SupportUser, Measure::KnnVariability};
  const auto rows = recommendation_rows(cfg, small_data());
  ASSERT_EQ(rows.size(), 20u);
  std::map<std::string, std::size_t> per;
  std::set<std::pair<std::string, std::size_t>> keys;
  for (const auto& r : rows) {
    ++per[r.measure];
    ASSERT_TRUE(r.n);
    EXPECT_TRUE(keys.emplace(r.measure, *r.n).second);
    EXPECT_EQ(r.k, 20u);
    EXPECT_EQ(r.theta, 4.0);
  }
  EXPECT_EQ(per["support_user"], 10u);
  EXPECT_EQ(per["knn_variability"], 10u);
}

TEST(RecommendationSweep, ThetaAboveScaleGivesNull) {
  auto cfg = small_config();
  cfg.seeds = {1};
  cfg.theta = 6.0;
  std::ostringstream csv;
  for (const auto& r : recommendation_rows(cfg, small_data())) {
    EXPECT_FALSE(r.rri);
    relq::write_report_row(csv, r);
  }
  std::istringstream lines(csv.str());
  std::string line;
  while (std::getline(lines, line)) EXPECT_NE(line.find(",null,"), std::string::npos) << line;
}

TEST(RecommendationSweep, ByteIdenticalAcrossWorkers) {
  const auto data = small_data();
  auto cfg = small_config();
  const auto first = recommendation_csv(cfg, data);
  cfg.workers = 4;
  EXPECT_EQ(first, recommendation_csv(cfg, data));
}

TEST(RecommendationSweep, OracleReliabilityRriDoesNotIncreaseWithN) {
  const std::vector<std::size_t> ns = relq::parse_sweep("2:20:2");
  std::vector<double> mean(ns.size(), 0.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto set = relq::oracle::pipeline_oracle_set(seed);
    for (std::size_t j = 0; j < ns.size(); ++j) {
      const auto lists = relq::recommend_from_set(set, ns[j]);
      const auto r = relq::rri(set, lists, 4.0);
      ASSERT_TRUE(r);
      mean[j] += *r / 5.0;
    }
  }
  for (std::size_t j = 1; j < ns.size(); ++j) EXPECT_LE(mean[j], mean[j - 1] + 1e-12) << "n = " << ns[j];
  EXPECT_LT(mean.back(), mean.front());
}

TEST(Report, CsvRoundTrip) {
  QualityReport a;
  a.dataset = "d";
  a.seed = 7;
  a.measure = "knn_variability";
  a.k = 40;
  a.coverage = 0.25;
  a.mae = 0.7;
  a.rpi = -0.1;
  a.baseline_quality = 1.0 / 3.0;
  auto b = a;
  b.n = 4;
  b.theta = 4.0;
  auto c = b;
  c.rri = 0.125;
  std::stringstream csv;
  csv << relq::kReportHeader << '\n';
  for (const auto& r : {a, b, c}) relq::write_report_row(csv, r);
  const auto rows = relq::read_report(csv);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].baseline_quality, a.baseline_quality);
  EXPECT_FALSE(rows[0].n);
  EXPECT_FALSE(rows[1].rri);
  EXPECT_EQ(rows[1].n, 4u);
  EXPECT_EQ(rows[2].rri, 0.125);

  std::istringstream bad("d,1,m,2,,,x,0,0,,0\n");
  EXPECT_THROW(relq::read_report(bad), relq::ParseError);
}

TEST(Report, Summary) {
  EXPECT_THROW(relq::report_summary({}), relq::Error);

  QualityReport one;
  one.measure = "support_user";
  one.k = 20;
  one.rpi = 0.1;
  one.coverage = 0.5;
  const std::vector<QualityReport> single{one};
  const auto s1 = relq::report_summary(single);
  ASSERT_EQ(s1.size(), 1u);
  const auto table = relq::summary_table(s1);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2);

  auto cfg = small_config();
  std::vector<QualityReport> rows;
  relq::run_prediction_sweep(cfg, small_data(), [&](const QualityReport& r) { rows.push_back(r); });
  rows.erase(std::remove_if(rows.begin(), rows.end(), [](const QualityReport& r) { return r.measure == "fast_resample"; }),
             rows.end());
  const auto summary = relq::report_summary(rows);
  ASSERT_EQ(summary.size(), 3u);

  for (const auto& s : summary) {
    double lo = 1e300, hi = -1e300, cov_sum = 0.0;
    std::size_t n = 0, best_k = 0;
    for (const auto& r : rows) {
      if (r.measure != s.measure) continue;
      if (r.rpi > hi) best_k = r.k;
      lo = std::min(lo, r.rpi);
      hi = std::max(hi, r.rpi);
      cov_sum += r.coverage;
      ++n;
    }
    EXPECT_EQ(s.rows, n);
    EXPECT_EQ(s.rpi_min, lo);
    EXPECT_EQ(s.rpi_max, hi);
    EXPECT_EQ(s.best_k, best_k);
    EXPECT_DOUBLE_EQ(s.coverage_mean, cov_sum / static_cast<double>(n));
    EXPECT_FALSE(s.rri_max);
  }
  const auto j = relq::summary_json(summary);
  ASSERT_EQ(j.size(), 3u);
  EXPECT_TRUE(j[0]["rri_min"].is_null());
  EXPECT_EQ(j[2]["measure"], "knn_variability");
}

TEST(Ml100k, SinglePredictionRow) {
  if (!std::filesystem::exists(RELQ_ML100K)) GTEST_SKIP() << "MovieLens 100K not present";
  ExperimentConfig cfg;
  cfg.dataset = RELQ_ML100K;
  cfg.k_sweep = {200};
  cfg.measures = {Measure::KnnVariability};
  std::vector<QualityReport> rows;
  relq::run_prediction_sweep(cfg, [&](const QualityReport& r) { rows.push_back(r); });
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].dataset, "u");
  EXPECT_GT(rows[0].coverage, 0.5);
  EXPECT_LT(rows[0].coverage, 1.0);
  EXPECT_GT(rows[0].mae, 0.5);
  EXPECT_LT(rows[0].mae, 1.0);
}
