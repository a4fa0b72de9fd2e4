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

// relq: command-line front end for splitting datasets, producing predictions
// and reliability values, and scoring reliability measures.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "relq/relq.hpp"

namespace fs = std::filesystem;

namespace {

// Every experiment setting is registered as a string option named after its
// config key, then applied on top of the optional config file.
struct Settings {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App* app, std::initializer_list<const char*> keys) {
    if (!app->get_option_no_throw("--config")) {
      app->add_option("--config", config_file, "flat key = value settings file")->check(CLI::ExistingFile);
    }
    for (const char* key : keys) {
      options[key] = app->add_option(std::string("--") + key, values[key], describe(key));
    }
  }

  relq::ExperimentConfig resolve() const {
    relq::ExperimentConfig cfg;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      relq::read_config(in, cfg);
    }
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) relq::apply_setting(cfg, key, values.at(key));
    }
    return cfg;
  }

  static std::string describe(std::string_view key) {
    static const std::map<std::string_view, std::string> help{
        {"dataset", "ratings file"},
        {"format", "ml1m-double-colon | ml100k-tab | generic-csv"},
        {"name", "dataset label in reports (default: file stem)"},
        {"seed", "split seed(s), comma separated"},
        {"user-test-frac", "fraction of users held out (default 0.2)"},
        {"item-test-frac", "fraction of items held out (default 0.2)"},
        {"k", "neighborhood size (default 200)"},
        {"k-sweep", "k values: a,b,c or start:stop:step (default 20:400:20)"},
        {"n-sweep", "list lengths: a,b,c or start:stop:step (default 2:20:2)"},
        {"theta", "relevance threshold (default 4)"},
        {"measure", "support_user, support_item, knn_variability, fast_resample or all"},
        {"alpha", "fraction of train ratings per resample (default 0.8)"},
        {"resamples", "number of resamples (default 20)"},
        {"resample-seed", "base seed for resampling (default 0)"},
        {"epsilon", "denominator guard (default 1)"},
        {"min-overlap", "minimum co-rated items for a similarity (default 2)"},
        {"bins", "confidence-curve bins (default 10)"},
        {"trim", "fraction of largest errors dropped (default 0.05)"},
        {"trim-scope", "bin | global (default bin)"},
        {"workers", "worker threads (default 1)"},
    };
    auto it = help.find(key);
    return it == help.end() ? "" : it->second;
  }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw relq::Error("cannot write " + path.string());
  return out;
}

relq::Split make_split(const relq::ExperimentConfig& cfg) {
  return relq::split(relq::load_dataset(cfg), cfg.ratios, cfg.seeds.front());
}

void print_split(const relq::Split& s) {
  std::cout << "train ratings: " << s.train.num_ratings() << "\ntest users: " << s.test_users.size()
            << "\ntest items: " << s.test_items.size() << "\ntest triples: " << s.test.size()
            << "\nuncoverable: " << s.uncoverable.size() << '\n';
}

std::vector<relq::TestTriple> all_held_out(const relq::Split& s) {
  auto held = s.test;
  held.insert(held.end(), s.uncoverable.begin(), s.uncoverable.end());
  return held;
}

int run_split(const relq::ExperimentConfig& cfg, const fs::path& out) {
  auto s = make_split(cfg);
  relq::write_split(s, out);
  print_split(s);
  return 0;
}

int run_predict(const relq::ExperimentConfig& cfg, const fs::path& out) {
  auto s = make_split(cfg);
  auto model = relq::build_model(s.train, cfg.k, cfg.min_overlap, cfg.workers);
  const auto held = all_held_out(s);
  auto preds = relq::predict_all(model, s.train, held, cfg.workers);
  auto file = open_out(out / "predictions.csv");
  relq::write_predictions(file, held, preds);
  std::size_t covered = 0;
  for (const auto& p : preds) covered += p.has_value();
  std::cout << "predicted " << covered << " of " << held.size() << " held-out ratings\n";
  return 0;
}

int run_reliability(const relq::ExperimentConfig& cfg, const fs::path& out) {
  cfg.validate();
  auto s = make_split(cfg);
  auto model = relq::build_model(s.train, cfg.k, cfg.min_overlap, cfg.workers);
  for (auto m : cfg.measures) {
    auto rel = m == relq::Measure::FastResample
                   ? relq::fast_resample(s.train, cfg.k, s.test, cfg.measure_config, cfg.min_overlap, cfg.workers)
                   : relq::compute_reliability(m, model, s.train, s.test, cfg.measure_config);
    const auto path = out / ("reliability-" + std::string(relq::measure_name(m)) + ".csv");
    auto file = open_out(path);
    relq::write_reliability(file, rel);
    std::cout << relq::measure_name(m) << ": " << rel.values.size() << " values -> " << path.string() << '\n';
  }
  return 0;
}

int run_evaluate(const relq::ExperimentConfig& cfg, const fs::path& predictions_path,
                 const fs::path& reliability_path, std::optional<std::size_t> n, const fs::path& out) {
  std::ifstream pin(predictions_path), rin(reliability_path);
  if (!pin) throw relq::Error("cannot read " + predictions_path.string());
  if (!rin) throw relq::Error("cannot read " + reliability_path.string());
  const auto preds = relq::read_predictions(pin);
  const auto rel = relq::read_reliability(rin);
  const relq::EvaluationSet set = relq::EvaluationSet::join(preds.predictions, rel);

  relq::QualityReport rep;
  rep.dataset = cfg.dataset.empty() && cfg.dataset_name.empty() ? predictions_path.parent_path().filename().string()
                                                                 : cfg.name();
  rep.seed = cfg.seeds.front();
  rep.measure = std::string(relq::measure_name(rel.measure));
  rep.k = cfg.k;
  rep.coverage = static_cast<double>(set.size()) / static_cast<double>(preds.held_out.size());
  rep.mae = relq::mae(set);
  rep.rpi = relq::rpi(set);
  const auto curve = relq::baseline_quality(set, cfg.bins, cfg.trim, cfg.trim_scope);
  rep.baseline_quality = curve.quality;
  if (n) {
    rep.n = *n;
    rep.theta = cfg.theta;
    rep.rri = relq::rri(set, relq::recommend_from_set(set, *n), cfg.theta);
  }

  auto report = open_out(out / "report.csv");
  report << relq::kReportHeader << '\n';
  relq::write_report_row(report, rep);
  auto curves = open_out(out / "curves.csv");
  curves << relq::kCurveHeader << '\n';
  relq::write_curve(curves, rep.measure, rep.k, curve);

  relq::write_report_row(std::cout << relq::kReportHeader << '\n', rep);
  return 0;
}

template <class Sweep>
int run_sweep(const fs::path& path, Sweep&& sweep) {
  auto out = open_out(path);
  out << relq::kReportHeader << '\n';
  std::size_t rows = 0;
  try {
    sweep([&](const relq::QualityReport& r) {
      relq::write_report_row(out, r);
      out.flush();
      ++rows;
    });
  } catch (const std::exception& e) {
    out << "# FAILED: " << e.what() << '\n';
    throw;
  }
  std::cout << "wrote " << rows << " rows to " << path.string() << '\n';
  return 0;
}

int run_sweep_prediction(const relq::ExperimentConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto data = relq::load_dataset(cfg);
  std::map<std::uint64_t, std::ofstream> curve_files;
  relq::CurveSink curves = [&](std::uint64_t seed, const std::string& measure, std::size_t k,
                               const relq::ConfidenceCurve& c) {
    auto it = curve_files.find(seed);
    if (it == curve_files.end()) {
      it = curve_files.emplace(seed, open_out(out / ("curves-seed-" + std::to_string(seed) + ".csv"))).first;
      it->second << relq::kCurveHeader << '\n';
    }
    relq::write_curve(it->second, measure, k, c);
  };
  return run_sweep(out / "prediction.csv",
                   [&](const relq::RowSink& rows) { relq::run_prediction_sweep(cfg, data, rows, curves); });
}

int run_sweep_recommendation(const relq::ExperimentConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto data = relq::load_dataset(cfg);
  return run_sweep(out / "recommendation.csv",
                   [&](const relq::RowSink& rows) { relq::run_recommendation_sweep(cfg, data, rows); });
}

int run_report(const std::vector<std::string>& inputs, const std::string& json_out) {
  std::vector<relq::QualityReport> rows;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw relq::Error("cannot read " + path);
    auto part = relq::read_report(in);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto summary = relq::report_summary(rows);
  std::cout << relq::summary_table(summary);
  const auto json = relq::summary_json(summary).dump(2);
  if (json_out.empty()) {
    std::cout << json << '\n';
  } else {
    auto out = open_out(json_out);
    out << json << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relq: reliability quality evaluation for KNN collaborative filtering"};
  app.require_subcommand(1);

  const auto data_keys = {"dataset", "format", "name", "seed", "user-test-frac", "item-test-frac"};
  std::string out = "relq-out";

  Settings split_s, predict_s, rel_s, eval_s, sweep_p, sweep_r;
  auto* split_cmd = app.add_subcommand("split", "train/test split; writes train.csv, test.csv, uncoverable.csv");
  split_s.add(split_cmd, data_keys);
  split_cmd->add_option("--out", out, "output directory");

  auto* predict_cmd = app.add_subcommand("predict", "KNN predictions for the held-out ratings");
  predict_s.add(predict_cmd, data_keys);
  predict_s.add(predict_cmd, {"k", "min-overlap", "workers"});
  predict_cmd->add_option("--out", out, "output directory");

  auto* rel_cmd = app.add_subcommand("reliability", "reliability values for the held-out ratings");
  rel_s.add(rel_cmd, data_keys);
  rel_s.add(rel_cmd, {"k", "min-overlap", "workers", "measure", "alpha", "resamples", "resample-seed", "epsilon"});
  rel_cmd->add_option("--out", out, "output directory");

  std::string predictions_file, reliability_file;
  std::optional<std::size_t> eval_n;
  auto* eval_cmd = app.add_subcommand("evaluate", "score exported predictions against a reliability file");
  eval_cmd->add_option("--predictions", predictions_file, "predictions.csv from `predict`")->required();
  eval_cmd->add_option("--reliability", reliability_file, "reliability CSV from `reliability`")->required();
  eval_cmd->add_option("--n", eval_n, "also compute RRI over top-n lists of the held-out items");
  eval_s.add(eval_cmd, {"dataset", "name", "seed", "k", "theta", "bins", "trim", "trim-scope"});
  eval_cmd->add_option("--out", out, "output directory");

  auto* sweep_p_cmd = app.add_subcommand("sweep-prediction", "RPI and baseline quality over a k sweep");
  sweep_p.add(sweep_p_cmd, data_keys);
  sweep_p.add(sweep_p_cmd, {"k-sweep", "measure", "alpha", "resamples", "resample-seed", "epsilon", "min-overlap",
                            "bins", "trim", "trim-scope", "workers"});
  sweep_p_cmd->add_option("--out", out, "output directory");

  auto* sweep_r_cmd = app.add_subcommand("sweep-recommendation", "RRI over an n sweep at fixed k and theta");
  sweep_r.add(sweep_r_cmd, data_keys);
  sweep_r.add(sweep_r_cmd, {"k", "theta", "n-sweep", "measure", "alpha", "resamples", "resample-seed", "epsilon",
                            "min-overlap", "bins", "trim", "trim-scope", "workers"});
  sweep_r_cmd->add_option("--out", out, "output directory");

  std::vector<std::string> report_inputs;
  std::string report_json;
  auto* report_cmd = app.add_subcommand("report", "summarise sweep CSVs");
  report_cmd->add_option("--rows", report_inputs, "report CSV file(s)")->required();
  report_cmd->add_option("--out", report_json, "write the JSON summary here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*split_cmd) return run_split(split_s.resolve(), out);
    if (*predict_cmd) return run_predict(predict_s.resolve(), out);
    if (*rel_cmd) return run_reliability(rel_s.resolve(), out);
    if (*eval_cmd) return run_evaluate(eval_s.resolve(), predictions_file, reliability_file, eval_n, out);
    if (*sweep_p_cmd) return run_sweep_prediction(sweep_p.resolve(), out);
    if (*sweep_r_cmd) return run_sweep_recommendation(sweep_r.resolve(), out);
    if (*report_cmd) return run_report(report_inputs, report_json);
  } catch (const std::exception& e) {
    std::cerr << "relq: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
