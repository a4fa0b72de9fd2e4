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

// Scores one reliability measure end to end: split, KNN predictions,
// knn_variability values, then MAE, RPI, baseline quality and RRI.
//
//   score_reliability [u.data] [k]
//
// Without arguments a synthetic rating matrix is used.

#include <cstdlib>
#include <iostream>

#include "relq/relq.hpp"

int main(int argc, char** argv) {
  try {
    const auto data = argc > 1 ? relq::load_movielens(argv[1], relq::Format::Ml100kTab)
                               : relq::generate_synthetic({400, 300, 0.1, 0.7, 1});
    const std::size_t k = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 50;

    const auto split = relq::split(data, {}, 1);
    const auto model = relq::build_model(split.train, k);
    const auto predictions = relq::predict_all(model, split.train, split.test);
    const auto rel = relq::compute_reliability(relq::Measure::KnnVariability, model, split.train, split.test, {});
    const auto set = relq::EvaluationSet::join(predictions, rel);

    std::cout << "held out " << split.total_held_out() << ", evaluated " << set.size() << '\n'
              << "MAE              " << relq::mae(set) << '\n'
              << "RPI              " << relq::rpi(set) << '\n'
              << "baseline quality " << relq::baseline_quality(set).quality << '\n';

    for (std::size_t n : {2, 10}) {
      const auto r = relq::rri(set, relq::recommend_from_set(set, n), 4.0);
      std::cout << "RRI at N=" << n << (n < 10 ? "       " : "      ") << (r ? relq::format_double(*r) : "null")
                << '\n';
    }

    const auto user = split.test.front().user;
    std::cout << "\ntop items for user " << user << " (prediction, reliability):\n";
    for (const auto& list : relq::recommend_from_set(set, 5)) {
      if (list.user != user) continue;
      for (const auto& rec : list.items) {
        std::cout << "  item " << rec.item << "  " << rec.p << "  " << *rel.find(user, rec.item) << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "score_reliability: " << e.what() << '\n';
    return 1;
  }
}
