// Three fixed prediction/label pairs with hand-computed metric values.
#ifndef HFE_TESTS_METRIC_FIXTURES_HPP_
#define HFE_TESTS_METRIC_FIXTURES_HPP_

#include <string>
#include <vector>

#include "hfe/eval.hpp"

namespace fixtures {

struct MetricFixture {
  std::string name;
  hfe::BinaryMatrix preds;
  hfe::BinaryMatrix labels;
  std::vector<double> class_per_attr;
  double class_avg;
  double inst_acc, inst_prec, inst_recall, inst_f1;
};

inline hfe::BinaryMatrix labels() {
  hfe::BinaryMatrix y(4, 3);
  y << 1, 0, 1,
       0, 0, 0,
       1, 1, 0,
       0, 1, 1;
  return y;
}

inline std::vector<MetricFixture> all() {
  const hfe::BinaryMatrix y = labels();
  hfe::BinaryMatrix inverted = (1 - y.array()).matrix();
  hfe::BinaryMatrix mixed(4, 3);
  mixed << 1, 1, 1,
           0, 0, 1,
           1, 0, 0,
           0, 1, 1;
  // Mixed, per row (tp / union, tp / |pred|, tp / |true|):
  //   r0 2/3, 2/3, 1   r1 0, 0, 0 (true set empty, pred not)
  //   r2 1/2, 1, 1/2   r3 1, 1, 1
  // acc 13/24, prec 2/3, recall 5/8, f1 = 2PR/(P+R) = 20/31.
  // Per attribute: 4/4, 2/4, 3/4, mean 3/4.
  return {
      {"perfect", y, y, {1.0, 1.0, 1.0}, 1.0, 1.0, 1.0, 1.0, 1.0},
      {"inverted", inverted, y, {0.0, 0.0, 0.0}, 0.0, 0.0, 0.0, 0.0, 0.0},
      {"mixed", mixed, y, {1.0, 0.5, 0.75}, 0.75, 13.0 / 24.0, 2.0 / 3.0, 5.0 / 8.0, 20.0 / 31.0},
  };
}

}  // namespace fixtures

#endif  // HFE_TESTS_METRIC_FIXTURES_HPP_
