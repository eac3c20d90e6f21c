#ifndef HFE_EVAL_HPP_
#define HFE_EVAL_HPP_

#include <cmath>
#include <iomanip>
#include <ostream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hfe/core.hpp"
#include "hfe/data.hpp"
#include "hfe/mining.hpp"

namespace hfe {

using BinaryMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDecisionThreshold = 0.5;

inline BinaryMatrix predict(const Matrix& probs, double threshold = kDecisionThreshold) {
  return (probs.array() > threshold).cast<int>().matrix();
}

inline BinaryMatrix label_matrix(const std::vector<Sample>& samples) {
  if (samples.empty()) return {};
  BinaryMatrix y(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(samples.front().attrs.size()));
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = 0; j < samples[i].attrs.size(); ++j)
      y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].attrs[j];
  return y;
}

struct MetricReport {
  std::vector<double> class_based_per_attr;
  double class_based_avg = 0.0;
  double instance_acc = 0.0;
  double instance_prec = 0.0;
  double instance_recall = 0.0;
  double instance_f1 = 0.0;
};

struct ClassBased {
  std::vector<double> per_attr;
  double avg = 0.0;
};

inline void check_same_shape(const BinaryMatrix& a, const BinaryMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw usage_error(std::string(what) + ": shape mismatch");
  if (a.rows() == 0 || a.cols() == 0) throw usage_error(std::string(what) + ": empty input");
}

inline ClassBased class_based_metrics(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  check_same_shape(preds, labels, "class_based_metrics");
  ClassBased out;
  for (Eigen::Index j = 0; j < preds.cols(); ++j) {
    const auto correct = (preds.col(j).array() == labels.col(j).array()).count();
    out.per_attr.push_back(static_cast<double>(correct) / static_cast<double>(preds.rows()));
    out.avg += out.per_attr.back();
  }
  out.avg /= static_cast<double>(preds.cols());
  return out;
}

struct InstanceBased {
  double acc = 0.0;
  double prec = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Per-sample Jaccard accuracy, precision and recall over the positive
// attribute sets, averaged over samples. An empty denominator scores 1 when
// both sets are empty and 0 otherwise. F1 comes from the averaged P and R.
inline InstanceBased instance_based_metrics(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  check_same_shape(preds, labels, "instance_based_metrics");
  InstanceBased out;
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    std::size_t tp = 0, n_pred = 0, n_true = 0;
    for (Eigen::Index j = 0; j < preds.cols(); ++j) {
      const bool p = preds(i, j) != 0, t = labels(i, j) != 0;
      tp += p && t;
      n_pred += p;
      n_true += t;
    }
    const std::size_t n_union = n_pred + n_true - tp;
    const bool both_empty = n_pred == 0 && n_true == 0;
    auto ratio = [&](std::size_t num, std::size_t den) {
      if (den == 0) return both_empty ? 1.0 : 0.0;
      return static_cast<double>(num) / static_cast<double>(den);
    };
    out.acc += ratio(tp, n_union);
    out.prec += ratio(tp, n_pred);
    out.recall += ratio(tp, n_true);
  }
  const double n = static_cast<double>(preds.rows());
  out.acc /= n;
  out.prec /= n;
  out.recall /= n;
  out.f1 = out.prec + out.recall > 0.0 ? 2.0 * out.prec * out.recall / (out.prec + out.recall) : 0.0;
  return out;
}

inline MetricReport evaluate_predictions(const BinaryMatrix& preds, const BinaryMatrix& labels) {
  const ClassBased cb = class_based_metrics(preds, labels);
  const InstanceBased ib = instance_based_metrics(preds, labels);
  return {cb.per_attr, cb.avg, ib.acc, ib.prec, ib.recall, ib.f1};
}

inline void print_table(std::ostream& os, const MetricReport& r) {
  const auto flags = os.flags();
  os << std::fixed << std::setprecision(4);
  os << "class-based accuracy\n";
  for (std::size_t j = 0; j < r.class_based_per_attr.size(); ++j)
    os << "  attr " << std::setw(3) << j << "   " << r.class_based_per_attr[j] << '\n';
  os << "  avg        " << r.class_based_avg << '\n';
  os << "instance-based\n";
  os << "  acc        " << r.instance_acc << '\n';
  os << "  prec       " << r.instance_prec << '\n';
  os << "  recall     " << r.instance_recall << '\n';
  os << "  f1         " << r.instance_f1 << '\n';
  os.flags(flags);
}

struct EmbeddingDiagnostics {
  double mean_intra_id_dist = 0.0;     // pairs sharing an id
  double mean_intra_class_dist = 0.0;  // same attribute value, different id
  double mean_inter_class_dist = 0.0;  // different attribute value
  double quintuplet_order_rate = 0.0;  // d(a,p1) < d(a,p2) < d(a,p3) < d(a,n)
};

// One entry per attribute. The order rate counts anchors with a complete
// quintuplet; anchors missing any member are left out of the denominator.
inline std::vector<EmbeddingDiagnostics> embedding_diagnostics(const std::vector<Matrix>& embeddings_per_attr,
                                                               const BinaryMatrix& attrs,
                                                               const std::vector<int>& ids) {
  if (static_cast<Eigen::Index>(embeddings_per_attr.size()) != attrs.cols())
    throw usage_error("embedding_diagnostics: one embedding matrix per attribute expected");
  std::vector<EmbeddingDiagnostics> out;
  for (std::size_t j = 0; j < embeddings_per_attr.size(); ++j) {
    const Matrix& e = embeddings_per_attr[j];
    const std::size_t B = static_cast<std::size_t>(e.rows());
    if (B != ids.size() || static_cast<Eigen::Index>(B) != attrs.rows())
      throw usage_error("embedding_diagnostics: row counts disagree");
    const DistanceMatrix d = pairwise_distances(e);
    std::vector<int> col(B);
    for (std::size_t i = 0; i < B; ++i) col[i] = attrs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

    double s_id = 0, s_cls = 0, s_inter = 0;
    std::size_t n_id = 0, n_cls = 0, n_inter = 0;
    for (std::size_t a = 0; a < B; ++a) {
      for (std::size_t b = a + 1; b < B; ++b) {
        if (col[a] != col[b]) {
          s_inter += d(a, b);
          ++n_inter;
        } else if (ids[a] == ids[b]) {
          s_id += d(a, b);
          ++n_id;
        } else {
          s_cls += d(a, b);
          ++n_cls;
        }
      }
    }
    EmbeddingDiagnostics diag;
    diag.mean_intra_id_dist = n_id ? s_id / static_cast<double>(n_id) : 0.0;
    diag.mean_intra_class_dist = n_cls ? s_cls / static_cast<double>(n_cls) : 0.0;
    diag.mean_inter_class_dist = n_inter ? s_inter / static_cast<double>(n_inter) : 0.0;

    std::size_t complete = 0, ordered = 0;
    for (std::size_t a = 0; a < B; ++a) {
      const Quintuplet q = select_quintuplet(d, col, ids, a, j);
      if (!q.p1 || !q.p2 || !q.p3 || !q.n) continue;
      ++complete;
      if (d(a, *q.p1) < d(a, *q.p2) && d(a, *q.p2) < d(a, *q.p3) && d(a, *q.p3) < d(a, *q.n)) ++ordered;
    }
    diag.quintuplet_order_rate = complete ? static_cast<double>(ordered) / static_cast<double>(complete) : 0.0;
    out.push_back(diag);
  }
  return out;
}

// PCA onto the top two principal components of the mean-centred rows. Each
// component is flipped so its largest-magnitude entry (lowest index on ties)
// is positive. With a single input dimension the second coordinate is zero.
inline Matrix project_2d(const Matrix& embeddings) {
  const Eigen::Index B = embeddings.rows();
  const Eigen::Index D = embeddings.cols();
  if (B < 2) throw usage_error("project_2d: need at least two rows");
  if (D < 1) throw usage_error("project_2d: empty embedding");
  const Eigen::RowVectorXd mean = embeddings.colwise().mean();
  const Matrix centered = embeddings.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(B - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw numerical_error("project_2d: eigendecomposition failed");

  Matrix out = Matrix::Zero(B, 2);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, D); ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(D - 1 - k);  // eigenvalues ascend
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < D; ++i)
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    if (v(arg) < 0) v = -v;
    out.col(k) = centered * v;
  }
  return out;
}

// x,y,attr,id rows for external scatter plots.
inline void write_projection_csv(std::ostream& os, const Matrix& coords, const std::vector<int>& attr,
                                 const std::vector<int>& ids) {
  if (static_cast<std::size_t>(coords.rows()) != attr.size() || attr.size() != ids.size())
    throw usage_error("write_projection_csv: row counts disagree");
  os << "x,y,attr,id\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    os << format_double(coords(i, 0)) << ',' << format_double(coords(i, 1)) << ',' << attr[k] << ',' << ids[k]
       << '\n';
  }
}

}  // namespace hfe

#endif  // HFE_EVAL_HPP_
