// Reference implementations used only by the tests. Written independently of
// the library code they check: plain loops, no shared helpers.
#ifndef HFE_TESTS_ORACLES_HPP_
#define HFE_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "hfe/core.hpp"

namespace oracle {

using hfe::Matrix;

inline double distance(const Matrix& e, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < e.cols(); ++k) {
    const double t = e(i, k) - e(j, k);
    s += t * t;
  }
  return std::sqrt(s);
}

inline std::vector<std::vector<double>> distances(const Matrix& e) {
  std::vector<std::vector<double>> d(static_cast<std::size_t>(e.rows()), std::vector<double>(e.rows(), 0.0));
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.rows(); ++j) d[i][j] = distance(e, i, j);
  return d;
}

struct Quint {
  std::optional<std::size_t> p1, p2, p3, n;
};

// Collects every candidate set, then takes the first extreme element, which
// is the lowest index among equals.
inline Quint scan(const std::vector<std::vector<double>>& d, const std::vector<int>& attr,
                  const std::vector<int>& id, std::size_t a) {
  std::vector<std::size_t> same_id, same_cls, other_cls;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i == a) continue;
    if (attr[i] != attr[a])
      other_cls.push_back(i);
    else if (id[i] == id[a])
      same_id.push_back(i);
    else
      same_cls.push_back(i);
  }
  auto by_dist = [&](std::size_t x, std::size_t y) { return d[a][x] < d[a][y]; };
  Quint q;
  if (!same_id.empty()) {
    // max_element returns the first maximum.
    q.p1 = *std::max_element(same_id.begin(), same_id.end(), by_dist);
  }
  if (!same_cls.empty()) {
    q.p2 = *std::min_element(same_cls.begin(), same_cls.end(), by_dist);
    q.p3 = *std::max_element(same_cls.begin(), same_cls.end(), by_dist);
  }
  if (!other_cls.empty()) q.n = *std::min_element(other_cls.begin(), other_cls.end(), by_dist);
  return q;
}

inline double ce(const Matrix& probs, const Matrix& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      double p = probs(i, j);
      if (p < 1e-12) p = 1e-12;
      if (p > 1.0 - 1e-12) p = 1.0 - 1e-12;
      row -= labels(i, j) > 0.5 ? std::log(p) : std::log(1.0 - p);
    }
    total += row;
  }
  return total / static_cast<double>(probs.rows());
}

// Distance-hinge losses recomputed from raw embeddings and mined indices.
enum class Term { inter, intra, abr, pairwise };

struct MinedIdx {
  std::size_t attr, anchor;
  std::optional<std::size_t> p1, p2, p3, n;
};

inline double hinge_term_mean(const std::vector<Matrix>& emb, const std::vector<MinedIdx>& qs, Term t,
                              double margin) {
  double sum = 0.0;
  int count = 0;
  for (const MinedIdx& q : qs) {
    const Matrix& e = emb[q.attr];
    const auto a = static_cast<Eigen::Index>(q.anchor);
    auto d = [&](std::size_t o) { return distance(e, a, static_cast<Eigen::Index>(o)); };
    double z;
    switch (t) {
      case Term::inter:
        if (!q.p3 || !q.n) continue;
        z = d(*q.p3) - d(*q.n) + margin;
        break;
      case Term::intra:
        if (!q.p1 || !q.p2) continue;
        z = d(*q.p1) - d(*q.p2) + margin;
        break;
      case Term::abr:
        if (!q.n) continue;
        z = margin - d(*q.n);
        break;
      case Term::pairwise:
        if (!q.p1) continue;
        z = d(*q.p1) - margin;
        break;
    }
    sum += std::max(z, 0.0);
    ++count;
  }
  return count ? sum / count : 0.0;
}

// Central differences of f with respect to every entry of x.
inline std::vector<double> central_diff(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                        double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + h;
    const double up = f(x);
    x[k] = keep - h;
    const double down = f(x);
    x[k] = keep;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / ||b||, with b the reference.
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += (a[k] - b[k]) * (a[k] - b[k]);
    den += b[k] * b[k];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

// Cyclic Jacobi eigenvalue iteration for a small symmetric matrix. Returns
// eigenvalues with eigenvectors as columns, sorted by descending eigenvalue.
inline std::pair<std::vector<double>, Eigen::MatrixXd> jacobi_eigen(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  std::vector<double> vals;
  Eigen::MatrixXd vecs(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    vals.push_back(a(order[k], order[k]));
    vecs.col(k) = v.col(order[k]);
  }
  return {vals, vecs};
}

}  // namespace oracle

#endif  // HFE_TESTS_ORACLES_HPP_
