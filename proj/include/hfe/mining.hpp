#ifndef HFE_MINING_HPP_
#define HFE_MINING_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "hfe/core.hpp"

namespace hfe {

// Non-squared Euclidean distances between the rows of one embedding matrix.
struct DistanceMatrix {
  Matrix values;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

inline DistanceMatrix pairwise_distances(const Matrix& embeddings) {
  const Eigen::Index B = embeddings.rows();
  if (B < 1 || embeddings.cols() < 1) throw usage_error("pairwise_distances: empty embedding matrix");
  if (!embeddings.allFinite()) throw numerical_error("pairwise_distances: non-finite embedding entry");
  DistanceMatrix d{Matrix::Zero(B, B)};
  for (Eigen::Index i = 0; i < B; ++i) {
    for (Eigen::Index j = i + 1; j < B; ++j) {
      const double v = (embeddings.row(i) - embeddings.row(j)).norm();
      d.values(i, j) = v;
      d.values(j, i) = v;
    }
  }
  return d;
}

// Batch-hard selection for one anchor. Strict comparisons keep the lowest
// index on ties.
inline Quintuplet select_quintuplet(const DistanceMatrix& dist, const std::vector<int>& attr_labels,
                                    const std::vector<int>& id_labels, std::size_t anchor,
                                    std::size_t attr = 0) {
  const std::size_t B = dist.size();
  if (attr_labels.size() != B || id_labels.size() != B)
    throw usage_error("select_quintuplet: label vectors do not match the distance matrix");
  if (anchor >= B) throw usage_error("select_quintuplet: anchor out of range");

  Quintuplet q;
  q.attr = attr;
  q.anchor = anchor;
  double p1_best = 0, p2_best = 0, p3_best = 0, n_best = 0;
  for (std::size_t i = 0; i < B; ++i) {
    if (i == anchor) continue;
    const double d = dist(anchor, i);
    if (attr_labels[i] == attr_labels[anchor]) {
      if (id_labels[i] == id_labels[anchor]) {
        if (!q.p1 || d > p1_best) q.p1 = i, p1_best = d;
      } else {
        if (!q.p2 || d < p2_best) q.p2 = i, p2_best = d;
        if (!q.p3 || d > p3_best) q.p3 = i, p3_best = d;
      }
    } else {
      if (!q.n || d < n_best) q.n = i, n_best = d;
    }
  }
  return q;
}

// B*M quintuplets, ordered attribute-major: result[j*B + a].
inline std::vector<Quintuplet> mine_batch(const std::vector<Matrix>& embeddings_per_attr,
                                          const Batch& batch) {
  const std::size_t B = batch.size();
  const std::size_t M = batch.num_attrs();
  if (embeddings_per_attr.size() != M)
    throw usage_error("mine_batch: expected one embedding matrix per attribute");
  std::vector<Quintuplet> out;
  out.reserve(B * M);
  const std::vector<int> ids = batch.ids();
  for (std::size_t j = 0; j < M; ++j) {
    if (static_cast<std::size_t>(embeddings_per_attr[j].rows()) != B)
      throw usage_error("mine_batch: embedding rows do not match batch size");
    const DistanceMatrix d = pairwise_distances(embeddings_per_attr[j]);
    const std::vector<int> labels = batch.attr_column(j);
    for (std::size_t a = 0; a < B; ++a) out.push_back(select_quintuplet(d, labels, ids, a, j));
  }
  return out;
}

// P distinct identities, K samples each. Identities are drawn without
// replacement from the sorted id list; within an identity, samples are drawn
// without replacement when it has at least K of them, with replacement
// otherwise.
inline Batch pk_sample(const std::vector<Sample>& dataset, std::size_t P, std::size_t K, Rng& rng) {
  if (P == 0 || K == 0) throw usage_error("pk_sample: P and K must be positive");
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_id[dataset[i].id].push_back(i);
  if (by_id.size() < P) throw usage_error("pk_sample: dataset has fewer than P distinct ids");

  std::vector<int> ids;
  ids.reserve(by_id.size());
  for (const auto& [id, rows] : by_id) ids.push_back(id);
  // Partial Fisher-Yates: the first P slots become the chosen identities.
  for (std::size_t i = 0; i < P; ++i) std::swap(ids[i], ids[i + rng.index(ids.size() - i)]);

  Batch batch;
  batch.samples.reserve(P * K);
  batch.indices.reserve(P * K);
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<std::size_t> rows = by_id[ids[p]];
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t row;
      if (rows.size() >= K) {
        std::swap(rows[k], rows[k + rng.index(rows.size() - k)]);
        row = rows[k];
      } else {
        row = rows[rng.index(rows.size())];
      }
      batch.samples.push_back(dataset[row]);
      batch.indices.push_back(row);
    }
  }
  return batch;
}

}  // namespace hfe

#endif  // HFE_MINING_HPP_
