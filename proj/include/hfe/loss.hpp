#ifndef HFE_LOSS_HPP_
#define HFE_LOSS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "hfe/core.hpp"
#include "hfe/mining.hpp"

namespace hfe {

struct MarginSet {
  double alpha1 = 0.3;  // inter-class
  double alpha2 = 0.1;  // intra-class
  double alpha3 = 5.0;  // absolute boundary

  void validate() const {
    if (!(alpha1 > 0 && alpha2 > 0 && alpha3 > 0)) throw usage_error("margins must be positive");
    if (!(alpha1 > alpha2)) throw usage_error("alpha1 must be greater than alpha2");
  }

  static MarginSet from(const HFEConfig& c) { return {c.alpha1, c.alpha2, c.alpha3}; }
};

struct GradientSet {
  std::vector<Matrix> d_embeddings;  // M matrices, B x D
  Matrix d_logits;                   // B x M

  static GradientSet zeros(std::size_t M, Eigen::Index B, Eigen::Index D) {
    GradientSet g;
    g.d_embeddings.assign(M, Matrix::Zero(B, D));
    g.d_logits = Matrix::Zero(B, static_cast<Eigen::Index>(M));
    return g;
  }

  bool all_finite() const {
    if (!d_logits.allFinite()) return false;
    return std::all_of(d_embeddings.begin(), d_embeddings.end(),
                       [](const Matrix& m) { return m.allFinite(); });
  }
};

inline double hinge(double x) { return x > 0.0 ? x : 0.0; }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Matrix sigmoid(const Matrix& logits) {
  return logits.unaryExpr([](double z) { return sigmoid(z); });
}

inline constexpr double kProbEpsilon = 1e-12;

struct CeResult {
  double loss = 0.0;
  Matrix d_logits;  // gradient with respect to the pre-sigmoid logits
};

// Binary cross entropy summed over attributes and averaged over samples.
inline CeResult ce_loss(const Matrix& probs, const Matrix& labels) {
  if (probs.rows() != labels.rows() || probs.cols() != labels.cols())
    throw usage_error("ce_loss: probs and labels differ in shape");
  if (probs.rows() == 0) throw usage_error("ce_loss: empty batch");
  const double N = static_cast<double>(probs.rows());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double p = std::clamp(probs(i, j), kProbEpsilon, 1.0 - kProbEpsilon);
      const double y = labels(i, j);
      sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
  }
  return {-sum / N, (probs - labels) / N};
}

// Scalar value of one distance-hinge component plus the number of complete
// terms behind it.
struct TermLoss {
  double value = 0.0;
  std::size_t count = 0;
};

// Where distance gradients go. `scale` multiplies every contribution, so the
// caller can fold the HFE weight in.
struct GradientSink {
  const std::vector<Matrix>& embeddings;
  std::vector<Matrix>& d_embeddings;
  double scale = 1.0;
};

namespace detail {

struct DistanceCoef {
  std::size_t other;
  double coef;
};

struct HingeTerm {
  double offset = 0.0;
  std::array<DistanceCoef, 2> dists{};
  std::size_t n_dists = 0;
};

// Mean of hinge(offset + sum coef*d(anchor, other)) over the quintuplets
// that have every member the term needs; the others are skipped and do not
// count towards the denominator.
template <typename MakeTerm>
TermLoss reduce_hinge(std::span<const Quintuplet> quints, const std::vector<DistanceMatrix>& dists,
                      MakeTerm make_term, GradientSink* sink) {
  double sum = 0.0;
  std::vector<std::pair<const Quintuplet*, HingeTerm>> active;
  TermLoss out;
  for (const Quintuplet& q : quints) {
    const std::optional<HingeTerm> term = make_term(q);
    if (!term) continue;
    if (q.attr >= dists.size()) throw usage_error("loss: quintuplet attribute has no distance matrix");
    const DistanceMatrix& d = dists[q.attr];
    double z = term->offset;
    for (std::size_t k = 0; k < term->n_dists; ++k)
      z += term->dists[k].coef * d(q.anchor, term->dists[k].other);
    sum += hinge(z);
    ++out.count;
    if (sink && z > 0.0) active.emplace_back(&q, *term);
  }
  if (out.count == 0) return out;
  out.value = sum / static_cast<double>(out.count);
  if (!sink) return out;

  const double norm = sink->scale / static_cast<double>(out.count);
  for (const auto& [q, term] : active) {
    const Matrix& e = sink->embeddings[q->attr];
    Matrix& g = sink->d_embeddings[q->attr];
    const auto a = static_cast<Eigen::Index>(q->anchor);
    for (std::size_t k = 0; k < term.n_dists; ++k) {
      const auto o = static_cast<Eigen::Index>(term.dists[k].other);
      const double d = dists[q->attr](q->anchor, term.dists[k].other);
      if (d <= 0.0) continue;  // subgradient 0 at coincident points
      const Eigen::RowVectorXd unit = (e.row(a) - e.row(o)) / d;
      g.row(a) += norm * term.dists[k].coef * unit;
      g.row(o) -= norm * term.dists[k].coef * unit;
    }
  }
  return out;
}

}  // namespace detail

// hinge(d(a,p3) - d(a,n) + alpha1)
inline TermLoss inter_loss(std::span<const Quintuplet> quints, const std::vector<DistanceMatrix>& dists,
                           double alpha1, GradientSink* sink = nullptr) {
  return detail::reduce_hinge(
      quints, dists,
      [&](const Quintuplet& q) -> std::optional<detail::HingeTerm> {
        if (!q.p3 || !q.n) return std::nullopt;
        return detail::HingeTerm{alpha1, {{{*q.p3, 1.0}, {*q.n, -1.0}}}, 2};
      },
      sink);
}

// hinge(d(a,p1) - d(a,p2) + alpha2)
inline TermLoss intra_loss(std::span<const Quintuplet> quints, const std::vector<DistanceMatrix>& dists,
                           double alpha2, GradientSink* sink = nullptr) {
  return detail::reduce_hinge(
      quints, dists,
      [&](const Quintuplet& q) -> std::optional<detail::HingeTerm> {
        if (!q.p1 || !q.p2) return std::nullopt;
        return detail::HingeTerm{alpha2, {{{*q.p1, 1.0}, {*q.p2, -1.0}}}, 2};
      },
      sink);
}

// hinge(alpha3 - d(a,n))
inline TermLoss abr_loss(std::span<const Quintuplet> quints, const std::vector<DistanceMatrix>& dists,
                         double alpha3, GradientSink* sink = nullptr) {
  return detail::reduce_hinge(
      quints, dists,
      [&](const Quintuplet& q) -> std::optional<detail::HingeTerm> {
        if (!q.n) return std::nullopt;
        return detail::HingeTerm{alpha3, {{{*q.n, -1.0}, {0, 0.0}}}, 1};
      },
      sink);
}

// Same-id compactness only: hinge(d(a,p1) - margin). Ablation arm.
inline TermLoss pairwise_intra_loss(std::span<const Quintuplet> quints,
                                    const std::vector<DistanceMatrix>& dists, double margin,
                                    GradientSink* sink = nullptr) {
  return detail::reduce_hinge(
      quints, dists,
      [&](const Quintuplet& q) -> std::optional<detail::HingeTerm> {
        if (!q.p1) return std::nullopt;
        return detail::HingeTerm{-margin, {{{*q.p1, 1.0}, {0, 0.0}}}, 1};
      },
      sink);
}

// Which components take part. use_pairwise_intra swaps the intra term for
// the pairwise variant and reports it in the intra column.
struct LossFlags {
  bool use_inter = true;
  bool use_intra = true;
  bool use_abr = true;
  bool use_dynamic_weight = true;
  bool use_pairwise_intra = false;

  void validate() const {
    if (use_intra && use_pairwise_intra)
      throw usage_error("use_intra and use_pairwise_intra are mutually exclusive");
  }

  bool any_metric() const { return use_inter || use_intra || use_abr || use_pairwise_intra; }

  static LossFlags full() { return {}; }
  static LossFlags ce_only() { return {false, false, false, false, false}; }
};

inline LossReport hfe_loss(std::span<const Quintuplet> quints, const std::vector<DistanceMatrix>& dists,
                           const MarginSet& margins, const LossFlags& flags = {},
                           GradientSink* sink = nullptr) {
  flags.validate();
  LossReport r;
  if (flags.use_inter) {
    const TermLoss t = inter_loss(quints, dists, margins.alpha1, sink);
    r.inter = t.value;
    r.counts.inter = t.count;
  }
  if (flags.use_intra || flags.use_pairwise_intra) {
    const TermLoss t = flags.use_intra ? intra_loss(quints, dists, margins.alpha2, sink)
                                       : pairwise_intra_loss(quints, dists, margins.alpha2, sink);
    r.intra = t.value;
    r.counts.intra = t.count;
  }
  if (flags.use_abr) {
    const TermLoss t = abr_loss(quints, dists, margins.alpha3, sink);
    r.abr = t.value;
    r.counts.abr = t.count;
  }
  r.hfe = r.inter + r.intra + r.abr;
  return r;
}

// Cosine ramp from 0 at iter = 0 to w0 at iter = T.
inline double dynamic_weight(long long iter, long long T, double w0) {
  if (T < 1) throw usage_error("dynamic_weight: T must be at least 1");
  if (iter < 0 || iter > T) throw usage_error("dynamic_weight: iter outside [0, T]");
  const double phase = static_cast<double>(T - iter) / static_cast<double>(T) * std::numbers::pi;
  return (0.5 * std::cos(phase) + 0.5) * w0;
}

inline double total_loss(double ce, double hfe, double w) { return ce + w * hfe; }

struct BatchLoss {
  LossReport report;
  GradientSet grads;
  std::vector<Quintuplet> quints;
};

// Full objective for one batch: mines quintuplets on each attribute's
// embeddings (selection carries no gradient), then evaluates CE and the
// enabled metric terms with weight w.
inline BatchLoss evaluate_batch(const std::vector<Matrix>& embeddings, const Matrix& logits,
                                const Batch& batch, const MarginSet& margins, const LossFlags& flags,
                                double w) {
  const std::size_t M = batch.num_attrs();
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  if (embeddings.size() != M || logits.rows() != B || logits.cols() != static_cast<Eigen::Index>(M))
    throw usage_error("evaluate_batch: shapes do not match the batch");
  const Eigen::Index D = embeddings.front().cols();

  BatchLoss out;
  out.grads = GradientSet::zeros(M, B, D);

  Matrix labels(B, static_cast<Eigen::Index>(M));
  for (Eigen::Index i = 0; i < B; ++i)
    for (std::size_t j = 0; j < M; ++j)
      labels(i, static_cast<Eigen::Index>(j)) = batch.samples[static_cast<std::size_t>(i)].attrs[j];
  const CeResult ce = ce_loss(sigmoid(logits), labels);
  out.grads.d_logits = ce.d_logits;

  std::vector<DistanceMatrix> dists;
  dists.reserve(M);
  for (const Matrix& e : embeddings) dists.push_back(pairwise_distances(e));
  const std::vector<int> ids = batch.ids();
  out.quints.reserve(static_cast<std::size_t>(B) * M);
  for (std::size_t j = 0; j < M; ++j) {
    const std::vector<int> col = batch.attr_column(j);
    for (std::size_t a = 0; a < static_cast<std::size_t>(B); ++a)
      out.quints.push_back(select_quintuplet(dists[j], col, ids, a, j));
  }

  GradientSink sink{embeddings, out.grads.d_embeddings, w};
  out.report = hfe_loss(out.quints, dists, margins, flags, &sink);
  out.report.ce = ce.loss;
  out.report.weight_w = w;
  out.report.total = total_loss(out.report.ce, out.report.hfe, w);
  return out;
}

}  // namespace hfe

#endif  // HFE_LOSS_HPP_
