#ifndef HFE_MODEL_HPP_
#define HFE_MODEL_HPP_

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "hfe/core.hpp"
#include "hfe/loss.hpp"

namespace hfe {

// Layer sizes of the desk-scale network: F -> hidden... -> H, then M
// branches of H -> D (embedding) and D -> 1 (logit).
struct ModelShape {
  std::size_t features = 0;
  std::vector<std::size_t> hidden;
  std::size_t embed = 0;
  std::size_t attrs = 0;

  std::size_t trunk_out() const { return hidden.back(); }

  void validate() const {
    if (features == 0 || embed == 0 || attrs == 0 || hidden.empty())
      throw usage_error("model shape: all dimensions must be positive");
    for (std::size_t h : hidden)
      if (h == 0) throw usage_error("model shape: hidden widths must be positive");
  }

  static ModelShape from(const HFEConfig& c, std::size_t feature_dim) {
    ModelShape s;
    s.features = feature_dim;
    for (int h : c.hidden_dims) s.hidden.push_back(static_cast<std::size_t>(h));
    s.embed = static_cast<std::size_t>(c.embed_dim);
    s.attrs = static_cast<std::size_t>(c.num_attrs);
    s.validate();
    return s;
  }

  bool operator==(const ModelShape&) const = default;
};

// Offsets of every weight block inside the flat parameter vector.
class ParamLayout {
 public:
  struct Block {
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
  };

  struct Dense {
    Block weight;  // out x in
    Block bias;    // out x 1
  };

  struct Branch {
    Dense embed;   // D x H
    Dense logit;   // 1 x D
  };

  ParamLayout() = default;

  explicit ParamLayout(const ModelShape& s) {
    std::size_t in = s.features;
    for (std::size_t out : s.hidden) {
      trunk_.push_back(dense(out, in));
      in = out;
    }
    for (std::size_t j = 0; j < s.attrs; ++j) branches_.push_back({dense(s.embed, in), dense(1, s.embed)});
  }

  const std::vector<Dense>& trunk() const { return trunk_; }
  const std::vector<Branch>& branches() const { return branches_; }
  std::size_t total() const { return next_; }

 private:
  Dense dense(std::size_t out, std::size_t in) {
    Dense d;
    d.weight = {next_, out, in};
    next_ += out * in;
    d.bias = {next_, out, 1};
    next_ += out;
    return d;
  }

  std::vector<Dense> trunk_;
  std::vector<Branch> branches_;
  std::size_t next_ = 0;
};

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

struct Model {
  ModelShape shape;
  ParamLayout layout;
  std::vector<double> params;

  Model() = default;
  explicit Model(ModelShape s) : shape(std::move(s)), layout(shape), params(layout.total(), 0.0) {}

  ConstMatrixMap view(const ParamLayout::Block& b) const {
    return {params.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols)};
  }
  MatrixMap view(const ParamLayout::Block& b) {
    return {params.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols)};
  }

  bool all_finite() const {
    for (double p : params)
      if (!std::isfinite(p)) return false;
    return true;
  }
};

// He-style scaled uniform: weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)),
// biases zero. Blocks are filled in layout order.
inline double init_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

inline Model init_model(const ModelShape& shape, Rng& rng) {
  shape.validate();
  Model m(shape);
  auto fill = [&](const ParamLayout::Dense& d) {
    const double bound = init_bound(d.weight.cols);
    for (std::size_t k = 0; k < d.weight.size(); ++k) m.params[d.weight.offset + k] = rng.uniform(-bound, bound);
  };
  for (const auto& d : m.layout.trunk()) fill(d);
  for (const auto& b : m.layout.branches()) {
    fill(b.embed);
    fill(b.logit);
  }
  return m;
}

struct ForwardPass {
  std::vector<Matrix> embeddings;  // M matrices, B x D
  Matrix logits;                   // B x M
  Matrix probs;                    // B x M
  std::vector<Matrix> activations; // input, then each trunk layer output
  std::vector<Matrix> pre_activations;
};

inline ForwardPass forward(const Model& model, const Matrix& features) {
  if (static_cast<std::size_t>(features.cols()) != model.shape.features)
    throw usage_error("forward: feature dimension does not match the model");
  const Eigen::Index B = features.rows();
  ForwardPass out;
  out.activations.push_back(features);
  for (const auto& layer : model.layout.trunk()) {
    Matrix z = out.activations.back() * model.view(layer.weight).transpose();
    z.rowwise() += model.view(layer.bias).col(0).transpose();
    out.activations.push_back(z.cwiseMax(0.0));
    out.pre_activations.push_back(std::move(z));
  }
  const Matrix& h = out.activations.back();
  const auto M = static_cast<Eigen::Index>(model.shape.attrs);
  out.logits.resize(B, M);
  for (Eigen::Index j = 0; j < M; ++j) {
    const auto& br = model.layout.branches()[static_cast<std::size_t>(j)];
    Matrix e = h * model.view(br.embed.weight).transpose();
    e.rowwise() += model.view(br.embed.bias).col(0).transpose();
    out.logits.col(j) = e * model.view(br.logit.weight).row(0).transpose();
    out.logits.col(j).array() += model.view(br.logit.bias)(0, 0);
    out.embeddings.push_back(std::move(e));
  }
  out.probs = sigmoid(out.logits);
  return out;
}

inline ForwardPass forward(const Model& model, const Batch& batch) { return forward(model, batch.features()); }

// Gradient of the loss with respect to every parameter, in layout order.
inline std::vector<double> backward(const Model& model, const ForwardPass& pass, const GradientSet& grads) {
  const auto M = static_cast<Eigen::Index>(model.shape.attrs);
  const Eigen::Index B = pass.logits.rows();
  if (grads.d_embeddings.size() != model.shape.attrs || grads.d_logits.rows() != B || grads.d_logits.cols() != M)
    throw usage_error("backward: gradient shapes do not match the forward pass");

  std::vector<double> flat(model.params.size(), 0.0);
  auto view = [&](const ParamLayout::Block& b) {
    return MatrixMap(flat.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
  };

  const Matrix& h = pass.activations.back();
  Matrix dh = Matrix::Zero(B, h.cols());
  for (Eigen::Index j = 0; j < M; ++j) {
    const auto& br = model.layout.branches()[static_cast<std::size_t>(j)];
    const Matrix& e = pass.embeddings[static_cast<std::size_t>(j)];
    const Eigen::VectorXd dlogit = grads.d_logits.col(j);
    view(br.logit.weight).row(0) = (e.transpose() * dlogit).transpose();
    view(br.logit.bias)(0, 0) = dlogit.sum();
    Matrix de = grads.d_embeddings[static_cast<std::size_t>(j)];
    if (de.rows() != B || de.cols() != e.cols()) throw usage_error("backward: embedding gradient shape mismatch");
    de += dlogit * model.view(br.logit.weight).row(0);
    view(br.embed.weight) = de.transpose() * h;
    view(br.embed.bias).col(0) = de.colwise().sum().transpose();
    dh += de * model.view(br.embed.weight);
  }
  for (std::size_t l = model.layout.trunk().size(); l-- > 0;) {
    const auto& layer = model.layout.trunk()[l];
    const Matrix dz = dh.cwiseProduct((pass.pre_activations[l].array() > 0.0).cast<double>().matrix());
    view(layer.weight) = dz.transpose() * pass.activations[l];
    view(layer.bias).col(0) = dz.colwise().sum().transpose();
    if (l > 0) dh = dz * model.view(layer.weight);
  }
  return flat;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;  // decoupled

  static AdamConfig from(const HFEConfig& c) {
    AdamConfig a;
    a.learning_rate = c.learning_rate;
    a.weight_decay = c.weight_decay;
    return a;
  }
};

struct TrainState {
  Model model;
  std::vector<double> m;  // first moments
  std::vector<double> v;  // second moments
  long long step = 0;
  Rng rng;

  static TrainState fresh(const ModelShape& shape, std::uint64_t seed) {
    TrainState s;
    s.rng = Rng(seed);
    s.model = init_model(shape, s.rng);
    s.m.assign(s.model.params.size(), 0.0);
    s.v.assign(s.model.params.size(), 0.0);
    return s;
  }
};

inline void adam_step(TrainState& state, const std::vector<double>& grad, const AdamConfig& opt) {
  if (grad.size() != state.model.params.size()) throw usage_error("adam_step: gradient size mismatch");
  for (std::size_t k = 0; k < grad.size(); ++k)
    if (!std::isfinite(grad[k]))
      throw numerical_error("non-finite gradient at step " + std::to_string(state.step));
  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  auto& p = state.model.params;
  for (std::size_t k = 0; k < p.size(); ++k) {
    state.m[k] = opt.beta1 * state.m[k] + (1.0 - opt.beta1) * grad[k];
    state.v[k] = opt.beta2 * state.v[k] + (1.0 - opt.beta2) * grad[k] * grad[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    p[k] -= opt.learning_rate * (mhat / (std::sqrt(vhat) + opt.epsilon) + opt.weight_decay * p[k]);
  }
  ++state.step;
  if (!state.model.all_finite()) throw numerical_error("non-finite weight after step " + std::to_string(state.step));
}

inline void backward_and_step(TrainState& state, const ForwardPass& pass, const GradientSet& grads,
                              const AdamConfig& opt) {
  if (!grads.all_finite()) throw numerical_error("non-finite loss gradient at step " + std::to_string(state.step));
  adam_step(state, backward(state.model, pass, grads), opt);
}

// Checkpoint container, all integers and doubles little-endian:
//   "HFECKPT\0" | u32 version | u32 F | u32 #hidden | u32 hidden... | u32 D | u32 M
//   | i64 step | u64 rng[4] | u64 #params | f64 params | f64 m | f64 v
inline constexpr char kCheckpointMagic[8] = {'H', 'F', 'E', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t x) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}
inline void put_u32(std::ostream& os, std::uint32_t x) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  os.write(bytes, 4);
}
inline void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<std::uint64_t>(x)); }

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  void bytes(char* out, std::size_t n) {
    is_.read(out, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw data_error("checkpoint: truncated file");
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t x = 0;
    for (int i = 7; i >= 0; --i) x = (x << 8) | b[i];
    return x;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t x = 0;
    for (int i = 3; i >= 0; --i) x = (x << 8) | b[i];
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::istream& is_;
};

}  // namespace detail

inline void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw usage_error("cannot open checkpoint for writing: " + path);
  const ModelShape& s = state.model.shape;
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(s.features));
  detail::put_u32(os, static_cast<std::uint32_t>(s.hidden.size()));
  for (std::size_t h : s.hidden) detail::put_u32(os, static_cast<std::uint32_t>(h));
  detail::put_u32(os, static_cast<std::uint32_t>(s.embed));
  detail::put_u32(os, static_cast<std::uint32_t>(s.attrs));
  detail::put_u64(os, static_cast<std::uint64_t>(state.step));
  for (std::uint64_t w : state.rng.state()) detail::put_u64(os, w);
  detail::put_u64(os, state.model.params.size());
  for (const auto* vec : {&state.model.params, &state.m, &state.v})
    for (double x : *vec) detail::put_f64(os, x);
  if (!os) throw usage_error("failed writing checkpoint: " + path);
}

inline TrainState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw usage_error("cannot open checkpoint: " + path);
  detail::Reader r(is);
  char magic[8];
  r.bytes(magic, 8);
  if (!std::equal(magic, magic + 8, kCheckpointMagic))
    throw data_error("checkpoint: magic-byte check failed (not an HFE checkpoint)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw data_error("checkpoint: unsupported version " + std::to_string(version));

  ModelShape s;
  s.features = r.u32();
  const std::uint32_t n_hidden = r.u32();
  if (n_hidden == 0 || n_hidden > 64) throw data_error("checkpoint: implausible hidden layer count");
  for (std::uint32_t i = 0; i < n_hidden; ++i) s.hidden.push_back(r.u32());
  s.embed = r.u32();
  s.attrs = r.u32();
  try {
    s.validate();
  } catch (const usage_error& e) {
    throw data_error(std::string("checkpoint: ") + e.what());
  }

  TrainState st;
  st.model = Model(s);
  st.step = static_cast<long long>(r.u64());
  std::array<std::uint64_t, 4> rs{};
  for (auto& w : rs) w = r.u64();
  st.rng.set_state(rs);
  const std::uint64_t n = r.u64();
  if (n != st.model.params.size())
    throw data_error("checkpoint: dimension mismatch (parameter count " + std::to_string(n) + " does not match layer sizes)");
  st.m.resize(n);
  st.v.resize(n);
  for (auto* vec : {&st.model.params, &st.m, &st.v})
    for (double& x : *vec) x = r.f64();
  char extra;
  if (is.read(&extra, 1)) throw data_error("checkpoint: trailing bytes after payload");
  return st;
}

inline TrainState load_checkpoint(const std::string& path, const ModelShape& expected) {
  TrainState st = load_checkpoint(path);
  const ModelShape& got = st.model.shape;
  if (got.attrs != expected.attrs)
    throw data_error("checkpoint: dimension mismatch (M=" + std::to_string(got.attrs) + ", expected " +
                     std::to_string(expected.attrs) + ")");
  if (!(got == expected)) throw data_error("checkpoint: dimension mismatch with the requested model shape");
  return st;
}

}  // namespace hfe

#endif  // HFE_MODEL_HPP_
