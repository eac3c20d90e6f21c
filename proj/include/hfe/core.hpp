#ifndef HFE_CORE_HPP_
#define HFE_CORE_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hfe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Error categories. The CLI maps them to exit codes 1, 2 and 3.
class usage_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  std::vector<double> features;
  std::vector<int> attrs;  // binary, one entry per attribute
  int id = 0;

  bool operator==(const Sample&) const = default;
};

struct Batch {
  std::vector<Sample> samples;
  std::vector<std::size_t> indices;  // positions in the source dataset

  std::size_t size() const { return samples.size(); }
  std::size_t num_attrs() const { return samples.empty() ? 0 : samples.front().attrs.size(); }
  std::size_t feature_dim() const { return samples.empty() ? 0 : samples.front().features.size(); }

  Matrix features() const {
    Matrix x(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(feature_dim()));
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t f = 0; f < feature_dim(); ++f)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = samples[i].features[f];
    return x;
  }

  std::vector<int> attr_column(std::size_t j) const {
    std::vector<int> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = samples[i].attrs[j];
    return out;
  }

  std::vector<int> ids() const {
    std::vector<int> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = samples[i].id;
    return out;
  }

  static Batch from(const std::vector<Sample>& data) {
    if (data.empty()) throw usage_error("batch must be non-empty");
    Batch b;
    b.samples = data;
    b.indices.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) b.indices[i] = i;
    return b;
  }
};

struct HFEConfig {
  double alpha1 = 0.3;
  double alpha2 = 0.1;
  double alpha3 = 5.0;
  double w0 = 1.0;
  int total_iters = 1000;
  int embed_dim = 8;
  std::vector<int> hidden_dims{32, 32};
  int num_attrs = 2;
  int num_ids = 8;       // P
  int imgs_per_id = 4;   // K
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha2 > 0.0)) throw usage_error("alpha2 must be positive");
    if (!(alpha1 > alpha2)) throw usage_error("alpha1 must be greater than alpha2");
    if (!(alpha3 > 0.0)) throw usage_error("alpha3 must be positive");
    if (!(w0 >= 0.0)) throw usage_error("w0 must be non-negative");
    if (total_iters < 1) throw usage_error("total_iters must be at least 1");
    if (embed_dim < 1) throw usage_error("embed_dim must be positive");
    if (hidden_dims.empty()) throw usage_error("hidden_dims must name at least one layer");
    for (int h : hidden_dims)
      if (h < 1) throw usage_error("hidden_dims entries must be positive");
    if (num_attrs < 1) throw usage_error("num_attrs must be positive");
    if (num_ids < 1) throw usage_error("num_ids (P) must be positive");
    if (imgs_per_id < 1) throw usage_error("imgs_per_id (K) must be positive");
    if (!(learning_rate > 0.0)) throw usage_error("learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw usage_error("weight_decay must be non-negative");
  }
};

// One mined quintuplet for attribute `attr`. Absent members have no candidates.
struct Quintuplet {
  std::size_t attr = 0;
  std::size_t anchor = 0;
  std::optional<std::size_t> p1;  // same attr, same id, farthest
  std::optional<std::size_t> p2;  // same attr, different id, nearest
  std::optional<std::size_t> p3;  // same attr, different id, farthest
  std::optional<std::size_t> n;   // different attr, nearest

  bool operator==(const Quintuplet&) const = default;
};

struct TermCounts {
  std::size_t inter = 0;
  std::size_t intra = 0;
  std::size_t abr = 0;
};

struct LossReport {
  double ce = 0.0;
  double inter = 0.0;
  double intra = 0.0;
  double abr = 0.0;
  double hfe = 0.0;
  double weight_w = 0.0;
  double total = 0.0;
  TermCounts counts;
};

// Every (id, attribute) pair whose samples disagree yields one entry, plus
// one entry per sample with the wrong feature/attribute length.
struct Violation {
  enum class Kind { feature_length, attr_length, attr_value, id_inconsistent };
  Kind kind;
  std::size_t row = 0;  // first offending sample
  int id = 0;
  std::size_t attr = 0;

  std::string describe() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::feature_length:
        os << "row " << row << ": feature length differs from row 0";
        break;
      case Kind::attr_length:
        os << "row " << row << ": attribute count differs from row 0";
        break;
      case Kind::attr_value:
        os << "row " << row << ", attribute " << attr << ": value is not binary";
        break;
      case Kind::id_inconsistent:
        os << "id " << id << ", attribute " << attr
           << ": samples with the same id carry different labels";
        break;
    }
    return os.str();
  }
};

inline std::vector<Violation> validate_dataset(const std::vector<Sample>& samples) {
  if (samples.empty()) throw usage_error("validate_dataset: empty sample list");
  std::vector<Violation> out;
  const std::size_t F = samples.front().features.size();
  const std::size_t M = samples.front().attrs.size();

  std::map<int, std::size_t> first_row;  // id -> first well-formed row
  std::map<std::pair<int, std::size_t>, bool> reported;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const Sample& s = samples[r];
    if (s.features.size() != F) {
      out.push_back({Violation::Kind::feature_length, r, s.id, 0});
      continue;
    }
    if (s.attrs.size() != M) {
      out.push_back({Violation::Kind::attr_length, r, s.id, 0});
      continue;
    }
    bool binary = true;
    for (std::size_t j = 0; j < M; ++j) {
      if (s.attrs[j] != 0 && s.attrs[j] != 1) {
        out.push_back({Violation::Kind::attr_value, r, s.id, j});
        binary = false;
      }
    }
    if (!binary) continue;
    auto [it, inserted] = first_row.try_emplace(s.id, r);
    if (inserted) continue;
    const Sample& ref = samples[it->second];
    for (std::size_t j = 0; j < M; ++j) {
      if (ref.attrs[j] != s.attrs[j] && !reported[{s.id, j}]) {
        reported[{s.id, j}] = true;
        out.push_back({Violation::Kind::id_inconsistent, r, s.id, j});
      }
    }
  }
  return out;
}

// xoshiro256** (Blackman & Vigna), seeded through splitmix64. Doubles take the
// top 53 bits; bounded integers use rejection sampling, so every stream is
// reproducible bit-for-bit on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw usage_error("Rng::index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  // Standard normal via Box-Muller; no cached second draw, so the stream
  // position is fully described by the four state words.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  // Independent stream for a sub-task, derived from the current state.
  Rng split() { return Rng(next_u64()); }

  const std::array<std::uint64_t, 4>& state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

  std::string serialize() const {
    std::ostringstream os;
    os << state_[0] << ' ' << state_[1] << ' ' << state_[2] << ' ' << state_[3];
    return os.str();
  }

  static Rng deserialize(const std::string& text) {
    std::istringstream is(text);
    std::array<std::uint64_t, 4> s{};
    for (auto& w : s)
      if (!(is >> w)) throw data_error("Rng::deserialize: malformed state");
    Rng r;
    r.set_state(s);
    return r;
  }

  bool operator==(const Rng&) const = default;

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> state_{};
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace hfe

#endif  // HFE_CORE_HPP_
