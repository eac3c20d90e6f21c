#ifndef HFE_DATA_HPP_
#define HFE_DATA_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hfe/core.hpp"

namespace hfe {

struct SynthSpec {
  int num_ids = 20;
  int samples_per_id = 20;
  int num_attrs = 2;
  int feature_dim = 16;
  double attr_sep = 4.0;
  double id_sep = 2.0;
  double noise = 1.0;
  double hard_frac = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_ids < 1 || samples_per_id < 1 || num_attrs < 1 || feature_dim < 1)
      throw usage_error("synth spec: counts and dimensions must be positive");
    if (!(noise > 0.0)) throw usage_error("synth spec: noise must be positive");
    if (!(id_sep > noise)) throw usage_error("synth spec: id_sep must exceed noise");
    if (!(attr_sep > id_sep)) throw usage_error("synth spec: attr_sep must exceed id_sep");
    if (!(hard_frac >= 0.0 && hard_frac < 0.5)) throw usage_error("synth spec: hard_frac must lie in [0, 0.5)");
    if (feature_dim <= num_attrs * evidence_width() + num_attrs - 1)
      throw usage_error("synth spec: feature_dim too small for the attribute and identity coordinates");
  }

  // Coordinates per attribute that carry its visible evidence.
  int evidence_width() const { return std::max(1, feature_dim / (4 * num_attrs)); }
};

// Where the generator puts things. Attribute j owns an evidence block
// [j*w, (j+1)*w); everything after the evidence blocks is identity space,
// whose first M axes also carry each attribute's class offset.
struct SynthLayout {
  std::size_t evidence_width = 0;
  std::size_t num_attrs = 0;
  std::size_t feature_dim = 0;

  explicit SynthLayout(const SynthSpec& s)
      : evidence_width(static_cast<std::size_t>(s.evidence_width())),
        num_attrs(static_cast<std::size_t>(s.num_attrs)),
        feature_dim(static_cast<std::size_t>(s.feature_dim)) {}

  std::vector<std::size_t> evidence_coords(std::size_t j) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < evidence_width; ++k) out.push_back(j * evidence_width + k);
    return out;
  }
  std::size_t identity_begin() const { return num_attrs * evidence_width; }
  std::size_t class_axis(std::size_t j) const { return identity_begin() + j; }
};

struct SynthDataset {
  std::vector<Sample> samples;
  std::vector<std::vector<bool>> hard;  // hard[i][j]: evidence for attribute j overwritten
  std::vector<std::vector<double>> id_centers;
};

namespace detail {

// Uniform point in the d-dimensional ball of the given radius.
inline std::vector<double> ball_sample(std::size_t d, double radius, Rng& rng) {
  std::vector<double> v(d);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / std::sqrt(norm2);
  for (double& x : v) x *= r;
  return v;
}

}  // namespace detail

// Hierarchical synthetic data. Each id gets a balanced random attribute
// vector. Class signatures sit +-attr_sep/2 apart along each evidence block
// and along the attribute's class axis in identity space; an id center adds
// an offset within id_sep over identity space; each sample adds noise within
// `noise` over all coordinates. Hard samples have one attribute's evidence
// block switched to the opposite class signature; identity coordinates are
// left alone.
inline SynthDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const SynthLayout layout(spec);
  const auto N_ids = static_cast<std::size_t>(spec.num_ids);
  const auto S = static_cast<std::size_t>(spec.samples_per_id);
  const auto M = static_cast<std::size_t>(spec.num_attrs);
  const auto F = static_cast<std::size_t>(spec.feature_dim);
  const std::size_t id_dims = F - layout.identity_begin();
  const double half = spec.attr_sep / 2.0;
  const double per_coord = half / std::sqrt(static_cast<double>(layout.evidence_width));

  std::vector<std::vector<int>> id_attrs(N_ids, std::vector<int>(M, 0));
  for (std::size_t j = 0; j < M; ++j) {
    std::vector<std::size_t> order(N_ids);
    for (std::size_t i = 0; i < N_ids; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t k = 0; k < (N_ids + 1) / 2; ++k) id_attrs[order[k]][j] = 1;
  }

  auto sign = [](int c) { return c == 1 ? 1.0 : -1.0; };

  SynthDataset out;
  out.samples.reserve(N_ids * S);
  for (std::size_t id = 0; id < N_ids; ++id) {
    std::vector<double> center(F, 0.0);
    for (std::size_t j = 0; j < M; ++j) {
      for (std::size_t c : layout.evidence_coords(j)) center[c] = sign(id_attrs[id][j]) * per_coord;
      center[layout.class_axis(j)] = sign(id_attrs[id][j]) * half;
    }
    const std::vector<double> offset = detail::ball_sample(id_dims, spec.id_sep, rng);
    for (std::size_t k = 0; k < id_dims; ++k) center[layout.identity_begin() + k] += offset[k];
    out.id_centers.push_back(center);

    for (std::size_t s = 0; s < S; ++s) {
      Sample smp;
      smp.id = static_cast<int>(id);
      smp.attrs = id_attrs[id];
      smp.features = center;
      const std::vector<double> eps = detail::ball_sample(F, spec.noise, rng);
      for (std::size_t f = 0; f < F; ++f) smp.features[f] += eps[f];
      out.samples.push_back(std::move(smp));
    }
  }

  out.hard.assign(out.samples.size(), std::vector<bool>(M, false));
  for (std::size_t j = 0; j < M; ++j) {
    for (int c = 0; c <= 1; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < out.samples.size(); ++i)
        if (out.samples[i].attrs[j] == c) members.push_back(i);
      const auto n_hard = static_cast<std::size_t>(std::floor(spec.hard_frac * static_cast<double>(members.size())));
      rng.shuffle(members);
      for (std::size_t k = 0; k < n_hard; ++k) {
        Sample& smp = out.samples[members[k]];
        for (std::size_t coord : layout.evidence_coords(j)) smp.features[coord] -= 2.0 * sign(c) * per_coord;
        out.hard[members[k]][j] = true;
      }
    }
  }
  return out;
}

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void write_csv(std::ostream& os, const std::vector<Sample>& samples) {
  if (samples.empty()) throw usage_error("write_csv: no samples");
  const std::size_t F = samples.front().features.size();
  const std::size_t M = samples.front().attrs.size();
  for (std::size_t f = 0; f < F; ++f) os << 'f' << f << ',';
  for (std::size_t j = 0; j < M; ++j) os << 'a' << j << ',';
  os << "id\n";
  for (const Sample& s : samples) {
    for (double x : s.features) os << format_double(x) << ',';
    for (int a : s.attrs) os << a << ',';
    os << s.id << '\n';
  }
}

inline void write_csv(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw usage_error("cannot open for writing: " + path);
  write_csv(os, samples);
  if (!os) throw usage_error("failed writing " + path);
}

struct CsvDataset {
  std::vector<Sample> samples;
  std::size_t feature_dim = 0;
  std::size_t num_attrs = 0;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size() && !text.empty();
}

}  // namespace detail

// Header: f0..f{F-1}, a0..a{M-1}, id in any column order.
inline CsvDataset load_csv(std::istream& is, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw data_error(source + ": empty file, header row missing");
  const auto header = detail::split_fields(line);

  std::map<std::size_t, std::size_t> feat_col, attr_col;
  std::optional<std::size_t> id_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string_view name = detail::trim(header[c]);
    std::size_t idx = 0;
    if (name == "id") {
      if (id_col) throw data_error(source + ": duplicate column 'id'");
      id_col = c;
    } else if (name.size() > 1 && (name[0] == 'f' || name[0] == 'a') && detail::parse_number(name.substr(1), idx)) {
      auto& cols = name[0] == 'f' ? feat_col : attr_col;
      if (!cols.emplace(idx, c).second) throw data_error(source + ": duplicate column '" + std::string(name) + "'");
    } else {
      throw data_error(source + ": unrecognized column '" + std::string(name) + "'");
    }
  }
  if (!id_col) throw data_error(source + ": missing column 'id'");
  if (feat_col.empty()) throw data_error(source + ": no feature columns (f0...)");
  if (attr_col.empty()) throw data_error(source + ": no attribute columns (a0...)");
  for (std::size_t k = 0; k < feat_col.size(); ++k)
    if (!feat_col.count(k)) throw data_error(source + ": missing column 'f" + std::to_string(k) + "'");
  for (std::size_t k = 0; k < attr_col.size(); ++k)
    if (!attr_col.count(k)) throw data_error(source + ": missing column 'a" + std::to_string(k) + "'");

  CsvDataset out;
  out.feature_dim = feat_col.size();
  out.num_attrs = attr_col.size();
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (fields.size() != header.size())
      throw data_error(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    Sample s;
    s.features.resize(out.feature_dim);
    s.attrs.resize(out.num_attrs);
    for (const auto& [k, c] : feat_col) {
      if (!detail::parse_number(fields[c], s.features[k]) || !std::isfinite(s.features[k]))
        throw data_error(where + ", column f" + std::to_string(k) + ": non-numeric feature '" +
                         std::string(fields[c]) + "'");
    }
    for (const auto& [k, c] : attr_col) {
      int v = -1;
      if (!detail::parse_number(fields[c], v) || (v != 0 && v != 1))
        throw data_error(where + ", column a" + std::to_string(k) + ": attribute value '" +
                         std::string(detail::trim(fields[c])) + "' is not 0 or 1");
      s.attrs[k] = v;
    }
    if (!detail::parse_number(fields[*id_col], s.id) || s.id < 0)
      throw data_error(where + ", column id: '" + std::string(detail::trim(fields[*id_col])) +
                       "' is not a non-negative integer");
    out.samples.push_back(std::move(s));
  }
  if (out.samples.empty()) throw data_error(source + ": no data rows");

  const auto violations = validate_dataset(out.samples);
  if (!violations.empty()) {
    std::string msg = source + ": dataset violates id consistency:";
    for (const auto& v : violations) msg += "\n  " + v.describe();
    throw data_error(msg);
  }
  return out;
}

inline CsvDataset load_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw usage_error("cannot open dataset: " + path);
  return load_csv(is, path);
}

// Identities assigned to the training side: round(train_frac * #ids),
// clamped so both sides keep at least one.
inline std::set<int> choose_train_ids(const std::vector<Sample>& samples, double train_frac, Rng& rng) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw usage_error("split_by_id: train_frac must lie in (0, 1)");
  std::set<int> id_set;
  for (const Sample& s : samples) id_set.insert(s.id);
  if (id_set.size() < 2) throw usage_error("split_by_id: need at least two identities");
  std::vector<int> ids(id_set.begin(), id_set.end());
  rng.shuffle(ids);
  auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(ids.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train)};
}

// Identity-disjoint split. Sample order is preserved within each side.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split_by_id(const std::vector<Sample>& samples,
                                                                      double train_frac, Rng& rng) {
  const std::set<int> train_ids = choose_train_ids(samples, train_frac, rng);
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (const Sample& s : samples) (train_ids.count(s.id) ? out.first : out.second).push_back(s);
  return out;
}

}  // namespace hfe

#endif  // HFE_DATA_HPP_
