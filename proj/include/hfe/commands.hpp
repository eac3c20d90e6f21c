#ifndef HFE_COMMANDS_HPP_
#define HFE_COMMANDS_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hfe/core.hpp"
#include "hfe/data.hpp"
#include "hfe/eval.hpp"
#include "hfe/io.hpp"
#include "hfe/loss.hpp"
#include "hfe/mining.hpp"
#include "hfe/model.hpp"
#include "hfe/train.hpp"

namespace hfe {

// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

struct GenSynthOptions {
  SynthSpec spec;
  std::string out;
  std::optional<std::string> test_out;  // when set, split by identity
  double train_frac = 0.5;
};

inline void cmd_gen_synth(const GenSynthOptions& opt) {
  const SynthDataset ds = generate_synthetic(opt.spec);
  if (!opt.test_out) {
    write_csv(opt.out, ds.samples);
    return;
  }
  Rng rng(opt.spec.seed);
  rng.next_u64();  // decorrelate from the generator stream
  const auto [train, test] = split_by_id(ds.samples, opt.train_frac, rng);
  write_csv(opt.out, train);
  write_csv(*opt.test_out, test);
}

struct TrainOptions {
  HFEConfig hfe;
  LossFlags flags;
  std::string data;
  std::string out_dir;
  int epochs = 10;
  std::optional<long long> steps;  // overrides epochs when set
  int log_every = 1;
  bool json_log = false;
};

// Steps implied by the options: `steps` if given, else epochs times the
// number of P x K batches needed to cover the dataset once.
inline long long planned_steps(const TrainOptions& opt, std::size_t dataset_size) {
  if (opt.steps) return *opt.steps;
  const auto batch = static_cast<std::size_t>(opt.hfe.num_ids) * static_cast<std::size_t>(opt.hfe.imgs_per_id);
  const auto per_epoch = static_cast<long long>((dataset_size + batch - 1) / batch);
  return static_cast<long long>(opt.epochs) * per_epoch;
}

// key=value lines, readable back through `hfe train --config`.
inline void write_run_config(std::ostream& os, const TrainOptions& opt) {
  const HFEConfig& c = opt.hfe;
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "data=" << opt.data << '\n'
     << "out=" << opt.out_dir << '\n'
     << "epochs=" << opt.epochs << '\n';
  if (opt.steps) os << "steps=" << *opt.steps << '\n';
  os << "log-every=" << opt.log_every << '\n'
     << "json-log=" << b(opt.json_log) << '\n'
     << "alpha1=" << format_double(c.alpha1) << '\n'
     << "alpha2=" << format_double(c.alpha2) << '\n'
     << "alpha3=" << format_double(c.alpha3) << '\n'
     << "w0=" << format_double(c.w0) << '\n'
     << "embed-dim=" << c.embed_dim << '\n'
     << "hidden-dims=";
  for (std::size_t i = 0; i < c.hidden_dims.size(); ++i) os << (i ? "," : "") << c.hidden_dims[i];
  os << '\n'
     << "P=" << c.num_ids << '\n'
     << "K=" << c.imgs_per_id << '\n'
     << "lr=" << format_double(c.learning_rate) << '\n'
     << "weight-decay=" << format_double(c.weight_decay) << '\n'
     << "seed=" << c.seed << '\n'
     << "use-inter=" << b(opt.flags.use_inter) << '\n'
     << "use-intra=" << b(opt.flags.use_intra) << '\n'
     << "use-abr=" << b(opt.flags.use_abr) << '\n'
     << "use-dynamic-weight=" << b(opt.flags.use_dynamic_weight) << '\n'
     << "use-pairwise-intra=" << b(opt.flags.use_pairwise_intra) << '\n';
}

struct TrainSummary {
  long long steps = 0;
  std::string checkpoint_path;
  std::string log_path;
  std::optional<LossReport> last;
};

// Writes <out>/config.ini, <out>/train_log.csv (or .jsonl) and
// <out>/checkpoint.bin.
inline TrainSummary cmd_train(TrainOptions opt) {
  opt.flags.validate();
  const CsvDataset ds = load_csv(opt.data);
  if (ds.num_attrs != static_cast<std::size_t>(opt.hfe.num_attrs)) opt.hfe.num_attrs = static_cast<int>(ds.num_attrs);
  const long long steps = planned_steps(opt, ds.samples.size());
  if (steps < 0) throw usage_error("train: negative step count");
  opt.hfe.total_iters = static_cast<int>(std::max<long long>(1, steps));
  opt.hfe.validate();
  if (opt.log_every < 1) throw usage_error("train: log-every must be positive");

  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  {
    std::ofstream cfg(fs::path(opt.out_dir) / "config.ini", std::ios::binary | std::ios::trunc);
    write_run_config(cfg, opt);
  }

  TrainSummary summary;
  summary.steps = steps;
  summary.log_path = (fs::path(opt.out_dir) / (opt.json_log ? "train_log.jsonl" : "train_log.csv")).string();
  summary.checkpoint_path = (fs::path(opt.out_dir) / "checkpoint.bin").string();
  std::ofstream log(summary.log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw usage_error("cannot write " + summary.log_path);
  if (!opt.json_log) log << kLogHeader << '\n';

  const TrainState state = train(ds.samples, opt.hfe, opt.flags, steps, [&](long long step, const LossReport& r) {
    summary.last = r;
    if (step % opt.log_every != 0 && step != steps) return;
    if (opt.json_log)
      log << log_json_line(step, r) << '\n';
    else
      write_log_row(log, step, r);
  });
  save_checkpoint(state, summary.checkpoint_path);
  return summary;
}

struct EvalResult {
  MetricReport metrics;
  std::vector<EmbeddingDiagnostics> diagnostics;
};

inline TrainState load_compatible(const std::string& checkpoint, const CsvDataset& ds) {
  TrainState st = load_checkpoint(checkpoint);
  if (st.model.shape.attrs != ds.num_attrs)
    throw data_error("checkpoint has M=" + std::to_string(st.model.shape.attrs) + " attributes but the dataset has " +
                     std::to_string(ds.num_attrs));
  if (st.model.shape.features != ds.feature_dim)
    throw data_error("checkpoint expects F=" + std::to_string(st.model.shape.features) +
                     " features but the dataset has " + std::to_string(ds.feature_dim));
  return st;
}

inline EvalResult cmd_eval(const std::string& checkpoint, const std::string& data) {
  const CsvDataset ds = load_csv(data);
  const TrainState st = load_compatible(checkpoint, ds);
  const Batch all = Batch::from(ds.samples);
  const ForwardPass pass = forward(st.model, all);
  const BinaryMatrix labels = label_matrix(ds.samples);
  EvalResult r;
  r.metrics = evaluate_predictions(predict(pass.probs), labels);
  r.diagnostics = embedding_diagnostics(pass.embeddings, labels, all.ids());
  return r;
}

inline nlohmann::json eval_json(const EvalResult& r) {
  return {{"metrics", r.metrics}, {"diagnostics", r.diagnostics}};
}

inline void print_eval(std::ostream& os, const EvalResult& r) {
  print_table(os, r.metrics);
  os << "embedding diagnostics\n"
     << "  attr   intra_id   intra_cls  inter_cls  order_rate\n";
  char line[128];
  for (std::size_t j = 0; j < r.diagnostics.size(); ++j) {
    const auto& d = r.diagnostics[j];
    std::snprintf(line, sizeof line, "  %4zu  %9.4f  %9.4f  %9.4f  %10.4f\n", j, d.mean_intra_id_dist,
                  d.mean_intra_class_dist, d.mean_inter_class_dist, d.quintuplet_order_rate);
    os << line;
  }
}

inline void cmd_project(const std::string& checkpoint, const std::string& data, std::size_t attr,
                        std::ostream& out) {
  const CsvDataset ds = load_csv(data);
  if (attr >= ds.num_attrs)
    throw usage_error("project: attribute index " + std::to_string(attr) + " out of range (M=" +
                      std::to_string(ds.num_attrs) + ")");
  const TrainState st = load_compatible(checkpoint, ds);
  const Batch all = Batch::from(ds.samples);
  const ForwardPass pass = forward(st.model, all);
  write_projection_csv(out, project_2d(pass.embeddings[attr]), all.attr_column(attr), all.ids());
}

struct MineDebugOptions {
  std::string checkpoint;
  std::string data;
  std::size_t P = 4;
  std::size_t K = 4;
  std::uint64_t seed = 0;
};

// attr,anchor,p1,p2,p3,n,d_p1,d_p2,d_p3,d_n; absent members leave both
// their index and distance empty. Indices are batch positions.
inline void cmd_mine_debug(const MineDebugOptions& opt, std::ostream& out) {
  const CsvDataset ds = load_csv(opt.data);
  const TrainState st = load_compatible(opt.checkpoint, ds);
  Rng rng(opt.seed);
  const Batch batch = pk_sample(ds.samples, opt.P, opt.K, rng);
  const ForwardPass pass = forward(st.model, batch);
  const std::vector<Quintuplet> quints = mine_batch(pass.embeddings, batch);
  std::vector<DistanceMatrix> dists;
  for (const Matrix& e : pass.embeddings) dists.push_back(pairwise_distances(e));

  out << "attr,anchor,p1,p2,p3,n,d_p1,d_p2,d_p3,d_n\n";
  for (const Quintuplet& q : quints) {
    const auto& d = dists[q.attr];
    auto idx = [](const std::optional<std::size_t>& m) { return m ? std::to_string(*m) : std::string(); };
    auto dist = [&](const std::optional<std::size_t>& m) { return m ? format_double(d(q.anchor, *m)) : std::string(); };
    out << q.attr << ',' << q.anchor << ',' << idx(q.p1) << ',' << idx(q.p2) << ',' << idx(q.p3) << ',' << idx(q.n)
        << ',' << dist(q.p1) << ',' << dist(q.p2) << ',' << dist(q.p3) << ',' << dist(q.n) << '\n';
  }
}

}  // namespace hfe

#endif  // HFE_COMMANDS_HPP_
