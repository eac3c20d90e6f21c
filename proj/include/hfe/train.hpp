#ifndef HFE_TRAIN_HPP_
#define HFE_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "hfe/core.hpp"
#include "hfe/data.hpp"
#include "hfe/loss.hpp"
#include "hfe/mining.hpp"
#include "hfe/model.hpp"

namespace hfe {

// HFE weight for the step about to be taken. Fixed w0 when the schedule is
// switched off.
inline double step_weight(const HFEConfig& cfg, const LossFlags& flags, long long step) {
  if (!flags.use_dynamic_weight) return cfg.w0;
  const long long T = cfg.total_iters;
  return dynamic_weight(std::clamp<long long>(step, 0, T), T, cfg.w0);
}

// One optimizer step: P x K batch, forward, batch-hard mining, losses,
// backpropagation and Adam.
inline LossReport train_step(TrainState& state, const std::vector<Sample>& data, const HFEConfig& cfg,
                             const LossFlags& flags) {
  const Batch batch = pk_sample(data, static_cast<std::size_t>(cfg.num_ids),
                                static_cast<std::size_t>(cfg.imgs_per_id), state.rng);
  const ForwardPass pass = forward(state.model, batch);
  const bool finite = pass.logits.allFinite() &&
                      std::all_of(pass.embeddings.begin(), pass.embeddings.end(),
                                  [](const Matrix& e) { return e.allFinite(); });
  if (!finite) throw numerical_error("non-finite activations at step " + std::to_string(state.step));
  const double w = step_weight(cfg, flags, state.step);
  const BatchLoss loss = evaluate_batch(pass.embeddings, pass.logits, batch, MarginSet::from(cfg), flags, w);
  if (!std::isfinite(loss.report.total))
    throw numerical_error("non-finite loss at step " + std::to_string(state.step));
  backward_and_step(state, pass, loss.grads, AdamConfig::from(cfg));
  return loss.report;
}

using StepCallback = std::function<void(long long step, const LossReport&)>;

inline TrainState train(const std::vector<Sample>& data, const HFEConfig& cfg, const LossFlags& flags,
                        long long steps, const StepCallback& on_step = {}) {
  cfg.validate();
  flags.validate();
  if (data.empty()) throw usage_error("train: empty dataset");
  if (data.front().attrs.size() != static_cast<std::size_t>(cfg.num_attrs))
    throw data_error("train: dataset attribute count does not match num_attrs");
  TrainState state = TrainState::fresh(ModelShape::from(cfg, data.front().features.size()), cfg.seed);
  for (long long s = 0; s < steps; ++s) {
    const LossReport r = train_step(state, data, cfg, flags);
    if (on_step) on_step(state.step, r);
  }
  return state;
}

inline constexpr const char* kLogHeader = "step,w,ce,inter,intra,abr,hfe,total,n_inter,n_intra,n_abr";

inline void write_log_row(std::ostream& os, long long step, const LossReport& r) {
  os << step << ',' << format_double(r.weight_w) << ',' << format_double(r.ce) << ',' << format_double(r.inter)
     << ',' << format_double(r.intra) << ',' << format_double(r.abr) << ',' << format_double(r.hfe) << ','
     << format_double(r.total) << ',' << r.counts.inter << ',' << r.counts.intra << ',' << r.counts.abr << '\n';
}

}  // namespace hfe

#endif  // HFE_TRAIN_HPP_
