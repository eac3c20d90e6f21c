#ifndef HFE_IO_HPP_
#define HFE_IO_HPP_

#include <string>
#include <vector>

#include "json.hpp"

#include "hfe/core.hpp"
#include "hfe/eval.hpp"

namespace hfe {

inline void to_json(nlohmann::json& j, const LossReport& r) {
  j = {{"w", r.weight_w},        {"ce", r.ce},   {"inter", r.inter},
       {"intra", r.intra},       {"abr", r.abr}, {"hfe", r.hfe},
       {"total", r.total},       {"n_inter", r.counts.inter},
       {"n_intra", r.counts.intra}, {"n_abr", r.counts.abr}};
}

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  j = {{"class_based_per_attr", r.class_based_per_attr},
       {"class_based_avg", r.class_based_avg},
       {"instance_acc", r.instance_acc},
       {"instance_prec", r.instance_prec},
       {"instance_recall", r.instance_recall},
       {"instance_f1", r.instance_f1}};
}

inline void from_json(const nlohmann::json& j, MetricReport& r) {
  j.at("class_based_per_attr").get_to(r.class_based_per_attr);
  j.at("class_based_avg").get_to(r.class_based_avg);
  j.at("instance_acc").get_to(r.instance_acc);
  j.at("instance_prec").get_to(r.instance_prec);
  j.at("instance_recall").get_to(r.instance_recall);
  j.at("instance_f1").get_to(r.instance_f1);
}

inline void to_json(nlohmann::json& j, const EmbeddingDiagnostics& d) {
  j = {{"mean_intra_id_dist", d.mean_intra_id_dist},
       {"mean_intra_class_dist", d.mean_intra_class_dist},
       {"mean_inter_class_dist", d.mean_inter_class_dist},
       {"quintuplet_order_rate", d.quintuplet_order_rate}};
}

// JSON-lines variant of the training log.
inline std::string log_json_line(long long step, const LossReport& r) {
  nlohmann::json j = r;
  j["step"] = step;
  return j.dump();
}

}  // namespace hfe

#endif  // HFE_IO_HPP_
