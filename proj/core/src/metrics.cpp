#include "pnp/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace pnp {

namespace {

using Json = nlohmann::ordered_json;

Json losses_json(const LossBreakdown& l) {
  Json j;
  j["total"] = l.total;
  j["l_cr"] = l.l_cr;
  j["l_cru"] = l.l_cru;
  j["l_crl"] = l.l_crl;
  j["l_ir"] = l.l_ir;
  j["l_sup"] = l.l_sup;
  j["l_unsup"] = l.l_unsup;
  j["regularizer"] = l.regularizer;
  return j;
}

}  // namespace

std::string epoch_record(const EpochMetrics& m, const RecordOptions& opts) {
  Json j;
  j["epoch"] = m.epoch;
  j["losses"] = losses_json(m.losses);
  j["k_est"] = m.k_est;
  j["omega"] = m.omega;
  j["lr"] = m.lr;
  j["tau_t"] = m.tau_t;
  j["steps"] = m.steps;
  j["step_totals"] = m.step_totals;
  if (opts.include_timing) j["cluster_ms"] = m.cluster_ms;
  return j.dump();
}

std::string loss_record(const LossBreakdown& l) { return losses_json(l).dump(); }

std::string eval_record(const EvalReport& eval, const BiasReport& bias) {
  Json j;
  j["acc_all"] = eval.acc_all;
  j["acc_old"] = eval.acc_old;
  j["acc_new"] = eval.acc_new;
  j["k_est"] = eval.k_est;
  j["num_old"] = eval.num_old;
  j["num_new"] = eval.num_new;
  j["correct"] = eval.correct;
  Json matching = Json::array();
  for (const auto& [cluster, cls] : eval.matching) matching.push_back({cluster, cls});
  j["matching"] = std::move(matching);
  Json b;
  b["false_old"] = bias.false_old;
  b["false_new"] = bias.false_new;
  b["true_old"] = bias.true_old;
  b["true_new"] = bias.true_new;
  b["intra_class_bias"] = bias.intra_class_bias;
  Json per_class = Json::array();
  for (const auto& [cls, total] : bias.total_per_class)
    per_class.push_back({{"class", cls}, {"correct", bias.correct_per_class.at(cls)}, {"total", total}});
  b["per_class"] = std::move(per_class);
  j["bias"] = std::move(b);
  return j.dump();
}

std::string eval_table(const EvalReport& eval, const BiasReport& bias) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %6s\n", "", "All", "Old", "New", "K^e");
  out << line;
  std::snprintf(line, sizeof line, "%-10s %8.4f %8.4f %8.4f %6zu\n", "ACC", eval.acc_all,
                eval.acc_old, eval.acc_new, eval.k_est);
  out << line;
  std::snprintf(line, sizeof line, "%-10s %6s %6s %6s %6s %10s\n", "errors", "FO", "FN", "TO", "TN",
                "intra-bias");
  out << line;
  std::snprintf(line, sizeof line, "%-10s %6zu %6zu %6zu %6zu %10.3f\n", "", bias.false_old,
                bias.false_new, bias.true_old, bias.true_new, bias.intra_class_bias);
  out << line;
  return out.str();
}

}  // namespace pnp
