#pragma once

#include <string>

#include "pnp/evaluation.hpp"
#include "pnp/objectives.hpp"
#include "pnp/trainer.hpp"

namespace pnp {

/// Timing fields ("cluster_ms") are the only non-deterministic values in a
/// record; leave them out to compare streams across runs.
struct RecordOptions {
  bool include_timing = true;
};

/// One JSON object on a single line (no trailing newline) with fields
/// epoch, losses{...}, k_est, omega, lr, tau_t, steps, step_totals and
/// cluster_ms.
std::string epoch_record(const EpochMetrics& m, const RecordOptions& opts = {});

std::string loss_record(const LossBreakdown& l);

/// Evaluation report as a single-line JSON object.
std::string eval_record(const EvalReport& eval, const BiasReport& bias);

/// Fixed-width text table of the same report.
std::string eval_table(const EvalReport& eval, const BiasReport& bias);

}  // namespace pnp
