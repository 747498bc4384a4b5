#pragma once

#include <ostream>

#include "run_config.hpp"

namespace dqg::cli {

// Each command writes its artifacts and prints JSON lines to `out`; the last
// line carries the effective config. Failures throw dqg::Error.
void run_synth(const RunConfig& rc, std::ostream& out);
void run_label(const RunConfig& rc, std::ostream& out);
void run_stats(const RunConfig& rc, std::ostream& out);
void run_train(const RunConfig& rc, std::ostream& out);
void run_generate(const RunConfig& rc, std::ostream& out);
void run_eval(const RunConfig& rc, std::ostream& out);
// Returns false when a check exceeds its tolerance.
bool run_gradcheck(const RunConfig& rc, std::ostream& out);

}  // namespace dqg::cli
