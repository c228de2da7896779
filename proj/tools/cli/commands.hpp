#pragma once

#include <ostream>

#include "run_config.hpp"

namespace klpriv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitDiverged = 3;

// Each command writes its report to cfg.out (or `out` when no path is set)
// and returns a process exit code.
int cmd_bound(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_mc_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_lazy(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err);

int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses argv, merges config file and flags, validates and dispatches.
int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace klpriv::cli
