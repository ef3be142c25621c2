#pragma once

#include <string>

#include "otbridge/bridge.hpp"
#include "otbridge/config.hpp"

namespace otbridge {

struct EmittedFiles {
  std::string trajectory_csv;  // empty when not written
  std::string metrics_json;
  std::string fields_csv;
};

/// Writes the run outputs into config.output.directory (created on demand):
///   trajectory.csv — t,particle,x_0..x_{d-1},p_0..p_{d-1} rows per recorded
///                    slice, full round-trip precision, '\n' endings;
///   metrics.json   — outer-iteration history arrays, per-slice energy trace,
///                    converged flag, resolved config echo, seed;
///   fields.csv     — optional u and grad psi on the output probe grid.
/// Byte-identical for identical reports and configs. Throws SpecError with the
/// path on I/O failure.
EmittedFiles emit_outputs(const SolveReport& report, const RunConfig& config);

}  // namespace otbridge
