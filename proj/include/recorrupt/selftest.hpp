#pragma once

#include "recorrupt/report.hpp"
#include "recorrupt/rng.hpp"

namespace recorrupt {

/// Gradient checks (every graph primitive, the full L2R and SURE loss graphs) and the
/// algebraic identity suite. Gradient rows use threshold 1e-5 relative error.
Report run_selftest(RngStream rng);

} // namespace recorrupt
