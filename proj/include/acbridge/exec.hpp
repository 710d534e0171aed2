#pragma once

namespace acbridge {

/// Selects the OpenMP kernel or the serial reference path. Both produce the
/// same results; the serial path is kept as the test oracle and benchmark baseline.
enum class Exec { serial, parallel };

}  // namespace acbridge
