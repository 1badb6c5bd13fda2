#pragma once

#include "ccsim/common.hpp"

namespace ccsim {

/// Isotropic material parameters. Lame constants are derived from (E, nu)
/// with the plane-strain conversion; in 1D only `young` is used (segment
/// stiffness k = E / rest length, unit cross-section).
struct MaterialParams {
  double young = 0.0;    // Pa
  double poisson = 0.0;  // dimensionless, [0, 0.5)
  double density = 0.0;  // kg / m^dim

  double lame_mu() const { return young / (2.0 * (1.0 + poisson)); }
  double lame_lambda() const {
    return young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  }

  void validate() const {
    if (!(young > 0)) throw ConfigError("material: young modulus must be positive");
    if (poisson < 0 || poisson >= 0.5) throw ConfigError("material: poisson ratio must be in [0, 0.5)");
    if (density < 0) throw ConfigError("material: density must be non-negative");
  }
};

}  // namespace ccsim
