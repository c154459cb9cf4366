#pragma once

#include <array>

#include "meshalign/mesh.hpp"

namespace meshalign {

/// Order-2 spherical-harmonic environment lighting, one RGB triple per
/// coefficient in the order L00, L1-1, L10, L11, L2-2, L2-1, L20, L21, L22.
struct SHLighting {
  std::array<Vec3, 9> coeffs;

  SHLighting() { coeffs.fill(Vec3::Zero()); }

  /// DC-only lighting whose irradiance equals `irradiance` for every normal.
  static SHLighting uniform(double irradiance = 1.0);

  /// Irradiance per channel for a unit normal.
  [[nodiscard]] Vec3 irradiance(const Vec3& n) const;

  /// Jacobian of irradiance: row c is d E_c / d n.
  [[nodiscard]] Mat3 irradiance_jacobian(const Vec3& n) const;

  void validate() const;
};

} // namespace meshalign
