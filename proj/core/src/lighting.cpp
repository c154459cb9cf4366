#include "meshalign/lighting.hpp"

#include "meshalign/error.hpp"

namespace meshalign {

namespace {

// Analytic irradiance constants for a clamped-cosine kernel.
constexpr double kC1 = 0.429043;
constexpr double kC2 = 0.511664;
constexpr double kC3 = 0.743125;
constexpr double kC4 = 0.886227;
constexpr double kC5 = 0.247708;

} // namespace

SHLighting SHLighting::uniform(double irradiance) {
  SHLighting light;
  light.coeffs[0] = Vec3::Constant(irradiance / kC4);
  return light;
}

Vec3 SHLighting::irradiance(const Vec3& n) const {
  const double x = n.x();
  const double y = n.y();
  const double z = n.z();
  const auto& L = coeffs;
  return kC1 * L[8] * (x * x - y * y) + kC3 * L[6] * z * z + kC4 * L[0] - kC5 * L[6] +
         2.0 * kC1 * (L[4] * x * y + L[7] * x * z + L[5] * y * z) +
         2.0 * kC2 * (L[3] * x + L[1] * y + L[2] * z);
}

Mat3 SHLighting::irradiance_jacobian(const Vec3& n) const {
  const double x = n.x();
  const double y = n.y();
  const double z = n.z();
  const auto& L = coeffs;
  Mat3 j;
  j.col(0) = 2.0 * kC1 * (L[8] * x + L[4] * y + L[7] * z) + 2.0 * kC2 * L[3];
  j.col(1) = 2.0 * kC1 * (-L[8] * y + L[4] * x + L[5] * z) + 2.0 * kC2 * L[1];
  j.col(2) = 2.0 * kC3 * L[6] * z + 2.0 * kC1 * (L[7] * x + L[5] * y) + 2.0 * kC2 * L[2];
  return j;
}

void SHLighting::validate() const {
  for (const Vec3& c : coeffs) {
    if (!c.allFinite()) {
      throw ConfigError("spherical-harmonic coefficients must be finite");
    }
  }
}

} // namespace meshalign
