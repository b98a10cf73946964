// SPDX-License-Identifier: Apache-2.0
#include "copaug/radiation.hpp"

#include <cmath>
#include <string>

#include "copaug/error.hpp"
#include "copaug/kernels.hpp"

namespace copaug {

std::vector<double> half_level_pressures(std::span<const double> p_full) {
  const auto n = p_full.size();
  require(n >= 1, ErrorCategory::domain, "need at least one full level");
  for (std::size_t i = 1; i < n; ++i)
    require(p_full[i] > p_full[i - 1], ErrorCategory::domain,
            "full-level pressures must be strictly increasing");
  require(p_full[0] > 0.0, ErrorCategory::domain, "pressures must be positive");
  std::vector<double> half(n + 1);
  half[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) half[i] = 0.5 * (p_full[i - 1] + p_full[i]);
  half[n] = p_full[n - 1] + (p_full[n - 1] - half[n - 1]);
  return half;
}

std::vector<double> sigma_layers(std::span<const double> p_half) {
  require(p_half.size() >= 2, ErrorCategory::domain, "need at least two half levels");
  const double p0 = p_half.back();
  require(p0 > 0.0, ErrorCategory::domain, "surface pressure must be positive");
  std::vector<double> ds(p_half.size() - 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    require(p_half[i + 1] > p_half[i], ErrorCategory::domain,
            "half-level pressures must be strictly increasing");
    ds[i] = (p_half[i + 1] - p_half[i]) / p0;
  }
  return ds;
}

double planck_flux(double T, const RadiationConstants& k) {
  require(T >= 0.0, ErrorCategory::domain, "temperature must be >= 0");
  const double t2 = T * T;
  return k.sigma_sb * t2 * t2;
}

double layer_optical_depth(double tau_c, double delta_sigma, const RadiationConstants& k) {
  require(tau_c >= 0.0 && delta_sigma >= 0.0, ErrorCategory::domain,
          "optical depth inputs must be >= 0");
  return tau_c + k.tau_gas * delta_sigma;
}

double layer_emissivity(double tau, const RadiationConstants& k) {
  require(tau >= 0.0, ErrorCategory::domain, "optical depth must be >= 0");
  return -std::expm1(-k.diffusivity * tau);
}

std::vector<double> downwelling_longwave(const Profile& prof, const RadiationConstants& k) {
  const auto n = prof.T.size();
  require(prof.p.size() == n && prof.tau_c.size() == n, ErrorCategory::domain,
          "profile arrays must have equal length");
  const auto ds = sigma_layers(half_level_pressures(prof.p));
  std::vector<double> flux(n + 1);
  flux[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double eps = layer_emissivity(layer_optical_depth(prof.tau_c[i], ds[i], k), k);
    flux[i + 1] = flux[i] * (1.0 - eps) + planck_flux(prof.T[i], k) * eps;
  }
  return flux;
}

ProfileSet radiate_set(const ProfileSet& set, const RadiationConstants& k) {
  for (std::size_t i = 0; i < set.profiles.size(); ++i) {
    try {
      validate_profile(set.profiles[i], set.grid);
    } catch (const Error& e) {
      fail(e.category(), "profile " + std::to_string(i) + ": " + e.what());
    }
  }
  ProfileSet out = set;
  out.fluxes = kernels::parallel::radiate(set.profiles, k);
  return out;
}

}  // namespace copaug
