// SPDX-License-Identifier: Apache-2.0
//
// Grey-body toy model of downwelling longwave flux. Each layer has optical
// depth tau = tau_c + tau_g * dsigma and emissivity 1 - exp(-D tau); the flux
// marches down from a zero boundary at the top of the atmosphere:
//   L[0] = 0,  L[i] = L[i-1] (1 - eps_i) + B_i eps_i,  B_i = sigma_SB T_i^4.
#pragma once

#include <span>
#include <vector>

#include "copaug/dataset.hpp"

namespace copaug {

struct RadiationConstants {
  double sigma_sb = 5.670374419e-8;  // W m-2 K-4
  double diffusivity = 1.66;         // 1 / cos(53 deg)
  double tau_gas = 1.7;              // total-column gas optical depth
};

/// Interior half levels are midpoints, the top is 0 and the surface mirrors
/// the last interior interface about the lowest full level.
std::vector<double> half_level_pressures(std::span<const double> p_full);

/// Layer mass fractions (p_{i+1/2} - p_{i-1/2}) / p_surface.
std::vector<double> sigma_layers(std::span<const double> p_half);

double planck_flux(double T, const RadiationConstants& k = {});
double layer_optical_depth(double tau_c, double delta_sigma, const RadiationConstants& k = {});
double layer_emissivity(double tau, const RadiationConstants& k = {});

/// Flux on the n_full + 1 half levels, index 0 at the top of the atmosphere.
std::vector<double> downwelling_longwave(const Profile& prof, const RadiationConstants& k = {});

/// Per-profile fluxes attached to a copy of `set`. Errors name the first
/// failing profile.
ProfileSet radiate_set(const ProfileSet& set, const RadiationConstants& k = {});

}  // namespace copaug
