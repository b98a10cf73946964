// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace copaug {

double norm_cdf(double x);
double norm_pdf(double x);
/// Inverse standard normal CDF, p in (0, 1).
double norm_quantile(double p);

/// Student t with nu degrees of freedom.
double t_cdf(double x, double nu);
double t_quantile(double p, double nu);
double t_log_pdf(double x, double nu);

}  // namespace copaug
