#pragma once

#include <functional>

#include <Eigen/Dense>

#include "deepsplit/paths.hpp"
#include "deepsplit/problems.hpp"
#include "deepsplit/rng.hpp"

namespace deepsplit {

/// |x|^2 + 2 t d + W_t.
double reference_heat_additive(double t, const Vector& x, double w_t);

/// exp(W_t - t/2) (2 t d + |x|^2).
double reference_heat_mult(double t, const Vector& x, double w_t);

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// v(t, x) = E[phi(x_1 S_1, ..., x_d S_d)] with independent geometric
/// Brownian factors S_i = exp(sigma_i sqrt(t) y_i + (mu_i - sigma_i^2/2) t),
/// estimated from `pairs` antithetic pairs (y, -y).
McEstimate bs_v(const BsCoefficients& coeffs, const std::function<double(const Vector&)>& phi,
                double t, const Vector& x, long pairs, RngStream& stream);

/// exp(W_t - t/2) v(t, x).
McEstimate reference_bs(const BsCoefficients& coeffs,
                        const std::function<double(const Vector&)>& phi, double t, const Vector& x,
                        double w_t, long pairs, RngStream& stream);

struct ZakaiOracleOptions {
    int points = 2048;
    int time_substeps = 16;  // Crank-Nicolson steps per coarse step
    double half_width = 0.0; // 0 selects 6 (alpha^{-1/2} + sqrt(T))
    double boundary_tolerance = 1e-8;
};

/// Zakai equation in d = 1 on [-L, L] with zero boundary values:
/// Crank-Nicolson for 1/2 X'' - (mu X)' alternating with the exact
/// multiplicative update X <- X exp(h dZ - h^2 ds / 2), using the finest
/// observation increments stored in `z`. Returns X_T(x_eval) by linear
/// interpolation. Throws OracleError if the density reaches the boundary.
double reference_zakai_1d(const ZakaiCoefficients& coeffs, const NoiseRealization& z,
                          double x_eval, const ZakaiOracleOptions& options = {});

struct OracleOptions {
    long bs_pairs = 200000;
    ZakaiOracleOptions zakai;
};

/// Reference value of X_T(x) for the realization z. Zakai is only available
/// for d = 1; otherwise OracleError.
McEstimate reference_solution(const SpdeProblem& problem, const NoiseRealization& z,
                              const Vector& x, const OracleOptions& options, RngStream& stream);

}  // namespace deepsplit
