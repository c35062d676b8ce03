#include "deepsplit/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deepsplit/errors.hpp"

namespace deepsplit {

double reference_heat_additive(double t, const Vector& x, double w_t) {
    return x.squaredNorm() + 2.0 * t * static_cast<double>(x.size()) + w_t;
}

double reference_heat_mult(double t, const Vector& x, double w_t) {
    return std::exp(w_t - 0.5 * t) * (2.0 * t * static_cast<double>(x.size()) + x.squaredNorm());
}

McEstimate bs_v(const BsCoefficients& coeffs, const std::function<double(const Vector&)>& phi,
                double t, const Vector& x, long pairs, RngStream& stream) {
    const auto d = x.size();
    if (coeffs.mu.size() != d) throw ShapeError("coefficient and point dimensions differ");
    if (t <= 0.0) return {phi(x), 0.0};
    if (pairs < 2) throw std::invalid_argument("bs_v needs at least two antithetic pairs");

    const Eigen::ArrayXd drift = (coeffs.mu.array() - 0.5 * coeffs.sigma.array().square()) * t;
    const Eigen::ArrayXd vol = coeffs.sigma.array() * std::sqrt(t);
    Vector y(d), up(d), down(d);
    double sum = 0.0, sum_sq = 0.0;
    for (long p = 0; p < pairs; ++p) {
        for (Eigen::Index i = 0; i < d; ++i) y(i) = stream.next_normal();
        up = (x.array() * (vol * y.array() + drift).exp()).matrix();
        down = (x.array() * (drift - vol * y.array()).exp()).matrix();
        const double pair_mean = 0.5 * (phi(up) + phi(down));
        sum += pair_mean;
        sum_sq += pair_mean * pair_mean;
    }
    const double n = static_cast<double>(pairs);
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

McEstimate reference_bs(const BsCoefficients& coeffs,
                        const std::function<double(const Vector&)>& phi, double t, const Vector& x,
                        double w_t, long pairs, RngStream& stream) {
    const McEstimate v = bs_v(coeffs, phi, t, x, pairs, stream);
    const double factor = std::exp(w_t - 0.5 * t);
    return {factor * v.value, factor * v.std_error};
}

namespace {

// Solves a tridiagonal system in place (Thomas algorithm); rhs is overwritten
// with the solution.
void solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag,
                       const std::vector<double>& upper, std::vector<double>& rhs,
                       std::vector<double>& scratch) {
    const std::size_t n = rhs.size();
    scratch.assign(n, 0.0);
    double denom = diag[0];
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        scratch[i] = upper[i - 1] / denom;
        denom = diag[i] - lower[i] * scratch[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

}  // namespace

double reference_zakai_1d(const ZakaiCoefficients& coeffs, const NoiseRealization& z,
                          double x_eval, const ZakaiOracleOptions& options) {
    if (z.noise_dim != 1) throw OracleError("finite-difference Zakai oracle requires d = 1");
    if (options.points < 8 || options.time_substeps < 1) {
        throw std::invalid_argument("Zakai oracle needs >= 8 points and >= 1 time substep");
    }
    const TimeGrid& grid = z.grid;
    const double L = options.half_width > 0.0
                         ? options.half_width
                         : 6.0 * (1.0 / std::sqrt(coeffs.alpha) + std::sqrt(grid.T));
    if (std::abs(x_eval) >= L) throw OracleError("evaluation point lies outside the oracle domain");

    // Observation increments at the finest stored resolution.
    const bool fine = z.fine_path.rows() > 0;
    const int obs_per_step = fine ? z.substeps : 1;
    const Matrix& obs = fine ? z.fine_path : z.path;
    const int obs_steps = grid.N * obs_per_step;
    const int cn_per_obs =
        std::max(1, (options.time_substeps + obs_per_step - 1) / obs_per_step);
    const double ds_obs = grid.T / obs_steps;
    const double ds = ds_obs / cn_per_obs;

    const int P = options.points;
    const double dx = 2.0 * L / (P - 1);
    std::vector<double> x(P), mu(P), h(P), state(P);
    Vector point(1);
    for (int i = 0; i < P; ++i) {
        x[i] = -L + i * dx;
        point(0) = x[i];
        mu[i] = coeffs.mu(point)(0);
        h[i] = coeffs.beta * x[i];
        state[i] = coeffs.density(point);
    }
    state.front() = state.back() = 0.0;

    // Interior unknowns 1..P-2; A X_i = X''/2 - (mu X)'.
    const int M = P - 2;
    std::vector<double> a_lo(M), a_di(M), a_up(M);
    const double diff = 0.5 / (dx * dx);
    for (int k = 0; k < M; ++k) {
        const int i = k + 1;
        a_lo[k] = diff + mu[i - 1] / (2.0 * dx);
        a_di[k] = -2.0 * diff;
        a_up[k] = diff - mu[i + 1] / (2.0 * dx);
    }
    std::vector<double> lhs_lo(M), lhs_di(M), lhs_up(M);
    for (int k = 0; k < M; ++k) {
        lhs_lo[k] = -0.5 * ds * a_lo[k];
        lhs_di[k] = 1.0 - 0.5 * ds * a_di[k];
        lhs_up[k] = -0.5 * ds * a_up[k];
    }

    std::vector<double> rhs(M), scratch;
    for (int step = 0; step < obs_steps; ++step) {
        for (int c = 0; c < cn_per_obs; ++c) {
            for (int k = 0; k < M; ++k) {
                const int i = k + 1;
                rhs[k] = state[i] + 0.5 * ds *
                                        (a_lo[k] * state[i - 1] + a_di[k] * state[i] +
                                         a_up[k] * state[i + 1]);
            }
            solve_tridiagonal(lhs_lo, lhs_di, lhs_up, rhs, scratch);
            for (int k = 0; k < M; ++k) state[k + 1] = rhs[k];
        }
        const double dz = obs(step + 1, 0) - obs(step, 0);
        for (int i = 1; i < P - 1; ++i) {
            state[i] *= std::exp(h[i] * dz - 0.5 * h[i] * h[i] * ds_obs);
        }
    }

    double total = 0.0, edge = 0.0;
    const int band = std::max(1, P / 20);
    for (int i = 0; i < P; ++i) {
        const double mass = std::abs(state[i]) * dx;
        total += mass;
        if (i < band || i >= P - band) edge += mass;
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw OracleError("Zakai oracle produced no mass");
    if (edge > options.boundary_tolerance * total) {
        throw OracleError("Zakai oracle domain too small: boundary mass fraction " +
                          std::to_string(edge / total));
    }

    const double pos = (x_eval + L) / dx;
    const int left = std::min(static_cast<int>(std::floor(pos)), P - 2);
    const double frac = pos - left;
    return (1.0 - frac) * state[left] + frac * state[left + 1];
}

McEstimate reference_solution(const SpdeProblem& problem, const NoiseRealization& z,
                              const Vector& x, const OracleOptions& options, RngStream& stream) {
    const double T = z.grid.T;
    switch (problem.id()) {
        case ProblemId::HeatAdditive:
            return {reference_heat_additive(T, x, z.terminal()(0)), 0.0};
        case ProblemId::HeatMultiplicative:
            return {reference_heat_mult(T, x, z.terminal()(0)), 0.0};
        case ProblemId::BlackScholes: {
            const BsCoefficients& coeffs = *bs_coefficients(problem);
            auto phi = [&problem](const Vector& p) { return problem.initial(p); };
            return reference_bs(coeffs, phi, T, x, z.terminal()(0), options.bs_pairs, stream);
        }
        case ProblemId::Zakai: {
            if (problem.dim() != 1) {
                throw OracleError("no Zakai reference solution for d = " +
                                  std::to_string(problem.dim()));
            }
            return {reference_zakai_1d(*zakai_coefficients(problem), z, x(0), options.zakai), 0.0};
        }
    }
    throw OracleError("unknown problem");
}

}  // namespace deepsplit
