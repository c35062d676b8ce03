#pragma once

#include <vector>

#include <Eigen/Dense>

#include "deepsplit/problems.hpp"
#include "deepsplit/rng.hpp"

namespace deepsplit {

using Matrix = Eigen::MatrixXd;

/// Uniform grid t_i = i T / N together with the reversed grid
/// tau_n = T - t_{N-n}.
struct TimeGrid {
    double T = 1.0;
    int N = 1;
    std::vector<double> t;
    std::vector<double> tau;

    /// t_n - t_{n-1}, n >= 1.
    double dt(int n) const { return t.at(n) - t.at(n - 1); }
};

TimeGrid make_grid(double T, int N);

/// One sampled driving-noise path. The benchmark samplers produce noise that
/// is constant in space, so `path` stores z_{t_i} once for all x; the Zakai
/// sampler additionally keeps the observation and signal on its fine grid.
struct NoiseRealization {
    TimeGrid grid;
    int noise_dim = 1;
    Matrix path;  // (N+1) x noise_dim, z at the coarse grid times, row 0 = 0

    int substeps = 1;   // fine steps per coarse step
    Matrix fine_path;   // (N*substeps+1) x noise_dim, or empty
    Matrix fine_signal; // (N*substeps+1) x d hidden signal (Zakai), or empty

    /// z_{t_n}(x) - z_{t_{n-1}}(x).
    Vector increment(int n, const Vector& x) const;
    /// z_{t_N} - z_0.
    Vector terminal() const;
};

/// Deterministic point or uniform box for the start of the auxiliary paths.
struct XiSpec {
    enum class Mode { Point, Box };
    Mode mode = Mode::Point;
    Vector center;
    double halfwidth = 1.0;

    Vector sample(RngStream& stream) const;
};

/// Rows 0..steps of the auxiliary path started at xi, driven by
/// Brownian increments over the reversed grid.
Matrix simulate_aux_path(const SpdeProblem& problem, const TimeGrid& grid, const Vector& xi,
                         RngStream& stream, int steps = -1);

/// Brownian path at grid times (heat, Black-Scholes) or the Zakai
/// observation Z_t = int_0^t h(Y_s) ds + V_t with the signal simulated by
/// Euler-Maruyama on `substeps` fine steps per coarse step.
NoiseRealization sample_noise(const SpdeProblem& problem, const TimeGrid& grid, RngStream& stream,
                              int substeps = 16);

/// Zakai observation path from explicit fine increments (rows = fine steps).
/// `signal_increments` and `obs_increments` hold Brownian increments over
/// fine steps of length T / (N * substeps).
NoiseRealization zakai_observation(const ZakaiCoefficients& coeffs, const TimeGrid& grid,
                                   int substeps, const Vector& y0, const Matrix& signal_increments,
                                   const Matrix& obs_increments);

/// Training minibatch for timestep n, one column per sample.
struct AuxiliaryBatch {
    int n = 0;
    Matrix inputs_now;        // d x J, states Y_{N-n}
    Matrix inputs_prev;       // d x J, states Y_{N-n+1}
    Matrix noise_increments;  // noise_dim x J, z increment at the inputs_prev columns
    double dt = 0.0;
};

/// Simulates `batch_size` fresh auxiliary paths; sample j draws from
/// base.substream(j).
AuxiliaryBatch build_batch(const SpdeProblem& problem, const TimeGrid& grid,
                           const NoiseRealization& z, int n, const XiSpec& xi, int batch_size,
                           const RngStream& base);

}  // namespace deepsplit
