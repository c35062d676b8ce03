#include "deepsplit/paths.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "deepsplit/errors.hpp"

namespace deepsplit {

TimeGrid make_grid(double T, int N) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("time horizon T must be > 0");
    if (N < 1) throw std::invalid_argument("number of time steps N must be >= 1");
    TimeGrid grid;
    grid.T = T;
    grid.N = N;
    grid.t.resize(N + 1);
    grid.tau.resize(N + 1);
    for (int i = 0; i <= N; ++i) grid.t[i] = i * T / N;
    for (int n = 0; n <= N; ++n) grid.tau[n] = T - grid.t[N - n];
    grid.t[N] = T;
    grid.tau[0] = 0.0;
    return grid;
}

Vector NoiseRealization::increment(int n, const Vector&) const {
    if (n < 1 || n > grid.N) throw std::out_of_range("noise increment index out of range");
    return (path.row(n) - path.row(n - 1)).transpose();
}

Vector NoiseRealization::terminal() const {
    return (path.row(grid.N) - path.row(0)).transpose();
}

Vector XiSpec::sample(RngStream& stream) const {
    if (mode == Mode::Point) return center;
    Vector xi(center.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i) {
        xi(i) = center(i) + halfwidth * (2.0 * stream.next_uniform() - 1.0);
    }
    return xi;
}

Matrix simulate_aux_path(const SpdeProblem& problem, const TimeGrid& grid, const Vector& xi,
                         RngStream& stream, int steps) {
    const int d = problem.dim();
    if (xi.size() != d) throw ShapeError("xi has the wrong dimension");
    if (steps < 0) steps = grid.N;
    Matrix path(steps + 1, d);
    path.row(0) = xi.transpose();
    Vector state = xi;
    Vector w(d);
    for (int k = 0; k < steps; ++k) {
        const double scale = std::sqrt(grid.tau[k + 1] - grid.tau[k]);
        for (int i = 0; i < d; ++i) w(i) = scale * stream.next_normal();
        state = problem.transition(grid.tau[k + 1], grid.tau[k], state, w);
        if (!state.allFinite()) {
            throw NumericError("non-finite auxiliary state at step " + std::to_string(k + 1));
        }
        path.row(k + 1) = state.transpose();
    }
    return path;
}

NoiseRealization zakai_observation(const ZakaiCoefficients& coeffs, const TimeGrid& grid,
                                   int substeps, const Vector& y0, const Matrix& signal_increments,
                                   const Matrix& obs_increments) {
    const int d = static_cast<int>(y0.size());
    const Eigen::Index fine_steps = static_cast<Eigen::Index>(grid.N) * substeps;
    if (substeps < 1 || signal_increments.rows() != fine_steps ||
        obs_increments.rows() != fine_steps || signal_increments.cols() != d ||
        obs_increments.cols() != d) {
        throw ShapeError("fine increment matrices do not match grid and substeps");
    }
    const double ds = grid.T / static_cast<double>(fine_steps);
    const double spread_scale = 1.0 / std::sqrt(static_cast<double>(d));

    NoiseRealization z;
    z.grid = grid;
    z.noise_dim = d;
    z.substeps = substeps;
    z.fine_path = Matrix::Zero(fine_steps + 1, d);
    z.fine_signal.resize(fine_steps + 1, d);
    z.fine_signal.row(0) = y0.transpose();

    Vector y = y0;
    Vector obs = Vector::Zero(d);
    for (Eigen::Index i = 0; i < fine_steps; ++i) {
        obs += coeffs.h(y) * ds + obs_increments.row(i).transpose();
        const double spread = spread_scale * signal_increments.row(i).sum();
        y += coeffs.mu(y) * ds;
        y.array() += spread;
        z.fine_path.row(i + 1) = obs.transpose();
        z.fine_signal.row(i + 1) = y.transpose();
    }
    z.path.resize(grid.N + 1, d);
    for (int n = 0; n <= grid.N; ++n) z.path.row(n) = z.fine_path.row(static_cast<Eigen::Index>(n) * substeps);
    return z;
}

NoiseRealization sample_noise(const SpdeProblem& problem, const TimeGrid& grid, RngStream& stream,
                              int substeps) {
    if (const ZakaiCoefficients* coeffs = zakai_coefficients(problem)) {
        if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
        const int d = problem.dim();
        const Eigen::Index fine_steps = static_cast<Eigen::Index>(grid.N) * substeps;
        const double ds = grid.T / static_cast<double>(fine_steps);
        Vector y0(d);
        for (int i = 0; i < d; ++i) y0(i) = stream.next_normal() / std::sqrt(coeffs->alpha);
        Matrix signal(fine_steps, d), obs(fine_steps, d);
        const double root_ds = std::sqrt(ds);
        for (Eigen::Index i = 0; i < fine_steps; ++i) {
            for (int k = 0; k < d; ++k) signal(i, k) = root_ds * stream.next_normal();
        }
        for (Eigen::Index i = 0; i < fine_steps; ++i) {
            for (int k = 0; k < d; ++k) obs(i, k) = root_ds * stream.next_normal();
        }
        return zakai_observation(*coeffs, grid, substeps, y0, signal, obs);
    }

    NoiseRealization z;
    z.grid = grid;
    z.noise_dim = problem.noise_dim();
    z.path = Matrix::Zero(grid.N + 1, z.noise_dim);
    for (int n = 1; n <= grid.N; ++n) {
        const double scale = std::sqrt(grid.dt(n));
        for (int k = 0; k < z.noise_dim; ++k) {
            z.path(n, k) = z.path(n - 1, k) + scale * stream.next_normal();
        }
    }
    return z;
}

AuxiliaryBatch build_batch(const SpdeProblem& problem, const TimeGrid& grid,
                           const NoiseRealization& z, int n, const XiSpec& xi, int batch_size,
                           const RngStream& base) {
    if (n < 1 || n > grid.N) throw std::out_of_range("timestep n must be in 1..N");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    const int d = problem.dim();
    if (xi.center.size() != d) throw ShapeError("xi center has the wrong dimension");

    std::vector<RngStream> streams;
    streams.reserve(batch_size);
    Matrix states(d, batch_size);
    for (int j = 0; j < batch_size; ++j) {
        streams.push_back(base.substream(static_cast<std::uint64_t>(j)));
        states.col(j) = xi.sample(streams.back());
    }

    // Only indices N-n and N-n+1 are needed.
    const int target = grid.N - n + 1;
    AuxiliaryBatch batch;
    batch.n = n;
    batch.dt = grid.dt(n);
    Matrix increments(d, batch_size);
    for (int k = 0; k < target; ++k) {
        if (k == target - 1) batch.inputs_now = states;
        const double scale = std::sqrt(grid.tau[k + 1] - grid.tau[k]);
        for (int j = 0; j < batch_size; ++j) {
            for (int i = 0; i < d; ++i) increments(i, j) = scale * streams[j].next_normal();
        }
        problem.transition_batch(grid.tau[k + 1], grid.tau[k], states, increments);
    }
    if (!states.allFinite()) {
        throw NumericError("non-finite auxiliary state at step " + std::to_string(target));
    }
    batch.inputs_prev = std::move(states);

    batch.noise_increments.resize(z.noise_dim, batch_size);
    for (int j = 0; j < batch_size; ++j) {
        batch.noise_increments.col(j) = z.increment(n, batch.inputs_prev.col(j));
    }
    return batch;
}

}  // namespace deepsplit
