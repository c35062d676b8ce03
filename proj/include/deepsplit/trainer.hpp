#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "deepsplit/nn.hpp"
#include "deepsplit/optim.hpp"
#include "deepsplit/paths.hpp"
#include "deepsplit/problems.hpp"

namespace deepsplit {

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
    NetworkShape shape;  // input_dim must equal the problem dimension
    int batch_size = 64;
    long iterations = 8000;
    LrSchedule schedule = LrSchedule::constant(1e-3, 0);
    OptimizerKind optimizer = OptimizerKind::Adam;
    AdamConfig adam;
    double bn_momentum = 0.99;
    double bn_epsilon = 1e-3;
    InitScheme init = InitScheme::Uniform;
    bool warm_start = false;
    bool prev_batch_stats = true;  // false: previous network uses its running BN state
    XiSpec xi;
    double divergence_limit = 1e12;

    int progress_every = 0;     // stderr progress line every k iterations, 0 = silent
    bool record_losses = false; // keep the per-iteration loss history
    /// Called with (n, m, loss, lr) after every update when set.
    std::function<void(int, long, double, double)> on_iteration;
};

/// Seed plus run index; every random draw of a run is addressed from these.
struct RunStreams {
    std::uint64_t seed = 0;
    std::uint64_t run = 0;

    RngStream init(int n) const;
    RngStream batch(int n, long m) const;
    RngStream noise() const;
    RngStream oracle() const;
};

struct TrainedStep {
    int n = 0;
    ParamVector theta;
    BatchNormState bn;
    double final_loss = 0.0;
    std::vector<double> losses;
};

/// V_{n-1} inside the Milstein target: phi for n = 1, otherwise the frozen
/// previous network, normalized either with the moments of the batch it is
/// evaluated on or with its running BN state.
class PreviousStep {
public:
    static PreviousStep initial(const SpdeProblem& problem) { return PreviousStep(&problem, nullptr); }
    static PreviousStep trained(const SpdeProblem& problem, const TrainedStep& step,
                                bool batch_statistics = false) {
        return PreviousStep(&problem, &step, batch_statistics);
    }

    /// Values and input gradients at the columns of `points`. With batch
    /// statistics the network normalizes with the moments of `points` itself
    /// (held constant for the input gradient) instead of its running state.
    InferWithGrad evaluate(const Matrix& points) const;
    const TrainedStep* step() const { return step_; }

private:
    PreviousStep(const SpdeProblem* problem, const TrainedStep* step, bool batch_statistics = false)
        : problem_(problem), step_(step), batch_statistics_(batch_statistics) {}

    const SpdeProblem* problem_;
    const TrainedStep* step_;
    bool batch_statistics_;
};

double milstein_target(const SpdeProblem& problem, const Vector& x, double u, const Vector& w,
                       const Vector& z, double dt);

/// Regression labels for every column of the batch.
Vector batch_targets(const SpdeProblem& problem, const AuxiliaryBatch& batch,
                     const PreviousStep& prev);

struct LossGrad {
    double loss = 0.0;
    Vector grad;
    std::vector<Vector> batch_means;  // per BN site, for the running-state update
    std::vector<Vector> batch_vars;
};

/// Mean squared residual between the training-mode network at inputs_now
/// and the Milstein labels, with its exact parameter gradient. Labels are
/// constants with respect to theta.
LossGrad step_loss_and_grad(const SpdeProblem& problem, const ParamVector& theta,
                            const AuxiliaryBatch& batch, const PreviousStep& prev,
                            double bn_epsilon);

/// M optimizer iterations for timestep n: fresh batch, running BN update,
/// loss and gradient, parameter update. Throws TrainingError on divergence.
TrainedStep train_step_network(const SpdeProblem& problem, const TimeGrid& grid,
                               const NoiseRealization& z, int n, const PreviousStep& prev,
                               const TrainConfig& config, const RunStreams& streams,
                               const ParamVector* start = nullptr);

class TrainedSolver {
public:
    TrainedSolver(std::shared_ptr<const SpdeProblem> problem, TimeGrid grid, NoiseRealization noise)
        : problem_(std::move(problem)), grid_(std::move(grid)), noise_(std::move(noise)) {}

    /// phi for n = 0, otherwise the step-n network in inference mode.
    double evaluate(int n, const Vector& x) const;

    const TimeGrid& grid() const { return grid_; }
    const NoiseRealization& noise() const { return noise_; }
    const SpdeProblem& problem() const { return *problem_; }
    const std::vector<TrainedStep>& steps() const { return steps_; }
    void push_step(TrainedStep step) { steps_.push_back(std::move(step)); }

private:
    std::shared_ptr<const SpdeProblem> problem_;
    TimeGrid grid_;
    NoiseRealization noise_;
    std::vector<TrainedStep> steps_;
};

/// Trains steps 1..N sequentially, conditioned on the realization z.
TrainedSolver solve(std::shared_ptr<const SpdeProblem> problem, const TimeGrid& grid,
                    const NoiseRealization& z, const TrainConfig& config,
                    const RunStreams& streams);

}  // namespace deepsplit
