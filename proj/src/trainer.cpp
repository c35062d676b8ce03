#include "deepsplit/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "deepsplit/errors.hpp"

namespace deepsplit {

namespace {

enum StreamPurpose : std::uint64_t {
    kInitStream = 1,
    kBatchStream = 2,
    kNoiseStream = 3,
    kOracleStream = 4,
};

}  // namespace

RngStream RunStreams::init(int n) const {
    return RngStream(seed, derive_stream_id({run, kInitStream, static_cast<std::uint64_t>(n)}));
}

RngStream RunStreams::batch(int n, long m) const {
    return RngStream(seed, derive_stream_id({run, kBatchStream, static_cast<std::uint64_t>(n),
                                             static_cast<std::uint64_t>(m)}));
}

RngStream RunStreams::noise() const {
    return RngStream(seed, derive_stream_id({run, kNoiseStream}));
}

RngStream RunStreams::oracle() const {
    return RngStream(seed, derive_stream_id({run, kOracleStream}));
}

InferWithGrad PreviousStep::evaluate(const Matrix& points) const {
    if (step_ != nullptr && batch_statistics_ && step_->theta.shape.batch_norm) {
        TrainForward forward = net_forward_train(step_->theta, points, step_->bn.epsilon);
        BatchNormState frozen = step_->bn;
        frozen.running_mean = std::move(forward.cache.batch_mean);
        frozen.running_var = std::move(forward.cache.batch_var);
        return net_infer_batch(step_->theta, frozen, points, true);
    }
    if (step_ != nullptr) return net_infer_batch(step_->theta, step_->bn, points, true);
    InferWithGrad out;
    out.values.resize(points.cols());
    out.input_grads.resize(points.rows(), points.cols());
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        const Vector x = points.col(j);
        out.values(j) = problem_->initial(x);
        out.input_grads.col(j) = problem_->initial_gradient(x);
    }
    return out;
}

double milstein_target(const SpdeProblem& problem, const Vector& x, double u, const Vector& w,
                       const Vector& z, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("milstein_target: dt must be > 0");
    return problem.milstein(x, u, w, z, dt);
}

Vector batch_targets(const SpdeProblem& problem, const AuxiliaryBatch& batch,
                     const PreviousStep& prev) {
    const InferWithGrad previous = prev.evaluate(batch.inputs_prev);
    Vector targets(batch.inputs_prev.cols());
    for (Eigen::Index j = 0; j < targets.size(); ++j) {
        targets(j) = problem.milstein(batch.inputs_prev.col(j), previous.values(j),
                                      previous.input_grads.col(j), batch.noise_increments.col(j),
                                      batch.dt);
    }
    return targets;
}

LossGrad step_loss_and_grad(const SpdeProblem& problem, const ParamVector& theta,
                            const AuxiliaryBatch& batch, const PreviousStep& prev,
                            double bn_epsilon) {
    const Vector targets = batch_targets(problem, batch, prev);
    TrainForward forward = net_forward_train(theta, batch.inputs_now, bn_epsilon);
    const Vector residual = forward.outputs - targets;
    const double count = static_cast<double>(residual.size());

    LossGrad out;
    out.loss = residual.squaredNorm() / count;
    if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");
    out.grad = net_param_grad(theta, forward.cache, (2.0 / count) * residual);
    out.batch_means = std::move(forward.cache.batch_mean);
    out.batch_vars = std::move(forward.cache.batch_var);
    return out;
}

TrainedStep train_step_network(const SpdeProblem& problem, const TimeGrid& grid,
                               const NoiseRealization& z, int n, const PreviousStep& prev,
                               const TrainConfig& config, const RunStreams& streams,
                               const ParamVector* start) {
    if (config.shape.input_dim != problem.dim()) {
        throw ShapeError("network input dimension does not match the problem dimension");
    }
    TrainedStep result;
    result.n = n;
    if (start != nullptr) {
        result.theta = *start;
    } else {
        RngStream init_stream = streams.init(n);
        result.theta = init_params(init_stream, config.shape, config.init);
    }
    result.bn = BatchNormState::initial(config.shape, config.bn_momentum, config.bn_epsilon);
    AdamState adam = AdamState::zeros(result.theta.values.size());
    if (config.record_losses) result.losses.reserve(config.iterations);

    auto fail = [n](long m, const std::string& why) {
        return TrainingError(n, m,
                             "training diverged at step " + std::to_string(n) + ", iteration " +
                                 std::to_string(m) + ": " + why);
    };

    if (config.iterations <= 0) {
        const AuxiliaryBatch batch =
            build_batch(problem, grid, z, n, config.xi, config.batch_size, streams.batch(n, 0));
        result.final_loss =
            step_loss_and_grad(problem, result.theta, batch, prev, config.bn_epsilon).loss;
        return result;
    }

    for (long m = 0; m < config.iterations; ++m) {
        const AuxiliaryBatch batch =
            build_batch(problem, grid, z, n, config.xi, config.batch_size, streams.batch(n, m));
        LossGrad lg;
        try {
            lg = step_loss_and_grad(problem, result.theta, batch, prev, config.bn_epsilon);
        } catch (const NumericError& e) {
            throw fail(m, e.what());
        }
        if (!(lg.loss <= config.divergence_limit)) throw fail(m, "loss " + std::to_string(lg.loss));

        if (config.shape.batch_norm) result.bn = batchnorm_update_state(result.bn, lg.batch_means, lg.batch_vars);
        const double lr = config.schedule.at(m);
        if (config.optimizer == OptimizerKind::Adam) {
            adam_update(adam, result.theta.values, lg.grad, lr, config.adam);
        } else {
            result.theta.values -= lr * lg.grad;
        }
        result.final_loss = lg.loss;
        if (config.record_losses) result.losses.push_back(lg.loss);
        if (config.on_iteration) config.on_iteration(n, m, lg.loss, lr);
        if (config.progress_every > 0 && (m + 1) % config.progress_every == 0) {
            std::fprintf(stderr, "step %d | iter %ld | %.6e | %g\n", n, m + 1, lg.loss, lr);
        }
    }
    if (!result.theta.values.allFinite()) throw fail(config.iterations, "non-finite parameters");
    return result;
}

double TrainedSolver::evaluate(int n, const Vector& x) const {
    if (n < 0 || n > static_cast<int>(steps_.size())) {
        throw std::out_of_range("evaluate: step index " + std::to_string(n) + " out of range");
    }
    if (x.size() != problem_->dim()) throw ShapeError("evaluation point has the wrong dimension");
    if (n == 0) return problem_->initial(x);
    const TrainedStep& step = steps_[n - 1];
    return net_forward_infer(step.theta, step.bn, x);
}

TrainedSolver solve(std::shared_ptr<const SpdeProblem> problem, const TimeGrid& grid,
                    const NoiseRealization& z, const TrainConfig& config,
                    const RunStreams& streams) {
    TrainedSolver solver(problem, grid, z);
    for (int n = 1; n <= grid.N; ++n) {
        const auto& done = solver.steps();
        const PreviousStep prev = done.empty() ? PreviousStep::initial(*problem)
                                               : PreviousStep::trained(*problem, done.back(),
                                                                       config.prev_batch_stats);
        const ParamVector* start =
            config.warm_start && !done.empty() ? &done.back().theta : nullptr;
        TrainedStep step = train_step_network(*problem, grid, z, n, prev, config, streams, start);
        solver.push_step(std::move(step));
    }
    return solver;
}

}  // namespace deepsplit
