#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace deepsplit {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates plus the number of completed updates.
struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;

    static AdamState zeros(Eigen::Index size);
};

/// One Adam update. The step counter is advanced first, so the k-th call
/// bias-corrects with beta^k, k >= 1. The denominator is
/// sqrt(|v| / (1 - beta2^k)) + epsilon.
void adam_update(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                 double lr, const AdamConfig& config = {});

/// Value-returning form of adam_update.
std::pair<AdamState, Eigen::VectorXd> adam_step(AdamState state, Eigen::VectorXd theta,
                                                const Eigen::VectorXd& grad, double lr,
                                                const AdamConfig& config = {});

Eigen::VectorXd sgd_step(const Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);

/// Piecewise-constant learning rate: rate_i applies on (bound_{i-1}, bound_i],
/// the first piece including m = 0.
class LrSchedule {
public:
    struct Piece {
        long bound;
        double rate;
    };

    LrSchedule() = default;
    explicit LrSchedule(std::vector<Piece> pieces);

    /// Parses "b1:r1,b2:r2,...".
    static LrSchedule parse(std::string_view text);
    static LrSchedule constant(double rate, long bound);

    double at(long m) const;

    /// Bounds multiplied by `factor` and rounded; rates unchanged.
    LrSchedule scaled(double factor) const;

    const std::vector<Piece>& pieces() const { return pieces_; }
    std::string to_string() const;
    bool empty() const { return pieces_.empty(); }

private:
    std::vector<Piece> pieces_;
};

double lr_at(const LrSchedule& schedule, long m);

}  // namespace deepsplit
