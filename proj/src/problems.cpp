#include "deepsplit/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace deepsplit {

ProblemId parse_problem_id(std::string_view text) {
    if (text == "heat-add") return ProblemId::HeatAdditive;
    if (text == "heat-mul") return ProblemId::HeatMultiplicative;
    if (text == "black-scholes") return ProblemId::BlackScholes;
    if (text == "zakai") return ProblemId::Zakai;
    throw std::invalid_argument("unknown problem '" + std::string(text) +
                                "' (expected heat-add, heat-mul, black-scholes or zakai)");
}

std::string problem_name(ProblemId id) {
    switch (id) {
        case ProblemId::HeatAdditive: return "heat-add";
        case ProblemId::HeatMultiplicative: return "heat-mul";
        case ProblemId::BlackScholes: return "black-scholes";
        case ProblemId::Zakai: return "zakai";
    }
    return "unknown";
}

PresetDefaults preset_defaults(ProblemId id) {
    switch (id) {
        case ProblemId::HeatAdditive:
            return {1.0, 5, 8000, LrSchedule::parse("2000:1e-1,4000:1e-2,6000:1e-3,8000:1e-4"), 0.0};
        case ProblemId::HeatMultiplicative:
            return {0.5, 25, 12000,
                    LrSchedule::parse("5000:1e-1,7000:1e-2,10000:1e-3,12000:1e-4"), 0.0};
        case ProblemId::BlackScholes:
            return {0.5, 20, 10000,
                    LrSchedule::parse("4000:1e-1,6000:1e-2,8000:1e-3,10000:1e-4"), 100.0};
        case ProblemId::Zakai:
            return {0.5, 25, 12000, LrSchedule::parse("5000:1e-2,10000:1e-3,12000:1e-4"), 0.0};
    }
    throw std::invalid_argument("unknown problem id");
}

BsCoefficients BsCoefficients::make(int d, double rate) {
    BsCoefficients c;
    c.mu.resize(d);
    c.sigma.resize(d);
    for (int i = 1; i <= d; ++i) {
        c.mu(i - 1) = (std::sin(static_cast<double>(i) * d) + 1.0) / d;
        c.sigma(i - 1) = static_cast<double>(i) / (4.0 * d);
    }
    c.rate = rate;
    return c;
}

Vector ZakaiCoefficients::mu(const Vector& x) const {
    return gamma * x / (1.0 + x.squaredNorm());
}

double ZakaiCoefficients::div_mu(const Vector& x) const {
    const double r2 = x.squaredNorm();
    const double q = 1.0 + r2;
    return gamma * (static_cast<double>(x.size()) / q - 2.0 * r2 / (q * q));
}

double ZakaiCoefficients::density(const Vector& x) const {
    const double d = static_cast<double>(x.size());
    return std::pow(alpha / (2.0 * std::numbers::pi), d / 2.0) *
           std::exp(-0.5 * alpha * x.squaredNorm());
}

double div_mu_zakai(const Vector& x, double gamma) {
    ZakaiCoefficients c;
    c.gamma = gamma;
    return c.div_mu(x);
}

double bs_payoff(const Vector& x, double rate, double horizon) {
    return std::exp(-rate * horizon) * std::max(x.maxCoeff() - 100.0, 0.0);
}

void SpdeProblem::transition_batch(double t, double s, Eigen::MatrixXd& states,
                                   const Eigen::MatrixXd& increments) const {
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
        states.col(j) = transition(t, s, states.col(j), increments.col(j));
    }
}

namespace {

// Shared by both heat problems: phi = |x|^2, H = x + sqrt(2) w.
class HeatBase : public SpdeProblem {
public:
    explicit HeatBase(int dim) : SpdeProblem(dim) {}

    int noise_dim() const override { return 1; }
    double initial(const Vector& x) const override { return x.squaredNorm(); }
    Vector initial_gradient(const Vector& x) const override { return 2.0 * x; }
    Vector transition(double, double, const Vector& x, const Vector& w) const override {
        return x + std::numbers::sqrt2 * w;
    }
    void transition_batch(double, double, Eigen::MatrixXd& states,
                          const Eigen::MatrixXd& increments) const override {
        states += std::numbers::sqrt2 * increments;
    }
};

class HeatAdditive final : public HeatBase {
public:
    using HeatBase::HeatBase;

    ProblemId id() const override { return ProblemId::HeatAdditive; }
    double milstein(const Vector&, double u, const Vector&, const Vector& z,
                    double) const override {
        return u + z(0);
    }
    double drift_f(const Vector&, double, const Vector&) const override { return 0.0; }
    Vector noise_b(const Vector&, double, const Vector&) const override {
        return Vector::Ones(1);
    }
};

// u (1 + z + z^2/2 - dt/2), shared with Black-Scholes.
double geometric_milstein(double u, double z, double dt) {
    return u * (1.0 + z + 0.5 * z * z - 0.5 * dt);
}

class HeatMultiplicative final : public HeatBase {
public:
    using HeatBase::HeatBase;

    ProblemId id() const override { return ProblemId::HeatMultiplicative; }
    double milstein(const Vector&, double u, const Vector&, const Vector& z,
                    double dt) const override {
        return geometric_milstein(u, z(0), dt);
    }
    double drift_f(const Vector&, double, const Vector&) const override { return 0.0; }
    Vector noise_b(const Vector&, double u, const Vector&) const override {
        return Vector::Constant(1, u);
    }
};

class BlackScholes final : public SpdeProblem {
public:
    BlackScholes(int dim, const ProblemParams& params)
        : SpdeProblem(dim), coeffs_(BsCoefficients::make(dim, params.rate_r)),
          horizon_(params.horizon > 0.0 ? params.horizon : preset_defaults(ProblemId::BlackScholes).T) {}

    ProblemId id() const override { return ProblemId::BlackScholes; }
    int noise_dim() const override { return 1; }

    double initial(const Vector& x) const override { return bs_payoff(x, coeffs_.rate, horizon_); }
    Vector initial_gradient(const Vector& x) const override {
        Vector g = Vector::Zero(x.size());
        Eigen::Index arg = 0;
        if (x.maxCoeff(&arg) > 100.0) g(arg) = std::exp(-coeffs_.rate * horizon_);
        return g;
    }

    Vector transition(double t, double s, const Vector& x, const Vector& w) const override {
        const double dt = t - s;
        const Vector log_growth =
            (coeffs_.mu.array() - 0.5 * coeffs_.sigma.array().square()) * dt +
            coeffs_.sigma.array() * w.array();
        return (x.array() * log_growth.array().exp()).matrix();
    }
    void transition_batch(double t, double s, Eigen::MatrixXd& states,
                          const Eigen::MatrixXd& increments) const override {
        const Vector drift =
            (coeffs_.mu.array() - 0.5 * coeffs_.sigma.array().square()) * (t - s);
        states.array() *=
            ((increments.array().colwise() * coeffs_.sigma.array()).colwise() + drift.array())
                .exp();
    }

    double milstein(const Vector&, double u, const Vector&, const Vector& z,
                    double dt) const override {
        return geometric_milstein(u, z(0), dt);
    }
    double drift_f(const Vector&, double, const Vector&) const override { return 0.0; }
    Vector noise_b(const Vector&, double u, const Vector&) const override {
        return Vector::Constant(1, u);
    }

    const BsCoefficients& coefficients() const { return coeffs_; }

private:
    BsCoefficients coeffs_;
    double horizon_;
};

class Zakai final : public SpdeProblem {
public:
    Zakai(int dim, const ProblemParams& params) : SpdeProblem(dim) {
        coeffs_.alpha = params.alpha;
        coeffs_.beta = params.beta;
        coeffs_.gamma = params.gamma_drift;
    }

    ProblemId id() const override { return ProblemId::Zakai; }
    int noise_dim() const override { return dim(); }

    double initial(const Vector& x) const override { return coeffs_.density(x); }
    Vector initial_gradient(const Vector& x) const override {
        return -coeffs_.alpha * coeffs_.density(x) * x;
    }

    // Euler step of the diffusion whose generator is 1/2 sum_ij d_ij - <mu, grad>,
    // i.e. drift -mu and diffusion d^{-1/2} (sum_i w_i) (1, ..., 1).
    Vector transition(double t, double s, const Vector& x, const Vector& w) const override {
        const double spread = w.sum() / std::sqrt(static_cast<double>(dim()));
        return x - coeffs_.mu(x) * (t - s) + Vector::Constant(dim(), spread);
    }
    void transition_batch(double t, double s, Eigen::MatrixXd& states,
                          const Eigen::MatrixXd& increments) const override {
        const Eigen::RowVectorXd damping =
            (coeffs_.gamma * (t - s)) / (1.0 + states.colwise().squaredNorm().array());
        const Eigen::RowVectorXd spread =
            increments.colwise().sum() / std::sqrt(static_cast<double>(dim()));
        states -= (states.array().rowwise() * damping.array()).matrix();
        states.rowwise() += spread;
    }

    double milstein(const Vector& x, double u, const Vector&, const Vector& z,
                    double dt) const override {
        const Vector hx = coeffs_.h(x);
        const double hz = hx.dot(z);
        return u - u * coeffs_.div_mu(x) * dt + u * hz + 0.5 * u * hz * hz -
               0.5 * u * dt * hx.squaredNorm();
    }
    double drift_f(const Vector& x, double u, const Vector&) const override {
        return -u * coeffs_.div_mu(x);
    }
    Vector noise_b(const Vector& x, double u, const Vector&) const override {
        return u * coeffs_.h(x);
    }

    const ZakaiCoefficients& coefficients() const { return coeffs_; }

private:
    ZakaiCoefficients coeffs_;
};

}  // namespace

std::unique_ptr<SpdeProblem> make_problem(ProblemId id, int dim, const ProblemParams& params) {
    if (dim < 1) throw std::invalid_argument("problem dimension must be >= 1");
    switch (id) {
        case ProblemId::HeatAdditive: return std::make_unique<HeatAdditive>(dim);
        case ProblemId::HeatMultiplicative: return std::make_unique<HeatMultiplicative>(dim);
        case ProblemId::BlackScholes: return std::make_unique<BlackScholes>(dim, params);
        case ProblemId::Zakai: return std::make_unique<Zakai>(dim, params);
    }
    throw std::invalid_argument("unknown problem id");
}

const ZakaiCoefficients* zakai_coefficients(const SpdeProblem& problem) {
    const auto* zakai = dynamic_cast<const Zakai*>(&problem);
    return zakai ? &zakai->coefficients() : nullptr;
}

const BsCoefficients* bs_coefficients(const SpdeProblem& problem) {
    const auto* bs = dynamic_cast<const BlackScholes*>(&problem);
    return bs ? &bs->coefficients() : nullptr;
}

}  // namespace deepsplit
