#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "deepsplit/optim.hpp"

namespace deepsplit {

using Vector = Eigen::VectorXd;

enum class ProblemId { HeatAdditive, HeatMultiplicative, BlackScholes, Zakai };

/// Preset ids: heat-add, heat-mul, black-scholes, zakai.
ProblemId parse_problem_id(std::string_view text);
std::string problem_name(ProblemId id);

/// Overridable coefficient constants shared by the presets.
struct ProblemParams {
    double alpha = 2.0 * 3.14159265358979323846;
    double beta = 0.25;
    double gamma_drift = 0.1;
    double rate_r = 1.0 / 50.0;
    double horizon = 0.0;  // T in the Black-Scholes payoff discount; 0 means "use preset T"
};

/// Experiment defaults attached to a preset.
struct PresetDefaults {
    double T;
    int N;
    long M;
    LrSchedule schedule;
    double x_eval;  // broadcast to every coordinate
};

PresetDefaults preset_defaults(ProblemId id);

struct BsCoefficients {
    Vector mu;     // mu_i = (sin(i d) + 1) / d
    Vector sigma;  // sigma_i = i / (4 d)
    double rate;

    static BsCoefficients make(int d, double rate = 1.0 / 50.0);
};

struct ZakaiCoefficients {
    double alpha = 2.0 * 3.14159265358979323846;
    double beta = 0.25;
    double gamma = 0.1;

    Vector h(const Vector& x) const { return beta * x; }
    /// Signal drift gamma x / (1 + |x|^2).
    Vector mu(const Vector& x) const;
    /// Divergence of mu: gamma [d / (1 + |x|^2) - 2 |x|^2 / (1 + |x|^2)^2].
    double div_mu(const Vector& x) const;
    /// Gaussian density (alpha / 2 pi)^{d/2} exp(-alpha |x|^2 / 2).
    double density(const Vector& x) const;
};

double div_mu_zakai(const Vector& x, double gamma = 0.1);

/// One benchmark SPDE
///   dX = [f(x, X, grad X) + 1/2 Tr(sigma sigma^T Hess X) + <mu_aux, grad X>] dt
///        + <b(x, X, grad X), dZ>,   X_0 = phi,
/// with the auxiliary-diffusion transition H and the per-step Milstein map.
class SpdeProblem {
public:
    virtual ~SpdeProblem() = default;

    virtual ProblemId id() const = 0;
    int dim() const { return dim_; }
    virtual int noise_dim() const = 0;

    /// phi and its gradient (a subgradient where phi has a kink).
    virtual double initial(const Vector& x) const = 0;
    virtual Vector initial_gradient(const Vector& x) const = 0;

    /// H(t, s, x, w): one step of the auxiliary diffusion from time s to t
    /// with Brownian increment w ~ N(0, (t - s) I_d).
    virtual Vector transition(double t, double s, const Vector& x, const Vector& w) const = 0;

    /// Column-wise H applied in place to `states` (d x batch); `increments`
    /// has the same shape. Equivalent to calling transition per column.
    virtual void transition_batch(double t, double s, Eigen::MatrixXd& states,
                                  const Eigen::MatrixXd& increments) const;

    /// Milstein target: label for the regression given the previous value
    /// u, its spatial gradient w and the noise increment z over a step dt.
    virtual double milstein(const Vector& x, double u, const Vector& w, const Vector& z,
                            double dt) const = 0;

    /// Drift and noise coefficients of the SPDE, for consistency checks.
    virtual double drift_f(const Vector& x, double u, const Vector& w) const = 0;
    virtual Vector noise_b(const Vector& x, double u, const Vector& w) const = 0;

protected:
    explicit SpdeProblem(int dim) : dim_(dim) {}

private:
    int dim_;
};

std::unique_ptr<SpdeProblem> make_problem(ProblemId id, int dim, const ProblemParams& params = {});

/// Convenience accessors used by the Zakai sampler and oracle.
const ZakaiCoefficients* zakai_coefficients(const SpdeProblem& problem);
const BsCoefficients* bs_coefficients(const SpdeProblem& problem);

/// Black-Scholes payoff exp(-r T) max(max_i x_i - 100, 0).
double bs_payoff(const Vector& x, double rate, double horizon);

}  // namespace deepsplit
