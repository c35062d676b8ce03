#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "deepsplit/errors.hpp"
#include "deepsplit/oracles.hpp"
#include "deepsplit/paths.hpp"
#include "deepsplit/problems.hpp"
#include "helpers.hpp"

using namespace deepsplit;
using namespace testutil;

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// E[max(x S - K, 0)] for S = exp(sigma sqrt(t) Y + (mu - sigma^2/2) t).
double lognormal_call(double x, double K, double mu, double sigma, double t) {
    const double s = sigma * std::sqrt(t);
    const double d1 = (std::log(x / K) + (mu + 0.5 * sigma * sigma) * t) / s;
    return x * std::exp(mu * t) * norm_cdf(d1) - K * norm_cdf(d1 - s);
}

NoiseRealization zakai_noise(std::uint64_t run) {
    auto p = make_problem(ProblemId::Zakai, 1);
    RngStream s = make_stream(77, run);
    return sample_noise(*p, make_grid(0.5, 25), s, 16);
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("problem ids and dimensions") {
    for (const char* name : {"heat-add", "heat-mul", "black-scholes", "zakai"}) {
        CHECK(problem_name(parse_problem_id(name)) == name);
    }
    CHECK_THROWS_AS(parse_problem_id("heat"), std::invalid_argument);
    CHECK(make_problem(ProblemId::HeatAdditive, 4)->noise_dim() == 1);
    CHECK(make_problem(ProblemId::BlackScholes, 4)->noise_dim() == 1);
    CHECK(make_problem(ProblemId::Zakai, 4)->noise_dim() == 4);
    CHECK_THROWS(make_problem(ProblemId::Zakai, 0));
}

TEST_CASE("preset defaults") {
    const PresetDefaults h = preset_defaults(ProblemId::HeatAdditive);
    CHECK(h.T == 1.0);
    CHECK(h.N == 5);
    CHECK(h.M == 8000);
    const PresetDefaults m = preset_defaults(ProblemId::HeatMultiplicative);
    CHECK(m.T == 0.5);
    CHECK(m.N == 25);
    CHECK(m.M == 12000);
    const PresetDefaults b = preset_defaults(ProblemId::BlackScholes);
    CHECK(b.N == 20);
    CHECK(b.M == 10000);
    CHECK(b.x_eval == 100.0);
    const PresetDefaults z = preset_defaults(ProblemId::Zakai);
    CHECK(z.N == 25);
    CHECK(z.schedule.at(6000) == 1e-3);
}

TEST_CASE("Black-Scholes coefficients for d = 5") {
    const BsCoefficients c = BsCoefficients::make(5);
    CHECK(c.sigma(2) == doctest::Approx(3.0 / 20.0).epsilon(1e-15));
    CHECK(c.mu(1) == doctest::Approx((std::sin(10.0) + 1.0) / 5.0).epsilon(1e-15));
    CHECK(c.mu(0) == doctest::Approx((std::sin(5.0) + 1.0) / 5.0).epsilon(1e-15));
    CHECK(c.sigma(4) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK((c.sigma.array() > 0).all());
    CHECK(c.rate == 1.0 / 50.0);
}

TEST_CASE("div_mu_zakai") {
    CHECK(div_mu_zakai(Vector::Zero(7)) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(std::abs(div_mu_zakai(Vector::Constant(1, 100.0))) <= 1e-3);
    ZakaiCoefficients c;
    RngStream s = make_stream(41, 0);
    for (int k = 0; k < 20; ++k) {
        const int d = 1 + k % 4;
        const Vector x = random_vector(s, d, 1.5);
        double fd = 0.0;
        for (int i = 0; i < d; ++i) {
            fd += central_difference([&](const Vector& v) { return c.mu(v)(i); }, x, i, 1e-5);
        }
        CHECK(std::abs(c.div_mu(x) - fd) <= 1e-6);
    }
}

TEST_CASE("initial conditions") {
    auto heat = make_problem(ProblemId::HeatAdditive, 3);
    CHECK(heat->initial(Vector::Ones(3)) == 3.0);
    auto zakai = make_problem(ProblemId::Zakai, 10);
    CHECK(zakai->initial(Vector::Zero(10)) == doctest::Approx(1.0).epsilon(1e-14));

    // Integral of the d = 1 density by the composite Simpson rule.
    auto z1 = make_problem(ProblemId::Zakai, 1);
    const int n = 20000;
    const double a = -10.0, h = 20.0 / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += w * z1->initial(Vector::Constant(1, a + i * h));
    }
    CHECK(std::abs(sum * h / 3.0 - 1.0) <= 1e-6);

    auto bs = make_problem(ProblemId::BlackScholes, 2);
    Vector x(2);
    x << 90, 110;
    CHECK(bs->initial(x) == doctest::Approx(10.0 * std::exp(-0.02 * 0.5)));
    x << 90, 95;
    CHECK(bs->initial(x) == 0.0);
}

TEST_CASE("initial gradients match central differences") {
    RngStream s = make_stream(42, 0);
    for (ProblemId id : {ProblemId::HeatAdditive, ProblemId::Zakai}) {
        auto p = make_problem(id, 3);
        for (int k = 0; k < 5; ++k) {
            const Vector x = random_vector(s, 3, 0.5);
            const Vector g = p->initial_gradient(x);
            for (int i = 0; i < 3; ++i) {
                const double fd = central_difference([&](const Vector& v) { return p->initial(v); }, x, i, 1e-5);
                CHECK(std::abs(g(i) - fd) <= 1e-8);
            }
        }
    }
}

TEST_CASE("transition maps") {
    Vector x(2), w(2);
    x << 0.5, -1.0;
    w << 0.3, 0.1;
    auto heat = make_problem(ProblemId::HeatMultiplicative, 2);
    CHECK((heat->transition(0.4, 0.2, x, w) - (x + std::sqrt(2.0) * w)).cwiseAbs().maxCoeff() <= 1e-15);

    auto zk = make_problem(ProblemId::Zakai, 2);
    const double g = 0.1 * 0.2 / (1.0 + x.squaredNorm());
    const double spread = (0.3 + 0.1) / std::sqrt(2.0);
    Vector want = x - g * x;
    want.array() += spread;
    CHECK((zk->transition(0.4, 0.2, x, w) - want).cwiseAbs().maxCoeff() <= 1e-15);

    auto bs = make_problem(ProblemId::BlackScholes, 2);
    const BsCoefficients c = BsCoefficients::make(2);
    Vector y = Vector::Constant(2, 100.0);
    const Vector got = bs->transition(0.4, 0.2, y, w);
    for (int i = 0; i < 2; ++i) {
        const double expo = (c.mu(i) - 0.5 * c.sigma(i) * c.sigma(i)) * 0.2 + c.sigma(i) * w(i);
        CHECK(got(i) == doctest::Approx(100.0 * std::exp(expo)).epsilon(1e-14));
    }

    RngStream s = make_stream(43, 0);
    for (ProblemId id : {ProblemId::HeatAdditive, ProblemId::BlackScholes, ProblemId::Zakai}) {
        auto p = make_problem(id, 3);
        Matrix states = random_matrix(s, 3, 6).array().abs() + 1.0;
        const Matrix inc = random_matrix(s, 3, 6, 0.2);
        Matrix one = states;
        p->transition_batch(0.3, 0.1, states, inc);
        for (int j = 0; j < 6; ++j) {
            const Vector single = p->transition(0.3, 0.1, one.col(j), inc.col(j));
            CHECK((states.col(j) - single).cwiseAbs().maxCoeff() <= 1e-14 * single.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("Milstein maps: Euler part plus the stated correction") {
    RngStream s = make_stream(44, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 1 + trial % 5;
        const Vector x = random_vector(s, d);
        const Vector w = random_vector(s, d);
        const double u = 2.0 * s.next_normal();
        const double dt = 0.01 + 0.05 * s.next_uniform();
        const double z1 = 0.3 * s.next_normal();

        auto add = make_problem(ProblemId::HeatAdditive, d);
        const Vector z = Vector::Constant(1, z1);
        CHECK(std::abs(add->milstein(x, u, w, z, dt) - (u + add->drift_f(x, u, w) * dt + add->noise_b(x, u, w).dot(z))) <= 1e-14);

        for (ProblemId id : {ProblemId::HeatMultiplicative, ProblemId::BlackScholes}) {
            auto p = make_problem(id, d);
            const double euler = u + p->drift_f(x, u, w) * dt + p->noise_b(x, u, w).dot(z);
            CHECK(std::abs(p->milstein(x, u, w, z, dt) - euler - u * (z1 * z1 / 2 - dt / 2)) <= 1e-14);
        }

        auto zk = make_problem(ProblemId::Zakai, d);
        const Vector zz = random_vector(s, d, 0.2);
        const Vector h = 0.25 * x;
        const double euler = u + zk->drift_f(x, u, w) * dt + zk->noise_b(x, u, w).dot(zz);
        const double correction = 0.5 * u * h.dot(zz) * h.dot(zz) - 0.5 * u * dt * h.squaredNorm();
        CHECK(std::abs(zk->milstein(x, u, w, zz, dt) - euler - correction) <= 1e-14);
        CHECK(std::abs(zk->milstein(Vector::Zero(d), u, w, zz, dt) - u * (1.0 - 0.1 * d * dt)) <= 1e-14);
    }
}

TEST_CASE("closed-form heat references") {
    RngStream s = make_stream(45, 0);
    const Vector x = random_vector(s, 4);
    CHECK(reference_heat_additive(0.0, x, 0.0) == doctest::Approx(x.squaredNorm()).epsilon(1e-15));
    CHECK(reference_heat_additive(1.0, Vector::Zero(1), 0.035) == doctest::Approx(2.035).epsilon(1e-15));
    CHECK(reference_heat_additive(1.0, Vector::Zero(50), -1.238) == doctest::Approx(98.762).epsilon(1e-15));
    CHECK(reference_heat_mult(0.0, x, 0.0) == doctest::Approx(x.squaredNorm()).epsilon(1e-15));
    CHECK(reference_heat_mult(0.6, x, 0.3) == doctest::Approx(2 * 0.6 * 4 + x.squaredNorm()).epsilon(1e-15));
    CHECK(std::abs(reference_heat_mult(0.5, Vector::Zero(1), 1.2781) - 2.7957) <= 1e-4);
}

TEST_CASE("bs_v limits and hooks") {
    auto payoff = [](const Vector& v) { return bs_payoff(v, 0.02, 0.5); };
    RngStream s = make_stream(46, 0);
    // At the kink v(t, x) - phi(x) grows like 100 sigma sqrt(t); in d = 1 that
    // is just under 1e-2 at t = 1e-6.
    const BsCoefficients c1 = BsCoefficients::make(1);
    const Vector x1 = Vector::Constant(1, 100.0);
    const McEstimate small = bs_v(c1, payoff, 1e-6, x1, 20000, s);
    CHECK(std::abs(small.value - payoff(x1)) <= 1e-2 * (1.0 + std::abs(payoff(x1))));
    const double exact = std::exp(-0.01) * lognormal_call(100.0, 100.0, c1.mu(0), c1.sigma(0), 1e-6);
    CHECK(std::abs(small.value - exact) <= 3.0 * small.std_error + 1e-12);
    const BsCoefficients c = BsCoefficients::make(3);
    const Vector x = Vector::Constant(3, 100.0);
    Vector itm = x;
    itm(1) = 130.0;
    const McEstimate deep = bs_v(c, payoff, 1e-6, itm, 20000, s);
    CHECK(std::abs(deep.value - payoff(itm)) <= 1e-2 * (1.0 + payoff(itm)));
    CHECK(bs_v(c, payoff, 0.0, x, 10, s).value == payoff(x));
    const McEstimate constant = bs_v(c, [](const Vector&) { return 2.5; }, 0.5, x, 1000, s);
    CHECK(constant.value == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(constant.std_error <= 1e-12);
}

TEST_CASE("bs_v against a plain Monte Carlo oracle and the log-normal call formula") {
    const BsCoefficients c = BsCoefficients::make(1);
    const Vector x = Vector::Constant(1, 100.0);
    const double disc = std::exp(-0.02 * 0.5);
    auto payoff = [&](const Vector& v) { return disc * std::max(v(0) - 100.0, 0.0); };
    RngStream s = make_stream(47, 0);
    const McEstimate est = bs_v(c, payoff, 0.5, x, 200000, s);

    std::mt19937_64 gen(20240607);
    std::normal_distribution<double> normal;
    const double mu = c.mu(0), sigma = c.sigma(0), t = 0.5;
    double sum = 0.0, sum_sq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double v = disc * std::max(100.0 * std::exp(sigma * std::sqrt(t) * normal(gen) + (mu - 0.5 * sigma * sigma) * t) - 100.0, 0.0);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / (n - 1));
    CHECK(std::abs(est.value - mean) <= 3.0 * std::sqrt(se * se + est.std_error * est.std_error));

    const double exact = disc * lognormal_call(100.0, 100.0, mu, sigma, t);
    CHECK(std::abs(est.value - exact) <= 3.0 * est.std_error);
    CHECK(est.std_error / est.value <= 3e-3);
}

TEST_CASE("reference_bs scales bs_v by exp(W - t/2)") {
    const BsCoefficients c = BsCoefficients::make(2);
    const Vector x = Vector::Constant(2, 100.0);
    auto payoff = [](const Vector& v) { return bs_payoff(v, 0.02, 0.5); };
    RngStream a = make_stream(48, 0), b = make_stream(48, 0), e = make_stream(48, 0);
    const McEstimate v = bs_v(c, payoff, 0.5, x, 5000, a);
    CHECK(reference_bs(c, payoff, 0.5, x, 0.25, 5000, b).value == doctest::Approx(v.value).epsilon(1e-15));
    CHECK(reference_bs(c, payoff, 0.5, x, 0.0, 5000, e).value == doctest::Approx(std::exp(-0.25) * v.value).epsilon(1e-14));
    RngStream f = make_stream(48, 1);
    CHECK(reference_bs(c, payoff, 0.0, x, 0.0, 10, f).value == payoff(x));
}

TEST_CASE("Zakai oracle: pure heat kernel") {
    ZakaiCoefficients c;
    c.beta = 0.0;
    c.gamma = 0.0;
    NoiseRealization z;
    z.grid = make_grid(0.5, 25);
    z.path = Matrix::Zero(26, 1);
    const double want = 1.0 / std::sqrt(2.0 * std::numbers::pi * (1.0 / c.alpha + 0.5));
    CHECK(std::abs(reference_zakai_1d(c, z, 0.0) / want - 1.0) <= 1e-3);
    const double x = 0.7;
    const double var = 1.0 / c.alpha + 0.5;
    const double want_x = std::exp(-x * x / (2 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
    CHECK(std::abs(reference_zakai_1d(c, z, x) / want_x - 1.0) <= 1e-3);
}

TEST_CASE("Zakai oracle: refinement and magnitude on sampled paths") {
    const ZakaiCoefficients c;
    for (std::uint64_t run = 0; run < 3; ++run) {
        const NoiseRealization z = zakai_noise(run);
        const double base = reference_zakai_1d(c, z, 0.0);
        ZakaiOracleOptions fine;
        fine.points = 4096;
        fine.time_substeps = 32;
        const double refined = reference_zakai_1d(c, z, 0.0, fine);
        CHECK(std::abs(refined / base - 1.0) <= 5e-3);
        CHECK(base >= 0.3);
        CHECK(base <= 0.7);
    }
}

TEST_CASE("Zakai oracle rejects a domain that is too small") {
    const NoiseRealization z = zakai_noise(0);
    ZakaiOracleOptions narrow;
    narrow.half_width = 0.8;
    CHECK_THROWS_AS(reference_zakai_1d(ZakaiCoefficients{}, z, 0.0, narrow), OracleError);
}

TEST_CASE("reference_solution dispatch") {
    OracleOptions opts;
    RngStream s = make_stream(49, 0);
    auto heat = make_problem(ProblemId::HeatAdditive, 2);
    const TimeGrid g = make_grid(1.0, 5);
    const NoiseRealization z = sample_noise(*heat, g, s);
    CHECK(reference_solution(*heat, z, Vector::Zero(2), opts, s).value ==
          doctest::Approx(4.0 + z.terminal()(0)).epsilon(1e-15));
    auto zk = make_problem(ProblemId::Zakai, 2);
    CHECK_THROWS_AS(reference_solution(*zk, sample_noise(*zk, g, s, 2), Vector::Zero(2), opts, s), OracleError);
}

}
