#include "deepsplit/selftest.hpp"

#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <sstream>

#include "deepsplit/experiment.hpp"
#include "deepsplit/nn.hpp"
#include "deepsplit/optim.hpp"
#include "deepsplit/oracles.hpp"
#include "deepsplit/paths.hpp"
#include "deepsplit/problems.hpp"
#include "deepsplit/rng.hpp"

namespace deepsplit {

namespace {

std::string fmt(double v) { return format_number(v); }

SelftestResult check(const std::string& name, const std::function<std::string(bool&)>& body) {
    SelftestResult r{name, false, {}};
    try {
        bool ok = false;
        r.detail = body(ok);
        r.passed = ok;
    } catch (const std::exception& e) {
        r.detail = std::string("exception: ") + e.what();
    }
    return r;
}

double rel_diff(const Vector& a, const Vector& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

}  // namespace

std::vector<SelftestResult> run_selftest() {
    std::vector<SelftestResult> out;

    out.push_back(check("rng normal moments (1e6 draws)", [](bool& ok) {
        RngStream s = make_stream(42, 0);
        const auto x = sample_std_normal(s, 1000000);
        double m1 = 0, m2 = 0, m3 = 0;
        for (double v : x) m1 += v;
        m1 /= x.size();
        for (double v : x) {
            m2 += (v - m1) * (v - m1);
            m3 += (v - m1) * (v - m1) * (v - m1);
        }
        m2 /= x.size();
        m3 = m3 / x.size() / std::pow(m2, 1.5);
        ok = std::abs(m1) <= 0.005 && std::abs(m2 - 1.0) <= 0.01 && std::abs(m3) <= 0.02;
        return "mean " + fmt(m1) + ", var " + fmt(m2) + ", skew " + fmt(m3);
    }));

    out.push_back(check("parameter gradient vs central differences", [](bool& ok) {
        RngStream s = make_stream(7, 1);
        const NetworkShape shape = NetworkShape::standard(3);
        ParamVector theta = init_params(s, shape, InitScheme::Normal);
        Matrix batch(3, 8);
        for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = s.next_normal();
        Vector w(8);
        for (Eigen::Index i = 0; i < 8; ++i) w(i) = s.next_normal();
        const TrainForward f = net_forward_train(theta, batch, 1e-3);
        const Vector g = net_param_grad(theta, f.cache, w);
        Vector fd(g.size());
        const double h = 1e-6;
        for (Eigen::Index k = 0; k < g.size(); ++k) {
            ParamVector p = theta, q = theta;
            p.values(k) += h;
            q.values(k) -= h;
            fd(k) = (net_forward_train(p, batch, 1e-3).outputs.dot(w) -
                     net_forward_train(q, batch, 1e-3).outputs.dot(w)) / (2 * h);
        }
        const double err = rel_diff(g, fd);
        ok = err <= 1e-5;
        return "relative error " + fmt(err);
    }));

    out.push_back(check("input gradient vs central differences", [](bool& ok) {
        RngStream s = make_stream(7, 2);
        const NetworkShape shape = NetworkShape::standard(5);
        const ParamVector theta = init_params(s, shape, InitScheme::Normal);
        BatchNormState bn = BatchNormState::initial(shape);
        for (auto& v : bn.running_var) v.setConstant(0.7);
        Vector x(5);
        for (Eigen::Index i = 0; i < 5; ++i) x(i) = s.next_normal();
        const Vector g = net_input_grad(theta, bn, x);
        Vector fd(5);
        for (Eigen::Index i = 0; i < 5; ++i) {
            Vector a = x, b = x;
            a(i) += 1e-6;
            b(i) -= 1e-6;
            fd(i) = (net_forward_infer(theta, bn, a) - net_forward_infer(theta, bn, b)) / 2e-6;
        }
        const double err = rel_diff(g, fd);
        ok = err <= 1e-5;
        return "relative error " + fmt(err);
    }));

    out.push_back(check("Adam against scalar recursion (100 steps)", [](bool& ok) {
        AdamState state = AdamState::zeros(1);
        Vector theta = Vector::Constant(1, 1.0);
        double th = 1.0, m = 0.0, v = 0.0, worst = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double g = 2.0 * th - std::sin(k);
            adam_update(state, theta, Vector::Constant(1, 2.0 * theta(0) - std::sin(k)), 1e-2);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            th -= 1e-2 * (m / (1 - std::pow(0.9, k))) / (std::sqrt(v / (1 - std::pow(0.999, k))) + 1e-8);
            worst = std::max(worst, std::abs(th - theta(0)));
        }
        ok = worst <= 1e-12;
        return "max deviation " + fmt(worst);
    }));

    out.push_back(check("Milstein identities", [](bool& ok) {
        auto mul = make_problem(ProblemId::HeatMultiplicative, 1);
        const Vector x = Vector::Zero(1), w = Vector::Zero(1);
        const double u = 1.7, z = 0.31, dt = 0.02;
        const double residual = mul->milstein(x, u, w, Vector::Constant(1, z), dt) - (u + u * z);
        const double e1 = std::abs(residual - u * (z * z / 2 - dt / 2));
        auto zk = make_problem(ProblemId::Zakai, 10);
        const double e2 = std::abs(zk->milstein(Vector::Zero(10), 1.0, Vector::Zero(10),
                                                Vector::Constant(10, 0.3), 0.02) - 0.98);
        ok = e1 <= 1e-14 && e2 <= 1e-14;
        return "heat-mul " + fmt(e1) + ", zakai " + fmt(e2);
    }));

    out.push_back(check("closed-form references", [](bool& ok) {
        const double a = reference_heat_additive(1.0, Vector::Zero(1), 0.035);
        const double b = reference_heat_mult(0.5, Vector::Zero(1), 1.2781);
        ok = std::abs(a - 2.035) <= 1e-12 && std::abs(b - 2.7957) <= 1e-4;
        return "heat-add " + fmt(a) + ", heat-mul " + fmt(b);
    }));

    out.push_back(check("error aggregation", [](bool& ok) {
        const double e[] = {0.0084, 0.0064, 0.0063, 0.0006, 0.0053};
        const double l2 = rel_l2(e);
        ok = std::abs(l2 - 0.0060) <= 1e-4;
        return "rel_l2 " + fmt(l2);
    }));

    out.push_back(check("Zakai oracle on the pure heat kernel", [](bool& ok) {
        ZakaiCoefficients c;
        c.beta = 0.0;
        c.gamma = 0.0;
        NoiseRealization z;
        z.grid = make_grid(0.5, 25);
        z.noise_dim = 1;
        z.path = Matrix::Zero(26, 1);
        const double got = reference_zakai_1d(c, z, 0.0);
        const double want = 1.0 / std::sqrt(2.0 * std::numbers::pi * (1.0 / c.alpha + 0.5));
        const double err = std::abs(got - want) / want;
        ok = err <= 1e-3;
        return "value " + fmt(got) + ", exact " + fmt(want);
    }));

    return out;
}

}  // namespace deepsplit
