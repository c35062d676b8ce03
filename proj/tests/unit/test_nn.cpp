#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "deepsplit/errors.hpp"
#include "deepsplit/nn.hpp"
#include "deepsplit/optim.hpp"
#include "helpers.hpp"

using namespace deepsplit;
using namespace testutil;

namespace {

// Straight-line evaluator written from the layout description alone:
// affine blocks (row-major weights, then biases) followed by BN scale/shift
// pairs; BN with batch statistics; tanh after every hidden normalization.
std::vector<double> reference_forward(const NetworkShape& shape, const std::vector<double>& p,
                                      const std::vector<std::vector<double>>& batch, double eps) {
    const int J = static_cast<int>(batch.size());
    std::vector<int> dims{shape.input_dim};
    for (int i = 0; i < shape.hidden_layers; ++i) dims.push_back(shape.hidden_dim);
    dims.push_back(1);

    std::size_t bn_base = 0;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) bn_base += dims[k + 1] * (dims[k] + 1);

    auto normalize = [&](std::vector<std::vector<double>>& a, int site, int width) {
        std::size_t off = bn_base;
        for (int s = 0; s < site; ++s) off += 2 * (s == 0 ? shape.input_dim : shape.hidden_dim);
        for (int f = 0; f < width; ++f) {
            double mean = 0.0;
            for (int j = 0; j < J; ++j) mean += a[j][f];
            mean /= J;
            double var = 0.0;
            for (int j = 0; j < J; ++j) var += (a[j][f] - mean) * (a[j][f] - mean);
            var /= J;
            for (int j = 0; j < J; ++j) {
                a[j][f] = p[off + f] * (a[j][f] - mean) / std::sqrt(var + eps) + p[off + width + f];
            }
        }
    };

    std::vector<std::vector<double>> a = batch;
    if (shape.batch_norm) normalize(a, 0, dims[0]);
    std::size_t off = 0;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const int in = dims[k], out = dims[k + 1];
        std::vector<std::vector<double>> next(J, std::vector<double>(out));
        for (int j = 0; j < J; ++j) {
            for (int r = 0; r < out; ++r) {
                double acc = p[off + out * in + r];
                for (int c = 0; c < in; ++c) acc += p[off + r * in + c] * a[j][c];
                next[j][r] = acc;
            }
        }
        off += out * (in + 1);
        a = std::move(next);
        if (k + 2 < dims.size()) {
            if (shape.batch_norm) normalize(a, static_cast<int>(k) + 1, out);
            for (auto& row : a)
                for (double& v : row) v = std::tanh(v);
        }
    }
    std::vector<double> y;
    for (const auto& row : a) y.push_back(row[0]);
    return y;
}

ParamVector random_params(RngStream& s, const NetworkShape& shape) {
    ParamVector theta = init_params(s, shape, InitScheme::Normal);
    // Perturb BN scale/shift away from 1/0 so they are exercised.
    const ParamLayout layout(shape);
    for (int site = 0; site < shape.bn_site_count(); ++site) {
        for (int f = 0; f < shape.bn_site_dim(site); ++f) {
            theta.values(layout.scale_offset(site) + f) = 1.0 + 0.3 * s.next_normal();
            theta.values(layout.shift_offset(site) + f) = 0.3 * s.next_normal();
        }
    }
    return theta;
}

BatchNormState random_state(RngStream& s, const NetworkShape& shape) {
    BatchNormState bn = BatchNormState::initial(shape);
    for (auto& m : bn.running_mean)
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = 0.3 * s.next_normal();
    for (auto& v : bn.running_var)
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 0.5 + s.next_uniform();
    return bn;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("parameter count formula") {
    for (int d : {1, 5, 10, 50}) {
        const NetworkShape shape = NetworkShape::standard(d);
        const std::size_t want = (d + 50) * (d + 1) + (d + 50) * (d + 51) + (d + 51) + 2 * (d + 2 * (d + 50));
        CHECK(shape.param_count() == want);
        CHECK(ParamLayout(shape).size() == want);
    }
}

TEST_CASE("affine_apply examples") {
    const std::vector<double> zero(2 * 3 + 2, 0.0);
    CHECK(affine_apply(zero, Vector::Constant(3, 7.0), 2).isZero(0.0));

    const std::vector<double> identity{1, 0, 0, 1, 0, 0};
    Vector x(2);
    x << 3, -1;
    CHECK(affine_apply(identity, x, 2) == x);

    const std::vector<double> slice{1, 2, 5};
    Vector y(2);
    y << 3, 4;
    const Vector out = affine_apply(slice, y, 1);
    REQUIRE(out.size() == 1);
    CHECK(out(0) == 16.0);

    CHECK_THROWS_AS(affine_apply(slice, Vector::Ones(3), 1), ShapeError);
}

TEST_CASE("tanh_apply examples") {
    CHECK(tanh_apply(Vector::Zero(2)).isZero(0.0));
    CHECK(tanh_apply(Vector::Constant(1, 1.0))(0) == doctest::Approx(0.7615941559557649).epsilon(1e-15));
    RngStream s = make_stream(1, 1);
    const Vector x = random_vector(s, 50, 3.0);
    const Vector a = tanh_apply(x), b = tanh_apply(-x);
    CHECK((a + b).cwiseAbs().maxCoeff() <= 1e-15);
    for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(a(i) == doctest::Approx(std::tanh(x(i))).epsilon(1e-14));
}

TEST_CASE("batchnorm_train examples") {
    Matrix b(1, 2);
    b << -1, 1;
    auto out = batchnorm_train(b, Vector::Ones(1), Vector::Zero(1), 0.0);
    CHECK(out.normalized(0, 0) == doctest::Approx(-1.0));
    CHECK(out.normalized(0, 1) == doctest::Approx(1.0));

    Matrix c = Matrix::Constant(1, 5, 4.2);
    out = batchnorm_train(c, Vector::Constant(1, 3.0), Vector::Constant(1, -0.7), 1e-3);
    for (Eigen::Index j = 0; j < 5; ++j) CHECK(out.normalized(0, j) == doctest::Approx(-0.7));

    b << 1, 3;
    out = batchnorm_train(b, Vector::Constant(1, 2.0), Vector::Constant(1, 1.0), 0.0);
    CHECK(out.mean(0) == 2.0);
    CHECK(out.var(0) == 1.0);
    CHECK(out.normalized(0, 0) == doctest::Approx(-1.0));
    CHECK(out.normalized(0, 1) == doctest::Approx(3.0));
}

TEST_CASE("batchnorm normalized output has zero mean and var/(var+eps) variance") {
    RngStream s = make_stream(2, 2);
    const Matrix x = random_matrix(s, 7, 64, 2.5).array() + 1.3;
    const double eps = 1e-3;
    const auto out = batchnorm_train(x, Vector::Ones(7), Vector::Zero(7), eps);
    for (Eigen::Index f = 0; f < 7; ++f) {
        const double mean = out.normalized.row(f).mean();
        const double var = (out.normalized.row(f).array() - mean).square().mean();
        CHECK(std::abs(mean) <= 1e-10);
        CHECK(std::abs(var - out.var(f) / (out.var(f) + eps)) <= 1e-8);
    }
}

TEST_CASE("batchnorm_update_state examples") {
    const NetworkShape shape{2, 3, 1, true};
    BatchNormState st = BatchNormState::initial(shape, 0.99);
    std::vector<Vector> means{Vector::Ones(2), Vector::Ones(3)};
    std::vector<Vector> vars{Vector::Constant(2, 4.0), Vector::Constant(3, 4.0)};
    const BatchNormState next = batchnorm_update_state(st, means, vars);
    CHECK(next.running_mean[0](0) == doctest::Approx(0.01));
    CHECK(next.running_var[1](2) == doctest::Approx(0.99 + 0.01 * 4.0));
    CHECK(next.update_count == st.update_count + 1);

    st.momentum = 0.0;
    const BatchNormState zero = batchnorm_update_state(st, means, vars);
    CHECK(zero.running_mean[1] == means[1]);
    CHECK(zero.running_var[0] == vars[0]);

    st.momentum = 1.0;
    const BatchNormState one = batchnorm_update_state(st, means, vars);
    CHECK(one.running_mean[0] == st.running_mean[0]);
    CHECK(one.running_var[1] == st.running_var[1]);
}

TEST_CASE("all-zero parameters give zero output and zero input gradient") {
    RngStream s = make_stream(3, 3);
    const NetworkShape shape = NetworkShape::standard(3);
    const ParamVector zero = ParamVector::zeros(shape);
    const Matrix batch = random_matrix(s, 3, 16);
    CHECK(net_forward_train(zero, batch, 1e-3).outputs.isZero(0.0));
    const BatchNormState bn = BatchNormState::initial(shape);
    const Vector x = random_vector(s, 3);
    CHECK(net_forward_infer(zero, bn, x) == 0.0);
    CHECK(net_input_grad(zero, bn, x).isZero(0.0));
}

TEST_CASE("training forward matches the straight-line evaluator") {
    RngStream s = make_stream(4, 4);
    for (const NetworkShape shape : {NetworkShape::standard(1), NetworkShape::standard(5),
                                     NetworkShape{3, 7, 3, true}, NetworkShape{4, 6, 2, false}}) {
        const ParamVector theta = random_params(s, shape);
        const Matrix batch = random_matrix(s, shape.input_dim, 64, 1.5);
        std::vector<std::vector<double>> rows(64);
        for (int j = 0; j < 64; ++j)
            for (int i = 0; i < shape.input_dim; ++i) rows[j].push_back(batch(i, j));
        const std::vector<double> p(theta.values.data(), theta.values.data() + theta.values.size());
        const auto want = reference_forward(shape, p, rows, 1e-3);
        const Vector got = net_forward_train(theta, batch, 1e-3).outputs;
        double worst = 0.0;
        for (int j = 0; j < 64; ++j) worst = std::max(worst, std::abs(got(j) - want[j]));
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("duplicated batch columns give identical outputs") {
    RngStream s = make_stream(5, 5);
    const NetworkShape shape = NetworkShape::standard(2);
    const ParamVector theta = random_params(s, shape);
    Matrix batch = random_matrix(s, 2, 10);
    batch.col(7) = batch.col(2);
    const Vector out = net_forward_train(theta, batch, 1e-3).outputs;
    CHECK(out(7) == out(2));
}

TEST_CASE("forward passes are bitwise deterministic") {
    RngStream s = make_stream(6, 6);
    const NetworkShape shape = NetworkShape::standard(4);
    const ParamVector theta = random_params(s, shape);
    const Matrix batch = random_matrix(s, 4, 32);
    const Vector a = net_forward_train(theta, batch, 1e-3).outputs;
    const Vector b = net_forward_train(theta, batch, 1e-3).outputs;
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("inference agrees with training when running statistics equal batch statistics") {
    RngStream s = make_stream(7, 7);
    const NetworkShape shape = NetworkShape::standard(3);
    const ParamVector theta = random_params(s, shape);
    const Matrix batch = random_matrix(s, 3, 64);
    const TrainForward f = net_forward_train(theta, batch, 1e-3);
    BatchNormState bn = BatchNormState::initial(shape, 0.99, 1e-3);
    bn.running_mean = f.cache.batch_mean;
    bn.running_var = f.cache.batch_var;
    const InferWithGrad batched = net_infer_batch(theta, bn, batch, false);
    for (Eigen::Index j = 0; j < 64; ++j) {
        CHECK(std::abs(net_forward_infer(theta, bn, batch.col(j)) - f.outputs(j)) <= 1e-10);
        CHECK(std::abs(batched.values(j) - f.outputs(j)) <= 1e-10);
    }
}

TEST_CASE("parameter gradient: central differences on 50 coordinates") {
    RngStream s = make_stream(8, 8);
    for (int d : {1, 3, 5}) {
        const NetworkShape shape = NetworkShape::standard(d);
        const ParamVector theta = random_params(s, shape);
        const Matrix batch = random_matrix(s, d, 8);
        const Vector w = random_vector(s, 8);
        const Vector g = net_param_grad(theta, net_forward_train(theta, batch, 1e-3).cache, w);
        const double scale = g.cwiseAbs().maxCoeff();
        auto loss = [&](const Vector& v) {
            return net_forward_train(ParamVector{shape, v}, batch, 1e-3).outputs.dot(w);
        };
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const auto k = static_cast<Eigen::Index>(s.next_u64() % theta.values.size());
            const double fd = central_difference(loss, theta.values, k, 1e-5);
            worst = std::max(worst, grad_rel_error(g(k), fd, scale));
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("parameter gradient: zero residual weights and linearity") {
    RngStream s = make_stream(9, 9);
    const NetworkShape shape = NetworkShape::standard(2);
    const ParamVector theta = random_params(s, shape);
    const Matrix batch = random_matrix(s, 2, 16);
    const TrainForward f = net_forward_train(theta, batch, 1e-3);
    CHECK(net_param_grad(theta, f.cache, Vector::Zero(16)).isZero(0.0));
    const Vector w = random_vector(s, 16);
    const Vector g = net_param_grad(theta, f.cache, w);
    const Vector g3 = net_param_grad(theta, f.cache, 3.0 * w);
    CHECK((g3 - 3.0 * g).cwiseAbs().maxCoeff() <= 1e-12 * g.cwiseAbs().maxCoeff() * 10);
}

TEST_CASE("input gradient: central differences at 20 points") {
    RngStream s = make_stream(10, 10);
    for (int d : {1, 3, 5}) {
        const NetworkShape shape = NetworkShape::standard(d);
        const ParamVector theta = random_params(s, shape);
        const BatchNormState bn = random_state(s, shape);
        double worst = 0.0;
        for (int p = 0; p < 20; ++p) {
            const Vector x = random_vector(s, d);
            const Vector g = net_input_grad(theta, bn, x);
            const InferWithGrad batched = net_infer_batch(theta, bn, x, true);
            CHECK((batched.input_grads.col(0) - g).cwiseAbs().maxCoeff() <= 1e-12);
            const double scale = g.cwiseAbs().maxCoeff();
            auto f = [&](const Vector& v) { return net_forward_infer(theta, bn, v); };
            for (int i = 0; i < d; ++i) {
                worst = std::max(worst, grad_rel_error(g(i), central_difference(f, x, i, 1e-5), scale));
            }
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("additive constants do not move gradients") {
    RngStream s = make_stream(11, 11);
    const NetworkShape shape = NetworkShape::standard(3);
    ParamVector theta = random_params(s, shape);
    const BatchNormState bn = random_state(s, shape);
    const Vector x = random_vector(s, 3);
    const ParamLayout layout(shape);
    const Vector before = net_input_grad(theta, bn, x);
    theta.values(layout.bias_offset(shape.hidden_layers)) += 4.0;
    CHECK((net_input_grad(theta, bn, x) - before).cwiseAbs().maxCoeff() <= 1e-14);

    // In training mode a shift at the input normalization is removed by the
    // next normalization's mean subtraction.
    const Matrix batch = random_matrix(s, 3, 16);
    const Vector y0 = net_forward_train(theta, batch, 1e-3).outputs;
    for (int f = 0; f < 3; ++f) theta.values(layout.shift_offset(0) + f) += 0.5 * (f + 1);
    const Vector y1 = net_forward_train(theta, batch, 1e-3).outputs;
    CHECK((y1 - y0).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("init_params conventions") {
    const NetworkShape shape = NetworkShape::standard(10);
    const ParamLayout layout(shape);
    RngStream a = make_stream(12, 0), b = make_stream(12, 1);
    for (InitScheme scheme : {InitScheme::Uniform, InitScheme::Normal, InitScheme::GlorotUniform}) {
        RngStream s = make_stream(12, 5);
        const ParamVector theta = init_params(s, shape, scheme);
        for (int site = 0; site < shape.bn_site_count(); ++site) {
            const int n = shape.bn_site_dim(site);
            CHECK(theta.values.segment(layout.scale_offset(site), n).isOnes(0.0));
            CHECK(theta.values.segment(layout.shift_offset(site), n).isZero(0.0));
        }
        const auto dims = shape.layer_dims();
        for (int k = 0; k + 1 < static_cast<int>(dims.size()); ++k) {
            CHECK(theta.values.segment(layout.bias_offset(k), dims[k + 1]).isZero(0.0));
            const Eigen::Index count = static_cast<Eigen::Index>(dims[k]) * dims[k + 1];
            if (count < 500) continue;
            const Vector w = theta.values.segment(layout.weight_offset(k), count);
            const double var = w.array().square().mean();
            const double nominal = scheme == InitScheme::GlorotUniform ? 2.0 / (dims[k] + dims[k + 1])
                                                                       : 1.0 / dims[k];
            CHECK(std::abs(var / nominal - 1.0) <= 0.2);
        }
    }
    const ParamVector ta = init_params(a, shape, InitScheme::Uniform);
    const ParamVector tb = init_params(b, shape, InitScheme::Uniform);
    CHECK(ta.values != tb.values);
}

TEST_CASE("regression on a constant target converges to it") {
    RngStream s = make_stream(13, 13);
    const NetworkShape shape = NetworkShape::standard(2);
    ParamVector theta = init_params(s, shape, InitScheme::Uniform);
    BatchNormState bn = BatchNormState::initial(shape);
    AdamState adam = AdamState::zeros(theta.values.size());
    for (int m = 0; m < 1500; ++m) {
        const Matrix batch = random_matrix(s, 2, 64);
        const TrainForward f = net_forward_train(theta, batch, 1e-3);
        const Vector residual = f.outputs.array() - 3.0;
        bn = batchnorm_update_state(bn, f.cache.batch_mean, f.cache.batch_var);
        adam_update(adam, theta.values, net_param_grad(theta, f.cache, residual * (2.0 / 64)), 1e-2);
    }
    for (int p = 0; p < 5; ++p) CHECK(std::abs(net_forward_infer(theta, bn, random_vector(s, 2)) - 3.0) <= 0.05);
}

TEST_CASE("shape and numeric errors") {
    const NetworkShape shape = NetworkShape::standard(2);
    const ParamVector theta = ParamVector::zeros(shape);
    CHECK_THROWS_AS(net_forward_train(theta, Matrix::Zero(3, 4), 1e-3), ShapeError);
    ParamVector bad = theta;
    bad.values(0) = std::nan("");
    Matrix batch(2, 4);
    batch << 1, 2, 3, 4, 5, 6, 7, 9;
    CHECK_THROWS_AS(net_forward_train(bad, batch, 1e-3), NumericError);
}

}
