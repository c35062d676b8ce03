#include "deepsplit/nn.hpp"

#include <cmath>
#include <string>

#include "deepsplit/errors.hpp"

namespace deepsplit {

namespace {

using ConstWeights = Eigen::Map<const RowMajorMatrix>;
using ConstSegment = Eigen::Map<const Vector>;

ConstWeights weights(const ParamVector& theta, const ParamLayout& layout, int layer, int rows,
                     int cols) {
    return ConstWeights(theta.values.data() + layout.weight_offset(layer), rows, cols);
}

ConstSegment segment(const ParamVector& theta, std::size_t offset, int length) {
    return ConstSegment(theta.values.data() + offset, length);
}

// tanh(x) = 1 - 2 / (exp(2x) + 1)
template <typename Derived>
Matrix fast_tanh(const Eigen::MatrixBase<Derived>& x) {
    return (1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0)).matrix();
}

void check_finite(const Matrix& m, int layer) {
    if (!m.allFinite()) {
        throw NumericError("non-finite activation in layer " + std::to_string(layer));
    }
}

void check_input(const ParamVector& theta, Eigen::Index rows) {
    if (rows != theta.shape.input_dim) {
        throw ShapeError("input has " + std::to_string(rows) + " features, network expects " +
                         std::to_string(theta.shape.input_dim));
    }
    if (static_cast<std::size_t>(theta.values.size()) != theta.shape.param_count()) {
        throw ShapeError("parameter vector length does not match network shape");
    }
}

}  // namespace

NetworkShape NetworkShape::standard(int d) {
    return NetworkShape{d, d + 50, 2, true};
}

std::vector<int> NetworkShape::layer_dims() const {
    std::vector<int> dims;
    dims.reserve(hidden_layers + 2);
    dims.push_back(input_dim);
    for (int i = 0; i < hidden_layers; ++i) dims.push_back(hidden_dim);
    dims.push_back(1);
    return dims;
}

std::size_t NetworkShape::affine_param_count() const {
    const auto dims = layer_dims();
    std::size_t count = 0;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        count += static_cast<std::size_t>(dims[k + 1]) * (dims[k] + 1);
    }
    return count;
}

std::size_t NetworkShape::param_count() const {
    std::size_t count = affine_param_count();
    for (int s = 0; s < bn_site_count(); ++s) count += 2 * static_cast<std::size_t>(bn_site_dim(s));
    return count;
}

int NetworkShape::bn_site_count() const {
    return batch_norm ? hidden_layers + 1 : 0;
}

int NetworkShape::bn_site_dim(int site) const {
    return site == 0 ? input_dim : hidden_dim;
}

ParamLayout::ParamLayout(const NetworkShape& shape) {
    const auto dims = shape.layer_dims();
    std::size_t offset = 0;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        weight_offsets_.push_back(offset);
        offset += static_cast<std::size_t>(dims[k + 1]) * dims[k];
        bias_offsets_.push_back(offset);
        offset += dims[k + 1];
    }
    for (int s = 0; s < shape.bn_site_count(); ++s) {
        scale_offsets_.push_back(offset);
        offset += shape.bn_site_dim(s);
        shift_offsets_.push_back(offset);
        offset += shape.bn_site_dim(s);
    }
    size_ = offset;
}

ParamVector ParamVector::zeros(const NetworkShape& shape) {
    return ParamVector{shape, Vector::Zero(static_cast<Eigen::Index>(shape.param_count()))};
}

BatchNormState BatchNormState::initial(const NetworkShape& shape, double momentum,
                                       double epsilon) {
    BatchNormState state;
    state.momentum = momentum;
    state.epsilon = epsilon;
    for (int s = 0; s < shape.bn_site_count(); ++s) {
        state.running_mean.push_back(Vector::Zero(shape.bn_site_dim(s)));
        state.running_var.push_back(Vector::Ones(shape.bn_site_dim(s)));
    }
    return state;
}

BatchNormOutput batchnorm_train(const Matrix& batch, const Vector& scale, const Vector& shift,
                                double epsilon) {
    if (batch.cols() < 1) throw ShapeError("batch normalization needs at least one sample");
    if (scale.size() != batch.rows() || shift.size() != batch.rows()) {
        throw ShapeError("scale/shift length does not match feature count");
    }
    BatchNormOutput out;
    out.mean = batch.rowwise().mean();
    const Matrix centered = batch.colwise() - out.mean;
    out.var = centered.array().square().rowwise().mean();
    const Vector inv_std = (out.var.array() + epsilon).rsqrt();
    out.normalized = ((centered.array().colwise() * (inv_std.array() * scale.array())).colwise() +
                      shift.array())
                         .matrix();
    return out;
}

BatchNormState batchnorm_update_state(const BatchNormState& state,
                                      const std::vector<Vector>& batch_means,
                                      const std::vector<Vector>& batch_vars) {
    if (batch_means.size() != state.running_mean.size() ||
        batch_vars.size() != state.running_var.size()) {
        throw ShapeError("batch statistics do not match the number of normalization sites");
    }
    BatchNormState next = state;
    const double keep = state.momentum;
    for (std::size_t s = 0; s < state.running_mean.size(); ++s) {
        if (batch_means[s].size() != state.running_mean[s].size() ||
            batch_vars[s].size() != state.running_var[s].size()) {
            throw ShapeError("batch statistic length mismatch at site " + std::to_string(s));
        }
        next.running_mean[s] = keep * state.running_mean[s] + (1.0 - keep) * batch_means[s];
        next.running_var[s] = keep * state.running_var[s] + (1.0 - keep) * batch_vars[s];
    }
    ++next.update_count;
    return next;
}

Vector affine_apply(std::span<const double> slice, const Vector& x, int out_dim) {
    const auto in_dim = x.size();
    if (out_dim < 0 || slice.size() != static_cast<std::size_t>(out_dim) * (in_dim + 1)) {
        throw ShapeError("affine slice has length " + std::to_string(slice.size()) +
                         ", expected " + std::to_string(out_dim * (in_dim + 1)));
    }
    ConstWeights w(slice.data(), out_dim, in_dim);
    ConstSegment b(slice.data() + out_dim * in_dim, out_dim);
    return w * x + b;
}

Vector tanh_apply(const Vector& x) {
    return fast_tanh(x);
}

TrainForward net_forward_train(const ParamVector& theta, const Matrix& batch, double bn_epsilon) {
    check_input(theta, batch.rows());
    const NetworkShape& shape = theta.shape;
    const ParamLayout layout(shape);
    const auto dims = shape.layer_dims();
    const int affine_layers = shape.hidden_layers + 1;

    TrainForward result;
    ForwardCache& cache = result.cache;

    auto normalize = [&](const Matrix& x, int site) {
        const Vector mean = x.rowwise().mean();
        Matrix centered = x.colwise() - mean;
        const Vector var = centered.array().square().rowwise().mean();
        const Vector inv_std = (var.array() + bn_epsilon).rsqrt();
        centered.array().colwise() *= inv_std.array();
        const int dim = shape.bn_site_dim(site);
        const auto scale = segment(theta, layout.scale_offset(site), dim);
        const auto shift = segment(theta, layout.shift_offset(site), dim);
        Matrix y = ((centered.array().colwise() * scale.array()).colwise() + shift.array()).matrix();
        cache.normalized.push_back(std::move(centered));
        cache.inv_std.push_back(inv_std);
        cache.batch_mean.push_back(mean);
        cache.batch_var.push_back(var);
        return y;
    };

    Matrix x = shape.batch_norm ? normalize(batch, 0) : batch;
    for (int k = 0; k < affine_layers; ++k) {
        Matrix a = weights(theta, layout, k, dims[k + 1], dims[k]) * x;
        a.colwise() += segment(theta, layout.bias_offset(k), dims[k + 1]);
        check_finite(a, k);
        cache.layer_inputs.push_back(std::move(x));
        if (k + 1 == affine_layers) {
            result.outputs = a.row(0).transpose();
            break;
        }
        Matrix y = shape.batch_norm ? normalize(a, k + 1) : std::move(a);
        x = fast_tanh(y);
        cache.activations.push_back(x);
    }
    return result;
}

Vector net_param_grad(const ParamVector& theta, const ForwardCache& cache,
                      const Vector& output_weights) {
    const NetworkShape& shape = theta.shape;
    const ParamLayout layout(shape);
    const auto dims = shape.layer_dims();
    const int affine_layers = shape.hidden_layers + 1;
    if (cache.layer_inputs.size() != static_cast<std::size_t>(affine_layers) ||
        output_weights.size() != cache.layer_inputs.front().cols()) {
        throw ShapeError("forward cache does not match parameter vector or weights");
    }

    Vector grad = Vector::Zero(theta.values.size());
    Matrix delta = output_weights.transpose();  // 1 x batch

    auto bn_backward = [&](const Matrix& d_out, int site) -> Matrix {
        const Matrix& xhat = cache.normalized[site];
        const int dim = shape.bn_site_dim(site);
        grad.segment(layout.scale_offset(site), dim) =
            (d_out.array() * xhat.array()).rowwise().sum().matrix();
        grad.segment(layout.shift_offset(site), dim) = d_out.rowwise().sum();
        const auto scale = segment(theta, layout.scale_offset(site), dim);
        const Matrix d_xhat = (d_out.array().colwise() * scale.array()).matrix();
        const Vector mean_d = d_xhat.rowwise().mean();
        const Vector mean_dx = (d_xhat.array() * xhat.array()).rowwise().mean();
        Matrix d_in = (d_xhat.colwise() - mean_d) -
                      (xhat.array().colwise() * mean_dx.array()).matrix();
        d_in.array().colwise() *= cache.inv_std[site].array();
        return d_in;
    };

    for (int k = affine_layers - 1; k >= 0; --k) {
        const Matrix& input = cache.layer_inputs[k];
        Eigen::Map<RowMajorMatrix>(grad.data() + layout.weight_offset(k), dims[k + 1], dims[k]) =
            delta * input.transpose();
        grad.segment(layout.bias_offset(k), dims[k + 1]) = delta.rowwise().sum();
        const Matrix d_input = weights(theta, layout, k, dims[k + 1], dims[k]).transpose() * delta;
        if (k == 0) {
            if (shape.batch_norm) bn_backward(d_input, 0);
            break;
        }
        const Matrix& act = cache.activations[k - 1];
        Matrix d_pre = (d_input.array() * (1.0 - act.array().square())).matrix();
        delta = shape.batch_norm ? bn_backward(d_pre, k) : std::move(d_pre);
    }
    return grad;
}

InferWithGrad net_infer_batch(const ParamVector& theta, const BatchNormState& state,
                              const Matrix& batch, bool with_input_grad) {
    check_input(theta, batch.rows());
    const NetworkShape& shape = theta.shape;
    const ParamLayout layout(shape);
    const auto dims = shape.layer_dims();
    const int affine_layers = shape.hidden_layers + 1;
    if (state.running_mean.size() != static_cast<std::size_t>(shape.bn_site_count())) {
        throw ShapeError("batch-norm state does not match network shape");
    }

    // Inference BN is the affine map y = gain * x + offset per feature.
    std::vector<Vector> gains;
    auto normalize = [&](Matrix& x, int site) {
        const int dim = shape.bn_site_dim(site);
        const Vector gain = segment(theta, layout.scale_offset(site), dim).array() *
                            (state.running_var[site].array() + state.epsilon).rsqrt();
        const Vector offset = segment(theta, layout.shift_offset(site), dim).array() -
                              gain.array() * state.running_mean[site].array();
        x.array().colwise() *= gain.array();
        x.colwise() += offset;
        gains.push_back(gain);
    };

    std::vector<Matrix> activations;
    Matrix x = batch;
    if (shape.batch_norm) normalize(x, 0);
    InferWithGrad out;
    for (int k = 0; k < affine_layers; ++k) {
        Matrix a = weights(theta, layout, k, dims[k + 1], dims[k]) * x;
        a.colwise() += segment(theta, layout.bias_offset(k), dims[k + 1]);
        check_finite(a, k);
        if (k + 1 == affine_layers) {
            out.values = a.row(0).transpose();
            break;
        }
        if (shape.batch_norm) normalize(a, k + 1);
        x = fast_tanh(a);
        if (with_input_grad) activations.push_back(x);
    }
    if (!with_input_grad) return out;

    const int last = affine_layers - 1;
    Matrix delta = weights(theta, layout, last, 1, dims[last]).transpose() *
                   Matrix::Ones(1, batch.cols());
    for (int k = last; k >= 1; --k) {
        delta.array() *= 1.0 - activations[k - 1].array().square();
        if (shape.batch_norm) delta.array().colwise() *= gains[k].array();
        delta = weights(theta, layout, k - 1, dims[k], dims[k - 1]).transpose() * delta;
    }
    if (shape.batch_norm) delta.array().colwise() *= gains[0].array();
    out.input_grads = std::move(delta);
    return out;
}

double net_forward_infer(const ParamVector& theta, const BatchNormState& state, const Vector& x) {
    return net_infer_batch(theta, state, x, false).values(0);
}

Vector net_input_grad(const ParamVector& theta, const BatchNormState& state, const Vector& x) {
    return net_infer_batch(theta, state, x, true).input_grads.col(0);
}

ParamVector init_params(RngStream& stream, const NetworkShape& shape, InitScheme scheme) {
    ParamVector theta = ParamVector::zeros(shape);
    const ParamLayout layout(shape);
    const auto dims = shape.layer_dims();
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const double fan_in = dims[k];
        const double fan_out = dims[k + 1];
        const std::size_t count = static_cast<std::size_t>(dims[k + 1]) * dims[k];
        double* w = theta.values.data() + layout.weight_offset(static_cast<int>(k));
        if (scheme != InitScheme::Normal) {
            const double limit = scheme == InitScheme::Uniform ? std::sqrt(3.0 / fan_in)
                                                               : std::sqrt(6.0 / (fan_in + fan_out));
            for (std::size_t i = 0; i < count; ++i) w[i] = limit * (2.0 * stream.next_uniform() - 1.0);
        } else {
            const double sd = std::sqrt(1.0 / fan_in);
            for (std::size_t i = 0; i < count; ++i) w[i] = sd * stream.next_normal();
        }
    }
    for (int s = 0; s < shape.bn_site_count(); ++s) {
        theta.values.segment(layout.scale_offset(s), shape.bn_site_dim(s)).setOnes();
    }
    return theta;
}

}  // namespace deepsplit
