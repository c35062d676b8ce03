#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "deepsplit/rng.hpp"

namespace deepsplit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feedforward architecture
///   input -> BN -> affine -> (BN -> tanh -> affine) x hidden_layers
/// with a scalar output. Without batch normalization the BN boxes are
/// simply dropped.
struct NetworkShape {
    int input_dim = 1;
    int hidden_dim = 51;
    int hidden_layers = 2;
    bool batch_norm = true;

    /// d -> d+50 -> d+50 -> 1 with batch normalization.
    static NetworkShape standard(int d);

    /// Widths of all layers, input first, output (1) last.
    std::vector<int> layer_dims() const;

    std::size_t affine_param_count() const;
    std::size_t param_count() const;

    /// Normalization sites: the input plus one before every tanh.
    int bn_site_count() const;
    int bn_site_dim(int site) const;

    bool operator==(const NetworkShape&) const = default;
};

/// Offsets into the flat parameter vector. Affine layer k (0-based) stores
/// its l x k weight matrix row-major followed by its l biases; after all
/// affine layers come, per BN site, the scale vector then the shift vector.
class ParamLayout {
public:
    explicit ParamLayout(const NetworkShape& shape);

    std::size_t weight_offset(int layer) const { return weight_offsets_.at(layer); }
    std::size_t bias_offset(int layer) const { return bias_offsets_.at(layer); }
    std::size_t scale_offset(int site) const { return scale_offsets_.at(site); }
    std::size_t shift_offset(int site) const { return shift_offsets_.at(site); }
    std::size_t size() const { return size_; }

private:
    std::vector<std::size_t> weight_offsets_, bias_offsets_, scale_offsets_, shift_offsets_;
    std::size_t size_ = 0;
};

struct ParamVector {
    NetworkShape shape;
    Vector values;

    static ParamVector zeros(const NetworkShape& shape);
};

struct BatchNormState {
    std::vector<Vector> running_mean;
    std::vector<Vector> running_var;
    double momentum = 0.99;
    double epsilon = 1e-3;
    long update_count = 0;

    /// Running mean 0, running variance 1 at every site.
    static BatchNormState initial(const NetworkShape& shape, double momentum = 0.99,
                                  double epsilon = 1e-3);
};

struct BatchNormOutput {
    Matrix normalized;  // features x batch
    Vector mean;
    Vector var;  // biased
};

/// Standardizes each row of `batch` (features x batch) with the batch's own
/// statistics, then applies scale and shift.
BatchNormOutput batchnorm_train(const Matrix& batch, const Vector& scale, const Vector& shift,
                                double epsilon);

/// running <- momentum * running + (1 - momentum) * batch statistic, per site.
BatchNormState batchnorm_update_state(const BatchNormState& state,
                                      const std::vector<Vector>& batch_means,
                                      const std::vector<Vector>& batch_vars);

/// W x + b for a slice holding l*k row-major weights followed by l biases.
Vector affine_apply(std::span<const double> slice, const Vector& x, int out_dim);

Vector tanh_apply(const Vector& x);

/// Everything the backward pass needs from a training-mode forward pass.
struct ForwardCache {
    std::vector<Matrix> normalized;   // per BN site, (x - mean) / std before scale/shift
    std::vector<Vector> inv_std;      // per BN site
    std::vector<Vector> batch_mean;   // per BN site
    std::vector<Vector> batch_var;    // per BN site
    std::vector<Matrix> layer_inputs; // input of every affine layer
    std::vector<Matrix> activations;  // tanh outputs, per hidden layer
};

struct TrainForward {
    Vector outputs;  // one per batch column
    ForwardCache cache;
};

/// Training-mode pass: every BN site normalizes with the batch statistics.
/// `batch` is input_dim x batch_size. Throws NumericError naming the layer
/// if a non-finite value appears.
TrainForward net_forward_train(const ParamVector& theta, const Matrix& batch, double bn_epsilon);

/// Gradient of sum_j output_weights[j] * output_j with respect to theta,
/// differentiating through the batch statistics. For the mean-squared loss
/// pass output_weights = 2 (output - target) / batch_size.
Vector net_param_grad(const ParamVector& theta, const ForwardCache& cache,
                      const Vector& output_weights);

/// Inference-mode value at one point (running statistics, read-only state).
double net_forward_infer(const ParamVector& theta, const BatchNormState& state, const Vector& x);

/// Gradient of the inference-mode output with respect to the input point.
Vector net_input_grad(const ParamVector& theta, const BatchNormState& state, const Vector& x);

struct InferWithGrad {
    Vector values;       // batch_size
    Matrix input_grads;  // input_dim x batch_size
};

/// Batched inference; input gradients are only computed when requested.
InferWithGrad net_infer_batch(const ParamVector& theta, const BatchNormState& state,
                              const Matrix& batch, bool with_input_grad);

enum class InitScheme { Uniform, Normal, GlorotUniform };

/// Affine weights with variance 1/fan_in (uniform or normal) or
/// 2/(fan_in + fan_out) (GlorotUniform), zero biases, BN scale 1 and shift 0.
ParamVector init_params(RngStream& stream, const NetworkShape& shape, InitScheme scheme);

}  // namespace deepsplit
