#pragma once

#include <algorithm>
#include <cmath>

#include "deepsplit/nn.hpp"
#include "deepsplit/rng.hpp"

namespace testutil {

using deepsplit::Matrix;
using deepsplit::RngStream;
using deepsplit::Vector;

inline Matrix random_matrix(RngStream& s, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * s.next_normal();
    return m;
}

inline Vector random_vector(RngStream& s, Eigen::Index n, double scale = 1.0) {
    return random_matrix(s, n, 1, scale);
}

// Coordinate-wise relative error; coordinates far below the gradient's own
// scale are compared against 1e-3 of its largest entry instead of themselves.
inline double grad_rel_error(double analytic, double numeric, double grad_scale) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3 * grad_scale, 1e-300});
    return std::abs(analytic - numeric) / denom;
}

// Central difference of f at theta along coordinate k.
template <class F>
double central_difference(F&& f, Vector x, Eigen::Index k, double h) {
    const double x0 = x(k);
    x(k) = x0 + h;
    const double up = f(x);
    x(k) = x0 - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

}  // namespace testutil
