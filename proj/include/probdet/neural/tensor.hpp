#pragma once

#include <Eigen/Dense>

namespace probdet {

// Row-major 64-bit matrices throughout the neural stack.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

class Rng;

// Glorot/Xavier uniform fill: +/- sqrt(6 / (fan_in + fan_out)).
void glorot_fill(Mat& m, int fan_in, int fan_out, Rng& rng);

}  // namespace probdet
