#pragma once

#include <random>

#include <Eigen/Core>

#include "wblift/losses.hpp"
#include "wblift/skeleton.hpp"

namespace wblift::testutil {

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng,
                                     double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline PoseBatch random_pose_batch(int batch, int joints, std::mt19937_64& rng,
                                   double scale = 100.0) {
  PoseBatch out(batch);
  for (auto& p : out) p = random_matrix(joints, 3, rng, scale);
  return out;
}

/// Central finite difference of a scalar function w.r.t. one entry.
template <typename F>
double central_diff(F&& f, double& x, double h) {
  const double orig = x;
  x = orig + h;
  const double fp = f();
  x = orig - h;
  const double fm = f();
  x = orig;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

}  // namespace wblift::testutil
