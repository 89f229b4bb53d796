// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "neoxsim/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace neoxsim {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                              const std::vector<bool>& passive) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
  }
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
  const Eigen::VectorXd s_sub = sub.colPivHouseholderQr().solve(b);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(a.cols());
  for (std::size_t k = 0; k < cols.size(); ++k) s[cols[k]] = s_sub[static_cast<Eigen::Index>(k)];
  return s;
}

}  // namespace

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter) {
  if (a.rows() != b.size()) throw std::invalid_argument("nnls: dimension mismatch");
  const Eigen::Index n = a.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 10);
  const double tol = 10 * std::numeric_limits<double>::epsilon() * a.norm() *
                     static_cast<double>(std::max(a.rows(), n));

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Eigen::VectorXd w = a.transpose() * (b - a * z);

  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best) {
        best = w[j];
        t = j;
      }
    }
    if (t < 0) break;
    passive[static_cast<std::size_t>(t)] = true;

    Eigen::VectorXd s = solve_passive(a, b, passive);
    for (int inner = 0; inner < max_iter; ++inner) {
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0) {
          alpha = std::min(alpha, z[j] / (z[j] - s[j]));
        }
      }
      if (!std::isfinite(alpha)) break;
      z += alpha * (s - z);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          z[j] = 0;
        }
      }
      s = solve_passive(a, b, passive);
    }
    z = s;
    w = a.transpose() * (b - a * z);
  }
  return z;
}

}  // namespace neoxsim
