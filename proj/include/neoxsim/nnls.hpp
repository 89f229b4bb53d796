// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_NNLS_HPP
#define NEOXSIM_NNLS_HPP

#include <Eigen/Dense>

namespace neoxsim {

/// Lawson-Hanson active-set solver for min ||A z - b|| subject to z >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter = 0);

}  // namespace neoxsim

#endif  // NEOXSIM_NNLS_HPP
