// Copyright 2026 The neoxsim Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef NEOXSIM_TENSOR_HPP
#define NEOXSIM_TENSOR_HPP

#include <Eigen/Core>

namespace neoxsim {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Row-major so that data() matches the on-disk weight layout.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using MatrixCRef = Eigen::Ref<const Matrix<Scalar>>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

}  // namespace neoxsim

#endif  // NEOXSIM_TENSOR_HPP
