// Copyright 2026 The xmt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace xmt {

template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kLayerNormEps = 1e-5;

/// Row-wise softmax in place. Rows may contain -inf entries (masked).
template <class Scalar>
void softmax_rows_inplace(MatX<Scalar>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i).array();
    const Scalar mx = row.maxCoeff();
    row = (row - mx).exp();
    row /= row.sum();
  }
}

/// Row-wise log-softmax of a single row vector.
template <class Scalar>
VecX<Scalar> log_softmax(const VecX<Scalar>& x) {
  const Scalar mx = x.maxCoeff();
  const Scalar lse = mx + std::log((x.array() - mx).exp().sum());
  return x.array() - lse;
}

template <class Scalar>
Scalar gelu_scalar(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
}

template <class Scalar>
Scalar gelu_grad_scalar(Scalar x) {
  const Scalar cdf =
      Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) *
                     Scalar(0.3989422804014327);  // 1/sqrt(2*pi)
  return cdf + x * pdf;
}

template <class Scalar>
MatX<Scalar> gelu(const MatX<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return gelu_scalar(v); });
}

template <class Scalar>
MatX<Scalar> gelu_grad(const MatX<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return gelu_grad_scalar(v); });
}

template <class Scalar>
struct LayerNormCache {
  MatX<Scalar> xhat;
  VecX<Scalar> inv_std;
};

/// Row-wise layer normalization: y = xhat .* gamma' + beta'.
/// gamma/beta are d x 1 columns.
template <class Scalar>
MatX<Scalar> layer_norm_fwd(const MatX<Scalar>& x, const MatX<Scalar>& gamma,
                            const MatX<Scalar>& beta,
                            LayerNormCache<Scalar>* cache) {
  const VecX<Scalar> mu = x.rowwise().mean();
  MatX<Scalar> xc = x.colwise() - mu;
  const VecX<Scalar> var = xc.array().square().rowwise().mean();
  const VecX<Scalar> inv_std =
      (var.array() + Scalar(kLayerNormEps)).sqrt().inverse();
  MatX<Scalar> xhat = xc.array().colwise() * inv_std.array();
  MatX<Scalar> y =
      (xhat.array().rowwise() * gamma.col(0).transpose().array()).rowwise() +
      beta.col(0).transpose().array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
    return y;
  }
  return y;
}

template <class Scalar>
MatX<Scalar> layer_norm_bwd(const MatX<Scalar>& dy,
                            const LayerNormCache<Scalar>& c,
                            const MatX<Scalar>& gamma, MatX<Scalar>& dgamma,
                            MatX<Scalar>& dbeta) {
  dgamma.col(0).array() +=
      (dy.array() * c.xhat.array()).colwise().sum().transpose();
  dbeta.col(0).array() += dy.array().colwise().sum().transpose();

  MatX<Scalar> dxhat =
      dy.array().rowwise() * gamma.col(0).transpose().array();
  const VecX<Scalar> mean_dxhat = dxhat.rowwise().mean();
  const VecX<Scalar> mean_dxhat_xhat =
      (dxhat.array() * c.xhat.array()).rowwise().mean();
  MatX<Scalar> dx =
      ((dxhat.colwise() - mean_dxhat).array() -
       (c.xhat.array().colwise() * mean_dxhat_xhat.array()))
          .colwise() *
      c.inv_std.array();
  return dx;
}

}  // namespace xmt
