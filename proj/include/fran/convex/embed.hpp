#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace fran::convex {

using Index = Eigen::Index;

// A complex vector v maps to x = [Re v; Im v]. A stack of matrices maps column
// by column, matrix by matrix.

template <typename Derived>
Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, 1> embed_vector(
    const Eigen::MatrixBase<Derived>& v) {
  const Index n = v.size();
  Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, 1> x(2 * n);
  x.head(n) = v.real();
  x.tail(n) = v.imag();
  return x;
}

template <typename Derived>
Eigen::Matrix<std::complex<typename Derived::Scalar>, Eigen::Dynamic, 1> unembed_vector(
    const Eigen::MatrixBase<Derived>& x) {
  const Index n = x.size() / 2;
  using C = std::complex<typename Derived::Scalar>;
  Eigen::Matrix<C, Eigen::Dynamic, 1> v(n);
  for (Index r = 0; r < n; ++r) v(r) = C(x(r), x(n + r));
  return v;
}

/// Q with ½ xᵀQx = vᴴBv for Hermitian B.
template <typename Derived>
Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, Eigen::Dynamic> embed_hermitian(
    const Eigen::MatrixBase<Derived>& b) {
  const Index n = b.rows();
  Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, Eigen::Dynamic> q(2 * n, 2 * n);
  q.topLeftCorner(n, n) = b.real();
  q.bottomRightCorner(n, n) = b.real();
  q.topRightCorner(n, n) = -b.imag();
  q.bottomLeftCorner(n, n) = b.imag();
  return 2 * q;
}

/// c with cᵀx = Re(gᴴv).
template <typename Derived>
Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, 1> embed_linear(
    const Eigen::MatrixBase<Derived>& g) {
  return embed_vector(g);
}

template <typename Scalar>
using ComplexStack = std::vector<Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>>;

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> real_embed(const ComplexStack<Scalar>& stack) {
  Index total = 0;
  for (const auto& m : stack) total += 2 * m.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x(total);
  Index at = 0;
  for (const auto& m : stack)
    for (Index c = 0; c < m.cols(); ++c) {
      x.segment(at, 2 * m.rows()) = embed_vector(m.col(c));
      at += 2 * m.rows();
    }
  return x;
}

/// Inverse of real_embed; `shape` supplies the matrix dimensions.
template <typename Scalar>
ComplexStack<Scalar> real_unembed(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                                  const ComplexStack<Scalar>& shape) {
  ComplexStack<Scalar> out = shape;
  Index at = 0;
  for (auto& m : out)
    for (Index c = 0; c < m.cols(); ++c) {
      m.col(c) = unembed_vector(x.segment(at, 2 * m.rows()));
      at += 2 * m.rows();
    }
  return out;
}

}  // namespace fran::convex
