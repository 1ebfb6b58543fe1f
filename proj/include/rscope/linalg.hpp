#pragma once

#include "rscope/core.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

namespace rscope {

/// A * B for real A and complex B without promoting A.
inline CMat apply_real(const Mat& A, const CMat& B) {
  CMat out(A.rows(), B.cols());
  out.real() = A * B.real();
  out.imag() = A * B.imag();
  return out;
}

/// Q^H * X for complex Q and real X.
inline CMat adjoint_apply_real(const CMat& Q, const Mat& X) {
  CMat out(Q.cols(), X.cols());
  out.real() = Q.real().transpose() * X;
  out.imag() = -(Q.imag().transpose() * X);
  return out;
}

/// Copy with every nonzero column scaled to unit 2-norm.
inline CMat unit_columns(const CMat& A) {
  CMat out = A;
  for (Index c = 0; c < out.cols(); ++c) {
    const double norm = out.col(c).norm();
    if (norm > 0.0) out.col(c) /= norm;
  }
  return out;
}

inline double spectral_norm(const CMat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(A);
  return svd.singularValues()(0);
}

struct OrthoBasis {
  CMat Q;        // orthonormal columns spanning range(A)
  Index rank;    // numerical rank detected by pivoted QR
  bool deficient;
};

/// Rank-revealing orthonormalization via column-pivoted Householder QR.
inline OrthoBasis orthonormal_basis(const CMat& A) {
  if (A.rows() == 0 || A.cols() == 0)
    throw DimensionError("orthonormal_basis: empty matrix");
  Eigen::ColPivHouseholderQR<CMat> qr(A);
  const Index rank = qr.rank();
  if (rank == 0) throw NumericalError("orthonormal_basis: zero matrix");
  CMat Q = qr.householderQ() * CMat::Identity(A.rows(), rank);
  return {std::move(Q), rank, rank < A.cols()};
}

struct Pinv {
  CMat pinv;     // Moore-Penrose pseudoinverse, cols x rows
  Vec sigma;     // singular values of the input
  Index rank;    // count of sigma above the rcond cutoff
};

/// SVD pseudoinverse with rcond cutoff max(m, k) * eps * sigma_max.
inline Pinv pseudo_inverse(const CMat& A) {
  if (A.rows() == 0 || A.cols() == 0)
    throw DimensionError("pseudo_inverse: empty matrix");
  Eigen::JacobiSVD<CMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec sigma = svd.singularValues();
  const double cutoff = static_cast<double>(std::max(A.rows(), A.cols())) *
                        std::numeric_limits<double>::epsilon() * sigma(0);
  Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > cutoff) ++rank;
  CVec inv = CVec::Zero(sigma.size());
  for (Index i = 0; i < rank; ++i) inv(i) = Complex(1.0 / sigma(i), 0.0);
  CMat pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
  return {std::move(pinv), sigma, rank};
}

/// Distinct draw of `count` indices from [0, m), uniform without replacement.
inline std::vector<Index> sample_without_replacement(Index count, Index m,
                                                     Rng& rng) {
  if (count < 0 || count > m)
    throw ArgumentError("sample_without_replacement: count out of range");
  std::vector<Index> idx(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < count; ++i) {
    const Index j =
        i + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(m - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

}  // namespace rscope
