#pragma once

#include "rscope/linalg.hpp"
#include "rscope/snapshots.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>

namespace rscope {

/// Truncation rule for the snapshot SVD. Independent of the rule, the
/// rank never exceeds min(n, s-1) and never includes singular values
/// with sigma_i / sigma_1 below sigma_rel_floor.
struct RankPolicy {
  enum class Kind { Fixed, Energy };

  Kind kind = Kind::Fixed;
  int fixed_rank = 1;
  double energy_threshold = 0.99;
  double sigma_rel_floor = 1e-12;

  static RankPolicy fixed(int r, double floor = 1e-12) {
    if (r < 1) throw ArgumentError("fixed rank must be >= 1");
    if (floor < 0.0) throw ArgumentError("sigma floor must be >= 0");
    RankPolicy p;
    p.kind = Kind::Fixed;
    p.fixed_rank = r;
    p.sigma_rel_floor = floor;
    return p;
  }

  static RankPolicy energy(double tau, double floor = 1e-12) {
    if (!(tau > 0.0) || tau > 1.0)
      throw ArgumentError("energy threshold must lie in (0, 1]");
    if (floor < 0.0) throw ArgumentError("sigma floor must be >= 0");
    RankPolicy p;
    p.kind = Kind::Energy;
    p.energy_threshold = tau;
    p.sigma_rel_floor = floor;
    return p;
  }

  /// Parses "fixed:R" or "energy:T" (the CLI flag syntax).
  static RankPolicy parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
      throw ArgumentError("rank policy must be fixed:R or energy:T");
    const std::string head = text.substr(0, colon);
    const std::string tail = text.substr(colon + 1);
    try {
      if (head == "fixed") return fixed(std::stoi(tail));
      if (head == "energy") return energy(std::stod(tail));
    } catch (const std::exception&) {
      throw ArgumentError("bad rank policy value: " + text);
    }
    throw ArgumentError("unknown rank policy kind: " + head);
  }

  /// Effective rank for a descending singular value list.
  Index effective_rank(const Vec& sigma) const {
    if (sigma.size() == 0 || !(sigma(0) > 0.0))
      throw NumericalError("zero snapshot matrix has no usable subspace");
    Index valid = 0;
    while (valid < sigma.size() &&
           sigma(valid) / sigma(0) >= sigma_rel_floor)
      ++valid;
    if (kind == Kind::Fixed)
      return std::min<Index>(fixed_rank, valid);
    const double total = sigma.squaredNorm();
    double cum = 0.0;
    for (Index r = 1; r <= valid; ++r) {
      cum += sigma(r - 1) * sigma(r - 1);
      if (cum / total >= energy_threshold) return r;
    }
    return valid;
  }
};

/// Exact dynamic mode decomposition of one snapshot ensemble.
struct DmdModel {
  CMat modes;            // n x r, unit 2-norm columns
  CVec eigenvalues;      // descending |lambda|, ties: Re desc then Im asc
  Vec singular_values;   // full thin-SVD spectrum of X0
  Index rank = 0;
  double dt = 1.0;
  double energy_captured = 0.0;  // sum of kept sigma^2 over total
  double eigvec_condition = 1.0; // condition number of the eigenvector matrix
  bool ill_conditioned = false;  // eigvec_condition > 1e12 (near defective)
};

/// Shifted pair: X0 = columns 0..s-2, X1 = columns 1..s-1.
inline std::pair<Mat, Mat> split_pair(const SnapshotMatrix& snap) {
  const Index s = snap.s();
  return {snap.data.leftCols(s - 1), snap.data.rightCols(s - 1)};
}

struct TruncatedSvd {
  Mat W;      // n x r left singular vectors
  Vec sigma;  // r kept singular values
  Mat V;      // (s-1) x r right singular vectors
  Vec full_sigma;
};

inline TruncatedSvd truncated_svd(const Mat& X0, const RankPolicy& policy) {
  if (X0.rows() < 1 || X0.cols() < 1)
    throw DimensionError("truncated_svd: empty matrix");
  Eigen::BDCSVD<Mat> svd(X0, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec sigma = svd.singularValues();
  const Index r = policy.effective_rank(sigma);
  return {svd.matrixU().leftCols(r), sigma.head(r), svd.matrixV().leftCols(r),
          sigma};
}

/// Galerkin-reduced propagator A_r = W^T X1 V Sigma^-1.
inline Mat reduced_operator(const Mat& W, const Vec& sigma, const Mat& V,
                            const Mat& X1) {
  const Index r = W.cols();
  if (sigma.size() != r || V.cols() != r)
    throw DimensionError("reduced_operator: inconsistent truncation rank");
  if (X1.rows() != W.rows() || X1.cols() != V.rows())
    throw DimensionError("reduced_operator: shifted matrix shape mismatch");
  for (Index i = 0; i < r; ++i)
    if (!(sigma(i) > 0.0) ||
        sigma(i) < sigma(0) * std::numeric_limits<double>::epsilon())
      throw NumericalError("reduced_operator: singular Sigma_r; filter the "
                           "rank upstream");
  return W.transpose() * X1 * V * sigma.cwiseInverse().asDiagonal();
}

namespace detail {

// Deterministic spectral order: |lambda| descending, ties by descending
// real part, then ascending imaginary part.
inline std::vector<Index> spectral_order(const CVec& lambda) {
  std::vector<Index> idx(static_cast<std::size_t>(lambda.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    const double ma = std::abs(lambda(a)), mb = std::abs(lambda(b));
    if (ma != mb) return ma > mb;
    if (lambda(a).real() != lambda(b).real())
      return lambda(a).real() > lambda(b).real();
    return lambda(a).imag() < lambda(b).imag();
  });
  return idx;
}

}  // namespace detail

/// Full decomposition: truncated SVD of X0, reduced operator, its
/// eigenpairs, and projected-up modes Phi = W_r Y with unit columns.
inline DmdModel dmd_decompose(const SnapshotMatrix& snap,
                              const RankPolicy& policy) {
  const auto [X0, X1] = split_pair(snap);
  const TruncatedSvd svd = truncated_svd(X0, policy);
  const Mat A = reduced_operator(svd.W, svd.sigma, svd.V, X1);
  Eigen::EigenSolver<Mat> es(A);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of the reduced operator failed");
  const CVec lambda_raw = es.eigenvalues();
  const CMat Y = es.eigenvectors();

  Eigen::JacobiSVD<CMat> ysvd(Y);
  const Vec ysig = ysvd.singularValues();
  const double cond =
      ysig(ysig.size() - 1) > 0.0
          ? ysig(0) / ysig(ysig.size() - 1)
          : std::numeric_limits<double>::infinity();

  const auto order = detail::spectral_order(lambda_raw);
  const Index r = lambda_raw.size();
  DmdModel model;
  model.eigenvalues.resize(r);
  model.modes.resize(snap.n(), r);
  for (Index k = 0; k < r; ++k) {
    model.eigenvalues(k) = lambda_raw(order[static_cast<std::size_t>(k)]);
    CVec phi = apply_real(svd.W, Y.col(order[static_cast<std::size_t>(k)]));
    const double norm = phi.norm();
    if (norm > 0.0) phi /= norm;
    model.modes.col(k) = phi;
  }
  model.singular_values = svd.full_sigma;
  model.rank = r;
  model.dt = snap.dt;
  model.energy_captured =
      svd.sigma.squaredNorm() / svd.full_sigma.squaredNorm();
  model.eigvec_condition = cond;
  model.ill_conditioned = !(cond <= 1e12);
  return model;
}

}  // namespace rscope
