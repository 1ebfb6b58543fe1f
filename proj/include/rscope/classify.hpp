#pragma once

#include "rscope/library.hpp"

#include <string>
#include <vector>

namespace rscope {

struct LsqFit {
  CVec beta;        // minimum-norm least-squares coefficients
  double residual;  // ||y - Theta * beta||
};

/// Least-squares fit of one observed regime to a measurement, through
/// the cached rank-revealing pseudoinverse.
inline LsqFit lsq_fit(const ObservedRegime& regime, const Vec& y) {
  if (y.size() != regime.theta.rows())
    throw DimensionError("measurement length does not match observed basis");
  CVec beta = regime.pinv * y.cast<Complex>();
  const CVec fitted = regime.theta * beta;
  const double residual = (y.cast<Complex>() - fitted).norm();
  return {std::move(beta), residual};
}

struct ClassificationReport {
  Index winner = -1;
  std::string winner_label;
  std::vector<double> projection_norms;  // ||Theta_k beta_k|| per regime
  std::vector<double> residuals;         // ||y - Theta_k beta_k|| per regime
  CVec coefficients;                     // winner's beta
  std::vector<bool> rank_flags;          // observed rank deficiency per regime
};

/// Picks the regime whose observed span captures the most of y, i.e.
/// the largest projection norm (equivalently the smallest residual).
/// Exact ties resolve to the lowest index.
inline ClassificationReport classify(const ObservedLibrary& obs,
                                     const Measurement& m) {
  if (obs.entries.empty()) throw ArgumentError("empty observed library");
  const Vec& y = m.values;
  ClassificationReport report;
  report.projection_norms.resize(obs.entries.size());
  report.residuals.resize(obs.entries.size());
  report.rank_flags.resize(obs.entries.size());
  CVec winner_beta;
  for (std::size_t k = 0; k < obs.entries.size(); ++k) {
    const ObservedRegime& reg = obs.entries[k];
    if (y.size() != reg.theta.rows())
      throw DimensionError("measurement length does not match observed library");
    CVec beta = reg.pinv * y.cast<Complex>();
    const CVec fitted = reg.theta * beta;
    report.projection_norms[k] = fitted.norm();
    report.residuals[k] = (y.cast<Complex>() - fitted).norm();
    report.rank_flags[k] = reg.rank_deficient;
    if (report.winner < 0 ||
        report.projection_norms[k] >
            report.projection_norms[static_cast<std::size_t>(report.winner)]) {
      report.winner = static_cast<Index>(k);
      winner_beta = std::move(beta);
    }
  }
  report.winner_label =
      obs.entries[static_cast<std::size_t>(report.winner)].label;
  report.coefficients = std::move(winner_beta);
  return report;
}

struct Reconstruction {
  Mat states;           // n x (depth+1), real part of the lifted estimate
  double imag_residual; // ||Im x_hat|| / ||x_hat||, sanity diagnostic
  Index regime = -1;
  bool rank_flag = false;
};

/// Coarse state estimate through regime k: beta from the observed fit,
/// pushed up through the regime's augmented full-state basis.
inline Reconstruction reconstruct(const RegimeLibrary& lib,
                                  const ObservedLibrary& obs, Index k,
                                  const Measurement& m) {
  if (k < 0 || k >= obs.size() || k >= lib.size())
    throw ArgumentError("regime index out of range");
  const RegimeEntry& entry = lib.entries[static_cast<std::size_t>(k)];
  const ObservedRegime& reg = obs.entries[static_cast<std::size_t>(k)];
  if (entry.label != reg.label)
    throw ArgumentError("library and observed library entries disagree");
  if (m.values.size() != reg.theta.rows())
    throw DimensionError("measurement length does not match observed library");
  const CVec beta = reg.pinv * m.values.cast<Complex>();
  const CMat phi_hat =
      augment_modes(entry.model.modes, entry.model.eigenvalues, obs.depth);
  const CVec lifted = phi_hat * beta;
  const Index n = lib.state_dim;
  Reconstruction rec;
  rec.regime = k;
  rec.rank_flag = reg.rank_deficient;
  rec.states.resize(n, obs.depth + 1);
  for (int b = 0; b <= obs.depth; ++b)
    rec.states.col(b) = lifted.segment(static_cast<Index>(b) * n, n).real();
  const double total = lifted.norm();
  rec.imag_residual = total > 0.0 ? lifted.imag().norm() / total : 0.0;
  return rec;
}

}  // namespace rscope
