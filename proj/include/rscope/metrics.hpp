#pragma once

#include "rscope/classify.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace rscope {

enum class MetricKind { Eta, Gamma, Kappa };
enum class BasisSpace { Full, Observed };

inline std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::Eta: return "eta";
    case MetricKind::Gamma: return "gamma";
    case MetricKind::Kappa: return "kappa";
  }
  throw ArgumentError("unknown metric kind");
}

struct MetricMatrix {
  Mat values;
  MetricKind kind = MetricKind::Eta;
  BasisSpace space = BasisSpace::Full;
  std::vector<std::string> labels;      // row labels
  std::vector<std::string> col_labels;  // column labels (= labels for eta/gamma)
};

namespace detail {

inline std::vector<OrthoBasis> orthonormalize_all(
    const std::vector<CMat>& bases) {
  if (bases.empty()) throw ArgumentError("no subspace bases given");
  std::vector<OrthoBasis> out;
  out.reserve(bases.size());
  for (const CMat& b : bases) out.push_back(orthonormal_basis(b));
  return out;
}

inline std::vector<std::string> default_labels(std::size_t d,
                                               std::vector<std::string> given) {
  if (given.size() == d) return given;
  std::vector<std::string> out;
  for (std::size_t k = 0; k < d; ++k) out.push_back("S" + std::to_string(k));
  return out;
}

}  // namespace detail

struct EtaResult {
  MetricMatrix matrix;
  double eta = 0.0;                  // max over off-diagonal pairs
  std::vector<bool> rank_deficient;  // flags pairs touching these bases
};

/// Pairwise subspace alignment eta_jk = ||P_j P_k||_2, evaluated as the
/// largest singular value of Q_j^H Q_k after orthonormalization. 1 means
/// intersecting spans, 0 mutually orthogonal ones.
inline EtaResult eta_alignment(const std::vector<CMat>& bases,
                               BasisSpace space = BasisSpace::Full,
                               std::vector<std::string> labels = {}) {
  const auto ortho = detail::orthonormalize_all(bases);
  const std::size_t d = bases.size();
  EtaResult res;
  res.matrix.kind = MetricKind::Eta;
  res.matrix.space = space;
  res.matrix.labels = detail::default_labels(d, std::move(labels));
  res.matrix.col_labels = res.matrix.labels;
  res.matrix.values = Mat::Identity(static_cast<Index>(d), static_cast<Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    res.rank_deficient.push_back(ortho[i].deficient);
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = spectral_norm(ortho[i].Q.adjoint() * ortho[j].Q);
      res.matrix.values(static_cast<Index>(i), static_cast<Index>(j)) = v;
      res.matrix.values(static_cast<Index>(j), static_cast<Index>(i)) = v;
      res.eta = std::max(res.eta, v);
    }
  }
  return res;
}

struct GammaResult {
  MetricMatrix matrix;
  std::vector<bool> rank_deficient;
};

/// Projector correlation gamma_ij = ||P_i P_j||_F normalized so the
/// diagonal is exactly 1 (division by sqrt(||P_i||_F ||P_j||_F), the
/// idempotency-consistent scaling). For rank-1 spans this coincides with
/// eta. Via orthonormal bases: ||P_i P_j||_F = ||Q_i^H Q_j||_F and
/// ||P_i||_F = sqrt(r_i).
inline GammaResult gamma_matrix(const std::vector<CMat>& bases,
                                BasisSpace space = BasisSpace::Full,
                                std::vector<std::string> labels = {}) {
  const auto ortho = detail::orthonormalize_all(bases);
  const std::size_t d = bases.size();
  GammaResult res;
  res.matrix.kind = MetricKind::Gamma;
  res.matrix.space = space;
  res.matrix.labels = detail::default_labels(d, std::move(labels));
  res.matrix.col_labels = res.matrix.labels;
  res.matrix.values = Mat::Identity(static_cast<Index>(d), static_cast<Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    res.rank_deficient.push_back(ortho[i].deficient);
    for (std::size_t j = i + 1; j < d; ++j) {
      const double cross = (ortho[i].Q.adjoint() * ortho[j].Q).norm();
      const double denom = std::sqrt(
          std::sqrt(static_cast<double>(ortho[i].rank)) *
          std::sqrt(static_cast<double>(ortho[j].rank)));
      const double v = cross / denom;
      res.matrix.values(static_cast<Index>(i), static_cast<Index>(j)) = v;
      res.matrix.values(static_cast<Index>(j), static_cast<Index>(i)) = v;
    }
  }
  return res;
}

struct KappaResult {
  MetricMatrix matrix;  // rows: bases, cols: datasets
  std::vector<bool> rank_deficient;
};

/// Energy capture kappa_ij = ||P_i X_j||_F / ||X_j||_F: the fraction of
/// dataset j's energy lying in span i. Datasets are plain matrices so
/// both full states X and observed data C X fit the same call.
inline KappaResult kappa_matrix(const std::vector<CMat>& bases,
                                const std::vector<Mat>& datasets,
                                BasisSpace space = BasisSpace::Full,
                                std::vector<std::string> basis_labels = {},
                                std::vector<std::string> data_labels = {}) {
  const auto ortho = detail::orthonormalize_all(bases);
  if (datasets.empty()) throw ArgumentError("no datasets given");
  KappaResult res;
  res.matrix.kind = MetricKind::Kappa;
  res.matrix.space = space;
  res.matrix.labels = detail::default_labels(bases.size(), std::move(basis_labels));
  res.matrix.col_labels =
      detail::default_labels(datasets.size(), std::move(data_labels));
  res.matrix.values.resize(static_cast<Index>(bases.size()),
                           static_cast<Index>(datasets.size()));
  for (std::size_t j = 0; j < datasets.size(); ++j) {
    const Mat& X = datasets[j];
    const double total = X.norm();
    if (total == 0.0) throw ArgumentError("zero dataset in kappa");
    for (std::size_t i = 0; i < bases.size(); ++i) {
      if (X.rows() != ortho[i].Q.rows())
        throw DimensionError("dataset dimension does not match basis");
      const double captured = adjoint_apply_real(ortho[i].Q, X).norm();
      res.matrix.values(static_cast<Index>(i), static_cast<Index>(j)) =
          captured / total;
    }
  }
  for (const auto& o : ortho) res.rank_deficient.push_back(o.deficient);
  return res;
}

struct CoherenceReport {
  double mu_block = 0.0;      // max_{i != j} ||Theta_i^H Theta_j||_2 / r1
  double sub_coherence = 0.0; // max within-block off-diagonal |<t_i, t_j>|
  Index block_rank = 0;       // common per-regime rank r1
  Index total_rank = 0;       // d * r1
  bool bound_satisfied = false;  // r * (mu_B + nu) < 1 + nu
};

/// Block coherence of the observed dictionary. Requires equal block
/// sizes (the quantity is undefined otherwise); columns are normalized
/// to unit 2-norm first.
inline CoherenceReport coherence_report(const ObservedLibrary& obs) {
  if (obs.entries.empty()) throw ArgumentError("empty observed library");
  const Index r1 = obs.entries.front().theta.cols();
  std::vector<CMat> blocks;
  for (const ObservedRegime& reg : obs.entries) {
    if (reg.theta.cols() != r1)
      throw ArgumentError(
          "block coherence needs equal per-regime ranks; regime '" +
          reg.label + "' differs");
    for (Index c = 0; c < reg.theta.cols(); ++c)
      if (reg.theta.col(c).norm() == 0.0)
        throw NumericalError("observed basis column vanished; cannot "
                             "normalize for coherence");
    blocks.push_back(unit_columns(reg.theta));
  }
  CoherenceReport rep;
  rep.block_rank = r1;
  rep.total_rank = r1 * static_cast<Index>(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i)
    for (std::size_t j = i + 1; j < blocks.size(); ++j)
      rep.mu_block = std::max(
          rep.mu_block,
          spectral_norm(blocks[i].adjoint() * blocks[j]) / static_cast<double>(r1));
  for (const CMat& b : blocks) {
    const CMat gram = b.adjoint() * b;
    for (Index i = 0; i < r1; ++i)
      for (Index j = 0; j < r1; ++j)
        if (i != j)
          rep.sub_coherence = std::max(rep.sub_coherence, std::abs(gram(i, j)));
  }
  rep.bound_satisfied =
      static_cast<double>(rep.total_rank) * (rep.mu_block + rep.sub_coherence) <
      1.0 + rep.sub_coherence;
  return rep;
}

struct Prop1Certificate {
  bool certified = false;
  double eta = 0.0;
};

/// Sufficient condition for correct classification: if the worst pairwise
/// alignment satisfies eta < 1 - epsilon and a measurement is some
/// in-span signal plus a perpendicular part of relative size <= epsilon,
/// the in-span regime wins.
inline Prop1Certificate prop1_certificate(const std::vector<CMat>& bases,
                                          double epsilon) {
  if (!(epsilon >= 0.0) || epsilon >= 1.0)
    throw ArgumentError("epsilon must lie in [0, 1)");
  const EtaResult res = eta_alignment(bases);
  return {res.eta < 1.0 - epsilon, res.eta};
}

/// Data-driven epsilon: the largest out-of-span to in-span ratio over
/// the given snapshot columns.
inline double estimate_epsilon(const CMat& basis, const Mat& data) {
  if (data.cols() < 1) throw ArgumentError("no data columns");
  const OrthoBasis ortho = orthonormal_basis(basis);
  double eps = 0.0;
  for (Index c = 0; c < data.cols(); ++c) {
    const CVec y = data.col(c).cast<Complex>();
    const CVec proj = ortho.Q * (ortho.Q.adjoint() * y);
    const double in = proj.norm();
    const double out = (y - proj).norm();
    if (in == 0.0) throw NumericalError("data column orthogonal to the span");
    eps = std::max(eps, out / in);
  }
  return eps;
}

/// Classifies `trials` randomly placed windows of one regime's data and
/// returns the winning index per trial. Trial t draws its start time and
/// noise from seed ^ (seed_base + t), matching the confusion protocol.
inline std::vector<Index> run_classification_trials(
    const ObservedLibrary& obs, const SensingOperator& C,
    const SnapshotMatrix& data, int trials, std::optional<double> snr_db,
    std::uint64_t seed, std::uint64_t seed_base = 0) {
  if (trials < 1) throw ArgumentError("trials must be >= 1");
  const Index window = static_cast<Index>(obs.depth) + 1;
  if (data.s() < window)
    throw ArgumentError("dataset shorter than the augmented window");
  if (C.p() != obs.p)
    throw DimensionError("sensing operator does not match observed library");
  std::vector<Index> winners(static_cast<std::size_t>(trials), -1);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    Rng trial_rng(seed ^ (seed_base + static_cast<std::uint64_t>(t)));
    const Index t0 = static_cast<Index>(
        trial_rng.uniform_index(static_cast<std::uint64_t>(data.s() - window + 1)));
    const std::uint64_t noise_seed = trial_rng.next_u64();
    const Measurement m =
        measure(C, data.data.middleCols(t0, window), snr_db, noise_seed);
    winners[t] = classify(obs, m).winner;
  });
  return winners;
}

/// Row-stochastic confusion matrix in percent: entry (i, k) is how often
/// regime i's data classified as regime k over `trials` random windows.
inline Mat confusion_matrix(const ObservedLibrary& obs,
                            const SensingOperator& C,
                            const std::vector<SnapshotMatrix>& test_data,
                            int trials, std::optional<double> snr_db,
                            std::uint64_t seed) {
  if (static_cast<Index>(test_data.size()) != obs.size())
    throw ArgumentError("one test dataset per library regime required");
  const Index d = obs.size();
  Mat out = Mat::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    const auto winners = run_classification_trials(
        obs, C, test_data[static_cast<std::size_t>(i)], trials, snr_db, seed,
        static_cast<std::uint64_t>(i) * 1000000ull);
    for (Index w : winners) out(i, w) += 1.0;
  }
  out *= 100.0 / trials;
  return out;
}

/// mu_B as a function of the augmentation depth, for one fixed sensing
/// operator.
inline std::vector<std::pair<int, double>> mu_b_vs_augmentation(
    const RegimeLibrary& lib, const SensingOperator& C,
    const std::vector<int>& depths) {
  std::vector<std::pair<int, double>> out;
  for (int j : depths)
    out.emplace_back(j, coherence_report(observe_library(lib, C, j)).mu_block);
  return out;
}

}  // namespace rscope
