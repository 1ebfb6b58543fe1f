#pragma once

#include "rscope/linalg.hpp"
#include "rscope/snapshots.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace rscope {

enum class SensingKind { Point, Boundary, Gaussian, Bernoulli, Identity, Tomographic };

inline std::string to_string(SensingKind k) {
  switch (k) {
    case SensingKind::Point: return "point";
    case SensingKind::Boundary: return "boundary";
    case SensingKind::Gaussian: return "gaussian";
    case SensingKind::Bernoulli: return "bernoulli";
    case SensingKind::Identity: return "identity";
    case SensingKind::Tomographic: return "tomographic";
  }
  throw ArgumentError("unknown sensing kind");
}

inline SensingKind sensing_kind_from_string(const std::string& s) {
  if (s == "point") return SensingKind::Point;
  if (s == "boundary") return SensingKind::Boundary;
  if (s == "gaussian") return SensingKind::Gaussian;
  if (s == "bernoulli") return SensingKind::Bernoulli;
  if (s == "identity") return SensingKind::Identity;
  if (s == "tomographic") return SensingKind::Tomographic;
  throw ArgumentError("unknown sensing kind: " + s);
}

/// One draw of boundary-ring sensors: `count` sensors for the named
/// fields, placed on grid nodes exactly `offset` layers inside the
/// domain boundary (offset 0 is the boundary itself).
struct SensorGroup {
  std::vector<std::string> fields;
  int count = 0;
  int offset = 0;
};

struct SensingConfig {
  SensingKind kind = SensingKind::Point;
  Index p = 0;                    // sensor count (identity: forced to n)
  Index n = 0;                    // state dimension
  std::optional<FieldGrid> grid;  // required for boundary and tomographic
  std::uint64_t seed = 0;
  std::vector<SensorGroup> groups;   // boundary kind only
  std::vector<Index> indices;        // point kind: explicit picks, optional
};

struct SensingOperator {
  Mat matrix;  // p x n
  SensingKind kind = SensingKind::Identity;
  std::optional<std::uint64_t> seed;
  std::vector<Index> sensor_indices;  // selected components (one-hot kinds)

  Index p() const { return matrix.rows(); }
  Index n() const { return matrix.cols(); }
};

namespace detail {

// Nodes whose ring depth min(ix, nx-1-ix, iy, ny-1-iy) equals `offset`,
// in ascending node-index order.
inline std::vector<Index> ring_nodes(const FieldGrid& g, int offset) {
  std::vector<Index> nodes;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      const int ring = std::min(std::min(ix, g.nx - 1 - ix),
                                std::min(iy, g.ny - 1 - iy));
      if (ring == offset)
        nodes.push_back(static_cast<Index>(iy) * g.nx + ix);
    }
  return nodes;
}

inline std::size_t field_position(const FieldGrid& g, const std::string& name) {
  for (std::size_t f = 0; f < g.fields.size(); ++f)
    if (g.fields[f] == name) return f;
  throw ArgumentError("sensing group names unknown field: " + name);
}

}  // namespace detail

/// Builds the measurement operator C (y = C x + noise).
///
///   point        one-hot rows on distinct random components (or the
///                explicit `indices`)
///   boundary     one-hot rows on ring nodes per SensorGroup
///   gaussian     i.i.d. N(0, 1/p) entries
///   bernoulli    +-1/sqrt(p) entries
///   identity     p = n, C = I
///   tomographic  rows of ones along random grid lines (row or column sums)
inline SensingOperator make_sensing(const SensingConfig& config) {
  if (config.n < 1) throw ArgumentError("sensing needs the state dimension");
  const Index n = config.n;
  SensingOperator op;
  op.kind = config.kind;
  Rng rng(config.seed);

  switch (config.kind) {
    case SensingKind::Identity: {
      op.matrix = Mat::Identity(n, n);
      op.sensor_indices.resize(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i)
        op.sensor_indices[static_cast<std::size_t>(i)] = i;
      return op;
    }
    case SensingKind::Point: {
      std::vector<Index> picks;
      if (!config.indices.empty()) {
        picks = config.indices;
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        for (Index i : picks) {
          if (i < 0 || i >= n)
            throw ArgumentError("point sensor index out of range");
          if (seen[static_cast<std::size_t>(i)])
            throw ArgumentError("point sensor indices must be distinct");
          seen[static_cast<std::size_t>(i)] = true;
        }
        if (config.p != 0 && config.p != static_cast<Index>(picks.size()))
          throw ArgumentError("p disagrees with the explicit index list");
      } else {
        if (config.p < 1) throw ArgumentError("point sensing needs p >= 1");
        if (config.p > n)
          throw ArgumentError("cannot place more point sensors than components");
        picks = sample_without_replacement(config.p, n, rng);
        op.seed = config.seed;
      }
      op.matrix = Mat::Zero(static_cast<Index>(picks.size()), n);
      for (std::size_t r = 0; r < picks.size(); ++r)
        op.matrix(static_cast<Index>(r), picks[r]) = 1.0;
      op.sensor_indices = std::move(picks);
      return op;
    }
    case SensingKind::Boundary: {
      if (!config.grid)
        throw ArgumentError("boundary sensing needs grid metadata");
      const FieldGrid& g = *config.grid;
      if (g.state_dim() != n)
        throw DimensionError("sensing grid does not match state dimension");
      if (config.groups.empty())
        throw ArgumentError("boundary sensing needs at least one group");
      std::vector<Index> picks;
      for (const SensorGroup& group : config.groups) {
        if (group.count < 1)
          throw ArgumentError("sensor group count must be >= 1");
        if (group.offset < 0)
          throw ArgumentError("sensor group offset must be >= 0");
        const auto nodes = detail::ring_nodes(g, group.offset);
        std::vector<Index> slots;  // (field, node) component indices
        for (const std::string& name : group.fields) {
          const Index base =
              static_cast<Index>(detail::field_position(g, name)) *
              g.node_count();
          for (Index node : nodes) slots.push_back(base + node);
        }
        if (static_cast<Index>(group.count) > static_cast<Index>(slots.size()))
          throw ArgumentError("sensor group exceeds available ring nodes");
        for (Index i : sample_without_replacement(
                 group.count, static_cast<Index>(slots.size()), rng))
          picks.push_back(slots[static_cast<std::size_t>(i)]);
      }
      op.matrix = Mat::Zero(static_cast<Index>(picks.size()), n);
      for (std::size_t r = 0; r < picks.size(); ++r)
        op.matrix(static_cast<Index>(r), picks[r]) = 1.0;
      op.sensor_indices = std::move(picks);
      op.seed = config.seed;
      return op;
    }
    case SensingKind::Gaussian: {
      if (config.p < 1) throw ArgumentError("gaussian sensing needs p >= 1");
      const double sd = 1.0 / std::sqrt(static_cast<double>(config.p));
      op.matrix.resize(config.p, n);
      for (Index i = 0; i < config.p; ++i)
        for (Index j = 0; j < n; ++j) op.matrix(i, j) = sd * rng.gaussian();
      op.seed = config.seed;
      return op;
    }
    case SensingKind::Bernoulli: {
      if (config.p < 1) throw ArgumentError("bernoulli sensing needs p >= 1");
      const double mag = 1.0 / std::sqrt(static_cast<double>(config.p));
      op.matrix.resize(config.p, n);
      for (Index i = 0; i < config.p; ++i)
        for (Index j = 0; j < n; ++j)
          op.matrix(i, j) = (rng.next_u64() & 1ull) ? mag : -mag;
      op.seed = config.seed;
      return op;
    }
    case SensingKind::Tomographic: {
      if (!config.grid)
        throw ArgumentError("tomographic sensing needs grid metadata");
      const FieldGrid& g = *config.grid;
      if (g.state_dim() != n)
        throw DimensionError("sensing grid does not match state dimension");
      if (config.p < 1) throw ArgumentError("tomographic sensing needs p >= 1");
      // Line catalogue: per field, ny horizontal lines then nx vertical.
      const Index lines_per_field = static_cast<Index>(g.nx) + g.ny;
      const Index total =
          lines_per_field * static_cast<Index>(g.fields.size());
      if (config.p > total)
        throw ArgumentError("more tomographic rays than grid lines");
      const auto picks = sample_without_replacement(config.p, total, rng);
      op.matrix = Mat::Zero(config.p, n);
      for (std::size_t r = 0; r < picks.size(); ++r) {
        const Index pick = picks[r];
        const Index f = pick / lines_per_field;
        const Index within = pick % lines_per_field;
        const Index base = f * g.node_count();
        if (within < g.ny) {
          const Index iy = within;
          for (int ix = 0; ix < g.nx; ++ix)
            op.matrix(static_cast<Index>(r), base + iy * g.nx + ix) = 1.0;
        } else {
          const Index ix = within - g.ny;
          for (int iy = 0; iy < g.ny; ++iy)
            op.matrix(static_cast<Index>(r),
                      base + static_cast<Index>(iy) * g.nx + ix) = 1.0;
        }
      }
      op.seed = config.seed;
      return op;
    }
  }
  throw ArgumentError("unknown sensing kind");
}

/// Block-diagonal lift of C across depth+1 consecutive time steps.
/// Applied blockwise; dense() materializes the full matrix for small
/// cases and inspection.
struct BlockDiagLift {
  Mat C;
  int depth = 0;

  Index rows() const { return C.rows() * (depth + 1); }
  Index cols() const { return C.cols() * (depth + 1); }

  Vec apply(const Vec& stacked) const {
    if (stacked.size() != cols())
      throw DimensionError("lifted operator applied to wrong-length vector");
    Vec out(rows());
    for (int b = 0; b <= depth; ++b)
      out.segment(static_cast<Index>(b) * C.rows(), C.rows()) =
          C * stacked.segment(static_cast<Index>(b) * C.cols(), C.cols());
    return out;
  }

  Mat dense() const {
    Mat out = Mat::Zero(rows(), cols());
    for (int b = 0; b <= depth; ++b)
      out.block(static_cast<Index>(b) * C.rows(),
                static_cast<Index>(b) * C.cols(), C.rows(), C.cols()) = C;
    return out;
  }
};

inline BlockDiagLift block_diag_lift(const SensingOperator& C, int depth) {
  if (depth < 0) throw ArgumentError("augmentation depth must be >= 0");
  return {C.matrix, depth};
}

/// Sensor readings of the window x(t..t+j), stacked time-major.
struct Measurement {
  Vec values;  // p * (j+1)
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
  int depth = 0;
};

/// Measures a state window (columns are consecutive snapshots). With
/// snr_db set, i.i.d. Gaussian noise is rescaled so that
/// ||noise|| / ||clean|| equals 10^(-snr_db/20) exactly.
inline Measurement measure(const SensingOperator& C,
                           const Eigen::Ref<const Mat>& window,
                           std::optional<double> snr_db = {},
                           std::uint64_t seed = 0) {
  if (window.rows() != C.n())
    throw DimensionError("window dimension does not match the sensing operator");
  if (window.cols() < 1) throw DimensionError("empty measurement window");
  const Index p = C.p();
  const Index m = p * window.cols();
  Vec clean(m);
  for (Index b = 0; b < window.cols(); ++b)
    clean.segment(b * p, p) = C.matrix * window.col(b);
  Measurement out;
  out.snr_db = snr_db;
  out.seed = seed;
  out.depth = static_cast<int>(window.cols()) - 1;
  if (!snr_db) {
    out.values = clean;
    return out;
  }
  const double clean_norm = clean.norm();
  if (clean_norm == 0.0)
    throw NumericalError("zero measured signal; SNR calibration undefined");
  Rng rng(seed);
  Vec noise = rng.gaussian_vector(m);
  const double noise_norm = noise.norm();
  if (noise_norm == 0.0)
    throw NumericalError("degenerate noise draw");
  const double target = std::pow(10.0, -(*snr_db) / 20.0) * clean_norm;
  out.values = clean + (target / noise_norm) * noise;
  return out;
}

}  // namespace rscope
