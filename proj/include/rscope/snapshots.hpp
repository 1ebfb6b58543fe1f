#pragma once

#include "rscope/core.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rscope {

/// Uniform 2-D grid metadata for stacked multi-field states.
///
/// Layout convention: within one snapshot column the field blocks appear
/// in `fields` order; inside a block, node (ix, iy) sits at iy * nx + ix.
struct FieldGrid {
  int nx = 0;
  int ny = 0;
  std::vector<std::string> fields;
  std::vector<double> field_scales;

  FieldGrid() = default;

  FieldGrid(int nx_, int ny_, std::vector<std::string> fields_,
            std::vector<double> scales_)
      : nx(nx_), ny(ny_), fields(std::move(fields_)),
        field_scales(std::move(scales_)) {
    if (nx < 1 || ny < 1) throw ArgumentError("grid extents must be positive");
    if (fields.empty()) throw ArgumentError("grid needs at least one field");
    if (fields.size() != field_scales.size())
      throw ArgumentError("one scale per field required");
    for (double s : field_scales)
      if (!(s > 0.0) || !std::isfinite(s))
        throw ArgumentError("field scales must be positive and finite");
  }

  Index node_count() const { return static_cast<Index>(nx) * ny; }

  Index state_dim() const {
    return node_count() * static_cast<Index>(fields.size());
  }

  bool operator==(const FieldGrid& o) const {
    return nx == o.nx && ny == o.ny && fields == o.fields &&
           field_scales == o.field_scales;
  }
};

/// Snapshot ensemble: column t is the state at time t0 + t * dt.
/// Construction validates, afterwards treat instances as immutable.
struct SnapshotMatrix {
  Mat data;   // n x s
  double dt = 1.0;
  std::optional<FieldGrid> grid;
  std::string label;

  SnapshotMatrix(Mat data_, double dt_, std::optional<FieldGrid> grid_ = {},
                 std::string label_ = {})
      : data(std::move(data_)), dt(dt_), grid(std::move(grid_)),
        label(std::move(label_)) {
    if (data.cols() < 2)
      throw DimensionError("snapshot matrix needs at least 2 columns");
    if (data.rows() < 1) throw DimensionError("empty state vector");
    if (!data.allFinite())
      throw ArgumentError("snapshot matrix holds NaN or Inf");
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw ArgumentError("dt must be positive and finite");
    if (grid && grid->state_dim() != data.rows())
      throw DimensionError("grid does not match state dimension");
  }

  Index n() const { return data.rows(); }
  Index s() const { return data.cols(); }
};

struct NamedField {
  std::string name;
  Mat values;  // nodes x s, unscaled
};

/// Stacks per-field blocks into one state, multiplying each block by its
/// scale (nondimensional balancing across fields). Grid metadata keeps
/// the scales so unstack_fields inverts exactly. When nx/ny are omitted
/// the grid degenerates to a flat nx = nodes, ny = 1 layout.
inline SnapshotMatrix stack_fields(const std::vector<NamedField>& fields,
                                   const std::vector<double>& scales,
                                   double dt, int nx = 0, int ny = 0) {
  if (fields.empty()) throw ArgumentError("no fields to stack");
  if (fields.size() != scales.size())
    throw ArgumentError("one scale per field required");
  const Index nodes = fields.front().values.rows();
  const Index s = fields.front().values.cols();
  std::vector<std::string> names;
  for (const auto& f : fields) {
    if (f.values.rows() != nodes)
      throw DimensionError("fields must share the node count");
    if (f.values.cols() != s)
      throw DimensionError("fields must share the snapshot count");
    names.push_back(f.name);
  }
  if (nx == 0 && ny == 0) {
    nx = static_cast<int>(nodes);
    ny = 1;
  }
  if (static_cast<Index>(nx) * ny != nodes)
    throw DimensionError("nx * ny must equal the per-field node count");
  FieldGrid grid(nx, ny, names, scales);
  Mat data(grid.state_dim(), s);
  for (std::size_t f = 0; f < fields.size(); ++f)
    data.middleRows(static_cast<Index>(f) * nodes, nodes) =
        scales[f] * fields[f].values;
  return SnapshotMatrix(std::move(data), dt, std::move(grid));
}

/// Splits a stacked state back into per-field blocks, dividing out the
/// recorded scales.
inline std::vector<NamedField> unstack_fields(const SnapshotMatrix& snap) {
  if (!snap.grid) throw ArgumentError("unstack needs grid metadata");
  const FieldGrid& g = *snap.grid;
  const Index nodes = g.node_count();
  std::vector<NamedField> out;
  for (std::size_t f = 0; f < g.fields.size(); ++f)
    out.push_back({g.fields[f],
                   snap.data.middleRows(static_cast<Index>(f) * nodes, nodes) /
                       g.field_scales[f]});
  return out;
}

namespace detail {

// Bilinear sample of one field block at unit-square point (x, y),
// clamped to the grid hull.
inline double bilerp(const Eigen::Ref<const Vec>& block, int nx, int ny,
                     double x, double y) {
  const double u = std::clamp(x, 0.0, 1.0) * (nx - 1);
  const double v = std::clamp(y, 0.0, 1.0) * (ny - 1);
  const int i0 = std::min(static_cast<int>(u), nx - 2);
  const int j0 = std::min(static_cast<int>(v), ny - 2);
  const double fu = u - i0;
  const double fv = v - j0;
  const double a = block(static_cast<Index>(j0) * nx + i0);
  const double b = block(static_cast<Index>(j0) * nx + i0 + 1);
  const double c = block(static_cast<Index>(j0 + 1) * nx + i0);
  const double d = block(static_cast<Index>(j0 + 1) * nx + i0 + 1);
  return (1 - fu) * (1 - fv) * a + fu * (1 - fv) * b + (1 - fu) * fv * c +
         fu * fv * d;
}

}  // namespace detail

/// Resamples every field of every snapshot onto dst. Both grids span the
/// unit square with equidistant nodes including the endpoints; points
/// falling outside by rounding clamp to the nearest edge.
inline SnapshotMatrix regrid_bilinear(const SnapshotMatrix& snap,
                                      const FieldGrid& dst) {
  if (!snap.grid) throw ArgumentError("regrid needs grid metadata");
  const FieldGrid& src = *snap.grid;
  if (src.fields != dst.fields || src.field_scales != dst.field_scales)
    throw ArgumentError("regrid requires matching field lists and scales");
  if (src.nx < 2 || src.ny < 2 || dst.nx < 2 || dst.ny < 2)
    throw ArgumentError("regrid needs at least 2 nodes per axis");
  const Index s = snap.s();
  const Index src_nodes = src.node_count();
  const Index dst_nodes = dst.node_count();
  Mat out(dst.state_dim(), s);
  for (std::size_t f = 0; f < src.fields.size(); ++f) {
    for (Index t = 0; t < s; ++t) {
      const auto block =
          snap.data.col(t).segment(static_cast<Index>(f) * src_nodes, src_nodes);
      for (int jy = 0; jy < dst.ny; ++jy) {
        const double y = static_cast<double>(jy) / (dst.ny - 1);
        for (int jx = 0; jx < dst.nx; ++jx) {
          const double x = static_cast<double>(jx) / (dst.nx - 1);
          out(static_cast<Index>(f) * dst_nodes +
                  static_cast<Index>(jy) * dst.nx + jx,
              t) = detail::bilerp(block, src.nx, src.ny, x, y);
        }
      }
    }
  }
  return SnapshotMatrix(std::move(out), snap.dt, dst, snap.label);
}

// ---------------------------------------------------------------------------
// Binary snapshot files ("RSNP" version 1, little-endian):
//   magic 4B, version u32, n u64, s u64, dt f64, grid flag u8,
//   [nx u32, ny u32, field count u32, per field: name len u16 + UTF-8 +
//    scale f64], then n*s f64 column-major payload.
// ---------------------------------------------------------------------------

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "snapshot format is little-endian; big-endian hosts need swaps");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("truncated snapshot file");
  return v;
}

}  // namespace detail

inline void write_snapshot(const std::filesystem::path& path,
                           const SnapshotMatrix& snap) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open for writing: " + path.string());
  out.write("RSNP", 4);
  detail::put<std::uint32_t>(out, 1);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(snap.n()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(snap.s()));
  detail::put<double>(out, snap.dt);
  detail::put<std::uint8_t>(out, snap.grid ? 1 : 0);
  if (snap.grid) {
    const FieldGrid& g = *snap.grid;
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.nx));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.ny));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.fields.size()));
    for (std::size_t f = 0; f < g.fields.size(); ++f) {
      const std::string& name = g.fields[f];
      if (name.size() > 0xffff) throw ArgumentError("field name too long");
      detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      detail::put<double>(out, g.field_scales[f]);
    }
  }
  out.write(reinterpret_cast<const char*>(snap.data.data()),
            static_cast<std::streamsize>(sizeof(double)) * snap.n() * snap.s());
  if (!out) throw FormatError("snapshot write failed: " + path.string());
}

inline SnapshotMatrix read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RSNP", 4) != 0)
    throw FormatError("not a snapshot file (bad magic): " + path.string());
  const auto version = detail::get<std::uint32_t>(in);
  if (version != 1)
    throw FormatError("unsupported snapshot format version " +
                      std::to_string(version));
  const auto n = detail::get<std::uint64_t>(in);
  const auto s = detail::get<std::uint64_t>(in);
  if (n < 1 || s < 2 || n > (1ull << 40) || s > (1ull << 40) ||
      n * s > (1ull << 34))
    throw FormatError("implausible snapshot dimensions");
  const double dt = detail::get<double>(in);
  const auto has_grid = detail::get<std::uint8_t>(in);
  std::optional<FieldGrid> grid;
  if (has_grid == 1) {
    const auto nx = detail::get<std::uint32_t>(in);
    const auto ny = detail::get<std::uint32_t>(in);
    const auto nf = detail::get<std::uint32_t>(in);
    if (nf == 0 || nf > 4096) throw FormatError("implausible field count");
    std::vector<std::string> names;
    std::vector<double> scales;
    for (std::uint32_t f = 0; f < nf; ++f) {
      const auto len = detail::get<std::uint16_t>(in);
      std::string name(len, '\0');
      in.read(name.data(), len);
      if (!in) throw FormatError("truncated snapshot file");
      names.push_back(std::move(name));
      scales.push_back(detail::get<double>(in));
    }
    try {
      grid.emplace(static_cast<int>(nx), static_cast<int>(ny),
                   std::move(names), std::move(scales));
    } catch (const ArgumentError& e) {
      throw FormatError(std::string("invalid grid metadata: ") + e.what());
    }
  } else if (has_grid != 0) {
    throw FormatError("invalid grid flag");
  }
  Mat data(static_cast<Index>(n), static_cast<Index>(s));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(sizeof(double) * n * s));
  if (!in) throw FormatError("truncated snapshot payload: " + path.string());
  try {
    return SnapshotMatrix(std::move(data), dt, std::move(grid),
                          path.stem().string());
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid snapshot payload: ") + e.what());
  }
}

/// Plain-text import: one CSV row per state component, one column per
/// snapshot. dt is not representable in the text form, so it is passed in.
inline SnapshotMatrix read_snapshot_csv(const std::filesystem::path& path,
                                        double dt = 1.0) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      std::size_t a = pos, b = comma;
      while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
      while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t')) --b;
      double v = 0.0;
      const auto res = std::from_chars(line.data() + a, line.data() + b, v);
      if (res.ec != std::errc{} || res.ptr != line.data() + b)
        throw FormatError("bad numeric cell in " + path.string());
      row.push_back(v);
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("ragged CSV rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("empty CSV: " + path.string());
  Mat data(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < data.rows(); ++i)
    for (Index j = 0; j < data.cols(); ++j)
      data(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  try {
    return SnapshotMatrix(std::move(data), dt, {}, path.stem().string());
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid CSV snapshot data: ") + e.what());
  }
}

}  // namespace rscope
