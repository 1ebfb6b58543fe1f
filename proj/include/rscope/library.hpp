#pragma once

#include "rscope/dmd.hpp"
#include "rscope/sensing.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace rscope {

struct RegimeEntry {
  std::string label;
  double parameter = 0.0;
  DmdModel model;
};

/// Catalogue of per-regime mode sets sharing one state space and cadence.
struct RegimeLibrary {
  std::vector<RegimeEntry> entries;
  Index state_dim = 0;
  double dt = 1.0;
  std::optional<FieldGrid> grid;  // carried over when all sources agree

  Index size() const { return static_cast<Index>(entries.size()); }

  Index find(const std::string& label) const {
    for (std::size_t k = 0; k < entries.size(); ++k)
      if (entries[k].label == label) return static_cast<Index>(k);
    return -1;
  }
};

struct Dataset {
  std::string label;
  double parameter = 0.0;
  SnapshotMatrix snapshots;
};

inline RegimeLibrary build_library(const std::vector<Dataset>& datasets,
                                   const RankPolicy& policy) {
  if (datasets.empty()) throw ArgumentError("no datasets to build from");
  RegimeLibrary lib;
  lib.state_dim = datasets.front().snapshots.n();
  lib.dt = datasets.front().snapshots.dt;
  lib.grid = datasets.front().snapshots.grid;
  for (const Dataset& d : datasets)
    if (!d.snapshots.grid || !lib.grid || !(*d.snapshots.grid == *lib.grid))
      lib.grid.reset();
  std::set<std::string> labels;
  for (const Dataset& d : datasets) {
    if (!labels.insert(d.label).second)
      throw ArgumentError("duplicate regime label: " + d.label);
    if (d.snapshots.n() != lib.state_dim)
      throw DimensionError("datasets disagree on state dimension");
    if (d.snapshots.dt != lib.dt)
      throw ArgumentError("datasets disagree on dt");
    lib.entries.push_back({d.label, d.parameter, dmd_decompose(d.snapshots, policy)});
  }
  return lib;
}

/// Time-augmented basis for one eigenpair set: row blocks Phi * Lambda^b
/// for b = 0..depth, so a stacked window x(t..t+depth) of the regime's
/// dynamics lies in its column span.
inline CMat augment_modes(const CMat& modes, const CVec& lambda, int depth) {
  if (depth < 0) throw ArgumentError("augmentation depth must be >= 0");
  if (modes.cols() != lambda.size())
    throw DimensionError("one eigenvalue per mode required");
  const Index n = modes.rows();
  const Index r = modes.cols();
  CMat out((static_cast<Index>(depth) + 1) * n, r);
  out.topRows(n) = modes;
  for (int b = 1; b <= depth; ++b)
    out.middleRows(static_cast<Index>(b) * n, n) =
        out.middleRows(static_cast<Index>(b - 1) * n, n) * lambda.asDiagonal();
  return out;
}

struct AugmentedBasis {
  CMat matrix;  // (depth+1)*n x r
  int depth = 0;
  std::string source;
};

inline AugmentedBasis augment_basis(const RegimeEntry& entry, int depth) {
  return {augment_modes(entry.model.modes, entry.model.eigenvalues, depth),
          depth, entry.label};
}

/// One regime pushed through the sensors: Theta = blockdiag(C) * Phi_hat,
/// with its pseudoinverse cached for repeated classification.
struct ObservedRegime {
  std::string label;
  CMat theta;   // p*(depth+1) x r
  CMat pinv;    // r x p*(depth+1)
  Vec sigma;    // singular values of theta
  Index numerical_rank = 0;
  bool rank_deficient = false;
};

struct ObservedLibrary {
  std::vector<ObservedRegime> entries;
  int depth = 0;
  Index p = 0;  // sensors per time step

  Index size() const { return static_cast<Index>(entries.size()); }

  /// Wraps raw observed bases directly (metrics and test harnesses).
  static ObservedLibrary from_bases(const std::vector<CMat>& thetas,
                                    std::vector<std::string> labels = {}) {
    if (thetas.empty()) throw ArgumentError("no observed bases given");
    ObservedLibrary obs;
    obs.depth = 0;
    obs.p = thetas.front().rows();
    for (std::size_t k = 0; k < thetas.size(); ++k) {
      if (thetas[k].rows() != obs.p)
        throw DimensionError("observed bases disagree on measurement length");
      Pinv pi = pseudo_inverse(thetas[k]);
      ObservedRegime reg;
      reg.label = k < labels.size() ? labels[k] : "B" + std::to_string(k);
      reg.theta = thetas[k];
      reg.pinv = std::move(pi.pinv);
      reg.sigma = std::move(pi.sigma);
      reg.numerical_rank = pi.rank;
      reg.rank_deficient = pi.rank < thetas[k].cols();
      obs.entries.push_back(std::move(reg));
    }
    return obs;
  }
};

inline ObservedLibrary observe_library(const RegimeLibrary& lib,
                                       const SensingOperator& C, int depth) {
  if (lib.entries.empty()) throw ArgumentError("empty regime library");
  if (depth < 0) throw ArgumentError("augmentation depth must be >= 0");
  if (C.n() != lib.state_dim)
    throw DimensionError("sensing operator does not match library state dim");
  ObservedLibrary obs;
  obs.depth = depth;
  obs.p = C.p();
  for (const RegimeEntry& entry : lib.entries) {
    const CMat head = apply_real(C.matrix, entry.model.modes);  // p x r
    CMat theta((static_cast<Index>(depth) + 1) * C.p(), head.cols());
    theta.topRows(C.p()) = head;
    for (int b = 1; b <= depth; ++b)
      theta.middleRows(static_cast<Index>(b) * C.p(), C.p()) =
          theta.middleRows(static_cast<Index>(b - 1) * C.p(), C.p()) *
          entry.model.eigenvalues.asDiagonal();
    Pinv pi = pseudo_inverse(theta);
    ObservedRegime reg;
    reg.label = entry.label;
    reg.theta = std::move(theta);
    reg.pinv = std::move(pi.pinv);
    reg.sigma = std::move(pi.sigma);
    reg.numerical_rank = pi.rank;
    reg.rank_deficient = pi.rank < entry.model.rank;
    obs.entries.push_back(std::move(reg));
  }
  return obs;
}

namespace detail {

inline nlohmann::json grid_to_json(const FieldGrid& g) {
  return {{"nx", g.nx},
          {"ny", g.ny},
          {"fields", g.fields},
          {"scales", g.field_scales}};
}

inline FieldGrid grid_from_json(const nlohmann::json& j) {
  return FieldGrid(j.at("nx").get<int>(), j.at("ny").get<int>(),
                   j.at("fields").get<std::vector<std::string>>(),
                   j.at("scales").get<std::vector<double>>());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Library directory layout:
//   manifest.json               version, state_dim, dt, entry table
//   regime_###.rmod             binary per-regime payload ("RMOD" v1, LE):
//     magic 4B, version u32, n u64, r u64, sigma count u64, energy f64,
//     eigvec condition f64, ill-conditioned u8, eigenvalues r x (re, im),
//     modes n*r complex column-major interleaved, singular values f64[]
// ---------------------------------------------------------------------------

inline void write_library(const std::filesystem::path& dir,
                          const RegimeLibrary& lib) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "rscope-library";
  manifest["version"] = 1;
  manifest["state_dim"] = static_cast<std::uint64_t>(lib.state_dim);
  manifest["dt"] = lib.dt;
  if (lib.grid) manifest["grid"] = detail::grid_to_json(*lib.grid);
  manifest["entries"] = nlohmann::json::array();
  for (std::size_t k = 0; k < lib.entries.size(); ++k) {
    const RegimeEntry& e = lib.entries[k];
    char name[32];
    std::snprintf(name, sizeof(name), "regime_%03zu.rmod", k);
    manifest["entries"].push_back({{"label", e.label},
                                   {"parameter", e.parameter},
                                   {"rank", static_cast<std::uint64_t>(e.model.rank)},
                                   {"file", name}});
    std::ofstream out(dir / name, std::ios::binary);
    if (!out)
      throw ArgumentError("cannot open for writing: " + (dir / name).string());
    out.write("RMOD", 4);
    detail::put<std::uint32_t>(out, 1);
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(e.model.modes.rows()));
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(e.model.rank));
    detail::put<std::uint64_t>(out,
                               static_cast<std::uint64_t>(e.model.singular_values.size()));
    detail::put<double>(out, e.model.energy_captured);
    detail::put<double>(out, e.model.eigvec_condition);
    detail::put<std::uint8_t>(out, e.model.ill_conditioned ? 1 : 0);
    out.write(reinterpret_cast<const char*>(e.model.eigenvalues.data()),
              static_cast<std::streamsize>(sizeof(Complex)) * e.model.rank);
    out.write(reinterpret_cast<const char*>(e.model.modes.data()),
              static_cast<std::streamsize>(sizeof(Complex)) *
                  e.model.modes.size());
    out.write(reinterpret_cast<const char*>(e.model.singular_values.data()),
              static_cast<std::streamsize>(sizeof(double)) *
                  e.model.singular_values.size());
    if (!out) throw FormatError("library write failed: " + (dir / name).string());
  }
  std::ofstream mout(dir / "manifest.json");
  if (!mout)
    throw ArgumentError("cannot open for writing: " +
                        (dir / "manifest.json").string());
  mout << manifest.dump(2) << "\n";
  if (!mout) throw FormatError("manifest write failed");
}

inline RegimeLibrary read_library(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path mpath = dir / "manifest.json";
  std::ifstream min(mpath);
  if (!min) throw ArgumentError("cannot open: " + mpath.string());
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad library manifest: " + std::string(e.what()));
  }
  try {
    if (manifest.at("format").get<std::string>() != "rscope-library")
      throw FormatError("not a regime library manifest");
    const auto version = manifest.at("version").get<std::uint64_t>();
    if (version != 1)
      throw FormatError("unsupported library version " + std::to_string(version));
    RegimeLibrary lib;
    lib.state_dim =
        static_cast<Index>(manifest.at("state_dim").get<std::uint64_t>());
    lib.dt = manifest.at("dt").get<double>();
    if (manifest.contains("grid")) {
      try {
        lib.grid = detail::grid_from_json(manifest.at("grid"));
      } catch (const ArgumentError& e) {
        throw FormatError(std::string("invalid grid in manifest: ") + e.what());
      }
    }
    for (const auto& je : manifest.at("entries")) {
      const fs::path file = dir / je.at("file").get<std::string>();
      std::ifstream in(file, std::ios::binary);
      if (!in) throw FormatError("library references missing file: " + file.string());
      char magic[4];
      in.read(magic, 4);
      if (!in || std::memcmp(magic, "RMOD", 4) != 0)
        throw FormatError("bad mode file magic: " + file.string());
      const auto fversion = detail::get<std::uint32_t>(in);
      if (fversion != 1)
        throw FormatError("unsupported mode file version " +
                          std::to_string(fversion));
      const auto n = detail::get<std::uint64_t>(in);
      const auto r = detail::get<std::uint64_t>(in);
      const auto nsig = detail::get<std::uint64_t>(in);
      if (n != static_cast<std::uint64_t>(lib.state_dim))
        throw FormatError("mode file disagrees with manifest state_dim");
      if (r < 1 || r > n || nsig > (1ull << 32) || n > (1ull << 40))
        throw FormatError("implausible mode file dimensions");
      RegimeEntry entry;
      entry.label = je.at("label").get<std::string>();
      entry.parameter = je.at("parameter").get<double>();
      entry.model.rank = static_cast<Index>(r);
      entry.model.dt = lib.dt;
      entry.model.energy_captured = detail::get<double>(in);
      entry.model.eigvec_condition = detail::get<double>(in);
      entry.model.ill_conditioned = detail::get<std::uint8_t>(in) != 0;
      entry.model.eigenvalues.resize(static_cast<Index>(r));
      in.read(reinterpret_cast<char*>(entry.model.eigenvalues.data()),
              static_cast<std::streamsize>(sizeof(Complex) * r));
      entry.model.modes.resize(static_cast<Index>(n), static_cast<Index>(r));
      in.read(reinterpret_cast<char*>(entry.model.modes.data()),
              static_cast<std::streamsize>(sizeof(Complex) * n * r));
      entry.model.singular_values.resize(static_cast<Index>(nsig));
      in.read(reinterpret_cast<char*>(entry.model.singular_values.data()),
              static_cast<std::streamsize>(sizeof(double) * nsig));
      if (!in) throw FormatError("truncated mode file: " + file.string());
      if (je.at("rank").get<std::uint64_t>() != r)
        throw FormatError("manifest rank disagrees with mode file");
      lib.entries.push_back(std::move(entry));
    }
    if (lib.entries.empty()) throw FormatError("library manifest lists no entries");
    return lib;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad library manifest: " + std::string(e.what()));
  }
}

}  // namespace rscope
