#pragma once

#include "rscope/library.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rscope {

/// Spectrally prescribed linear regime: x(t) = Re( sum_c phi_c lambda_c^t
/// beta_c ). Eigenvalues must be conjugate-closed so trajectories are
/// real; modes and amplitudes are drawn per conjugate group from seeded
/// streams. group_seeds, when nonempty, overrides the per-group seed
/// derivation (one entry per group) so families of regimes can share
/// selected mode vectors while keeping their own spectra.
struct LinearRegimeSpec {
  Index n = 0;
  std::vector<Complex> eigenvalues;  // conjugate-closed, |lambda| <= 1.1
  std::uint64_t mode_seed = 0;
  std::vector<std::uint64_t> group_seeds;
  Index s = 0;
  double dt = 1.0;

  bool operator==(const LinearRegimeSpec&) const = default;
};

struct LinearRegimeData {
  SnapshotMatrix snapshots;
  CMat modes;        // ground truth, unit columns, one per eigenvalue
  CVec eigenvalues;  // in spec order
  CVec amplitudes;
};

namespace detail {

// Conjugate groups in first-occurrence order: a real eigenvalue forms a
// singleton, a complex one pairs with its (required) conjugate.
struct EigenGroup {
  Index lead;                  // index of the real or Im>0 member
  std::optional<Index> pair;   // index of the conjugate partner
};

inline std::vector<EigenGroup> conjugate_groups(
    const std::vector<Complex>& ev) {
  constexpr double tol = 1e-12;
  std::vector<bool> used(ev.size(), false);
  std::vector<EigenGroup> groups;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (used[i]) continue;
    if (std::abs(ev[i]) > 1.1)
      throw ArgumentError("eigenvalue magnitude above the 1.1 validity cap");
    if (std::abs(ev[i].imag()) <= tol * std::max(1.0, std::abs(ev[i]))) {
      used[i] = true;
      groups.push_back({static_cast<Index>(i), std::nullopt});
      continue;
    }
    const Complex want = std::conj(ev[i]);
    std::size_t match = ev.size();
    for (std::size_t j = i + 1; j < ev.size(); ++j) {
      if (used[j]) continue;
      if (std::abs(ev[j] - want) <= tol * std::max(1.0, std::abs(want))) {
        match = j;
        break;
      }
    }
    if (match == ev.size())
      throw ArgumentError("eigenvalue list is not conjugate-closed");
    used[i] = used[match] = true;
    const bool i_leads = ev[i].imag() > 0.0;
    groups.push_back({static_cast<Index>(i_leads ? i : match),
                      static_cast<Index>(i_leads ? match : i)});
  }
  return groups;
}

}  // namespace detail

inline LinearRegimeData gen_linear_regime(const LinearRegimeSpec& spec) {
  if (spec.n < 1) throw ArgumentError("state dimension must be >= 1");
  if (spec.s < 2) throw ArgumentError("need at least 2 snapshots");
  if (spec.eigenvalues.empty()) throw ArgumentError("no eigenvalues given");
  if (static_cast<Index>(spec.eigenvalues.size()) > spec.n)
    throw ArgumentError("more eigenvalues than state dimensions");
  const auto groups = detail::conjugate_groups(spec.eigenvalues);
  if (!spec.group_seeds.empty() && spec.group_seeds.size() != groups.size())
    throw ArgumentError("group_seeds must list one seed per conjugate group");

  const Index r = static_cast<Index>(spec.eigenvalues.size());
  CMat modes(spec.n, r);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::uint64_t seed = spec.group_seeds.empty()
                                   ? mix64(spec.mode_seed, g + 1)
                                   : spec.group_seeds[g];
    Rng rng(seed);
    if (groups[g].pair) {
      CVec phi = rng.gaussian_cvector(spec.n);
      phi /= phi.norm();
      modes.col(groups[g].lead) = phi;
      modes.col(*groups[g].pair) = phi.conjugate();
    } else {
      const Vec v = rng.gaussian_vector(spec.n);
      modes.col(groups[g].lead) = (v / v.norm()).cast<Complex>();
    }
  }

  // Amplitudes: magnitudes in [0.5, 1.5] keep every eigencomponent
  // excited; conjugate closure keeps the trajectory real.
  Rng amp_rng(mix64(spec.mode_seed, 0x616d7073ull));
  CVec beta(r);
  for (const auto& g : groups) {
    const double mag = 0.5 + amp_rng.uniform();
    if (g.pair) {
      const double phase = 2.0 * std::numbers::pi * amp_rng.uniform();
      beta(g.lead) = std::polar(mag, phase);
      beta(*g.pair) = std::conj(beta(g.lead));
    } else {
      beta(g.lead) = Complex(amp_rng.uniform() < 0.5 ? -mag : mag, 0.0);
    }
  }

  CVec eigen(r);
  for (Index c = 0; c < r; ++c)
    eigen(c) = spec.eigenvalues[static_cast<std::size_t>(c)];

  Mat data(spec.n, spec.s);
  CVec coef = beta;
  for (Index t = 0; t < spec.s; ++t) {
    const CVec x = modes * coef;
    const double im = x.imag().norm();
    if (im > 1e-9 * std::max(1.0, x.real().norm()))
      throw NumericalError("trajectory failed to stay real; check closure");
    data.col(t) = x.real();
    coef.array() *= eigen.array();
  }
  return {SnapshotMatrix(std::move(data), spec.dt), std::move(modes),
          std::move(eigen), std::move(beta)};
}

/// Scalar transport on a periodic unit square: explicit upwind advection
/// by a uniform velocity (magnitude, angle) plus centered diffusion,
/// from a seeded smooth random initial field. Regimes are distinguished
/// by the velocity parameters.
struct AdvectionRegimeSpec {
  FieldGrid grid;  // single scalar field; nodes at i/nx (periodic)
  double velocity = 0.0;
  double angle = 0.0;
  double diffusivity = 0.0;
  Index s = 0;
  double dt = 1.0;
  std::uint64_t init_seed = 0;

  bool operator==(const AdvectionRegimeSpec&) const = default;
};

inline SnapshotMatrix gen_advection_regime(const AdvectionRegimeSpec& spec) {
  const FieldGrid& g = spec.grid;
  if (g.fields.size() != 1)
    throw ArgumentError("advection regime transports a single scalar field");
  if (g.nx < 4 || g.ny < 4)
    throw ArgumentError("advection grid needs at least 4 nodes per axis");
  if (spec.s < 2) throw ArgumentError("need at least 2 snapshots");
  if (spec.velocity < 0.0 || spec.diffusivity < 0.0)
    throw ArgumentError("velocity and diffusivity must be >= 0");
  const double h = 1.0 / g.nx;
  if (g.nx != g.ny) throw ArgumentError("advection grid must be square");
  const double vx = spec.velocity * std::cos(spec.angle);
  const double vy = spec.velocity * std::sin(spec.angle);
  // Monotonicity bound for the explicit stencil; |vx|+|vy| is what the
  // center-node coefficient sees.
  const double cfl = (std::abs(vx) + std::abs(vy)) * spec.dt / h +
                     4.0 * spec.diffusivity * spec.dt / (h * h);
  if (cfl > 0.9)
    throw ArgumentError("CFL violation: advection-diffusion number " +
                        std::to_string(cfl) + " exceeds 0.9");

  const int nx = g.nx, ny = g.ny;
  auto at = [nx](int ix, int iy) { return static_cast<Index>(iy) * nx + ix; };

  // Smooth random start: a few low-wavenumber Fourier modes.
  Rng rng(spec.init_seed);
  Vec u(g.node_count());
  struct Wave { int kx, ky; double amp, phase; };
  std::vector<Wave> waves;
  for (int m = 0; m < 6; ++m) {
    int kx = 0, ky = 0;
    while (kx == 0 && ky == 0) {
      kx = static_cast<int>(rng.uniform_index(7)) - 3;
      ky = static_cast<int>(rng.uniform_index(7)) - 3;
    }
    waves.push_back({kx, ky, (0.5 + rng.uniform()) / (m + 1),
                     2.0 * std::numbers::pi * rng.uniform()});
  }
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const double x = static_cast<double>(ix) / nx;
      const double y = static_cast<double>(iy) / ny;
      double v = 1.0;
      for (const Wave& w : waves)
        v += w.amp * std::cos(2.0 * std::numbers::pi * (w.kx * x + w.ky * y) +
                              w.phase);
      u(at(ix, iy)) = v;
    }

  Mat data(g.node_count(), spec.s);
  data.col(0) = u;
  Vec next(g.node_count());
  for (Index t = 1; t < spec.s; ++t) {
    for (int iy = 0; iy < ny; ++iy) {
      const int ym = (iy + ny - 1) % ny, yp = (iy + 1) % ny;
      for (int ix = 0; ix < nx; ++ix) {
        const int xm = (ix + nx - 1) % nx, xp = (ix + 1) % nx;
        const double c = u(at(ix, iy));
        const double dudx = vx >= 0.0 ? (c - u(at(xm, iy))) / h
                                      : (u(at(xp, iy)) - c) / h;
        const double dudy = vy >= 0.0 ? (c - u(at(ix, ym))) / h
                                      : (u(at(ix, yp)) - c) / h;
        const double lap = (u(at(xm, iy)) + u(at(xp, iy)) + u(at(ix, ym)) +
                            u(at(ix, yp)) - 4.0 * c) /
                           (h * h);
        next(at(ix, iy)) =
            c + spec.dt * (-vx * dudx - vy * dudy + spec.diffusivity * lap);
      }
    }
    u.swap(next);
    data.col(t) = u;
  }
  return SnapshotMatrix(std::move(data), spec.dt, g);
}

struct SuiteRegimeSpec {
  std::string label;
  double parameter = 0.0;
  std::variant<LinearRegimeSpec, AdvectionRegimeSpec> dynamics;

  bool operator==(const SuiteRegimeSpec&) const = default;
};

struct SuiteSpec {
  std::vector<SuiteRegimeSpec> regimes;
  double train_fraction = 0.8;
  std::optional<FieldGrid> grid;  // attached to linear-regime outputs

  bool operator==(const SuiteSpec&) const = default;
};

struct SuiteData {
  std::vector<Dataset> train;
  std::vector<Dataset> test;  // empty when train_fraction == 1
};

/// Generates every regime and splits each trajectory into disjoint
/// leading (train) and trailing (test) time ranges.
inline SuiteData gen_suite(const SuiteSpec& spec) {
  if (spec.regimes.empty()) throw ArgumentError("suite lists no regimes");
  if (!(spec.train_fraction > 0.0) || spec.train_fraction > 1.0)
    throw ArgumentError("train fraction must lie in (0, 1]");
  SuiteData out;
  for (const SuiteRegimeSpec& reg : spec.regimes) {
    SnapshotMatrix snap = [&] {
      if (const auto* lin = std::get_if<LinearRegimeSpec>(&reg.dynamics)) {
        SnapshotMatrix s = gen_linear_regime(*lin).snapshots;
        if (spec.grid) {
          if (spec.grid->state_dim() != s.n())
            throw DimensionError("suite grid does not match regime dimension");
          return SnapshotMatrix(std::move(s.data), s.dt, spec.grid, reg.label);
        }
        return SnapshotMatrix(std::move(s.data), s.dt, {}, reg.label);
      }
      const auto& adv = std::get<AdvectionRegimeSpec>(reg.dynamics);
      SnapshotMatrix s = gen_advection_regime(adv);
      return SnapshotMatrix(std::move(s.data), s.dt, s.grid, reg.label);
    }();
    const Index s_total = snap.s();
    const Index s_train = static_cast<Index>(
        std::llround(spec.train_fraction * static_cast<double>(s_total)));
    const bool with_test = spec.train_fraction < 1.0;
    if (s_train < 2 || (with_test && s_total - s_train < 2))
      throw ArgumentError("regime '" + reg.label +
                          "' has too few snapshots for the split");
    out.train.push_back(
        {reg.label, reg.parameter,
         SnapshotMatrix(snap.data.leftCols(s_train), snap.dt, snap.grid,
                        reg.label)});
    if (with_test)
      out.test.push_back(
          {reg.label, reg.parameter,
           SnapshotMatrix(snap.data.rightCols(s_total - s_train), snap.dt,
                          snap.grid, reg.label)});
  }
  return out;
}

/// The committed six-regime benchmark: 50x50 scalar field (n = 2500),
/// 200 snapshots per regime, rank-10 spectra with pairwise distinct
/// dominant frequencies. Regimes R3 and R4 share three oscillatory mode
/// pairs (distinct spectra), forming a deliberately close pair so
/// out-of-sample classification has a well-defined nearest neighbor.
inline SuiteSpec default_suite() {
  SuiteSpec suite;
  suite.train_fraction = 0.8;
  suite.grid = FieldGrid(50, 50, {"q"}, {1.0});
  const Index n = 2500, s = 200;
  const double dt = 0.1;
  for (int i = 0; i < 6; ++i) {
    const double w = 0.12 + 0.07 * i;
    LinearRegimeSpec lin;
    lin.n = n;
    lin.s = s;
    lin.dt = dt;
    lin.mode_seed = 11000 + 137 * static_cast<std::uint64_t>(i);
    lin.eigenvalues = {Complex(0.999, 0.0),
                       std::polar(0.999, w),
                       std::polar(0.999, -w),
                       std::polar(0.995, 2.1 * w),
                       std::polar(0.995, -2.1 * w),
                       std::polar(0.99, 3.3 * w),
                       std::polar(0.99, -3.3 * w),
                       std::polar(0.985, 4.6 * w),
                       std::polar(0.985, -4.6 * w),
                       Complex(0.93, 0.0)};
    if (i == 3) {
      // Share the three dominant oscillatory pairs with regime index 2.
      const std::uint64_t sibling = 11000 + 137 * 2;
      lin.group_seeds = {mix64(lin.mode_seed, 1), mix64(sibling, 2),
                         mix64(sibling, 3),       mix64(sibling, 4),
                         mix64(lin.mode_seed, 5), mix64(lin.mode_seed, 6)};
    }
    SuiteRegimeSpec reg;
    reg.label = "R" + std::to_string(i + 1);
    reg.parameter = 1e8 * (i < 3 ? 1.0 + i : 2.0 * i);
    reg.dynamics = lin;
    suite.regimes.push_back(std::move(reg));
  }
  return suite;
}

// ---------------------------------------------------------------------------
// Suite specs as JSON. Eigenvalues are [re, im] pairs; seeds are exact
// unsigned integers.
// ---------------------------------------------------------------------------

inline void save_suite(const std::filesystem::path& path,
                       const SuiteSpec& suite) {
  nlohmann::json j;
  j["format"] = "rscope-suite";
  j["version"] = 1;
  j["train_fraction"] = suite.train_fraction;
  if (suite.grid) j["grid"] = detail::grid_to_json(*suite.grid);
  j["regimes"] = nlohmann::json::array();
  for (const SuiteRegimeSpec& reg : suite.regimes) {
    nlohmann::json jr;
    jr["label"] = reg.label;
    jr["parameter"] = reg.parameter;
    if (const auto* lin = std::get_if<LinearRegimeSpec>(&reg.dynamics)) {
      jr["type"] = "linear";
      jr["n"] = static_cast<std::uint64_t>(lin->n);
      jr["s"] = static_cast<std::uint64_t>(lin->s);
      jr["dt"] = lin->dt;
      jr["mode_seed"] = lin->mode_seed;
      if (!lin->group_seeds.empty()) jr["group_seeds"] = lin->group_seeds;
      auto& ev = jr["eigenvalues"] = nlohmann::json::array();
      for (const Complex& l : lin->eigenvalues)
        ev.push_back({l.real(), l.imag()});
    } else {
      const auto& adv = std::get<AdvectionRegimeSpec>(reg.dynamics);
      jr["type"] = "advection";
      jr["grid"] = detail::grid_to_json(adv.grid);
      jr["velocity"] = adv.velocity;
      jr["angle"] = adv.angle;
      jr["diffusivity"] = adv.diffusivity;
      jr["s"] = static_cast<std::uint64_t>(adv.s);
      jr["dt"] = adv.dt;
      jr["init_seed"] = adv.init_seed;
    }
    j["regimes"].push_back(std::move(jr));
  }
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw FormatError("suite spec write failed");
}

inline SuiteSpec load_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad suite spec: " + std::string(e.what()));
  }
  try {
    if (j.at("format").get<std::string>() != "rscope-suite")
      throw FormatError("not a suite spec");
    if (j.at("version").get<std::uint64_t>() != 1)
      throw FormatError("unsupported suite spec version");
    SuiteSpec suite;
    suite.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("grid")) suite.grid = detail::grid_from_json(j.at("grid"));
    for (const auto& jr : j.at("regimes")) {
      SuiteRegimeSpec reg;
      reg.label = jr.at("label").get<std::string>();
      reg.parameter = jr.at("parameter").get<double>();
      const std::string type = jr.at("type").get<std::string>();
      if (type == "linear") {
        LinearRegimeSpec lin;
        lin.n = static_cast<Index>(jr.at("n").get<std::uint64_t>());
        lin.s = static_cast<Index>(jr.at("s").get<std::uint64_t>());
        lin.dt = jr.at("dt").get<double>();
        lin.mode_seed = jr.at("mode_seed").get<std::uint64_t>();
        if (jr.contains("group_seeds"))
          lin.group_seeds = jr.at("group_seeds").get<std::vector<std::uint64_t>>();
        for (const auto& ev : jr.at("eigenvalues"))
          lin.eigenvalues.emplace_back(ev.at(0).get<double>(),
                                       ev.at(1).get<double>());
        reg.dynamics = std::move(lin);
      } else if (type == "advection") {
        AdvectionRegimeSpec adv;
        adv.grid = detail::grid_from_json(jr.at("grid"));
        adv.velocity = jr.at("velocity").get<double>();
        adv.angle = jr.at("angle").get<double>();
        adv.diffusivity = jr.at("diffusivity").get<double>();
        adv.s = static_cast<Index>(jr.at("s").get<std::uint64_t>());
        adv.dt = jr.at("dt").get<double>();
        adv.init_seed = jr.at("init_seed").get<std::uint64_t>();
        reg.dynamics = std::move(adv);
      } else {
        throw FormatError("unknown regime type: " + type);
      }
      suite.regimes.push_back(std::move(reg));
    }
    if (suite.regimes.empty()) throw FormatError("suite spec lists no regimes");
    return suite;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad suite spec: " + std::string(e.what()));
  }
}

}  // namespace rscope
