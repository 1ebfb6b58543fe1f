// rscope: regime-library sensing and classification toolkit.
//
// Offline phase: synth (or your own data) -> build-lib.
// Online phase: observe / classify / reconstruct against the library,
// metrics / confusion / mu-b-sweep / sweep for diagnostics.
//
// All outputs are deterministic for a fixed seed: rerunning a command
// with identical flags reproduces identical bytes. RSCOPE_THREADS caps
// worker threads without changing any result.

#include "rscope/csv.hpp"
#include "rscope/metrics.hpp"
#include "rscope/synthgen.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rscope;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Synthetic data directories: manifest.json plus one .rsnp per split.
// ---------------------------------------------------------------------------

struct DataDir {
  double train_fraction = 1.0;
  std::vector<Dataset> train;
  std::vector<Dataset> test;
};

void write_data_dir(const fs::path& dir, const SuiteData& data,
                    double train_fraction) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "rscope-suite-data";
  manifest["version"] = 1;
  manifest["train_fraction"] = train_fraction;
  manifest["entries"] = json::array();
  for (std::size_t k = 0; k < data.train.size(); ++k) {
    char train_name[32], test_name[32];
    std::snprintf(train_name, sizeof(train_name), "train_%03zu.rsnp", k);
    std::snprintf(test_name, sizeof(test_name), "test_%03zu.rsnp", k);
    json entry;
    entry["label"] = data.train[k].label;
    entry["parameter"] = data.train[k].parameter;
    entry["train"] = train_name;
    write_snapshot(dir / train_name, data.train[k].snapshots);
    if (k < data.test.size()) {
      entry["test"] = test_name;
      write_snapshot(dir / test_name, data.test[k].snapshots);
    }
    manifest["entries"].push_back(std::move(entry));
  }
  std::ofstream out(dir / "manifest.json");
  if (!out)
    throw ArgumentError("cannot open for writing: " +
                        (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
  if (!out) throw FormatError("data manifest write failed");
}

DataDir read_data_dir(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in)
    throw ArgumentError("cannot open: " + (dir / "manifest.json").string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("bad data manifest: " + std::string(e.what()));
  }
  try {
    if (manifest.at("format").get<std::string>() != "rscope-suite-data")
      throw FormatError("not a data directory manifest");
    if (manifest.at("version").get<std::uint64_t>() != 1)
      throw FormatError("unsupported data directory version");
    DataDir out;
    out.train_fraction = manifest.at("train_fraction").get<double>();
    for (const auto& entry : manifest.at("entries")) {
      const std::string label = entry.at("label").get<std::string>();
      const double parameter = entry.at("parameter").get<double>();
      out.train.push_back(
          {label, parameter,
           read_snapshot(dir / entry.at("train").get<std::string>())});
      if (entry.contains("test"))
        out.test.push_back(
            {label, parameter,
             read_snapshot(dir / entry.at("test").get<std::string>())});
    }
    if (out.train.empty()) throw FormatError("data manifest lists no entries");
    return out;
  } catch (const json::exception& e) {
    throw FormatError("bad data manifest: " + std::string(e.what()));
  }
}

const std::vector<Dataset>& pick_split(const DataDir& data,
                                       const std::string& split) {
  if (split == "train") return data.train;
  if (split == "test") {
    if (data.test.empty())
      throw ArgumentError("data directory has no test split");
    return data.test;
  }
  throw ArgumentError("split must be 'train' or 'test'");
}

const Dataset& pick_regime(const std::vector<Dataset>& sets,
                           const std::string& label) {
  for (const Dataset& d : sets)
    if (d.label == label) return d;
  throw ArgumentError("no regime labeled '" + label + "' in the data");
}

// ---------------------------------------------------------------------------
// Sensing construction from flags or a JSON config file.
// ---------------------------------------------------------------------------

struct SensingFlags {
  std::string kind = "point";
  Index p = 0;
  Index pt = 0;
  Index pv = 0;
  std::string config_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--sensing", kind,
                    "point|boundary|gaussian|bernoulli|identity|tomographic")
        ->capture_default_str();
    cmd->add_option("--p", p, "sensor count (non-boundary kinds)");
    cmd->add_option("--pt", pt,
                    "boundary sensors on the T field (domain boundary)");
    cmd->add_option("--pv", pv,
                    "boundary sensors on velocity fields (one layer inside)");
    cmd->add_option("--sensing-config", config_file,
                    "JSON sensing config; overrides the other sensing flags");
  }
};

SensingConfig sensing_from_json(const fs::path& path, Index n,
                                const std::optional<FieldGrid>& grid,
                                std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad sensing config: " + std::string(e.what()));
  }
  try {
    SensingConfig cfg;
    cfg.kind = sensing_kind_from_string(j.at("kind").get<std::string>());
    cfg.n = n;
    cfg.grid = grid;
    cfg.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : seed;
    if (j.contains("p")) cfg.p = static_cast<Index>(j.at("p").get<std::uint64_t>());
    if (j.contains("indices"))
      for (const auto& idx : j.at("indices"))
        cfg.indices.push_back(static_cast<Index>(idx.get<std::uint64_t>()));
    if (j.contains("groups"))
      for (const auto& jg : j.at("groups")) {
        SensorGroup group;
        group.fields = jg.at("fields").get<std::vector<std::string>>();
        group.count = jg.at("count").get<int>();
        group.offset = jg.contains("offset") ? jg.at("offset").get<int>() : 0;
        cfg.groups.push_back(std::move(group));
      }
    return cfg;
  } catch (const json::exception& e) {
    throw FormatError("bad sensing config: " + std::string(e.what()));
  }
}

// Boundary groups from --pt/--pv: the T field (or the sole field) is
// sensed on the boundary itself, every other field one layer inside.
std::vector<SensorGroup> boundary_groups(const FieldGrid& grid, Index pt,
                                         Index pv) {
  std::vector<std::string> t_fields, v_fields;
  for (const std::string& f : grid.fields)
    (f == "T" ? t_fields : v_fields).push_back(f);
  if (grid.fields.size() == 1) {
    t_fields = {grid.fields.front()};
    v_fields = {grid.fields.front()};
  }
  std::vector<SensorGroup> groups;
  if (pt > 0) {
    if (t_fields.empty())
      throw ArgumentError("--pt given but the grid has no T field");
    groups.push_back({t_fields, static_cast<int>(pt), 0});
  }
  if (pv > 0) {
    if (v_fields.empty())
      throw ArgumentError("--pv given but the grid has only a T field");
    groups.push_back({v_fields, static_cast<int>(pv), 1});
  }
  if (groups.empty())
    throw ArgumentError("boundary sensing needs --pt and/or --pv");
  return groups;
}

SensingOperator build_sensing(const SensingFlags& flags, Index n,
                              const std::optional<FieldGrid>& grid,
                              std::uint64_t seed) {
  if (!flags.config_file.empty())
    return make_sensing(sensing_from_json(flags.config_file, n, grid, seed));
  SensingConfig cfg;
  cfg.kind = sensing_kind_from_string(flags.kind);
  cfg.n = n;
  cfg.grid = grid;
  cfg.seed = seed;
  switch (cfg.kind) {
    case SensingKind::Identity:
      cfg.p = n;
      break;
    case SensingKind::Boundary: {
      if (!grid)
        throw ArgumentError("boundary sensing needs grid metadata in the library");
      cfg.groups = boundary_groups(*grid, flags.pt, flags.pv);
      break;
    }
    default:
      if (flags.p < 1)
        throw ArgumentError("--p is required for kind '" + flags.kind + "'");
      cfg.p = flags.p;
      break;
  }
  return make_sensing(cfg);
}

// Seed streams per purpose, so e.g. adding noise does not move sensors.
std::uint64_t sensing_seed(std::uint64_t seed) { return mix64(seed, 1); }
std::uint64_t noise_seed(std::uint64_t seed) { return mix64(seed, 2); }
std::uint64_t trial_seed(std::uint64_t seed) { return mix64(seed, 3); }

std::string yesno(bool v) { return v ? "yes" : "no"; }

void metric_csv(const fs::path& path, const MetricMatrix& m) {
  CsvWriter csv(path);
  std::vector<std::string> header = {to_string(m.kind)};
  header.insert(header.end(), m.col_labels.begin(), m.col_labels.end());
  csv.row(header);
  for (Index i = 0; i < m.values.rows(); ++i) {
    std::vector<std::string> row = {m.labels[static_cast<std::size_t>(i)]};
    for (Index j = 0; j < m.values.cols(); ++j)
      row.push_back(format_double(m.values(i, j)));
    csv.row(row);
  }
}

std::vector<int> parse_int_list(const std::string& text,
                                const std::string& flag) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ArgumentError(flag + ": bad integer list entry '" + item + "'");
    }
    pos = comma + 1;
    if (comma == text.size()) break;
  }
  if (out.empty()) throw ArgumentError(flag + ": empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ArgumentError(flag + ": bad numeric list entry '" + item + "'");
    }
    pos = comma + 1;
    if (comma == text.size()) break;
  }
  if (out.empty()) throw ArgumentError(flag + ": empty list");
  return out;
}

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

void cmd_synth(const std::string& suite_file, const std::string& out_dir) {
  const SuiteSpec suite =
      suite_file.empty() ? default_suite() : load_suite(suite_file);
  const SuiteData data = gen_suite(suite);
  write_data_dir(out_dir, data, suite.train_fraction);
  std::cout << "wrote " << data.train.size() << " regimes ("
            << (data.test.empty() ? "no test split" : "train + test splits")
            << ") to " << out_dir << "\n";
}

void cmd_suite_template(const std::string& out_file) {
  save_suite(out_file, default_suite());
  std::cout << "wrote default suite spec to " << out_file << "\n";
}

void cmd_build_lib(const std::string& data_dir, const std::string& policy_str,
                   const std::string& out_dir) {
  const DataDir data = read_data_dir(data_dir);
  const RankPolicy policy = RankPolicy::parse(policy_str);
  const RegimeLibrary lib = build_library(data.train, policy);
  write_library(out_dir, lib);
  std::cout << "built library: " << lib.size() << " regimes, state dim "
            << lib.state_dim << "\n";
  for (const RegimeEntry& e : lib.entries)
    std::cout << "  " << e.label << ": rank " << e.model.rank << ", energy "
              << format_double(e.model.energy_captured)
              << (e.model.ill_conditioned ? " (ill-conditioned eigenbasis)" : "")
              << "\n";
}

void cmd_observe(const std::string& lib_dir, const SensingFlags& sensing,
                 int j, std::uint64_t seed, const std::string& out_file) {
  const RegimeLibrary lib = read_library(lib_dir);
  const SensingOperator C =
      build_sensing(sensing, lib.state_dim, lib.grid, sensing_seed(seed));
  const ObservedLibrary obs = observe_library(lib, C, j);
  CsvWriter csv(out_file);
  csv.row({"label", "model_rank", "observed_rank", "rank_deficient",
           "sigma_max", "sigma_min"});
  for (std::size_t k = 0; k < obs.entries.size(); ++k) {
    const ObservedRegime& reg = obs.entries[k];
    csv.row({reg.label,
             std::to_string(lib.entries[k].model.rank),
             std::to_string(reg.numerical_rank),
             yesno(reg.rank_deficient),
             format_double(reg.sigma.size() ? reg.sigma(0) : 0.0),
             format_double(reg.sigma.size() ? reg.sigma(reg.sigma.size() - 1)
                                            : 0.0)});
  }
  std::cout << "observed " << obs.size() << " regimes with p = " << C.p()
            << ", j = " << j << " -> " << out_file << "\n";
}

void cmd_classify(const std::string& lib_dir, const std::string& data_dir,
                  const std::string& split, const std::string& regime,
                  Index t0, int j, const SensingFlags& sensing,
                  std::optional<double> snr_db, std::uint64_t seed,
                  const std::string& out_file) {
  const RegimeLibrary lib = read_library(lib_dir);
  const DataDir data = read_data_dir(data_dir);
  const Dataset& source = pick_regime(pick_split(data, split), regime);
  if (source.snapshots.n() != lib.state_dim)
    throw DimensionError("data state dimension does not match the library");
  if (t0 < 0 || t0 + j + 1 > source.snapshots.s())
    throw ArgumentError("window [t0, t0+j] falls outside the data");
  const SensingOperator C =
      build_sensing(sensing, lib.state_dim, lib.grid, sensing_seed(seed));
  const ObservedLibrary obs = observe_library(lib, C, j);
  const Measurement m = measure(C, source.snapshots.data.middleCols(t0, j + 1),
                                snr_db, noise_seed(seed));
  const ClassificationReport rep = classify(obs, m);
  CsvWriter csv(out_file);
  csv.row({"label", "projection_norm", "residual", "rank_deficient", "winner"});
  for (std::size_t k = 0; k < obs.entries.size(); ++k)
    csv.row({obs.entries[k].label,
             format_double(rep.projection_norms[k]),
             format_double(rep.residuals[k]),
             yesno(rep.rank_flags[k]),
             static_cast<Index>(k) == rep.winner ? "1" : "0"});
  std::cout << "window " << regime << "[" << t0 << ".." << (t0 + j)
            << "] classified as " << rep.winner_label << " -> " << out_file
            << "\n";
}

void cmd_reconstruct(const std::string& lib_dir, const std::string& data_dir,
                     const std::string& split, const std::string& regime,
                     Index t0, int j, const SensingFlags& sensing,
                     std::optional<double> snr_db, std::uint64_t seed,
                     const std::string& fit_label,
                     const std::string& out_file,
                     const std::string& errors_file) {
  const RegimeLibrary lib = read_library(lib_dir);
  const DataDir data = read_data_dir(data_dir);
  const Dataset& source = pick_regime(pick_split(data, split), regime);
  if (source.snapshots.n() != lib.state_dim)
    throw DimensionError("data state dimension does not match the library");
  if (t0 < 0 || t0 + j + 1 > source.snapshots.s())
    throw ArgumentError("window [t0, t0+j] falls outside the data");
  const SensingOperator C =
      build_sensing(sensing, lib.state_dim, lib.grid, sensing_seed(seed));
  const ObservedLibrary obs = observe_library(lib, C, j);
  const Mat window = source.snapshots.data.middleCols(t0, j + 1);
  const Measurement m = measure(C, window, snr_db, noise_seed(seed));

  Index fit = -1;
  if (fit_label.empty()) {
    fit = classify(obs, m).winner;
  } else {
    fit = lib.find(fit_label);
    if (fit < 0)
      throw ArgumentError("no regime labeled '" + fit_label +
                          "' in the library");
  }
  const Reconstruction rec = reconstruct(lib, obs, fit, m);

  CsvWriter csv(out_file);
  for (Index i = 0; i < rec.states.rows(); ++i) {
    std::vector<std::string> row;
    for (Index c = 0; c < rec.states.cols(); ++c)
      row.push_back(format_double(rec.states(i, c)));
    csv.row(row);
  }
  const double rel_err = (rec.states - window).norm() / window.norm();
  std::cout << "reconstructed through " << lib.entries[fit].label
            << ": relative error " << format_double(rel_err)
            << ", imag residual " << format_double(rec.imag_residual) << " -> "
            << out_file << "\n";

  if (!errors_file.empty()) {
    CsvWriter ecsv(errors_file);
    ecsv.row({"label", "relative_error", "fit_regime"});
    for (Index k = 0; k < lib.size(); ++k) {
      const Reconstruction rk = reconstruct(lib, obs, k, m);
      const double err = (rk.states - window).norm() / window.norm();
      ecsv.row({lib.entries[static_cast<std::size_t>(k)].label,
                format_double(err), k == fit ? "1" : "0"});
    }
  }
}

void cmd_metrics(const std::string& lib_dir, const std::string& metric,
                 const std::string& space_str, const std::string& data_dir,
                 const std::string& split, const SensingFlags& sensing, int j,
                 std::uint64_t seed, const std::string& out_file) {
  const RegimeLibrary lib = read_library(lib_dir);
  BasisSpace space;
  if (space_str == "full")
    space = BasisSpace::Full;
  else if (space_str == "observed")
    space = BasisSpace::Observed;
  else
    throw ArgumentError("--space must be 'full' or 'observed'");

  std::vector<std::string> labels;
  for (const RegimeEntry& e : lib.entries) labels.push_back(e.label);

  std::vector<CMat> bases;
  if (space == BasisSpace::Full) {
    for (const RegimeEntry& e : lib.entries)
      bases.push_back(augment_modes(e.model.modes, e.model.eigenvalues, j));
  } else {
    const SensingOperator C =
        build_sensing(sensing, lib.state_dim, lib.grid, sensing_seed(seed));
    for (const ObservedRegime& reg : observe_library(lib, C, j).entries)
      bases.push_back(reg.theta);
  }

  if (metric == "eta") {
    metric_csv(out_file, eta_alignment(bases, space, labels).matrix);
  } else if (metric == "gamma") {
    metric_csv(out_file, gamma_matrix(bases, space, labels).matrix);
  } else if (metric == "kappa") {
    if (space != BasisSpace::Full)
      throw ArgumentError(
          "kappa compares full-state data; use --space full");
    if (data_dir.empty())
      throw ArgumentError("kappa needs --data for the snapshot energies");
    const DataDir data = read_data_dir(data_dir);
    const std::vector<Dataset>& sets = pick_split(data, split);
    std::vector<Mat> datasets;
    std::vector<std::string> data_labels;
    for (const Dataset& d : sets) {
      if (d.snapshots.n() != lib.state_dim)
        throw DimensionError("data state dimension does not match the library");
      datasets.push_back(d.snapshots.data);
      data_labels.push_back(d.label);
    }
    metric_csv(out_file,
               kappa_matrix(bases, datasets, space, labels, data_labels).matrix);
  } else {
    throw ArgumentError("--metric must be eta, gamma, or kappa");
  }
  std::cout << metric << " (" << space_str << " space) -> " << out_file << "\n";
}

void cmd_confusion(const std::string& lib_dir, const std::string& data_dir,
                   const std::string& split, const SensingFlags& sensing,
                   int j, std::optional<double> snr_db, int trials,
                   std::uint64_t seed, const std::string& out_file) {
  const RegimeLibrary lib = read_library(lib_dir);
  const DataDir data = read_data_dir(data_dir);
  const std::vector<Dataset>& sets = pick_split(data, split);
  if (static_cast<Index>(sets.size()) != lib.size())
    throw ArgumentError("data regimes do not match the library");
  std::vector<SnapshotMatrix> test_data;
  for (Index k = 0; k < lib.size(); ++k) {
    const Dataset& d = pick_regime(sets, lib.entries[static_cast<std::size_t>(k)].label);
    if (d.snapshots.n() != lib.state_dim)
      throw DimensionError("data state dimension does not match the library");
    test_data.push_back(d.snapshots);
  }
  const SensingOperator C =
      build_sensing(sensing, lib.state_dim, lib.grid, sensing_seed(seed));
  const ObservedLibrary obs = observe_library(lib, C, j);
  const Mat conf =
      confusion_matrix(obs, C, test_data, trials, snr_db, trial_seed(seed));
  CsvWriter csv(out_file);
  std::vector<std::string> header = {"true\\predicted"};
  for (const RegimeEntry& e : lib.entries) header.push_back(e.label);
  csv.row(header);
  double diag = 0.0;
  for (Index i = 0; i < conf.rows(); ++i) {
    std::vector<std::string> row = {
        lib.entries[static_cast<std::size_t>(i)].label};
    for (Index k = 0; k < conf.cols(); ++k)
      row.push_back(format_double(conf(i, k)));
    csv.row(row);
    diag += conf(i, i);
  }
  std::cout << "confusion over " << trials << " trials/regime: mean accuracy "
            << format_double(diag / conf.rows()) << "% -> " << out_file << "\n";
}

void cmd_mu_b_sweep(const std::string& lib_dir, const SensingFlags& sensing,
                    const std::string& j_list, std::uint64_t seed,
                    const std::string& out_file) {
  const RegimeLibrary lib = read_library(lib_dir);
  const SensingOperator C =
      build_sensing(sensing, lib.state_dim, lib.grid, sensing_seed(seed));
  const std::vector<int> depths = parse_int_list(j_list, "--j-list");
  CsvWriter csv(out_file);
  csv.row({"j", "mu_block", "sub_coherence", "block_rank", "total_rank",
           "bound_satisfied"});
  for (int j : depths) {
    const CoherenceReport rep = coherence_report(observe_library(lib, C, j));
    csv.row({std::to_string(j), format_double(rep.mu_block),
             format_double(rep.sub_coherence), std::to_string(rep.block_rank),
             std::to_string(rep.total_rank), yesno(rep.bound_satisfied)});
  }
  std::cout << "mu_B over j in {" << j_list << "} -> " << out_file << "\n";
}

void cmd_sweep(const std::string& lib_dir, const std::string& data_dir,
               const std::string& split, const SensingFlags& sensing,
               const std::string& p_list, const std::string& pt_list,
               const std::string& pv_list, const std::string& j_list,
               const std::string& snr_list, int trials, std::uint64_t seed,
               const std::string& out_file) {
  const RegimeLibrary lib = read_library(lib_dir);
  const DataDir data = read_data_dir(data_dir);
  const std::vector<Dataset>& sets = pick_split(data, split);
  std::vector<SnapshotMatrix> per_regime;
  for (Index k = 0; k < lib.size(); ++k)
    per_regime.push_back(
        pick_regime(sets, lib.entries[static_cast<std::size_t>(k)].label)
            .snapshots);

  const SensingKind kind = sensing_kind_from_string(sensing.kind);
  const bool boundary = kind == SensingKind::Boundary;
  // The sensor-count axis: (p) for most kinds, (pt, pv) pairs for boundary.
  std::vector<std::array<Index, 3>> counts;  // {p, pt, pv}
  if (boundary) {
    const auto pts = parse_int_list(
        pt_list.empty() ? std::to_string(sensing.pt) : pt_list, "--pt-list");
    const auto pvs = parse_int_list(
        pv_list.empty() ? std::to_string(sensing.pv) : pv_list, "--pv-list");
    for (int pt : pts)
      for (int pv : pvs) counts.push_back({Index(0), Index(pt), Index(pv)});
  } else if (kind == SensingKind::Identity) {
    counts.push_back({lib.state_dim, Index(0), Index(0)});
  } else {
    const auto ps = parse_int_list(
        p_list.empty() ? std::to_string(sensing.p) : p_list, "--p-list");
    for (int p : ps) counts.push_back({Index(p), Index(0), Index(0)});
  }
  const std::vector<int> depths = parse_int_list(j_list, "--j-list");
  const std::vector<double> snrs = parse_double_list(snr_list, "--snr-list");

  CsvWriter csv(out_file);
  csv.row({"sensing", "p", "pt", "pv", "j", "snr_db", "regime", "trials",
           "correct", "accuracy_percent"});
  std::uint64_t cell = 0;
  for (const auto& [p, pt, pv] : counts) {
    SensingFlags cell_flags = sensing;
    cell_flags.p = p;
    cell_flags.pt = pt;
    cell_flags.pv = pv;
    // One sensor layout per count setting, reused across j and snr so the
    // trends are attributable to j/snr alone.
    const SensingOperator C = build_sensing(
        cell_flags, lib.state_dim, lib.grid,
        mix64(sensing_seed(seed), static_cast<std::uint64_t>(p * 73856093 +
                                                             pt * 19349663 +
                                                             pv * 83492791)));
    for (int j : depths) {
      const ObservedLibrary obs = observe_library(lib, C, j);
      for (double snr : snrs) {
        for (Index k = 0; k < lib.size(); ++k) {
          const auto winners = run_classification_trials(
              obs, C, per_regime[static_cast<std::size_t>(k)], trials, snr,
              mix64(trial_seed(seed), cell),
              static_cast<std::uint64_t>(k) * 1000000ull);
          int correct = 0;
          for (Index w : winners) correct += w == k;
          csv.row({sensing.kind, std::to_string(p), std::to_string(pt),
                   std::to_string(pv), std::to_string(j), format_double(snr),
                   lib.entries[static_cast<std::size_t>(k)].label,
                   std::to_string(trials), std::to_string(correct),
                   format_double(100.0 * correct / trials)});
        }
        ++cell;
      }
    }
  }
  std::cout << "sweep (" << counts.size() << " sensor settings x "
            << depths.size() << " depths x " << snrs.size() << " noise levels) -> "
            << out_file << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regime-library sparse sensing toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand(
      "synth", "generate the synthetic benchmark suite (train/test data dir)");
  std::string synth_suite, synth_out;
  synth->add_option("--suite", synth_suite,
                    "suite spec JSON (defaults to the built-in benchmark)");
  synth->add_option("--out", synth_out, "output data directory")->required();

  // suite-template
  auto* tmpl = app.add_subcommand(
      "suite-template", "write the built-in benchmark suite spec as JSON");
  std::string tmpl_out;
  tmpl->add_option("--out", tmpl_out, "output JSON path")->required();

  // build-lib
  auto* build = app.add_subcommand(
      "build-lib", "decompose the train split into a regime library");
  std::string build_data, build_policy = "fixed:10", build_out;
  build->add_option("--data", build_data, "data directory from synth")
      ->required();
  build->add_option("--rank-policy", build_policy, "fixed:R or energy:T")
      ->capture_default_str();
  build->add_option("--out", build_out, "library output directory")->required();

  // observe
  auto* observe = app.add_subcommand(
      "observe", "push the library through a sensing operator, report ranks");
  std::string obs_lib, obs_out;
  SensingFlags obs_sensing;
  int obs_j = 0;
  std::uint64_t obs_seed = 0;
  observe->add_option("--library", obs_lib, "library directory")->required();
  obs_sensing.attach(observe);
  observe->add_option("--j", obs_j, "augmentation depth")->capture_default_str();
  observe->add_option("--seed", obs_seed, "seed")->capture_default_str();
  observe->add_option("--out", obs_out, "output CSV")->required();

  // classify
  auto* cls = app.add_subcommand(
      "classify", "classify one measurement window against the library");
  std::string cls_lib, cls_data, cls_split = "test", cls_regime, cls_out;
  SensingFlags cls_sensing;
  Index cls_t0 = 0;
  int cls_j = 0;
  double cls_snr = 0.0;
  std::uint64_t cls_seed = 0;
  cls->add_option("--library", cls_lib, "library directory")->required();
  cls->add_option("--data", cls_data, "data directory")->required();
  cls->add_option("--split", cls_split, "train|test")->capture_default_str();
  cls->add_option("--regime", cls_regime, "label of the window's true regime")
      ->required();
  cls->add_option("--t0", cls_t0, "window start column")->capture_default_str();
  cls->add_option("--j", cls_j, "augmentation depth")->capture_default_str();
  cls_sensing.attach(cls);
  auto* cls_snr_opt =
      cls->add_option("--snr-db", cls_snr, "noise level; omit for noiseless");
  cls->add_option("--seed", cls_seed, "seed")->capture_default_str();
  cls->add_option("--out", cls_out, "output CSV")->required();

  // reconstruct
  auto* rec = app.add_subcommand(
      "reconstruct", "estimate the full state window from sparse readings");
  std::string rec_lib, rec_data, rec_split = "test", rec_regime, rec_fit,
      rec_out, rec_errors;
  SensingFlags rec_sensing;
  Index rec_t0 = 0;
  int rec_j = 0;
  double rec_snr = 0.0;
  std::uint64_t rec_seed = 0;
  rec->add_option("--library", rec_lib, "library directory")->required();
  rec->add_option("--data", rec_data, "data directory")->required();
  rec->add_option("--split", rec_split, "train|test")->capture_default_str();
  rec->add_option("--regime", rec_regime, "label of the window's true regime")
      ->required();
  rec->add_option("--t0", rec_t0, "window start column")->capture_default_str();
  rec->add_option("--j", rec_j, "augmentation depth")->capture_default_str();
  rec_sensing.attach(rec);
  auto* rec_snr_opt =
      rec->add_option("--snr-db", rec_snr, "noise level; omit for noiseless");
  rec->add_option("--seed", rec_seed, "seed")->capture_default_str();
  rec->add_option("--fit", rec_fit,
                  "regime to reconstruct through (default: classify winner)");
  rec->add_option("--out", rec_out, "states CSV (component rows, step columns)")
      ->required();
  rec->add_option("--errors-out", rec_errors,
                  "optional CSV of relative errors through every regime");

  // metrics
  auto* met = app.add_subcommand(
      "metrics", "pairwise subspace diagnostics (eta, gamma, kappa)");
  std::string met_lib, met_metric, met_space = "full", met_data,
      met_split = "train", met_out;
  SensingFlags met_sensing;
  int met_j = 0;
  std::uint64_t met_seed = 0;
  met->add_option("--library", met_lib, "library directory")->required();
  met->add_option("--metric", met_metric, "eta|gamma|kappa")->required();
  met->add_option("--space", met_space, "full|observed")->capture_default_str();
  met->add_option("--data", met_data, "data directory (kappa only)");
  met->add_option("--split", met_split, "train|test (kappa only)")
      ->capture_default_str();
  met_sensing.attach(met);
  met->add_option("--j", met_j, "augmentation depth")->capture_default_str();
  met->add_option("--seed", met_seed, "seed")->capture_default_str();
  met->add_option("--out", met_out, "output CSV")->required();

  // confusion
  auto* conf = app.add_subcommand(
      "confusion", "Monte-Carlo confusion matrix over random windows");
  std::string conf_lib, conf_data, conf_split = "test", conf_out;
  SensingFlags conf_sensing;
  int conf_j = 0, conf_trials = 100;
  double conf_snr = 0.0;
  std::uint64_t conf_seed = 0;
  conf->add_option("--library", conf_lib, "library directory")->required();
  conf->add_option("--data", conf_data, "data directory")->required();
  conf->add_option("--split", conf_split, "train|test")->capture_default_str();
  conf_sensing.attach(conf);
  conf->add_option("--j", conf_j, "augmentation depth")->capture_default_str();
  auto* conf_snr_opt =
      conf->add_option("--snr-db", conf_snr, "noise level; omit for noiseless");
  conf->add_option("--trials", conf_trials, "trials per regime")
      ->capture_default_str();
  conf->add_option("--seed", conf_seed, "seed")->capture_default_str();
  conf->add_option("--out", conf_out, "output CSV")->required();

  // mu-b-sweep
  auto* mub = app.add_subcommand(
      "mu-b-sweep", "block coherence of the observed dictionary vs depth");
  std::string mub_lib, mub_jlist = "0,1,2,3,4,5,6,7,8,9,10", mub_out;
  SensingFlags mub_sensing;
  std::uint64_t mub_seed = 0;
  mub->add_option("--library", mub_lib, "library directory")->required();
  mub_sensing.attach(mub);
  mub->add_option("--j-list", mub_jlist, "comma-separated depths")
      ->capture_default_str();
  mub->add_option("--seed", mub_seed, "seed")->capture_default_str();
  mub->add_option("--out", mub_out, "output CSV")->required();

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep", "classification accuracy over a sensor/depth/noise grid");
  std::string sw_lib, sw_data, sw_split = "test", sw_p, sw_pt, sw_pv,
      sw_jlist, sw_snrlist, sw_out;
  SensingFlags sw_sensing;
  int sw_trials = 100;
  std::uint64_t sw_seed = 0;
  sweep->add_option("--library", sw_lib, "library directory")->required();
  sweep->add_option("--data", sw_data, "data directory")->required();
  sweep->add_option("--split", sw_split, "train|test")->capture_default_str();
  sw_sensing.attach(sweep);
  sweep->add_option("--p-list", sw_p, "sensor counts (non-boundary kinds)");
  sweep->add_option("--pt-list", sw_pt, "T sensor counts (boundary kind)");
  sweep->add_option("--pv-list", sw_pv, "velocity sensor counts (boundary kind)");
  sweep->add_option("--j-list", sw_jlist, "comma-separated depths")->required();
  sweep->add_option("--snr-list", sw_snrlist, "comma-separated SNR dB values")
      ->required();
  sweep->add_option("--trials", sw_trials, "trials per cell and regime")
      ->capture_default_str();
  sweep->add_option("--seed", sw_seed, "seed")->capture_default_str();
  sweep->add_option("--out", sw_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      cmd_synth(synth_suite, synth_out);
    } else if (*tmpl) {
      cmd_suite_template(tmpl_out);
    } else if (*build) {
      cmd_build_lib(build_data, build_policy, build_out);
    } else if (*observe) {
      cmd_observe(obs_lib, obs_sensing, obs_j, obs_seed, obs_out);
    } else if (*cls) {
      cmd_classify(cls_lib, cls_data, cls_split, cls_regime, cls_t0, cls_j,
                   cls_sensing,
                   cls_snr_opt->count() ? std::optional<double>(cls_snr)
                                        : std::nullopt,
                   cls_seed, cls_out);
    } else if (*rec) {
      cmd_reconstruct(rec_lib, rec_data, rec_split, rec_regime, rec_t0, rec_j,
                      rec_sensing,
                      rec_snr_opt->count() ? std::optional<double>(rec_snr)
                                           : std::nullopt,
                      rec_seed, rec_fit, rec_out, rec_errors);
    } else if (*met) {
      cmd_metrics(met_lib, met_metric, met_space, met_data, met_split,
                  met_sensing, met_j, met_seed, met_out);
    } else if (*conf) {
      cmd_confusion(conf_lib, conf_data, conf_split, conf_sensing, conf_j,
                    conf_snr_opt->count() ? std::optional<double>(conf_snr)
                                          : std::nullopt,
                    conf_trials, conf_seed, conf_out);
    } else if (*mub) {
      cmd_mu_b_sweep(mub_lib, mub_sensing, mub_jlist, mub_seed, mub_out);
    } else if (*sweep) {
      cmd_sweep(sw_lib, sw_data, sw_split, sw_sensing, sw_p, sw_pt, sw_pv,
                sw_jlist, sw_snrlist, sw_trials, sw_seed, sw_out);
    }
  } catch (const DimensionError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: format: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
