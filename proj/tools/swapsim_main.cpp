// swapsim: batch front-end for the entanglement-swapping simulator.
//
// Subcommands run a configured experiment end to end and write plot-ready
// data files plus a JSON report.  Every report embeds the tool version and
// the fully resolved config; a fixed seed reproduces the outputs byte for
// byte.  Exit codes: 0 success, 2 config error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "swapsim/circuit.hpp"
#include "swapsim/config.hpp"
#include "swapsim/measurement.hpp"
#include "swapsim/purification.hpp"
#include "swapsim/state_algebra.hpp"
#include "swapsim/tomography.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace swapsim;

namespace {

void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

ordered_json report_header(const ExperimentConfig& cfg) {
  ordered_json j;
  j["version"] = kVersion;
  j["config"] = config_to_json(cfg);
  return j;
}

std::string subspace_tag(int a, int b) {
  auto one = [](int m) {
    return (m < 0 ? "m" + std::to_string(-m) : std::to_string(m));
  };
  return one(a) + "_" + one(b);
}

std::string col(double v) { return detail::g17(v); }

PureState two_pair_input(const ExperimentConfig& cfg) {
  SpiralSpectrum spec = cfg.spiral();
  return tensor(spdc_state(spec, Path::A, Path::B), spdc_state(spec, Path::C, Path::D));
}

// per-subspace fourfold rate, scaled so the strongest subspace runs at the
// configured peak rate
double subspace_rate(const ExperimentConfig& cfg, int a, int b) {
  SpiralSpectrum spec = cfg.spiral();
  double wmax = 0.0;
  for (auto [sa, sb] : cfg.subspaces) wmax = std::max(wmax, subspace_weight(spec, sa, sb));
  if (wmax <= 0.0) throw ConfigError("spectrum gives zero weight on every subspace");
  return cfg.peak_fourfold_rate_hz * subspace_weight(spec, a, b) / wmax;
}

struct SubspaceRun {
  int a = 0, b = 0;
  std::vector<CountRecord> records;
  ReconstructionResult recon;
  EntanglementReport report;
  bool with_bootstrap = true;
};

SubspaceRun run_subspace(const ExperimentConfig& cfg, std::size_t index, bool with_bootstrap) {
  auto [a, b] = cfg.subspaces[index];
  SubspaceRun run;
  run.a = a;
  run.b = b;
  run.with_bootstrap = with_bootstrap;

  NoiseModel noise;
  noise.visibility = cfg.visibility;
  noise.background = cfg.rates;
  noise.seed = mix_seed(cfg.seed, index);

  DensityMatrix ideal = subspace_singlet(a, b);
  run.records = simulate_counts(ideal, tomography_settings(a, b), subspace_rate(cfg, a, b),
                                cfg.duration_s, noise);
  run.recon = reconstruct(run.records, cfg.method());
  if (with_bootstrap)
    run.report = error_bars(run.records, cfg.method(), cfg.bootstrap_resamples,
                            mix_seed(cfg.seed, 1000 + index));
  return run;
}

std::vector<SubspaceRun> run_all_subspaces(const ExperimentConfig& cfg, bool with_bootstrap) {
  std::vector<std::future<SubspaceRun>> futures;
  for (std::size_t i = 0; i < cfg.subspaces.size(); ++i)
    futures.push_back(std::async(std::launch::async,
                                 [&cfg, i, with_bootstrap] { return run_subspace(cfg, i, with_bootstrap); }));
  std::vector<SubspaceRun> out;
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

ordered_json state_to_json(const PureState& s) {
  ordered_json terms = ordered_json::array();
  for (const auto& [k, amp] : s.terms) {
    ordered_json t;
    t["ket"] = k.str();
    t["amplitude"] = {amp.real(), amp.imag()};
    terms.push_back(t);
  }
  return terms;
}

// --- subcommands -----------------------------------------------------------

int cmd_swap(const ExperimentConfig& cfg, const fs::path& out_dir) {
  PureState input = two_pair_input(cfg);
  PureState after = beamsplitter_bc(input);
  PostSelectionResult ps = postselect_coincidence(after);
  DensityMatrix rho = partial_trace(ps.state, {Path::A, Path::D});
  rho.require_physical();

  // singlet weights <Psi-_ab| rho |Psi-_ab> over the mode pairs present
  std::set<int> modes;
  for (const auto& k : rho.basis)
    for (const auto& [p, l] : k.photons) modes.insert(l);
  ordered_json weights = ordered_json::array();
  for (auto it = modes.begin(); it != modes.end(); ++it)
    for (auto jt = std::next(it); jt != modes.end(); ++jt) {
      PureState psi = bell_state(*it, *jt, BellSign::minus, Path::A, Path::D);
      Complex w{0, 0};
      for (const auto& [k1, a1] : psi.terms)
        for (const auto& [k2, a2] : psi.terms) {
          int i = rho.index_of(k1), j = rho.index_of(k2);
          if (i >= 0 && j >= 0) w += std::conj(a1) * rho.mat(i, j) * a2;
        }
      if (w.real() > 1e-12)
        weights.push_back({{"modes", {*it, *jt}}, {"weight", w.real()}});
    }

  ordered_json j = report_header(cfg);
  j["post_selection_probability"] = ps.probability;
  j["normalization_k"] = ps.normalization;
  j["singlet_weights"] = weights;
  j["density_matrix"] = density_matrix_to_json(rho);
  atomic_write(out_dir / "swap_report.json", j.dump(2) + "\n");
  std::cout << "swap: post-selection probability " << ps.probability << ", "
            << weights.size() << " singlet components\n";
  return 0;
}

int cmd_tomography(const ExperimentConfig& cfg, const fs::path& out_dir) {
  auto runs = run_all_subspaces(cfg, true);

  ordered_json rows = ordered_json::array();
  for (const auto& run : runs) {
    std::string tag = subspace_tag(run.a, run.b);
    std::ostringstream counts;
    counts << "# swapsim " << kVersion << " counts for subspace (" << run.a << "," << run.b
           << ")\n";
    write_count_records(counts, run.records);
    atomic_write(out_dir / ("counts_" + tag + ".txt"), counts.str());

    atomic_write(out_dir / ("rho_" + tag + ".json"),
                 density_matrix_to_json(run.recon.rho).dump(2) + "\n");

    double total = 0.0;
    for (const auto& r : run.records) total += r.fourfold_raw;
    ordered_json row;
    row["subspace"] = {run.a, run.b};
    row["fidelity"] = run.report.fidelity_to_singlet;
    row["fidelity_err"] = run.report.fidelity_err;
    row["concurrence"] = run.report.concurrence;
    row["concurrence_err"] = run.report.concurrence_err;
    row["total_raw_counts"] = total;
    row["log_likelihood"] = run.recon.log_likelihood;
    row["iterations"] = run.recon.iterations;
    row["converged"] = run.recon.converged;
    rows.push_back(row);
  }

  ordered_json j = report_header(cfg);
  j["method"] = cfg.reconstruction_method;
  j["subspaces"] = rows;
  atomic_write(out_dir / "tomography_report.json", j.dump(2) + "\n");

  for (const auto& row : rows)
    std::cout << "tomography (" << row["subspace"][0] << "," << row["subspace"][1]
              << "): F = " << row["fidelity"] << " +/- " << row["fidelity_err"]
              << ", C = " << row["concurrence"] << " +/- " << row["concurrence_err"] << "\n";
  return 0;
}

int cmd_sweep_visibility(const ExperimentConfig& cfg, const fs::path& out_dir) {
  std::vector<double> grid = cfg.visibility_grid;
  if (grid.empty())
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);

  struct Point {
    double v, analytic, simulated, err;
  };
  auto eval_point = [&cfg](std::size_t i, double v) {
    ExperimentConfig local = cfg;
    local.visibility = v;
    local.subspaces = {{-1, 1}};
    local.seed = mix_seed(cfg.seed, 5000 + i);
    SubspaceRun run = run_subspace(local, 0, true);
    return Point{v, fidelity_vs_visibility(v), run.report.fidelity_to_singlet,
                 run.report.fidelity_err};
  };
  std::vector<std::future<Point>> futures;
  for (std::size_t i = 0; i < grid.size(); ++i)
    futures.push_back(std::async(std::launch::async, eval_point, i, grid[i]));

  std::ostringstream tsv;
  tsv << "# swapsim " << kVersion << " fidelity vs visibility\n";
  tsv << "# columns: visibility fidelity_analytic fidelity_simulated fidelity_err\n";
  ordered_json points = ordered_json::array();
  for (auto& f : futures) {
    Point p = f.get();
    tsv << col(p.v) << '\t' << col(p.analytic) << '\t' << col(p.simulated) << '\t' << col(p.err)
        << '\n';
    points.push_back({{"visibility", p.v},
                      {"fidelity_analytic", p.analytic},
                      {"fidelity_simulated", p.simulated},
                      {"fidelity_err", p.err}});
  }
  atomic_write(out_dir / "visibility_curve.tsv", tsv.str());

  ordered_json j = report_header(cfg);
  j["points"] = points;
  atomic_write(out_dir / "sweep_report.json", j.dump(2) + "\n");
  std::cout << "sweep-visibility: " << grid.size() << " grid points written\n";
  return 0;
}

int cmd_hom_scan(const ExperimentConfig& cfg, const fs::path& out_dir) {
  std::vector<double> pos;
  for (int i = 0; i < cfg.hom.points; ++i)
    pos.push_back(cfg.hom.scan_min_um + (cfg.hom.scan_max_um - cfg.hom.scan_min_um) * i /
                                            (cfg.hom.points - 1));
  auto counts = simulate_hom_scan(pos, cfg.hom.center_um, cfg.hom.width_um, cfg.visibility,
                                  cfg.hom.baseline_rate_hz, cfg.hom.dwell_s, cfg.seed);
  HomFit fit = fit_hom_dip(pos, counts, cfg.hom.dwell_s);
  if (!fit.converged) throw std::runtime_error("hom-scan: fit did not converge");

  std::ostringstream tsv;
  tsv << "# swapsim " << kVersion << " Hong-Ou-Mandel scan\n";
  tsv << "# columns: position_um fourfold_counts fitted_counts\n";
  for (std::size_t i = 0; i < pos.size(); ++i) {
    double fitted = cfg.hom.dwell_s * hom_dip_model(pos[i], fit.center_um, fit.width_um,
                                                    fit.visibility, fit.baseline_rate_hz);
    tsv << col(pos[i]) << '\t' << col(counts[i]) << '\t' << col(fitted) << '\n';
  }
  atomic_write(out_dir / "hom_scan.tsv", tsv.str());

  ordered_json j = report_header(cfg);
  j["fit"] = {{"center_um", fit.center_um},
              {"center_err_um", fit.center_err},
              {"width_um", fit.width_um},
              {"width_err_um", fit.width_err},
              {"visibility", fit.visibility},
              {"visibility_err", fit.visibility_err},
              {"baseline_rate_hz", fit.baseline_rate_hz},
              {"baseline_err_hz", fit.baseline_err},
              {"iterations", fit.iterations},
              {"residual_sum_sq", fit.residual_sum_sq}};
  atomic_write(out_dir / "hom_report.json", j.dump(2) + "\n");
  std::cout << "hom-scan: center " << fit.center_um << " um, visibility " << fit.visibility
            << "\n";
  return 0;
}

int cmd_assemble4d(const ExperimentConfig& cfg, const fs::path& out_dir) {
  if (cfg.truncation < 2)
    throw ConfigError("assemble4d needs truncation >= 2 (the four-mode space)");

  std::map<std::pair<int, int>, DensityMatrix> inputs;
  if (!cfg.matrix_files.empty()) {
    if (cfg.matrix_files.size() != 6)
      throw ConfigError("assemble4d.matrix_files must list exactly six files");
    for (const auto& file : cfg.matrix_files) {
      std::ifstream in(file);
      if (!in) throw ConfigError("assemble4d: cannot open matrix file " + file);
      nlohmann::json mj;
      try {
        in >> mj;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("assemble4d: bad matrix file " + file + ": " + e.what());
      }
      DensityMatrix rho = density_matrix_from_json(mj);
      std::set<int> modes;
      for (const auto& k : rho.basis)
        for (const auto& [p, l] : k.photons) modes.insert(l);
      if (modes.size() != 2 || rho.dim() != 4)
        throw ConfigError("assemble4d: matrix file " + file + " is not a two-mode subspace");
      int lo = *modes.begin(), hi = *std::next(modes.begin());
      inputs[{lo, hi}] = rho;
    }
  } else {
    ExperimentConfig local = cfg;
    local.subspaces = four_mode_subspaces();
    auto runs = run_all_subspaces(local, false);
    for (const auto& run : runs) inputs[{run.a, run.b}] = run.recon.rho;
  }

  SpiralSpectrum spec = cfg.spiral();
  Assembled4D assembled = assemble_4d(inputs, spec);
  assembled.rho.require_physical();
  DensityMatrix prediction = swap_mixture_prediction(spec);
  double f_support = fidelity_on_support(assembled.rho, prediction);
  double f_plain = fidelity(assembled.rho, prediction);

  atomic_write(out_dir / "assembled_4d.json",
               density_matrix_to_json(assembled.rho, &assembled.measured).dump(2) + "\n");

  ordered_json j = report_header(cfg);
  j["fidelity_to_prediction"] = f_support;
  j["fidelity_to_prediction_full_matrix"] = f_plain;
  j["prediction"] = density_matrix_to_json(prediction);
  atomic_write(out_dir / "assemble_report.json", j.dump(2) + "\n");
  std::cout << "assemble4d: fidelity to prediction " << f_support << " (support-restricted), "
            << f_plain << " (full matrix)\n";
  return 0;
}

int cmd_purify(const ExperimentConfig& cfg, const fs::path& out_dir) {
  PureState input = two_pair_input(cfg);
  PostSelectionResult ps = postselect_coincidence(beamsplitter_bc(input));

  FilterSpec filter = cfg.purify.filter == "x"
                          ? x_filter(cfg.purify.levels)
                          : singlet_filter(cfg.purify.mode_a, cfg.purify.mode_b);
  FilterResult out = apply_filter(ps.state, filter);

  DensityMatrix ad_rho = pure_density(out.ad_state);
  double pur = purity(ad_rho);
  int components = singlet_component_count(out.ad_state);
  int rank = schmidt_rank(out.ad_state, {Path::A}, {Path::D});

  ordered_json j = report_header(cfg);
  j["filter"] = cfg.purify.filter;
  if (cfg.purify.filter == "x")
    j["filter_levels"] = cfg.purify.levels;
  else
    j["filter_modes"] = {cfg.purify.mode_a, cfg.purify.mode_b};
  j["success_probability"] = out.success_probability;
  j["purity"] = pur;
  j["singlet_components"] = components;
  j["schmidt_rank_ad"] = rank;
  j["ad_state"] = state_to_json(out.ad_state);
  atomic_write(out_dir / "purify_report.json", j.dump(2) + "\n");
  std::cout << "purify: purity " << pur << ", " << components
            << " singlet components, success probability " << out.success_probability << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swapsim: entanglement-swapping simulator for OAM photon pairs"};
  app.set_version_flag("--version", std::string("swapsim ") + kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool have_seed_override = false;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"swap", "analytic swapped state and post-selection probability"},
      {"tomography", "simulate counts and reconstruct every configured subspace"},
      {"sweep-visibility", "fidelity vs visibility curve, analytic and simulated"},
      {"hom-scan", "synthesize and fit a Hong-Ou-Mandel dip scan"},
      {"assemble4d", "assemble the four-dimensional state from six subspaces"},
      {"purify", "apply a BC filter and report the purified A-D state"}};

  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "path to the JSON config")->required();
    sub->add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { have_seed_override = true; });
    sub->add_option("--out", out_override, "override the config output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (have_seed_override) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.output_dir = out_override;
    cfg.validate();

    fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);

    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "swap") return cmd_swap(cfg, out_dir);
    if (sub == "tomography") return cmd_tomography(cfg, out_dir);
    if (sub == "sweep-visibility") return cmd_sweep_visibility(cfg, out_dir);
    if (sub == "hom-scan") return cmd_hom_scan(cfg, out_dir);
    if (sub == "assemble4d") return cmd_assemble4d(cfg, out_dir);
    if (sub == "purify") return cmd_purify(cfg, out_dir);
    std::cerr << "swapsim: unknown subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "swapsim: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "swapsim: " << e.what() << "\n";
    return 3;
  }
}
