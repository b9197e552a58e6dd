// Command-line front end for the sensing pipeline. Every run is driven by a
// JSON config; the resolved config (defaults filled in) is copied into the
// output directory, numbers in CSV files carry 17 significant digits, and
// results are merged by placement index so the worker count never changes
// the output bytes.

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <thread>

#include "psense/config.hpp"
#include "psense/io.hpp"

namespace fs = std::filesystem;
using namespace psense;

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

void write_csv(const RunConfig& cfg, const std::string& name,
               const std::function<void(std::ostream&)>& body) {
  std::ofstream f(out_path(cfg, name), std::ios::binary);
  if (!f) throw std::invalid_argument("cannot write " + out_path(cfg, name));
  body(f);
}

// run body(0..count-1) on up to `workers` threads; failures are rethrown in
// index order after every index has been attempted
void run_indexed(int count, int workers, const std::function<void(int)>& body) {
  workers = std::clamp(workers, 1, std::max(1, count));
  std::vector<std::exception_ptr> failures(count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) {
      try {
        body(i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          try {
            body(i);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

// fully pinned normal deviate (Box-Muller on the raw engine output), so that
// noisy runs replay bit-identically
double standard_normal(std::mt19937_64& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
  const double u2 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

double placement_distance(const BoundaryCurve& probe, const Placement& p) {
  const auto [nodes, normals] = detail::placed_nodes(probe, p.z, p.orientation);
  (void)normals;
  double rmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nodes.cols(); ++i) rmin = std::min(rmin, nodes.col(i).norm());
  return rmin;
}

// separation precondition: every placement must keep the probe boundary at
// least C1 = floor_factor * diam(D2) away from the hidden particle's origin
double check_regime(const RunConfig& cfg, const BoundaryCurve& probe,
                    const std::vector<Placement>& placements) {
  const double floor = cfg.regime_floor_factor * probe.diameter();
  double worst = std::numeric_limits<double>::infinity();
  int worst_at = -1;
  for (std::size_t i = 0; i < placements.size(); ++i) {
    const double d = placement_distance(probe, placements[i]);
    if (d < worst) {
      worst = d;
      worst_at = static_cast<int>(i);
    }
  }
  std::cout << "regime: min dist(0, probe boundary) = " << g17(worst) << " over "
            << placements.size() << " placements, floor C1 = " << g17(floor) << "\n";
  if (worst < floor)
    throw regime_error("placement " + std::to_string(worst_at) + " brings the probe within " +
                       std::to_string(worst) + " of the origin, below the floor " +
                       std::to_string(floor));
  return floor;
}

const char* const kPlotScript = R"PY(#!/usr/bin/env python3
# Plots every sweep_position_*.csv next to this script and writes sweeps.png.
import csv
import glob
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
paths = sorted(glob.glob(os.path.join(here, "sweep_position_*.csv")))
if not paths:
    raise SystemExit("no sweep_position_*.csv files found")
fig, ax = plt.subplots(figsize=(8, 5))
for path in paths:
    re, m11 = [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            re.append(float(row["re_lambda"]))
            m11.append(float(row["abs_m11"]))
    ax.plot(re, m11, lw=0.8, label=os.path.basename(path))
ax.set_xlabel("Re(lambda)")
ax.set_ylabel("|M11|")
ax.set_yscale("log")
if len(paths) <= 8:
    ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(here, "sweeps.png"), dpi=150)
print("wrote", os.path.join(here, "sweeps.png"))
)PY";

// ---------------------------------------------------------------------------
// subcommands

int run_spectrum(const RunConfig& cfg) {
  const BoundaryCurve curve = cfg.d2.shape.build(cfg.d2.nodes);
  const NPSpectrum spectrum = np_spectrum(curve, cfg.d2.modes);

  write_json_file(out_path(cfg, "spectrum.json"), spectrum_to_json(spectrum));
  write_csv(cfg, "probe_boundary.csv", [&](std::ostream& f) { write_curve_csv(f, curve); });

  // closed-form comparison for an ellipse: pairs -+ q^p / 2
  std::vector<double> analytic;
  if (cfg.d2.shape.kind == "ellipse") {
    const double q = std::abs(cfg.d2.shape.a - cfg.d2.shape.b) / (cfg.d2.shape.a + cfg.d2.shape.b);
    double power = 1.0;
    while (static_cast<int>(analytic.size()) < spectrum.count()) {
      power *= q;
      analytic.push_back(-0.5 * power);
      analytic.push_back(0.5 * power);
    }
    analytic.resize(spectrum.count());
  }

  write_csv(cfg, "eigenvalues.csv", [&](std::ostream& f) {
    f << "j,lambda,analytic,abs_error\n";
    for (int j = 0; j < spectrum.count(); ++j) {
      f << (j + 1) << ',' << g17(spectrum.eigenvalues[j]) << ',';
      if (!analytic.empty())
        f << g17(analytic[j]) << ',' << g17(std::abs(spectrum.eigenvalues[j] - analytic[j]));
      else
        f << ',';
      f << '\n';
    }
  });

  std::cout << "eigenvalues of the probe (" << cfg.d2.shape.kind << ", " << cfg.d2.nodes
            << " nodes):\n";
  for (int j = 0; j < spectrum.count(); ++j) {
    std::cout << "  j=" << (j + 1) << "  " << g17(spectrum.eigenvalues[j]);
    if (!analytic.empty())
      std::cout << "  analytic " << g17(analytic[j]) << "  |error| "
                << g17(std::abs(spectrum.eigenvalues[j] - analytic[j]));
    std::cout << "\n";
  }
  std::cout << "wrote " << out_path(cfg, "spectrum.json") << "\n";
  return 0;
}

int run_cgpt(const RunConfig& cfg) {
  const BoundaryCurve curve = cfg.d1.build_scaled();
  const NpWorkspace ws = make_workspace(curve);
  const CgptSet set = cgpt_set(ws, cfg.d1.contrast, cfg.orders.tensor);

  write_json_file(out_path(cfg, "cgpt.json"), cgpt_to_json(set));
  write_csv(cfg, "hidden_boundary.csv", [&](std::ostream& f) { write_curve_csv(f, curve); });

  const Eigen::Matrix2cd m11 = set.block(1, 1);
  std::cout << "tensors of the hidden particle up to order " << set.order << " at contrast ["
            << g17(set.contrast.real()) << ", " << g17(set.contrast.imag()) << "]\n";
  std::cout << "  M11 = [" << g17(m11(0, 0).real()) << ", " << g17(m11(0, 1).real()) << "; "
            << g17(m11(1, 0).real()) << ", " << g17(m11(1, 1).real()) << "]\n";
  std::cout << "wrote " << out_path(cfg, "cgpt.json") << "\n";
  return 0;
}

int run_sweep(const RunConfig& cfg, int workers) {
  const NPSpectrum spectrum = np_spectrum(cfg.d2.shape.build(cfg.d2.nodes), cfg.d2.modes);
  const PtNumerators nums = pt_numerators(spectrum);
  std::optional<NpWorkspace> hidden;
  if (cfg.d1.shape) hidden.emplace(make_workspace(cfg.d1.build_scaled()));

  const std::vector<Placement> placements = cfg.positions.generate();
  check_regime(cfg, spectrum.curve, placements);
  const int count = static_cast<int>(placements.size());
  const int tracked = cfg.tracked_index();

  struct Outcome {
    double lambda_r = 0.0;
    double shift = 0.0;
    std::string error;
  };
  std::vector<Outcome> outcomes(count);

  run_indexed(count, workers, [&](int i) {
    const Placement& p = placements[i];
    Eigen::VectorXcd shifts = Eigen::VectorXcd::Zero(spectrum.count());
    if (hidden) {
      const Eigen::MatrixXcd r = r_jl_direct(*hidden, cfg.d1.contrast, spectrum, p.z, p.orientation);
      shifts = all_shifts(r, spectrum.eigenvalues, cfg.orders.series);
    }

    Eigen::VectorXd re(cfg.sweep.count), m11(cfg.sweep.count), m22(cfg.sweep.count);
    const double h = (cfg.sweep.re_max - cfg.sweep.re_min) / (cfg.sweep.count - 1);
    for (int k = 0; k < cfg.sweep.count; ++k) {
      re[k] = cfg.sweep.re_min + h * k;
      const Eigen::Matrix2cd m =
          coupled_pt(nums, spectrum.eigenvalues, shifts, Complex(re[k], cfg.sweep.im));
      m11[k] = std::abs(m(0, 0));
      m22[k] = std::abs(m(1, 1));
    }
    write_csv(cfg, "sweep_position_" + std::to_string(i) + ".csv",
              [&](std::ostream& f) { write_sweep_csv(f, re, cfg.sweep.im, m11, m22); });

    SweepGrid grid;
    grid.re_min = cfg.sweep.re_min;
    grid.re_max = cfg.sweep.re_max;
    grid.count = cfg.sweep.count;
    grid.im = cfg.sweep.im;
    try {
      const ResonanceSweep sweep = sweep_and_peak(nums, spectrum.eigenvalues, shifts, grid, tracked);
      outcomes[i].lambda_r = sweep.lambda_r;
      outcomes[i].shift = sweep.shift;
    } catch (const numerical_error& e) {
      outcomes[i].error = e.what();
    }
  });

  json summary = json::array();
  int failed = 0;
  for (int i = 0; i < count; ++i) {
    json entry{{"index", i},
               {"z", json::array({placements[i].z[0], placements[i].z[1]})},
               {"orientation", placements[i].orientation},
               {"j", cfg.tracked_j}};
    if (outcomes[i].error.empty()) {
      entry["lambda_r"] = outcomes[i].lambda_r;
      entry["p_j"] = outcomes[i].shift;
    } else {
      entry["error"] = outcomes[i].error;
      ++failed;
    }
    summary.push_back(std::move(entry));
    std::cout << "position " << i << ": ";
    if (outcomes[i].error.empty())
      std::cout << "lambda_r = " << g17(outcomes[i].lambda_r)
                << ", P_j = " << g17(outcomes[i].shift) << "\n";
    else
      std::cout << "peak not identified: " << outcomes[i].error << "\n";
  }
  write_json_file(out_path(cfg, "sweep_summary.json"), summary);
  write_text_file(out_path(cfg, "plot_sweeps.py"), kPlotScript);
  std::cout << "wrote " << count << " sweep tables, " << failed << " peak failures, "
            << out_path(cfg, "sweep_summary.json") << "\n";
  return 0;
}

int run_measure(const RunConfig& cfg, int workers) {
  const NPSpectrum spectrum = np_spectrum(cfg.d2.shape.build(cfg.d2.nodes), cfg.d2.modes);
  const PtNumerators nums = pt_numerators(spectrum);
  std::optional<NpWorkspace> hidden;
  if (cfg.d1.shape) hidden.emplace(make_workspace(cfg.d1.build_scaled()));

  const std::vector<Placement> placements = cfg.positions.generate();
  check_regime(cfg, spectrum.curve, placements);
  const int count = static_cast<int>(placements.size());
  const int tracked = cfg.tracked_index();

  MeasurementOptions opts;
  opts.series_order = cfg.orders.series;
  opts.sweep_count = cfg.sweep.count;
  opts.sweep_im = cfg.sweep.im;
  opts.refine_by_sweep = cfg.measurement_mode == "sweep";

  std::vector<Measurement> records(count);
  run_indexed(count, workers, [&](int i) {
    const Placement& p = placements[i];
    if (hidden) {
      records[i] = measure_at_position(*hidden, cfg.d1.contrast, spectrum, nums, p.z,
                                       p.orientation, tracked, opts);
    } else {
      const Eigen::VectorXcd none = Eigen::VectorXcd::Zero(spectrum.count());
      records[i] = measure_with_shifts(spectrum, nums, none, p.z, p.orientation, tracked, opts);
    }
    if (cfg.noise_level > 0.0) {
      std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1)));
      records[i].shift *= 1.0 + cfg.noise_level * standard_normal(rng);
      records[i].lambda_r = spectrum.eigenvalues[tracked] - records[i].shift;
    }
  });

  write_json_file(out_path(cfg, "measurements.json"), measurements_to_json(records));
  for (int i = 0; i < count; ++i)
    std::cout << "position " << i << ": lambda_r = " << g17(records[i].lambda_r)
              << ", P_j = " << g17(records[i].shift) << "\n";
  std::cout << "wrote " << out_path(cfg, "measurements.json") << " (" << count << " records)\n";
  return 0;
}

int run_recover(const RunConfig& cfg, const std::string& measurements_path) {
  const std::string path =
      measurements_path.empty() ? out_path(cfg, "measurements.json") : measurements_path;
  const std::vector<MeasurementRecord> records = measurements_from_json(read_json_file(path));

  const NPSpectrum spectrum = np_spectrum(cfg.d2.shape.build(cfg.d2.nodes), cfg.d2.modes);
  std::vector<Placement> placements;
  for (const auto& rec : records) placements.push_back({rec.z, rec.orientation});
  const double floor = check_regime(cfg, spectrum.curve, placements);

  const RecoveryResult result =
      recover_cgpt(records, spectrum, cfg.orders.recovery, cfg.d1.contrast, 1e-3, floor);

  // validation mode: with the true hidden shape configured, report the
  // stage-by-stage distance to its directly computed tensors
  std::optional<std::vector<double>> truth_errors;
  if (cfg.d1.shape) {
    const CgptSet direct =
        cgpt_set(make_workspace(cfg.d1.build_scaled()), cfg.d1.contrast, cfg.orders.recovery);
    truth_errors.emplace();
    for (const CgptSet& stage : result.stages) {
      double num = 0.0, den = 0.0;
      for (const auto& [key, est] : stage.blocks) {
        const Eigen::Matrix2cd& ref = direct.block(key.first, key.second);
        num += (est - ref).squaredNorm();
        den += ref.squaredNorm();
      }
      truth_errors->push_back(std::sqrt(num / den));
    }
  }

  write_json_file(out_path(cfg, "recovered_cgpt.json"), cgpt_to_json(result.final_set()));
  write_csv(cfg, "stage_report.csv", [&](std::ostream& f) {
    write_stage_report_csv(f, result.reports, truth_errors ? &*truth_errors : nullptr);
  });

  std::cout << "stage  rows  rank  residual";
  if (truth_errors) std::cout << "  rel_error_vs_direct";
  std::cout << "\n";
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const StageReport& rep = result.reports[i];
    std::cout << "  " << rep.order << "    " << rep.rows << "    " << rep.rank << "    "
              << g17(rep.residual);
    if (truth_errors) std::cout << "  " << g17((*truth_errors)[i]);
    std::cout << "\n";
  }
  std::cout << "wrote " << out_path(cfg, "recovered_cgpt.json") << "\n";
  return 0;
}

int run_reconstruct(const RunConfig& cfg, const std::string& cgpt_path) {
  const std::string path = cgpt_path.empty() ? out_path(cfg, "recovered_cgpt.json") : cgpt_path;
  const CgptSet target_set = cgpt_from_json(read_json_file(path));
  if (std::abs(target_set.contrast.imag()) > 1e-12)
    throw std::invalid_argument("shape reconstruction needs a real contrast label");
  const double lambda = target_set.contrast.real();
  const int order = target_set.order;
  const HarmonicSums target = harmonic_sums(target_set, order);

  const EquivalentEllipse ellipse =
      equivalent_ellipse(target_set.block(1, 1).real(), lambda);
  const int modes = order + cfg.descent.extra_modes;
  ShapeIterate init;
  init.profile = ellipse_radial_fourier(ellipse.a, ellipse.b, ellipse.angle, modes);
  std::cout << "equivalent ellipse init: a = " << g17(ellipse.a) << ", b = " << g17(ellipse.b)
            << ", angle = " << g17(ellipse.angle) << "\n";

  const std::set<int> marks(cfg.descent.checkpoints.begin(), cfg.descent.checkpoints.end());
  DescentOptions opts;
  opts.nodes = cfg.descent.nodes;
  opts.max_iters = cfg.descent.max_iters;
  opts.step0 = cfg.descent.step0;
  opts.extra_modes = cfg.descent.extra_modes;
  opts.observer = [&](int iter, const ShapeIterate& shape, double) {
    if (!marks.count(iter)) return;
    const BoundaryCurve curve = make_fourier_shape(shape.profile, shape.center, cfg.descent.nodes);
    write_csv(cfg, "shape_iter_" + std::to_string(iter) + ".csv",
              [&](std::ostream& f) { write_curve_csv(f, curve); });
  };

  const DescentResult result = descend_shape(target, init, Complex(lambda, 0.0), order, opts);

  write_csv(cfg, "descent_log.csv",
            [&](std::ostream& f) { write_descent_log_csv(f, result.jc_history, result.step_history); });
  write_json_file(out_path(cfg, "final_shape.json"),
                  shape_to_json(result.shape.profile, result.shape.center));
  const BoundaryCurve final_curve =
      make_fourier_shape(result.shape.profile, result.shape.center, cfg.descent.nodes);
  write_csv(cfg, "final_shape.csv", [&](std::ostream& f) { write_curve_csv(f, final_curve); });

  const double front = result.jc_history.front();
  const double back = result.jc_history.back();
  std::cout << "descent: " << result.iterations << " accepted steps, objective "
            << g17(front) << " -> " << g17(back);
  if (front > 0.0) std::cout << " (ratio " << g17(back / front) << ")";
  std::cout << "\n";
  std::cout << "wrote " << out_path(cfg, "final_shape.json") << "\n";
  if (result.stalled)
    throw descent_stall_error("line search stalled after " + std::to_string(result.iterations) +
                              " accepted steps; last iterate saved");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-particle resonance sensing toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, measurements_path, cgpt_path;
  int workers = 1;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "run configuration (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--workers", workers, "worker threads for independent placements")
      ->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "noise seed (overrides the config)");

  auto* spectrum_cmd = app.add_subcommand("spectrum", "eigenvalues of the resonant probe");
  auto* cgpt_cmd = app.add_subcommand("cgpt", "polarization tensors of the hidden particle");
  auto* sweep_cmd = app.add_subcommand("sweep", "resonance sweep at every placement");
  auto* measure_cmd = app.add_subcommand("measure", "simulated shift measurements");
  auto* recover_cmd = app.add_subcommand("recover", "staged tensor recovery from measurements");
  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "shape reconstruction from tensors");
  recover_cmd->add_option("measurements", measurements_path,
                          "measurement records (default <out>/measurements.json)");
  reconstruct_cmd->add_option("tensors", cgpt_path,
                              "tensor set (default <out>/recovered_cgpt.json)");
  for (CLI::App* sub : {spectrum_cmd, cgpt_cmd, sweep_cmd, measure_cmd, recover_cmd,
                        reconstruct_cmd})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg = RunConfig::parse(read_json_file(config_path));
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_opt->count() > 0) cfg.seed = seed;
    fs::create_directories(cfg.output_dir);
    write_json_file(out_path(cfg, "config_resolved.json"), cfg.to_json());

    if (spectrum_cmd->parsed()) return run_spectrum(cfg);
    if (cgpt_cmd->parsed()) return run_cgpt(cfg);
    if (sweep_cmd->parsed()) return run_sweep(cfg, workers);
    if (measure_cmd->parsed()) return run_measure(cfg, workers);
    if (recover_cmd->parsed()) return run_recover(cfg, measurements_path);
    return run_reconstruct(cfg, cgpt_path);
  } catch (const regime_error& e) {
    std::cerr << "regime error: " << e.what() << "\n";
    return 4;
  } catch (const numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
