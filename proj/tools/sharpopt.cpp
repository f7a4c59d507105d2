// sharpopt: command-line front end for runs, sweeps and analysis.
//
// Exit codes: 0 success, 1 validation, 2 numeric failure, 3 I/O.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sharpopt/sharpopt.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kNumeric = 2;
constexpr int kIo = 3;

using namespace sharpopt;

/// Runs `body`, translating library exceptions into exit codes.
int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const RunFailure& e) {
    std::cerr << "sharpopt: numeric failure: " << e.what() << "\n";
    if (!e.partial().records.empty()) {
      const StepRecord& last = e.partial().records.back();
      std::cerr << "sharpopt: last finite record: step " << last.t << " loss "
                << format_real(last.loss) << " grad_norm " << format_real(last.grad_norm) << "\n";
    }
    return kNumeric;
  } catch (const NumericError& e) {
    std::cerr << "sharpopt: numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "sharpopt: I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const UsageError& e) {
    std::cerr << "sharpopt: invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const DomainError& e) {
    std::cerr << "sharpopt: invalid input: " << e.what() << "\n";
    return kValidation;
  }
}

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "jsonl") return OutputFormat::Jsonl;
  throw UsageError("--format must be csv or jsonl");
}

/// Writes through `write` to `path`, or stdout when empty.
void write_output(const std::string& path, const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(std::cout);
    if (!std::cout) throw std::ios_base::failure("write to stdout failed");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path + " for writing");
  write(out);
  out.close();
  if (!out) throw std::ios_base::failure("write to " + path + " failed");
}

unsigned sweep_threads() {
  if (const char* env = std::getenv("SHARPOPT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw UsageError("SHARPOPT_THREADS must be a positive integer");
  }
  return 0;
}

void print_final(const Trajectory& traj, const Objective& obj, bool toy) {
  const ParamVector& w = *traj.final_w;
  std::cerr << "final w = (";
  for (std::size_t i = 0; i < w.size(); ++i) std::cerr << (i ? ", " : "") << format_real(w[i]);
  std::cerr << ") loss = " << format_real(obj.loss(w));
  if (toy) std::cerr << " minimum = " << to_string(classify_minimum(w));
  std::cerr << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharpness-aware optimizer runs, sweeps and analysis"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Execute one configured run and emit its trajectory");
  std::string run_config, run_out, run_format;
  run_cmd->add_option("--config", run_config, "Configuration document")->required();
  run_cmd->add_option("--out", run_out, "Output path (default: [run] out, else stdout)");
  run_cmd->add_option("--format", run_format, "csv or jsonl");

  // toy
  auto* toy_cmd = app.add_subcommand("toy", "Run the 2-D toy-landscape recipe");
  double toy_gamma = 0.5;
  std::string toy_mode = "wsam", toy_out, toy_format = "csv";
  std::uint64_t toy_steps = 150;
  toy_cmd->add_option("--gamma", toy_gamma, "Sharpness weight in [0,1)")->required();
  toy_cmd->add_option("--mode", toy_mode, "sam|wsam|coupled|vanilla")
      ->check(CLI::IsMember({"sam", "wsam", "coupled", "vanilla"}));
  toy_cmd->add_option("--steps", toy_steps, "Number of steps");
  toy_cmd->add_option("--out", toy_out, "Output path (default stdout)");
  toy_cmd->add_option("--format", toy_format, "csv or jsonl");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid over gamma/rho/alpha/seed");
  std::string sweep_config, sweep_out;
  sweep_cmd->add_option("--config", sweep_config, "Configuration document with a [sweep] section")
      ->required();
  sweep_cmd->add_option("--out", sweep_out, "Output path (default stdout)");

  // eig
  auto* eig_cmd = app.add_subcommand("eig", "Dominant Hessian eigenvalue by power iteration");
  std::string eig_config, eig_at = "final";
  int eig_iters = 200;
  double eig_tol = 1e-6;
  std::uint64_t eig_seed = 0;
  eig_cmd->add_option("--config", eig_config, "Configuration document")->required();
  eig_cmd->add_option("--at", eig_at, "final|init")->check(CLI::IsMember({"final", "init"}));
  eig_cmd->add_option("--max-iters", eig_iters, "Iteration cap");
  eig_cmd->add_option("--tol", eig_tol, "Relative Rayleigh-quotient tolerance");
  eig_cmd->add_option("--seed", eig_seed, "Start-vector seed");

  // bound
  auto* bound_cmd = app.add_subcommand("bound", "Generalization bound for the weighted loss");
  GenBoundInputs bin;
  bound_cmd->add_option("--d", bin.vc_dim, "VC dimension")->required();
  bound_cmd->add_option("--m", bin.sample_count, "Training-set size")->required();
  bound_cmd->add_option("--n", bin.param_dim, "Parameter dimension")->required();
  bound_cmd->add_option("--rho", bin.rho, "Perturbation radius")->required();
  bound_cmd->add_option("--gamma", bin.gamma, "Sharpness weight")->required();
  bound_cmd->add_option("--delta", bin.delta, "Confidence parameter")->required();
  bound_cmd->add_option("--wnorm", bin.weight_norm, "||w||")->required();
  bound_cmd->add_option("--loss", bin.empirical_wsam_loss, "Empirical weighted loss")->required();

  // check-grad
  auto* check_cmd = app.add_subcommand("check-grad", "Analytic vs. central-difference gradients");
  int check_points = 20;
  std::uint64_t check_seed = 2024;
  check_cmd->add_option("--points", check_points, "Points per objective");
  check_cmd->add_option("--seed", check_seed, "Point seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  if (*run_cmd) {
    return guarded([&] {
      RunConfig cfg = parse_config_file(run_config);
      if (!run_out.empty()) cfg.out = run_out;
      if (!run_format.empty()) cfg.format = parse_format(run_format);
      const auto obj = build_objective(cfg.objective);
      const Trajectory traj = run(cfg, *obj);
      write_output(cfg.out, [&](std::ostream& out) { emit(traj, cfg.format, out); });
      print_final(traj, *obj, cfg.objective.kind == ObjectiveKind::Toy);
      return kOk;
    });
  }

  if (*toy_cmd) {
    return guarded([&] {
      const SamMode mode = config_detail::parse_mode(toy_mode, "--mode");
      RunConfig cfg = toy_recipe(mode, toy_gamma);
      cfg.steps = toy_steps;
      if (cfg.steps < 1) throw UsageError("--steps must be >= 1");
      cfg.format = parse_format(toy_format);
      const ToyLandscape toy;
      const Trajectory traj = run(cfg, toy);
      write_output(toy_out, [&](std::ostream& out) { emit(traj, cfg.format, out); });
      print_final(traj, toy, true);
      return kOk;
    });
  }

  if (*sweep_cmd) {
    return guarded([&] {
      const SweepGrid grid = parse_sweep_file(sweep_config);
      const auto rows = sweep(grid, sweep_threads());
      write_output(sweep_out, [&](std::ostream& out) { write_sweep_csv(rows, out); });
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.ok ? 0 : 1;
      std::cerr << rows.size() << " cells, " << failed << " failed\n";
      return kOk;
    });
  }

  if (*eig_cmd) {
    return guarded([&] {
      const RunConfig cfg = parse_config_file(eig_config);
      const auto obj = build_objective(cfg.objective);
      ParamVector w = initial_point(cfg, obj->dim());
      if (eig_at == "final") w = *run(cfg, *obj).final_w;
      PowerIterationOptions opt;
      opt.max_iters = eig_iters;
      opt.tol = eig_tol;
      opt.seed = eig_seed;
      const EigEstimate est = power_iteration(*obj, w, BatchSpec::full(), opt);
      std::cout << "{\"at\":\"" << eig_at << "\",\"lambda_max\":" << format_real(est.lambda_max)
                << ",\"iterations\":" << est.iterations_used
                << ",\"residual\":" << format_real(est.residual) << "}\n";
      return kOk;
    });
  }

  if (*bound_cmd) {
    return guarded([&] {
      const GenBoundTerms terms = generalization_bound_terms(bin);
      std::cout << format_real(terms.value) << "\n";
      std::cerr << "C1 = " << format_real(terms.c1) << ", C2 = " << format_real(terms.c2)
                << ", C3 = " << format_real(terms.c3) << "\n";
      return kOk;
    });
  }

  if (*check_cmd) {
    return guarded([&] {
      if (check_points < 1) throw UsageError("--points must be >= 1");
      bool all = true;
      for (const auto& named : builtin_objectives()) {
        const GradCheckResult r = check_gradient(named, check_points, check_seed);
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.label << " max_rel_error "
                  << format_real(r.max_rel_error) << " over " << r.points << " points\n";
        all = all && r.passed;
      }
      return all ? kOk : kNumeric;
    });
  }
  return kValidation;
}
