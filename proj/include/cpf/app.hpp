// Batch commands behind the cpf CLI: simulate, steady, sweep, verify.
// Each returns a process exit code (0 success, 1 solver/invariant failure,
// 2 configuration error) and writes its artifacts under an output directory.
#pragma once

#include "cpf/io.hpp"
#include "cpf/run.hpp"
#include "cpf/steady.hpp"
#include "cpf/verify.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <ostream>
#include <thread>
#include <vector>

namespace cpf {

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2 };

struct CommandContext {
  std::filesystem::path out_dir;
  bool quiet = false;
  std::ostream* log = &std::cout;
  std::ostream* err = &std::cerr;
};

struct SimulateOutcome {
  int status = exit_ok;
  RunSummary summary;
};

inline std::string snapshot_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshot_%06zu.txt", step);
  return buf;
}

/// Runs the configured simulation; writes ledger.csv, snapshots and summary.txt.
inline SimulateOutcome simulate(const RunConfig& cfg, const CommandContext& ctx) {
  SimulateOutcome out;
  try {
    namespace fs = std::filesystem;
    fs::create_directories(ctx.out_dir);
    const ModelFunctions model = make_model(cfg.model);
    const State s0 = make_initial_state(cfg);
    write_text_file(ctx.out_dir / snapshot_name(0), format_snapshot(s0, 0.0));

    Stepper stepper(s0.grid(), cfg.stepper, model);
    RunOptions opt;
    opt.convergence_tol = cfg.run.convergence_tol;
    opt.convergence_window = cfg.run.convergence_window;
    std::size_t count = 0;
    const auto observer = [&](double t, const StepResult& r) {
      ++count;
      if (cfg.run.snapshot_every > 0 && count % static_cast<std::size_t>(cfg.run.snapshot_every) == 0)
        write_text_file(ctx.out_dir / snapshot_name(count), format_snapshot(r.state, t));
      return true;
    };
    out.summary = run(s0, cfg.run.t_end, stepper, observer, opt);
    const RunSummary& s = out.summary;
    write_text_file(ctx.out_dir / "final.txt", format_snapshot(s.final_state, s.t));
    write_text_file(ctx.out_dir / "ledger.csv", format_ledger_csv(s.ledger, cfg.run.ledger_every));

    const bool band_flag = cfg.run.kappa_star > 0.0 && s.ledger.violates_band(cfg.run.kappa_star);
    std::string summary;
    summary += "t_final=" + format_double(s.t) + "\n";
    summary += "steps=" + std::to_string(s.steps) + "\n";
    summary += "converged=" + std::string(s.converged ? "true" : "false") + "\n";
    summary += "kappa=" + format_double(s.ledger.kappa()) + "\n";
    summary += "h3_band_violated=" + std::string(band_flag ? "true" : "false") + "\n";
    summary += "seed=" + std::to_string(cfg.initial.seed) + "\n";
    write_text_file(ctx.out_dir / "summary.txt", summary);
    if (!ctx.quiet) {
      const LedgerRow& last = s.ledger.back();
      *ctx.log << "simulate: " << s.steps << " steps to t=" << brief(s.t)
               << (s.converged ? " (equilibrated)" : "") << ", energy " << brief(last.energy)
               << ", identity residual " << brief(last.identity_residual) << ", kappa "
               << brief(s.ledger.kappa()) << (band_flag ? " [H3 band violated]" : "") << "\n";
    }
  } catch (const ConfigError& e) {
    *ctx.err << "config error: " << e.what() << "\n";
    out.status = exit_config;
  } catch (const SolverError& e) {
    *ctx.err << "solver failure: " << e.what() << "\n";
    out.status = exit_failure;
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << "\n";
    out.status = exit_failure;
  }
  return out;
}

struct SteadyOutcome {
  int status = exit_ok;
  SteadyState state;
  double indicator = 0.0;
};

/// Solves for the stationary state with the configured (or initial-data) constraints.
inline SteadyOutcome steady_command(const RunConfig& cfg, const CommandContext& ctx) {
  SteadyOutcome out;
  try {
    std::filesystem::create_directories(ctx.out_dir);
    const ModelFunctions model = make_model(cfg.model);
    const State s0 = make_initial_state(cfg);
    SteadyProblem p{cfg.steady.m0.value_or(mean(s0.psi)), cfg.steady.h0.value_or(conserved_f(s0, model)), s0.grid(), model};
    SteadyState guess;
    if (cfg.steady.guess == "constant") {
      guess = constant_branch(p, mean(s0.theta));
    } else {
      guess.psi_inf = s0.psi;
      guess.theta_inf = mean(s0.theta);
      guess.mu_inf = mean(chemical_potential(s0, model));
    }
    SteadyOptions so;
    so.tol = cfg.steady.tol;
    out.state = solve_steady(p, guess, so);
    StabilityOptions stab;
    stab.modes = cfg.steady.probe_modes;
    out.indicator = stability_indicator(out.state, model, stab);
    const double relation = mean_value_mu(out.state.psi_inf, out.state.theta_inf, model);

    write_text_file(ctx.out_dir / "steady_state.txt", format_snapshot(out.state.as_state(), 0.0));
    std::string scalars;
    scalars += "m0=" + format_double(p.m0) + "\n";
    scalars += "h0=" + format_double(p.h0) + "\n";
    scalars += "theta_inf=" + format_double(out.state.theta_inf) + "\n";
    scalars += "mu_inf=" + format_double(out.state.mu_inf) + "\n";
    scalars += "mu_mean_value=" + format_double(relation) + "\n";
    scalars += "residual_norm=" + format_double(out.state.residual_norm) + "\n";
    scalars += "iterations=" + std::to_string(out.state.iterations) + "\n";
    scalars += "lagrangian=" + format_double(lagrangian(out.state.as_state(), model)) + "\n";
    scalars += "stability_indicator=" + format_double(out.indicator) + "\n";
    write_text_file(ctx.out_dir / "steady.txt", scalars);
    if (!ctx.quiet)
      *ctx.log << "steady: theta_inf=" << brief(out.state.theta_inf) << " mu_inf=" << brief(out.state.mu_inf)
               << " residual=" << brief(out.state.residual_norm) << " indicator=" << brief(out.indicator)
               << "\n";
  } catch (const ConfigError& e) {
    *ctx.err << "config error: " << e.what() << "\n";
    out.status = exit_config;
  } catch (const SolverError& e) {
    *ctx.err << "solver failure: " << e.what() << "\n";
    out.status = exit_failure;
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << "\n";
    out.status = exit_failure;
  }
  return out;
}

/// Independent runs over dt values (simulate) or (m0, h0) pairs (steady), one
/// directory per point, executed concurrently. Point i uses seed base + i.
inline int sweep_command(const RunConfig& cfg, const CommandContext& ctx) {
  namespace fs = std::filesystem;
  struct Point {
    RunConfig cfg;
    std::string label;
  };
  std::vector<Point> points;
  if (cfg.sweep.parameter == "dt") {
    if (cfg.sweep.values.empty()) {
      *ctx.err << "config error: [sweep] values: required for parameter = dt\n";
      return exit_config;
    }
    for (double dt : cfg.sweep.values) {
      Point p{cfg, "dt=" + format_double(dt)};
      p.cfg.stepper.dt = dt;
      points.push_back(std::move(p));
    }
  } else {
    if (cfg.sweep.m0_values.empty() || cfg.sweep.h0_values.empty()) {
      *ctx.err << "config error: [sweep] m0_values/h0_values: required for parameter = m0h0\n";
      return exit_config;
    }
    for (double m0 : cfg.sweep.m0_values)
      for (double h0 : cfg.sweep.h0_values) {
        Point p{cfg, "m0=" + format_double(m0) + ";h0=" + format_double(h0)};
        p.cfg.steady.m0 = m0;
        p.cfg.steady.h0 = h0;
        points.push_back(std::move(p));
      }
  }
  for (std::size_t i = 0; i < points.size(); ++i) points[i].cfg.initial.seed = cfg.initial.seed + i;

  try {
    fs::create_directories(ctx.out_dir);
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << "\n";
    return exit_failure;
  }
  std::vector<int> status(points.size(), exit_ok);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < points.size();) {
      char dir[32];
      std::snprintf(dir, sizeof dir, "point_%03zu", i);
      std::ostringstream log, err;
      CommandContext sub{ctx.out_dir / dir, true, &log, &err};
      status[i] = cfg.sweep.parameter == "dt" ? simulate(points[i].cfg, sub).status
                                              : steady_command(points[i].cfg, sub).status;
      std::lock_guard lock(log_mutex);
      if (!err.str().empty()) *ctx.err << dir << ": " << err.str();
      if (!ctx.quiet) *ctx.log << dir << " " << points[i].label << " status " << status[i] << "\n";
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_workers =
      std::min<std::size_t>(points.size(), cfg.sweep.workers > 0 ? static_cast<std::size_t>(cfg.sweep.workers) : hw);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  std::string index = "index,point,seed,status,dir\n";
  int worst = exit_ok;
  for (std::size_t i = 0; i < points.size(); ++i) {
    char dir[32];
    std::snprintf(dir, sizeof dir, "point_%03zu", i);
    index += std::to_string(i) + "," + points[i].label + "," + std::to_string(points[i].cfg.initial.seed) + "," +
             std::to_string(status[i]) + "," + dir + "\n";
    worst = std::max(worst, status[i]);
  }
  try {
    write_text_file(ctx.out_dir / "sweep.csv", index);
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << "\n";
    return exit_failure;
  }
  return worst;
}

/// Runs the invariant suite with the configured model; writes verify.json.
inline int verify_command(const RunConfig& cfg, const CommandContext& ctx) {
  try {
    const VerifyReport rep = run_verify(make_model(cfg.model), {cfg.verify_samples, cfg.initial.seed});
    std::filesystem::create_directories(ctx.out_dir);
    const std::string text = rep.to_json().dump(2) + "\n";
    write_text_file(ctx.out_dir / "verify.json", text);
    if (!ctx.quiet) {
      for (const auto& w : rep.warnings) *ctx.log << "warning: " << w << "\n";
      for (const auto& c : rep.checks)
        *ctx.log << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << brief(c.value)
                 << " threshold=" << brief(c.threshold) << "\n";
    }
    return rep.passed() ? exit_ok : exit_failure;
  } catch (const ConfigError& e) {
    *ctx.err << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace cpf
