#include "wgflow/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "wgflow/jko.hpp"
#include "wgflow/particles.hpp"
#include "wgflow/rate_ldp.hpp"

namespace wgf {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_density_csv(const std::string& path, const GridDensity& rho) {
  std::ofstream out(path);
  const GridPtr& grid = rho.grid();
  out << (grid->dim() == 1 ? "cell,x,mass\n" : "cell,x,y,mass\n");
  for (int i = 0; i < grid->cells(); ++i) {
    out << i << "," << format_double(grid->center(i, 0));
    if (grid->dim() == 2) out << "," << format_double(grid->center(i, 1));
    out << "," << format_double(rho.mass(i)) << "\n";
  }
}

void write_curve_csv(const std::string& path, const DiscreteCurve& curve) {
  std::ofstream out(path);
  out << "time,cell,mass\n";
  for (std::size_t k = 0; k < curve.times.size(); ++k)
    for (int i = 0; i < curve.densities[k].grid()->cells(); ++i)
      out << format_double(curve.times[k]) << "," << i << ","
          << format_double(curve.densities[k].mass(i)) << "\n";
}

namespace {

struct Workspace {
  ExperimentConfig cfg;
  GridPtr grid;
  AnalyticPotential analytic;
  Potential pot;
  FPOperator op;
  GridDensity rho0, rho1;

  explicit Workspace(const ExperimentConfig& c)
      : cfg(c),
        grid(c.make_grid()),
        analytic(c.make_potential()),
        pot(analytic.sample(grid)),
        op(assemble_generator(grid, pot, c.dt_max)),
        rho0(c.make_density(c.rho0, grid)),
        rho1(c.make_density(c.rho1, grid)) {}
};

using Failures = std::vector<std::string>;

void check(Failures* failures, bool ok, const std::string& name, const std::string& detail) {
  if (!ok) failures->push_back(name + "\t" + detail);
}

// ---------------------------------------------------------------------------

void run_gamma_sweep(const Workspace& ws, const std::string& dir, Failures* failures) {
  const auto records =
      gamma_sweep(ws.rho0, ws.rho1, ws.pot, ws.op, ws.cfg.taus, ws.cfg.k_per_segment);
  std::ofstream out(dir + "/gamma_sweep.csv");
  out << "tau,epsilon,i_upper,w2sq_over_4tau,gap,half_delta_f,err,h_eps,seconds\n";
  for (const auto& r : records) {
    const double secs = ws.cfg.reproducible ? 0.0 : r.seconds;
    out << format_double(r.tau) << "," << format_double(r.epsilon) << ","
        << format_double(r.i_upper) << "," << format_double(r.w2sq_over_4tau) << ","
        << format_double(r.gap) << "," << format_double(r.half_delta_f) << ","
        << format_double(r.err) << "," << format_double(r.h_eps) << ","
        << format_double(secs) << "\n";
  }
  const double tol = chain_tolerance(ws.grid, ws.cfg.k_per_segment);
  for (const auto& v : validate_gamma_sweep(records, tol))
    check(failures, false, "gamma_sweep_invariant", v);
}

void run_rate(const Workspace& ws, const std::string& dir, Failures* failures) {
  const double tau = ws.cfg.taus.front();
  const double lower = rate_lower_reference(ws.rho0, ws.rho1, ws.pot, tau);
  const RecoveryCurve rc =
      build_recovery_curve(ws.rho0, ws.rho1, ws.op, tau, ws.cfg.k_per_segment);
  const ActionValue upper_action = controlled_action(rc.curve, ws.op, tau);
  const double upper = upper_action.value;
  const TransitionKernel kernel = TransitionKernel::from_semigroup(ws.op, tau);
  const StaticRateResult stat = static_rate(ws.rho0, ws.rho1, kernel);
  const double w2 = w2_exact(ws.rho0, ws.rho1).distance;

  std::ofstream out(dir + "/rate.csv");
  out << "tau,epsilon,i_lower,i_upper,i_static,w2sq_over_4tau,half_delta_f\n";
  out << format_double(tau) << "," << format_double(rc.epsilon) << ","
      << format_double(lower) << "," << format_double(upper) << ","
      << format_double(stat.value) << "," << format_double(w2 * w2 / (4.0 * tau)) << ","
      << format_double(lower - w2 * w2 / (4.0 * tau)) << "\n";

  const double tol = chain_tolerance(ws.grid, ws.cfg.k_per_segment);
  check(failures, upper_action.is_infinite == false, "rate_upper_finite", "infinite action");
  check(failures, lower <= upper + tol, "rate_sandwich",
        "lower " + format_double(lower) + " above upper " + format_double(upper));
  const double mid = 0.5 * (lower + upper);
  check(failures,
        std::abs(stat.value - mid) <=
            ws.cfg.static_dynamic_rel * std::max({std::abs(mid), 1e-6}) + tol,
        "rate_static_dynamic",
        "static " + format_double(stat.value) + " vs interval midpoint " + format_double(mid));
}

void run_w2(const Workspace& ws, const std::string& dir, Failures* failures) {
  const W2Result exact = w2_exact(ws.rho0, ws.rho1);
  SinkhornOptions opts;
  opts.debiased = true;
  const EntropicResult ent = w2_entropic(ws.rho0, ws.rho1, ws.cfg.sinkhorn_eps, opts);

  std::ofstream out(dir + "/w2.csv");
  out << "method,distance,iterations,marginal_residual\n";
  out << "exact," << format_double(exact.distance) << ",0,"
      << format_double(std::max(exact.coupling.marginal_residual0(),
                                exact.coupling.marginal_residual1()))
      << "\n";
  out << "entropic," << format_double(ent.distance_estimate) << "," << ent.iterations << ","
      << format_double(ent.marginal_residual) << "\n";

  check(failures, ent.marginal_residual <= 1e-8, "w2_marginals",
        format_double(ent.marginal_residual));
  const double rel =
      std::abs(ent.distance_estimate - exact.distance) / std::max(exact.distance, 1e-12);
  check(failures, rel <= ws.cfg.entropic_rel, "w2_entropic_agreement", format_double(rel));
}

void run_semigroup(const Workspace& ws, const std::string& dir, Failures* failures) {
  std::ofstream out(dir + "/semigroup.csv");
  out << "property,value,bound,pass\n";
  auto row = [&](const std::string& name, double value, double bound, bool pass) {
    out << name << "," << format_double(value) << "," << format_double(bound) << ","
        << (pass ? 1 : 0) << "\n";
    check(failures, pass, "semigroup_" + name, format_double(value));
  };

  const GridDensity gibbs = ws.pot.gibbs_density();
  const double t = 0.5;
  const GridDensity evolved = evolve(ws.rho0, ws.op, t);

  const double mass_err = std::abs(evolved.masses().sum() - 1.0);
  row("mass_conservation", mass_err, 1e-12, mass_err <= 1e-12);
  row("positivity_min", evolved.masses().minCoeff(), 0.0,
      evolved.masses().minCoeff() >= 0.0);
  const double stat_err = (ws.op.matrix() * gibbs.masses()).cwiseAbs().maxCoeff();
  row("gibbs_stationarity", stat_err, 1e-10, stat_err <= 1e-10);

  const double f0 = free_energy(ws.rho0, ws.pot);
  const double f1 = free_energy(evolved, ws.pot);
  row("entropy_monotone", f1 - f0, 1e-10, f1 <= f0 + 1e-10);

  const double lam = ws.pot.lambda();
  const GridDensity sigma0 = ws.rho1;
  const GridDensity sigma_t = evolve(sigma0, ws.op, t);
  const double w2_before = w2_exact(ws.rho0, sigma0).distance;
  const double w2_after = w2_exact(evolved, sigma_t).distance;
  const double contraction_bound = std::exp(-lam * t) * w2_before * (1.0 + 1e-2);
  row("w2_contraction", w2_after, contraction_bound, w2_after <= contraction_bound);

  const ExtReal g0 = fisher_information_metric(ws.rho0, ws.op);
  const ExtReal gt = fisher_information_metric(evolved, ws.op);
  const bool fisher_ok = !g0.is_infinite && !gt.is_infinite &&
                         gt.value <= std::exp(-2.0 * lam * t) * g0.value * (1.0 + 2e-2);
  row("fisher_decay", gt.is_infinite ? -1.0 : gt.value,
      g0.is_infinite ? -1.0 : std::exp(-2.0 * lam * t) * g0.value * (1.0 + 2e-2), fisher_ok);
}

void run_jko(const Workspace& ws, const std::string& dir, Failures* failures) {
  const GridDensity reference = evolve(ws.rho0, ws.op, ws.cfg.jko_t);
  std::ofstream out(dir + "/jko.csv");
  out << "n,l1_error,ratio_vs_prev\n";
  double prev = 0.0;
  std::vector<double> ratios;
  for (std::size_t k = 0; k < ws.cfg.jko_n.size(); ++k) {
    const int n = ws.cfg.jko_n[k];
    const GridDensity it = jko_iterate(ws.rho0, ws.pot, ws.cfg.jko_t, n);
    const double l1 = (it.masses() - reference.masses()).cwiseAbs().sum();
    const double ratio = k == 0 ? 0.0 : prev / l1;
    if (k > 0) ratios.push_back(ratio);
    out << n << "," << format_double(l1) << "," << format_double(ratio) << "\n";
    prev = l1;
  }
  for (double r : ratios)
    check(failures, r >= 1.5 && r <= 3.0, "jko_order_ratio", format_double(r));
}

void run_particles(const Workspace& ws, const std::string& dir, Failures* failures,
                   std::uint64_t seed) {
  const auto rows = empirical_convergence_report(
      ws.rho0, ws.analytic, ws.op, ws.cfg.particle_t, ws.cfg.particle_dt,
      ws.cfg.particle_sizes, ws.cfg.particle_seeds, seed);
  std::ofstream out(dir + "/particles.csv");
  out << "n,mean_w2,stderr_w2,ratio_vs_prev\n";
  for (const auto& r : rows)
    out << r.n << "," << format_double(r.mean_w2) << "," << format_double(r.stderr_w2)
        << "," << format_double(r.ratio_vs_prev) << "\n";
  for (std::size_t k = 1; k < rows.size(); ++k)
    check(failures, rows[k].mean_w2 < rows[k - 1].mean_w2, "particles_decreasing",
          "n=" + std::to_string(rows[k].n));
}

void run_norm_check(const Workspace& ws, const std::string& dir, Failures* failures,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::ofstream out(dir + "/norm_check.csv");
  out << "instance,dim,cells,dual,flux,rel_gap\n";
  double worst = 0.0;
  const int instances = 200;
  for (int inst = 0; inst < instances; ++inst) {
    GridPtr grid;
    if (inst % 2 == 0)
      grid = Grid::make_1d(-1.0, 1.0, 4 + static_cast<int>(rng() % 61));
    else {
      const int nx = 2 + static_cast<int>(rng() % 7);
      const int ny = 2 + static_cast<int>(rng() % 7);
      grid = Grid::make_2d(-1.0, 1.0, nx, -1.0, 1.0, ny);
    }
    Vector w(grid->cells()), s(grid->cells());
    for (int i = 0; i < grid->cells(); ++i) w[i] = unif(rng);
    const GridDensity rho = GridDensity::normalized(grid, w);
    for (int i = 0; i < grid->cells(); ++i) s[i] = gauss(rng);
    s.array() -= s.mean();
    const GridSignedMeasure sm(grid, s);
    const double dual = hm1_norm(sm, rho).norm_sq;
    const double flux = hm1_norm_flux_form(sm, rho);
    const double rel = std::abs(dual - flux) / std::max(dual, 1e-300);
    worst = std::max(worst, rel);
    out << inst << "," << grid->dim() << "," << grid->cells() << "," << format_double(dual)
        << "," << format_double(flux) << "," << format_double(rel) << "\n";
  }
  check(failures, worst <= ws.cfg.duality_rel, "norm_duality",
        "worst rel gap " + format_double(worst));
}

}  // namespace

RunResult run_subcommand(const std::string& subcommand, const ExperimentConfig& config,
                         const std::optional<std::string>& out_override,
                         const std::optional<std::uint64_t>& seed_override) {
  ExperimentConfig cfg = config;
  if (out_override) cfg.out = *out_override;
  if (seed_override) cfg.seed = *seed_override;

  RunResult result;
  result.out_dir = cfg.out;
  fs::create_directories(cfg.out);

  const auto t0 = std::chrono::steady_clock::now();
  Failures failures;
  {
    Workspace ws(cfg);
    if (subcommand == "gamma-sweep")
      run_gamma_sweep(ws, cfg.out, &failures);
    else if (subcommand == "rate")
      run_rate(ws, cfg.out, &failures);
    else if (subcommand == "w2")
      run_w2(ws, cfg.out, &failures);
    else if (subcommand == "semigroup")
      run_semigroup(ws, cfg.out, &failures);
    else if (subcommand == "jko")
      run_jko(ws, cfg.out, &failures);
    else if (subcommand == "particles")
      run_particles(ws, cfg.out, &failures, cfg.seed);
    else if (subcommand == "norm-check")
      run_norm_check(ws, cfg.out, &failures, cfg.seed);
    else
      throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream manifest(cfg.out + "/manifest.txt");
    manifest << "wgflow 0.1.0\nsubcommand: " << subcommand << "\nseed: " << cfg.seed
             << "\nwall_seconds: " << wall << "\ninvariants: "
             << (failures.empty() ? "pass" : "fail") << "\n---\n"
             << cfg.echo();
  }
  if (!failures.empty()) {
    std::ofstream ff(cfg.out + "/failures.txt");
    for (const auto& f : failures) ff << f << "\n";
    result.exit_code = 1;
  }
  result.failures = std::move(failures);
  return result;
}

}  // namespace wgf
