// Command-line driver: simulate / filter / fit / mcmc / limits / oracle / bench.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <thread>

#include "pal/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pal;

namespace {

struct CommonArgs {
  std::string model_path;
  std::string data_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_data) {
  cmd->add_option("--model", a.model_path, "model configuration (JSON)")->required();
  if (needs_data) cmd->add_option("--data", a.data_path, "observation CSV")->required();
  cmd->add_option("--out", a.out_dir, "output directory")->required();
  cmd->add_option("--seed", a.seed, "RNG seed")->each([&a](const std::string&) { a.seed_set = true; });
  cmd->add_option("--threads", a.threads, "worker threads (default 1)");
}

void require_seed(const CommonArgs& a) {
  if (!a.seed_set) throw ConfigError("--seed is mandatory for stochastic subcommands");
}

json manifest_base(const CommonArgs& a, const RunSetup& setup, const std::string& subcommand) {
  json m;
  m["subcommand"] = subcommand;
  m["config_hash"] = fnv1a_hash(setup.canonical);
  m["model"] = setup.model_name;
  m["seed"] = a.seed;
  m["threads"] = a.threads;
  m["version"] = "0.1.0";
  return m;
}

void finish_manifest(json& m, const fs::path& out_dir,
                     std::chrono::steady_clock::time_point t0) {
  m["wall_clock_sec"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text_atomic(out_dir / "manifest.json", m.dump(2) + "\n");
}

Vec parse_theta(const RunSetup& setup, const std::string& overrides) {
  Vec theta = setup.family.params.values;
  if (overrides.empty()) return theta;
  std::stringstream ss(overrides);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    const auto eq = piece.find('=');
    if (eq == std::string::npos) throw ConfigError("bad --theta entry: " + piece);
    theta[setup.family.params.index_of(piece.substr(0, eq))] = std::stod(piece.substr(eq + 1));
  }
  return theta;
}

void parallel_replicates(int replicates, int threads, const std::function<void(int)>& body) {
  if (threads <= 1) {
    for (int r = 0; r < replicates; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int r = next.fetch_add(1); r < replicates; r = next.fetch_add(1)) body(r);
    });
  for (auto& th : pool) th.join();
}

int cmd_simulate(const CommonArgs& a, int T_flag, int replicates) {
  const auto t0 = std::chrono::steady_clock::now();
  require_seed(a);
  RunSetup setup = load_config(a.model_path);
  const int T = T_flag > 0 ? T_flag : setup.T;
  fs::create_directories(a.out_dir);
  parallel_replicates(replicates, a.threads, [&](int r) {
    Rng rng = Rng(a.seed).substream(static_cast<std::uint64_t>(r));
    const ModelSpec spec = setup.family.at(setup.family.params.values);
    auto [rec, obs] = simulate(spec, T, rng, setup.kind);
    const std::string suffix = replicates > 1 ? "_" + std::to_string(r) : "";
    write_csv(fs::path(a.out_dir) / ("latent" + suffix + ".csv"), latent_to_csv(rec));
    write_csv(fs::path(a.out_dir) / ("observations" + suffix + ".csv"),
              observations_to_csv(obs));
  });
  json m = manifest_base(a, setup, "simulate");
  m["T"] = T;
  m["replicates"] = replicates;
  finish_manifest(m, a.out_dir, t0);
  return 0;
}

FilterTrace run_filter(const RunSetup& setup, const ObservationSeries& obs, const Vec& theta,
                       bool drop_constant) {
  const ModelSpec spec = setup.family.at(theta);
  switch (obs.kind) {
    case ObservationSeries::Kind::Prevalence:
      return pal_prevalence(spec, obs.y, drop_constant, true);
    case ObservationSeries::Kind::Incidence:
      return pal_incidence_unit(spec, obs.Y, drop_constant, true);
    case ObservationSeries::Kind::Aggregated: {
      bool closed = true;
      for (int t = 1; t <= obs.tau.back() && closed; ++t)
        closed = (spec.delta(t).array() == 1.0).all() && (spec.alpha(t).array() == 0.0).all();
      return closed ? pal_incidence_agg(spec, obs.Ybar, obs.tau, drop_constant, true)
                    : pal_incidence_agg_open(spec, obs.Ybar, obs.tau, drop_constant, true);
    }
  }
  throw ConfigError("run_filter: unknown data kind");
}

int cmd_filter(const CommonArgs& a, const std::string& theta_str, bool full_constant) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSetup setup = load_config(a.model_path);
  const ModelSpec spec0 = setup.family.at(setup.family.params.values);
  const ObservationSeries obs = observations_from_csv(read_csv(a.data_path), spec0.m);
  const Vec theta = parse_theta(setup, theta_str);
  const FilterTrace trace = run_filter(setup, obs, theta, !full_constant);
  fs::create_directories(a.out_dir);
  write_csv(fs::path(a.out_dir) / "filter_trace.csv", filter_trace_to_csv(trace, spec0.m));
  json summary;
  summary["total_log_pal"] = trace.total;
  summary["drop_constant"] = trace.drop_constant;
  summary["conventions"] = "0/0 -> 0; 0 log 0 -> 0";
  if (trace.drop_constant) summary["omitted"] = "sum of log(y!) terms (parameter-free)";
  write_text_atomic(fs::path(a.out_dir) / "summary.json", summary.dump(2) + "\n");
  json m = manifest_base(a, setup, "filter");
  m["total_log_pal"] = trace.total;
  finish_manifest(m, a.out_dir, t0);
  return 0;
}

int cmd_fit(const CommonArgs& a, int cycles, int coord_iters, const std::string& groups_str) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSetup setup = load_config(a.model_path);
  const ModelSpec spec0 = setup.family.at(setup.family.params.values);
  const ObservationSeries obs = observations_from_csv(read_csv(a.data_path), spec0.m);
  FitOptions opt;
  opt.outer_cycles = cycles;
  opt.coordinate_iters = coord_iters;
  if (!groups_str.empty()) {
    std::stringstream ss(groups_str);
    std::string grp;
    while (std::getline(ss, grp, ';')) {
      std::vector<int> idx;
      std::stringstream gs(grp);
      std::string name;
      while (std::getline(gs, name, ',')) idx.push_back(setup.family.params.index_of(name));
      opt.groups.push_back(std::move(idx));
    }
  }
  const FitResult fit = maximize_pal(setup.family, obs, setup.family.params.values, opt);
  fs::create_directories(a.out_dir);
  json out;
  out["objective"] = fit.objective;
  out["converged"] = fit.converged;
  out["evaluations"] = fit.evaluations;
  out["failed_evaluations"] = fit.failed_evaluations;
  for (int j = 0; j < setup.family.params.dim(); ++j)
    out["theta_hat"][setup.family.params.names[j]] = fit.theta_hat[j];
  write_text_atomic(fs::path(a.out_dir) / "fit.json", out.dump(2) + "\n");
  CsvTable trace;
  trace.header = {"cycle", "objective"};
  for (size_t c = 0; c < fit.trace.size(); ++c)
    trace.rows.push_back({static_cast<double>(c + 1), fit.trace[c]});
  write_csv(fs::path(a.out_dir) / "fit_trace.csv", trace);
  json m = manifest_base(a, setup, "fit");
  m["objective"] = fit.objective;
  finish_manifest(m, a.out_dir, t0);
  return 0;
}

int cmd_mcmc(const CommonArgs& a, const std::string& algo, int iters, int particles, int burnin,
             int thin_to, bool adapt, bool transforms) {
  const auto t0 = std::chrono::steady_clock::now();
  require_seed(a);
  RunSetup setup = load_config(a.model_path);
  const ModelSpec spec0 = setup.family.at(setup.family.params.values);
  const ObservationSeries obs = observations_from_csv(read_csv(a.data_path), spec0.m);
  MhOptions opt;
  opt.iterations = iters;
  opt.burnin = burnin;
  opt.thin_to = thin_to;
  opt.seed = a.seed;
  opt.adapt = adapt;
  opt.use_transforms = transforms;
  Chain chain;
  if (algo == "palmh")
    chain = metropolis_pal(setup.family, obs, setup.family.params.values, opt);
  else if (algo == "pmmh")
    chain = pmmh_chain(setup.family, obs, setup.family.params.values, particles, opt);
  else if (algo == "dapmmh")
    chain = dapmmh_chain(setup.family, obs, setup.family.params.values, particles, opt);
  else
    throw ConfigError("unknown --algo: " + algo);
  fs::create_directories(a.out_dir);
  write_csv(fs::path(a.out_dir) / "chain.csv", chain_to_csv(chain));
  json meta;
  meta["algo"] = algo;
  meta["iterations"] = chain.iterations;
  meta["burnin"] = chain.burnin;
  meta["thin"] = chain.thin;
  meta["kept"] = chain.draws.rows();
  meta["seed"] = chain.seed;
  meta["wall_clock_sec"] = chain.wall_clock_sec;
  meta["pf_calls"] = chain.pf_calls;
  meta["stage1_accepts"] = chain.stage1_accepts;
  meta["stage2_accepts"] = chain.stage2_accepts;
  for (int j = 0; j < setup.family.params.dim(); ++j)
    meta["accept_rate"][setup.family.params.names[j]] = chain.accept_rate[j];
  write_text_atomic(fs::path(a.out_dir) / "mcmc.json", meta.dump(2) + "\n");
  json m = manifest_base(a, setup, "mcmc");
  m["algo"] = algo;
  finish_manifest(m, a.out_dir, t0);
  return 0;
}

int cmd_limits(const CommonArgs& a, int T_flag, const std::string& theta_str) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSetup setup = load_config(a.model_path);
  const int T = T_flag > 0 ? T_flag : setup.T;
  const Vec theta_star = setup.family.params.values;
  const Vec theta = parse_theta(setup, theta_str);
  const ModelSpec spec_star = setup.family.at(theta_star);
  const ModelSpec spec_theta = setup.family.at(theta);
  fs::create_directories(a.out_dir);
  LimitTrace traj, filt;
  if (setup.kind == ObservationSeries::Kind::Prevalence) {
    traj = limit_trajectory_prevalence(spec_star, T);
    filt = limit_filter_prevalence(spec_star, spec_theta, T);
  } else {
    std::vector<int> tau = setup.tau;
    if (tau.empty() || tau.back() > T)
      for (tau.clear(); static_cast<int>(tau.size() + 1) <= T; ) tau.push_back(static_cast<int>(tau.size()) + 1);
    std::vector<int> tau0{0};
    tau0.insert(tau0.end(), tau.begin(), tau.end());
    traj = limit_trajectory_incidence(spec_star, T, tau0);
    filt = limit_filter_incidence(spec_star, spec_theta, T, tau0);
  }
  LimitTrace combined = traj;
  combined.lambda_inf = filt.lambda_inf;
  combined.mu_inf = filt.mu_inf;
  combined.Lambda_inf = filt.Lambda_inf;
  combined.M_inf = filt.M_inf;
  write_csv(fs::path(a.out_dir) / "limits.csv", limit_trace_to_csv(combined));
  json m = manifest_base(a, setup, "limits");
  m["T"] = T;
  finish_manifest(m, a.out_dir, t0);
  return 0;
}

int cmd_oracle(const CommonArgs& a, const std::string& method, int particles,
               std::int64_t state_cap) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSetup setup = load_config(a.model_path);
  const ModelSpec spec = setup.family.at(setup.family.params.values);
  const ObservationSeries obs = observations_from_csv(read_csv(a.data_path), spec.m);
  fs::create_directories(a.out_dir);
  json out;
  if (method == "enumerate") {
    const EnumResult res = exact_loglik_enumerate(spec, obs, state_cap);
    out["loglik"] = res.loglik;
    out["lost_mass"] = res.lost_mass;
  } else if (method == "pf") {
    require_seed(a);
    Rng rng(a.seed);
    out["loglik"] = particle_filter_loglik(spec, obs, particles, rng);
    out["particles"] = particles;
  } else {
    throw ConfigError("unknown oracle method: " + method);
  }
  out["method"] = method;
  write_text_atomic(fs::path(a.out_dir) / "oracle.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  json m = manifest_base(a, setup, "oracle");
  finish_manifest(m, a.out_dir, t0);
  return 0;
}

int cmd_bench(const CommonArgs& a, const std::string& vary_n, int particles, int pal_reps,
              int pf_reps) {
  const auto t0 = std::chrono::steady_clock::now();
  require_seed(a);
  RunSetup setup = load_config(a.model_path);
  if (setup.model_name != "sir_boarding")
    throw ConfigError("bench currently scales the sir_boarding model only");
  std::vector<double> ns;
  {
    std::stringstream ss(vary_n);
    std::string piece;
    while (std::getline(ss, piece, ',')) ns.push_back(std::stod(piece));
  }
  if (ns.size() < 2) throw ConfigError("--vary-n needs at least two sizes");
  const Vec theta = setup.family.params.values;
  json out;
  std::vector<double> pal_times, pf_times;
  for (double n : ns) {
    const double scale = n / 764.0;
    IVec x0(3);
    x0 << static_cast<std::int64_t>(std::llround(763.0 * scale)),
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(scale))), 0;
    const ModelSpec spec = build_sir_boarding(theta[0], theta[1], theta[2], x0);
    Rng rng(a.seed);
    auto [rec, obs] = simulate(spec, setup.T > 0 ? setup.T : 14, rng,
                               ObservationSeries::Kind::Prevalence);
    auto median_time = [&](int reps, const std::function<void()>& body) {
      std::vector<double> times(reps);
      for (int r = 0; r < reps; ++r) {
        const auto s = std::chrono::steady_clock::now();
        body();
        times[r] = std::chrono::duration<double>(std::chrono::steady_clock::now() - s).count();
      }
      std::sort(times.begin(), times.end());
      return times[reps / 2];
    };
    volatile double sink = 0.0;
    const double t_pal = median_time(pal_reps, [&] {
      sink = sink + pal_prevalence(spec, obs.y, true, false).total;
    });
    Rng pf_rng(a.seed + 1);
    const double t_pf = median_time(pf_reps, [&] {
      sink = sink + particle_filter_loglik(spec, obs, particles, pf_rng);
    });
    pal_times.push_back(t_pal);
    pf_times.push_back(t_pf);
    json row;
    row["n"] = n;
    row["pal_sec"] = t_pal;
    row["pf_sec"] = t_pf;
    out["runs"].push_back(row);
    std::cout << "n=" << n << "  pal=" << t_pal << "s  pf=" << t_pf << "s\n";
  }
  out["pal_time_ratio"] = pal_times.back() / pal_times.front();
  out["pf_time_ratio"] = pf_times.back() / pf_times.front();
  std::cout << "pal ratio " << out["pal_time_ratio"] << ", pf ratio " << out["pf_time_ratio"]
            << "\n";
  fs::create_directories(a.out_dir);
  write_text_atomic(fs::path(a.out_dir) / "bench.json", out.dump(2) + "\n");
  json m = manifest_base(a, setup, "bench");
  finish_manifest(m, a.out_dir, t0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson approximate likelihood toolkit for stochastic compartmental models"};
  app.require_subcommand(1);

  CommonArgs sim_a, fil_a, fit_a, mcmc_a, lim_a, ora_a, ben_a;
  int sim_T = 0, sim_reps = 1;
  auto* sim = app.add_subcommand("simulate", "simulate latent trajectories and observations");
  add_common(sim, sim_a, false);
  sim->add_option("--T", sim_T, "horizon override");
  sim->add_option("--replicates", sim_reps, "number of replicate trajectories");

  std::string fil_theta;
  bool fil_full = false;
  auto* fil = app.add_subcommand("filter", "run the PAL filter on a data set");
  add_common(fil, fil_a, true);
  fil->add_option("--theta", fil_theta, "parameter overrides name=value,...");
  fil->add_flag("--full-constant", fil_full, "include the log(y!) constant in the log-PAL");

  int fit_cycles = 500, fit_ci = 15;
  std::string fit_groups;
  auto* fit = app.add_subcommand("fit", "maximum-PAL estimation by coordinate ascent");
  add_common(fit, fit_a, true);
  fit->add_option("--cycles", fit_cycles, "outer coordinate-ascent cycles");
  fit->add_option("--coord-iters", fit_ci, "golden-section evaluations per coordinate");
  fit->add_option("--groups", fit_groups, "parameter groups, e.g. 'beta,gamma;q'");

  std::string mcmc_algo = "palmh";
  int mcmc_iters = 50000, mcmc_particles = 1000, mcmc_burnin = -1, mcmc_thin = 25000;
  bool mcmc_adapt = false, mcmc_transforms = false;
  auto* mc = app.add_subcommand("mcmc", "posterior sampling (palmh / pmmh / dapmmh)");
  add_common(mc, mcmc_a, true);
  mc->add_option("--algo", mcmc_algo, "palmh | pmmh | dapmmh");
  mc->add_option("--iters", mcmc_iters, "MCMC iterations");
  mc->add_option("--particles", mcmc_particles, "particle count for pmmh/dapmmh");
  mc->add_option("--burnin", mcmc_burnin, "burn-in iterations (default 20%)");
  mc->add_option("--thin-to", mcmc_thin, "target number of kept draws");
  mc->add_flag("--adapt", mcmc_adapt, "pre-run proposal adaptation phase");
  mc->add_flag("--transforms", mcmc_transforms,
               "propose on log/logit scales with Jacobian corrections");

  int lim_T = 0;
  std::string lim_theta;
  auto* lim = app.add_subcommand("limits", "large-population limit traces");
  add_common(lim, lim_a, false);
  lim->add_option("--T", lim_T, "horizon override");
  lim->add_option("--theta", lim_theta, "filter-limit parameter name=value,...");

  std::string ora_method = "enumerate";
  int ora_particles = 1000;
  std::int64_t ora_cap = 30;
  auto* ora = app.add_subcommand("oracle", "reference likelihoods (enumeration / particle filter)");
  add_common(ora, ora_a, true);
  ora->add_option("--method", ora_method, "enumerate | pf");
  ora->add_option("--particles", ora_particles, "particles for --method pf");
  ora->add_option("--state-cap", ora_cap, "state-space cap for --method enumerate");

  std::string ben_vary = "763,76300";
  int ben_particles = 1000, ben_pal_reps = 201, ben_pf_reps = 5;
  auto* ben = app.add_subcommand("bench", "PAL vs particle-filter cost scaling");
  add_common(ben, ben_a, false);
  ben->add_option("--vary-n", ben_vary, "comma-separated population sizes");
  ben->add_option("--particles", ben_particles, "particle count");
  ben->add_option("--pal-reps", ben_pal_reps, "PAL timing repetitions");
  ben->add_option("--pf-reps", ben_pf_reps, "PF timing repetitions");

  CLI11_PARSE(app, argc, argv);
  try {
    if (sim->parsed()) return cmd_simulate(sim_a, sim_T, sim_reps);
    if (fil->parsed()) return cmd_filter(fil_a, fil_theta, fil_full);
    if (fit->parsed()) return cmd_fit(fit_a, fit_cycles, fit_ci, fit_groups);
    if (mc->parsed())
      return cmd_mcmc(mcmc_a, mcmc_algo, mcmc_iters, mcmc_particles, mcmc_burnin, mcmc_thin,
                      mcmc_adapt, mcmc_transforms);
    if (lim->parsed()) return cmd_limits(lim_a, lim_T, lim_theta);
    if (ora->parsed()) return cmd_oracle(ora_a, ora_method, ora_particles, ora_cap);
    if (ben->parsed()) return cmd_bench(ben_a, ben_vary, ben_particles, ben_pal_reps, ben_pf_reps);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IncompatibilityError& e) {
    std::cerr << "model/data incompatibility: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
