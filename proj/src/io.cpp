#include "pal/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pal {

using nlohmann::json;

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw ConfigError("CSV column not found: " + name);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path.string());
  CsvTable t;
  std::string line;
  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw ConfigError("empty CSV file: " + path.string());
  strip_cr(line);
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) {
      // non-numeric cells (labels) read as NaN
      try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        row.push_back(used == cell.size() ? v : std::numeric_limits<double>::quiet_NaN());
      } catch (const std::exception&) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    if (row.size() != t.header.size())
      throw ConfigError("ragged CSV row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write file: " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < table.header.size(); ++i)
    os << table.header[i] << (i + 1 < table.header.size() ? "," : "\n");
  for (const auto& row : table.rows)
    for (size_t i = 0; i < row.size(); ++i) os << row[i] << (i + 1 < row.size() ? "," : "\n");
  write_text_atomic(path, os.str());
}

namespace {

std::string idx2(const std::string& base, int i, int j) {
  return base + "_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
}

void push_matrix(std::vector<double>& row, const Mat& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
}

}  // namespace

CsvTable observations_to_csv(const ObservationSeries& obs) {
  CsvTable t;
  switch (obs.kind) {
    case ObservationSeries::Kind::Prevalence: {
      const int m = static_cast<int>(obs.y.at(1).size());
      t.header.push_back("t");
      for (int i = 0; i < m; ++i) t.header.push_back("y_" + std::to_string(i + 1));
      for (size_t s = 1; s < obs.y.size(); ++s) {
        std::vector<double> row{static_cast<double>(s)};
        for (int i = 0; i < m; ++i) row.push_back(static_cast<double>(obs.y[s][i]));
        t.rows.push_back(std::move(row));
      }
      break;
    }
    case ObservationSeries::Kind::Incidence: {
      const int m = static_cast<int>(obs.Y.at(1).rows());
      t.header.push_back("t");
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) t.header.push_back(idx2("Y", i, j));
      for (size_t s = 1; s < obs.Y.size(); ++s) {
        std::vector<double> row{static_cast<double>(s)};
        push_matrix(row, obs.Y[s].cast<double>());
        t.rows.push_back(std::move(row));
      }
      break;
    }
    case ObservationSeries::Kind::Aggregated: {
      const int m = static_cast<int>(obs.Ybar.at(1).rows());
      t.header.push_back("r");
      t.header.push_back("tau");
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) t.header.push_back(idx2("Ybar", i, j));
      for (size_t r = 1; r < obs.Ybar.size(); ++r) {
        std::vector<double> row{static_cast<double>(r), static_cast<double>(obs.tau[r])};
        push_matrix(row, obs.Ybar[r].cast<double>());
        t.rows.push_back(std::move(row));
      }
      break;
    }
  }
  return t;
}

ObservationSeries observations_from_csv(const CsvTable& table, int m) {
  ObservationSeries obs;
  if (!table.header.empty() && table.header[0] == "t" && table.header.size() ==
      static_cast<size_t>(m) + 1 && table.header[1].rfind("y_", 0) == 0) {
    obs.kind = ObservationSeries::Kind::Prevalence;
    obs.y.resize(table.rows.size() + 1);
    for (size_t s = 0; s < table.rows.size(); ++s) {
      IVec y(m);
      for (int i = 0; i < m; ++i) y[i] = static_cast<std::int64_t>(table.rows[s][1 + i]);
      obs.y[s + 1] = y;
    }
    return obs;
  }
  if (!table.header.empty() && table.header[0] == "t") {
    obs.kind = ObservationSeries::Kind::Incidence;
    obs.Y.resize(table.rows.size() + 1);
    for (size_t s = 0; s < table.rows.size(); ++s) {
      IMat Y(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          Y(i, j) = static_cast<std::int64_t>(table.rows[s][1 + i * m + j]);
      obs.Y[s + 1] = Y;
    }
    return obs;
  }
  if (!table.header.empty() && table.header[0] == "r") {
    obs.kind = ObservationSeries::Kind::Aggregated;
    obs.tau.assign(1, 0);
    obs.Ybar.resize(table.rows.size() + 1);
    for (size_t s = 0; s < table.rows.size(); ++s) {
      obs.tau.push_back(static_cast<int>(table.rows[s][1]));
      IMat Y(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          Y(i, j) = static_cast<std::int64_t>(table.rows[s][2 + i * m + j]);
      obs.Ybar[s + 1] = Y;
    }
    return obs;
  }
  throw ConfigError("unrecognised observation CSV layout");
}

CsvTable latent_to_csv(const LatentRecord& rec) {
  CsvTable t;
  const int m = static_cast<int>(rec.x.at(0).size());
  t.header.push_back("t");
  for (int i = 0; i < m; ++i) t.header.push_back("x_" + std::to_string(i + 1));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) t.header.push_back(idx2("Z", i, j));
  for (size_t s = 0; s < rec.x.size(); ++s) {
    std::vector<double> row{static_cast<double>(s)};
    for (int i = 0; i < m; ++i) row.push_back(static_cast<double>(rec.x[s][i]));
    if (s == 0 || rec.Z[s].size() == 0) {
      for (int i = 0; i < m * m; ++i) row.push_back(0.0);
    } else {
      push_matrix(row, rec.Z[s].cast<double>());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable filter_trace_to_csv(const FilterTrace& trace, int m) {
  CsvTable t;
  if (!trace.lambda_pred.empty() && trace.M.empty()) {  // case I
    t.header = {"t", "loglik"};
    for (int i = 0; i < m; ++i) t.header.push_back("lambda_" + std::to_string(i + 1));
    for (int i = 0; i < m; ++i) t.header.push_back("lambda_bar_" + std::to_string(i + 1));
    for (int i = 0; i < m; ++i) t.header.push_back("mu_" + std::to_string(i + 1));
    for (size_t s = 1; s < trace.lambda_pred.size(); ++s) {
      std::vector<double> row{static_cast<double>(s), trace.step_loglik[s]};
      for (int i = 0; i < m; ++i) row.push_back(trace.lambda_pred[s][i]);
      for (int i = 0; i < m; ++i) row.push_back(trace.lambda_upd[s][i]);
      for (int i = 0; i < m; ++i) row.push_back(trace.mu[s][i]);
      t.rows.push_back(std::move(row));
    }
    return t;
  }
  t.header = {"r", "loglik"};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) t.header.push_back(idx2("M", i, j));
  for (size_t r = 1; r < trace.M.size(); ++r) {
    std::vector<double> row{static_cast<double>(r), trace.step_loglik[r]};
    push_matrix(row, trace.M[r]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable limit_trace_to_csv(const LimitTrace& trace) {
  CsvTable t;
  const bool case1 = !trace.nu.empty();
  const int m = case1 ? static_cast<int>(trace.nu[0].size())
                      : static_cast<int>(trace.lambda_bar_inf.at(0).size());
  t.header = {"t"};
  if (case1) {
    for (int i = 0; i < m; ++i) t.header.push_back("nu_" + std::to_string(i + 1));
    if (!trace.obs_intensity.empty())
      for (int i = 0; i < m; ++i) t.header.push_back("obs_" + std::to_string(i + 1));
  }
  if (!trace.lambda_inf.empty())
    for (int i = 0; i < m; ++i) t.header.push_back("lambda_inf_" + std::to_string(i + 1));
  if (!trace.mu_inf.empty())
    for (int i = 0; i < m; ++i) t.header.push_back("mu_inf_" + std::to_string(i + 1));
  const bool with_N = !trace.N.empty();
  const bool with_Lambda = !trace.Lambda_inf.empty();
  if (with_N)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) t.header.push_back(idx2("N", i, j));
  if (with_Lambda)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) t.header.push_back(idx2("Lambda_inf", i, j));
  const size_t T = case1 ? trace.nu.size() - 1
                         : (trace.lambda_inf.empty() ? trace.lambda_bar_inf.size() - 1
                                                     : trace.lambda_inf.size() - 1);
  for (size_t s = 1; s <= T; ++s) {
    std::vector<double> row{static_cast<double>(s)};
    if (case1) {
      for (int i = 0; i < m; ++i) row.push_back(trace.nu[s][i]);
      if (!trace.obs_intensity.empty())
        for (int i = 0; i < m; ++i) row.push_back(trace.obs_intensity[s][i]);
    }
    if (!trace.lambda_inf.empty())
      for (int i = 0; i < m; ++i) row.push_back(trace.lambda_inf[s][i]);
    if (!trace.mu_inf.empty())
      for (int i = 0; i < m; ++i) row.push_back(trace.mu_inf[s][i]);
    if (with_N) push_matrix(row, trace.N[s]);
    if (with_Lambda) push_matrix(row, trace.Lambda_inf[s]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable chain_to_csv(const Chain& chain) {
  CsvTable t;
  t.header = {"iter"};
  for (const auto& n : chain.names) t.header.push_back(n);
  t.header.push_back("logtarget");
  for (Eigen::Index r = 0; r < chain.draws.rows(); ++r) {
    std::vector<double> row{static_cast<double>(r)};
    for (Eigen::Index c = 0; c < chain.draws.cols(); ++c) row.push_back(chain.draws(r, c));
    row.push_back(chain.logtarget[r]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

Vec json_vec(const json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Prior parse_prior(const json& j) {
  const std::string type = j.value("type", "flat");
  if (type == "flat")
    return Prior::flat(j.value("lo", -std::numeric_limits<double>::infinity()),
                       j.value("hi", std::numeric_limits<double>::infinity()));
  if (type == "truncnormal")
    return Prior::trunc_normal(j.at("mean").get<double>(), j.at("sd").get<double>(),
                               j.value("lo", -std::numeric_limits<double>::infinity()),
                               j.value("hi", std::numeric_limits<double>::infinity()));
  throw ConfigError("unknown prior type: " + type);
}

void apply_param_overrides(ParamVector& params, const json& j) {
  if (!j.contains("params")) return;
  for (const auto& [name, pj] : j.at("params").items()) {
    const int idx = params.index_of(name);
    if (pj.contains("value")) params.values[idx] = pj["value"].get<double>();
    if (pj.contains("lo")) params.lo[idx] = pj["lo"].get<double>();
    if (pj.contains("hi")) params.hi[idx] = pj["hi"].get<double>();
    if (pj.contains("proposal_sd")) params.proposal_sd[idx] = pj["proposal_sd"].get<double>();
    if (pj.contains("prior")) params.prior[idx] = parse_prior(pj["prior"]);
  }
  params.validate();
}

}  // namespace

GravityConfig load_gravity_config(const json& j, const std::filesystem::path& base_dir) {
  GravityConfig cfg;
  const CsvTable cities = read_csv(base_dir / j.at("cities_csv").get<std::string>());
  const int J = static_cast<int>(cities.rows.size());
  cfg.populations.resize(J);
  cfg.report_rate.resize(J);
  Vec cx(J), cy(J);
  const int c_pop = cities.col("population"), c_x = cities.col("x"), c_y = cities.col("y"),
            c_rep = cities.col("report_rate");
  for (int k = 0; k < J; ++k) {
    cfg.populations[k] = cities.rows[k][c_pop];
    cx[k] = cities.rows[k][c_x];
    cy[k] = cities.rows[k][c_y];
    cfg.report_rate[k] = cities.rows[k][c_rep];
  }
  cfg.distances.resize(J, J);
  for (int k = 0; k < J; ++k)
    for (int l = 0; l < J; ++l)
      cfg.distances(k, l) = std::hypot(cx[k] - cx[l], cy[k] - cy[l]);

  auto load_yearly = [&](const std::string& key) {
    const CsvTable t = read_csv(base_dir / j.at(key).get<std::string>());
    if (static_cast<int>(t.header.size()) != J + 1)
      throw ConfigError("yearly CSV must have one column per city: " + key);
    Mat out(t.rows.size(), J);
    for (size_t r = 0; r < t.rows.size(); ++r)
      for (int k = 0; k < J; ++k) out(r, k) = t.rows[r][k + 1];
    return out;
  };
  const Mat births_raw = load_yearly("births_csv");
  cfg.death_rate = load_yearly("deaths_csv");

  // school-entry lag: year y recruits the births of year y - lag
  const int lag = j.value("birth_lag_years", 4);
  cfg.births.resize(births_raw.rows(), J);
  for (Eigen::Index y = 0; y < births_raw.rows(); ++y)
    cfg.births.row(y) = births_raw.row(std::max<Eigen::Index>(0, y - lag));

  cfg.steps_per_year = j.value("steps_per_year", 104);
  cfg.tau_step = j.value("tau_step", 4);
  for (const auto& range : j.at("term_ranges"))
    cfg.term_ranges.emplace_back(range[0].get<int>(), range[1].get<int>());
  cfg.validate();
  return cfg;
}

RunSetup parse_config(const json& j, const std::filesystem::path& base_dir) {
  RunSetup setup;
  setup.model_name = j.at("model").get<std::string>();
  setup.T = j.value("T", 0);
  const std::string obs = j.value("obs", "");

  if (setup.model_name == "seir_sim_study") {
    setup.family = seir_sim_study_family(j.at("n").get<std::int64_t>());
    setup.kind = ObservationSeries::Kind::Prevalence;
    if (setup.T == 0) setup.T = 100;
  } else if (setup.model_name == "sir_boarding") {
    IVec x0;
    if (j.contains("x0")) {
      const Vec v = json_vec(j["x0"]);
      x0 = v.cast<std::int64_t>();
    }
    setup.family = sir_boarding_family(x0);
    setup.kind = ObservationSeries::Kind::Prevalence;
    if (setup.T == 0) setup.T = 14;
  } else if (setup.model_name == "age_structured") {
    AgeStructuredOptions opt;
    opt.h = j.value("h", 1.0 / 7.0);
    opt.tau_step = j.value("tau_step", 7);
    opt.weeks = j.value("weeks", 19);
    if (j.contains("rho")) opt.rho = j["rho"].get<double>();
    if (j.contains("gamma")) opt.gamma = j["gamma"].get<double>();
    for (const auto& row : j.at("x0")) {
      const Vec v = json_vec(row);
      opt.x0.push_back(v.cast<std::int64_t>());
    }
    setup.family = age_structured_family(static_cast<int>(opt.x0.size()), opt);
    setup.kind = ObservationSeries::Kind::Aggregated;
    setup.T = opt.weeks * opt.tau_step;
    for (int r = 1; r <= opt.weeks; ++r) setup.tau.push_back(r * opt.tau_step);
  } else if (setup.model_name == "measles_gravity") {
    const GravityConfig cfg = load_gravity_config(j, base_dir);
    setup.family = measles_family(cfg);
    setup.kind = ObservationSeries::Kind::Aggregated;
    if (setup.T == 0) setup.T = j.value("years", 2) * cfg.steps_per_year;
    setup.tau = measles_schedule(cfg, setup.T);
  } else {
    throw ConfigError("unknown model: " + setup.model_name);
  }

  if (obs == "prevalence") setup.kind = ObservationSeries::Kind::Prevalence;
  if (obs == "incidence") setup.kind = ObservationSeries::Kind::Incidence;
  if (obs == "aggregated") setup.kind = ObservationSeries::Kind::Aggregated;

  apply_param_overrides(setup.family.params, j);
  setup.canonical = j.dump();
  return setup;
}

RunSetup load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace pal
