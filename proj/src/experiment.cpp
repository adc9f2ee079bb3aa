#include "adfs/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace adfs {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(field, "cannot parse '" + text + "' as a number");
  return value;
}

std::size_t parse_count(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  // accept integral values written in scientific notation, e.g. 1e5
  if (t.find_first_of("eE.") != std::string::npos) {
    const double v = parse_number<double>(field, t);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e18) throw ConfigError(field, "expected a nonnegative integer");
    return static_cast<std::size_t>(v);
  }
  if (!t.empty() && t[0] == '-') throw ConfigError(field, "expected a nonnegative integer");
  return parse_number<std::size_t>(field, t);
}

bool parse_bool(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(field, "expected true or false, got '" + text + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<TracePoint> to_points(const AdfsTrace& t) {
  std::vector<TracePoint> out;
  for (const AdfsCheckpoint& cp : t.checkpoints) out.push_back({cp.iteration, cp.idealized_time, cp.primal_subopt});
  return out;
}

std::vector<TracePoint> to_points(const BaselineTrace& t) {
  std::vector<TracePoint> out;
  for (const BaselineCheckpoint& cp : t.checkpoints) out.push_back({cp.iteration, cp.idealized_time, cp.primal_subopt});
  return out;
}

std::vector<TracePoint> to_points(const std::vector<NsCheckpoint>& t) {
  std::vector<TracePoint> out;
  for (const NsCheckpoint& cp : t) out.push_back({cp.iteration, cp.idealized_time, cp.primal_subopt});
  return out;
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Adfs:
      return "adfs";
    case Algorithm::NsAdfs:
      return "ns_adfs";
    case Algorithm::PointSaga:
      return "point_saga";
    case Algorithm::Agd:
      return "agd";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  const std::string t = trim(name);
  if (t == "adfs") return Algorithm::Adfs;
  if (t == "ns_adfs") return Algorithm::NsAdfs;
  if (t == "point_saga") return Algorithm::PointSaga;
  if (t == "agd") return Algorithm::Agd;
  throw ConfigError("algorithms", "unknown algorithm '" + name + "' (expected adfs, ns_adfs, point_saga or agd)");
}

std::size_t ExperimentConfig::iterations(Algorithm a) const {
  const auto it = T_override.find(a);
  return it == T_override.end() ? T : it->second;
}

void ExperimentConfig::validate() const {
  if (graph_file.empty() && (grid_rows == 0 || grid_cols == 0)) throw ConfigError("grid", "dimensions must be positive");
  if (dataset.empty()) {
    if (m < 2 || m % 2 != 0) throw ConfigError("m", "synthetic data needs an even m >= 2");
    if (d <= 0) throw ConfigError("d", "must be positive");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau", "must be positive");
  if (algorithms.empty()) throw ConfigError("algorithms", "at least one algorithm is required");
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (!(target >= 0.0)) throw ConfigError("target", "must be nonnegative");
  for (Algorithm a : algorithms)
    if (iterations(a) == 0) throw ConfigError(algorithm_name(a) + ".T", "must be positive");
  if (p_comm && !(*p_comm >= 0.0 && *p_comm <= 1.0)) throw ConfigError("p_comm", "must lie in [0, 1]");
  if (theorem4_t == 0) throw ConfigError("theorem4.t", "must be positive");
  if (theorem4_trials == 0) throw ConfigError("theorem4.trials", "must be positive");
}

void set_config_value(ExperimentConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "grid") {
    const auto x = value.find('x');
    if (x == std::string::npos) throw ConfigError(key, "expected ROWSxCOLS, got '" + value + "'");
    cfg.grid_rows = parse_count(key, value.substr(0, x));
    cfg.grid_cols = parse_count(key, value.substr(x + 1));
  } else if (key == "graph_file") {
    cfg.graph_file = value;
  } else if (key == "dataset") {
    cfg.dataset = value;
  } else if (key == "m") {
    cfg.m = parse_count(key, value);
  } else if (key == "d") {
    cfg.d = static_cast<Eigen::Index>(parse_count(key, value));
  } else if (key == "sigma") {
    cfg.sigma = parse_number<double>(key, value);
  } else if (key == "tau") {
    cfg.tau = parse_number<double>(key, value);
  } else if (key == "delay") {
    if (value == "deterministic")
      cfg.delay = DelayModel::Deterministic;
    else if (value == "exponential")
      cfg.delay = DelayModel::Exponential;
    else
      throw ConfigError(key, "expected deterministic or exponential, got '" + value + "'");
  } else if (key == "nonblocking") {
    cfg.nonblocking = parse_bool(key, value);
  } else if (key == "algorithms" || key == "algo") {
    cfg.algorithms.clear();
    for (const std::string& name : split_list(value)) cfg.algorithms.push_back(parse_algorithm(name));
  } else if (key == "T") {
    cfg.T = parse_count(key, value);
  } else if (key.size() > 2 && key.compare(key.size() - 2, 2, ".T") == 0) {
    Algorithm a;
    try {
      a = parse_algorithm(key.substr(0, key.size() - 2));
    } catch (const ConfigError&) {
      throw ConfigError(key, "unknown algorithm prefix");
    }
    cfg.T_override[a] = parse_count(key, value);
  } else if (key == "agd.step" || key == "point_saga.step") {
    const double step = parse_number<double>(key, value);
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError(key, "must be positive");
    cfg.step_override[key == "agd.step" ? Algorithm::Agd : Algorithm::PointSaga] = step;
  } else if (key == "target") {
    cfg.target = parse_number<double>(key, value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const std::string& s : split_list(value)) cfg.seeds.push_back(parse_number<std::uint64_t>(key, s));
  } else if (key == "data_seed") {
    cfg.data_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "p_comm") {
    if (value == "auto")
      cfg.p_comm.reset();
    else
      cfg.p_comm = parse_number<double>(key, value);
  } else if (key == "checkpoint_every") {
    cfg.checkpoint_every = parse_count(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "theorem4.t") {
    cfg.theorem4_t = parse_count(key, value);
  } else if (key == "theorem4.trials") {
    cfg.theorem4_trials = parse_count(key, value);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
    throw ConfigError(assignment, "override must have the form KEY=VALUE");
  set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value', got '" + line + "'");
    set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  return parse_config(in);
}

Scenario build_scenario(const ExperimentConfig& cfg) {
  cfg.validate();
  Scenario s;
  CommGraph base;
  try {
    base = cfg.graph_file.empty() ? build_grid(cfg.grid_rows, cfg.grid_cols) : load_graph_file(cfg.graph_file);
  } catch (const std::exception& e) {
    throw ConfigError(cfg.graph_file.empty() ? "grid" : "graph_file", e.what());
  }
  if (!base.connected()) throw ConfigError(cfg.graph_file.empty() ? "grid" : "graph_file", "graph is not connected");
  try {
    s.problem = cfg.dataset.empty() ? generate_synthetic(base.num_nodes(), cfg.m, cfg.d, cfg.sigma, cfg.data_seed)
                                    : load_dataset_file(cfg.dataset, cfg.sigma);
  } catch (const std::exception& e) {
    throw ConfigError(cfg.dataset.empty() ? "m" : "dataset", e.what());
  }
  if (s.problem.num_nodes() != base.num_nodes())
    throw ConfigError("dataset", "node count does not match the graph");
  s.graph = AugmentedGraph(base, s.problem.sigmas(), s.problem.leaf_smoothness());
  s.spec = configure_smooth(s.graph);
  try {
    s.params = derive_parameters(s.graph, s.spec, cfg.p_comm);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("p_comm", e.what());
  }
  s.params.report.kappa_b = batch_condition(s.problem);
  s.reference = reference_minimizer(s.problem);
  return s;
}

double crossing_time(const std::vector<TracePoint>& trace, double threshold) {
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (trace[k].primal_subopt > threshold) continue;
    if (k == 0) return trace[0].idealized_time;
    const TracePoint& a = trace[k - 1];
    const TracePoint& b = trace[k];
    const double frac = (a.primal_subopt - threshold) / (a.primal_subopt - b.primal_subopt);
    return a.idealized_time + frac * (b.idealized_time - a.idealized_time);
  }
  return kNaN;
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
  out << "iteration,idealized_time,primal_subopt\n";
  for (const TracePoint& p : trace)
    out << p.iteration << ',' << format_double(p.idealized_time) << ',' << format_double(p.primal_subopt) << '\n';
}

std::vector<TracePoint> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "iteration,idealized_time,primal_subopt")
    throw std::runtime_error("read_trace_csv: unexpected header");
  std::vector<TracePoint> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_list(line);
    if (cells.size() != 3) throw std::runtime_error("read_trace_csv: expected 3 columns");
    TracePoint p;
    p.iteration = parse_count("iteration", cells[0]);
    p.idealized_time = parse_number<double>("idealized_time", cells[1]);
    p.primal_subopt = parse_number<double>("primal_subopt", cells[2]);
    out.push_back(p);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.scenario = build_scenario(cfg);
  const Scenario& sc = result.scenario;
  result.nu = theorem4_nu(sc.graph.num_centers(), sc.params.p_comp, sc.params.p_comm_max, cfg.tau);

  std::optional<AugmentedGraph> ns_graph;
  SpectralReport ns_spec;
  NsParameters ns_params;

  for (Algorithm algo : cfg.algorithms) {
    const std::size_t T = cfg.iterations(algo);
    for (std::uint64_t seed : cfg.seeds) {
      RunRecord rec;
      rec.algorithm = algo;
      rec.seed = seed;
      const SimConfig time_model{cfg.tau, cfg.delay, seed, cfg.nonblocking, 0.0};
      switch (algo) {
        case Algorithm::Adfs: {
          AdfsRunOptions opt;
          opt.seed = seed;
          opt.checkpoint_every = cfg.checkpoint_every;
          opt.F_star = sc.reference.value;
          opt.time_model = time_model;
          opt.target = cfg.target;
          const AdfsTrace t = run_adfs(sc.problem, sc.graph, sc.spec, sc.params, T, opt);
          rec.trace = to_points(t);
          rec.reached_target = t.reached_target;
          break;
        }
        case Algorithm::NsAdfs: {
          if (!ns_graph) {
            ns_graph = AugmentedGraph(sc.graph.base(), sc.problem.sigmas(), sc.problem.leaf_smoothness());
            ns_spec = configure_nonsmooth(*ns_graph);
            ns_params = derive_ns_parameters(*ns_graph, ns_spec, cfg.p_comm);
          }
          NsRunOptions opt;
          opt.seed = seed;
          opt.checkpoint_every = cfg.checkpoint_every;
          opt.F_star = sc.reference.value;
          opt.time_model = time_model;
          rec.trace = to_points(run_ns_adfs(sc.problem, *ns_graph, ns_spec, ns_params, T, opt));
          break;
        }
        case Algorithm::PointSaga:
        case Algorithm::Agd: {
          BaselineOptions opt;
          opt.seed = seed;
          opt.checkpoint_every = cfg.checkpoint_every;
          opt.F_star = sc.reference.value;
          opt.target = cfg.target;
          if (const auto it = cfg.step_override.find(algo); it != cfg.step_override.end()) opt.step = it->second;
          const BaselineTrace t =
              algo == Algorithm::Agd ? run_agd(sc.problem, T, opt) : run_point_saga(sc.problem, T, opt);
          rec.trace = to_points(t);
          rec.reached_target = t.reached_target;
          break;
        }
      }
      if (cfg.target > 0.0 && !rec.trace.empty()) rec.reached_target = rec.trace.back().primal_subopt <= cfg.target;
      for (double thr : kCrossingThresholds) rec.crossings.push_back(crossing_time(rec.trace, thr));
      result.runs.push_back(std::move(rec));
    }
  }

  std::ostringstream sum;
  sum << "theta_star =";
  for (Eigen::Index k = 0; k < sc.reference.theta.size(); ++k) sum << ' ' << format_double(sc.reference.theta[k]);
  sum << "\nF_star = " << format_double(sc.reference.value) << '\n'
      << "rho = " << format_double(sc.params.rho) << '\n'
      << "S = " << format_double(sc.params.S) << '\n'
      << "p_comm = " << format_double(sc.params.p_comm) << '\n'
      << "nu = " << format_double(result.nu) << '\n';
  for (const RunRecord& rec : result.runs) {
    const std::string prefix = algorithm_name(rec.algorithm) + ".seed" + std::to_string(rec.seed) + '.';
    sum << prefix << "iterations = " << (rec.trace.empty() ? 0 : rec.trace.back().iteration) << '\n';
    if (cfg.target > 0.0) sum << prefix << "target_reached = " << (rec.reached_target ? "true" : "false") << '\n';
    for (std::size_t k = 0; k < kCrossingThresholds.size(); ++k) {
      char thr[16];
      std::snprintf(thr, sizeof thr, "%.0e", kCrossingThresholds[k]);
      sum << prefix << "time_to_" << thr << " = " << format_double(rec.crossings[k]) << '\n';
    }
  }
  for (Algorithm algo : cfg.algorithms) {
    for (double thr : kCrossingThresholds) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.0e", thr);
      sum << algorithm_name(algo) << ".median_time_to_" << buf << " = "
          << format_double(median_crossing(result, algo, thr)) << '\n';
    }
  }
  result.summary = sum.str();

  if (!cfg.out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out, ec);
    if (ec) throw ConfigError("out", "cannot create directory '" + cfg.out + "': " + ec.message());
    for (const RunRecord& rec : result.runs) {
      const auto path = std::filesystem::path(cfg.out) /
                        (algorithm_name(rec.algorithm) + "_seed" + std::to_string(rec.seed) + ".csv");
      std::ofstream f(path);
      if (!f) throw ConfigError("out", "cannot write '" + path.string() + "'");
      write_trace_csv(f, rec.trace);
    }
    std::ofstream f(std::filesystem::path(cfg.out) / "summary.txt");
    if (!f) throw ConfigError("out", "cannot write summary.txt");
    f << result.summary;
  }
  return result;
}

double median_crossing(const ExperimentResult& r, Algorithm a, double threshold) {
  const auto it = std::find(kCrossingThresholds.begin(), kCrossingThresholds.end(), threshold);
  std::vector<double> values;
  for (const RunRecord& rec : r.runs) {
    if (rec.algorithm != a) continue;
    const double v = it != kCrossingThresholds.end()
                         ? rec.crossings[static_cast<std::size_t>(it - kCrossingThresholds.begin())]
                         : crossing_time(rec.trace, threshold);
    if (std::isnan(v)) return kNaN;
    values.push_back(v);
  }
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

std::string dump_parameters(const ExperimentConfig& cfg) {
  const Scenario s = build_scenario(cfg);
  std::ostringstream out;
  out.precision(12);
  out << "n = " << s.graph.num_centers() << '\n'
      << "comm_edges = " << s.graph.num_comm_edges() << '\n'
      << "leaves = " << s.graph.num_leaves() << '\n'
      << format_parameters(s.params, s.spec)
      << "nu = " << theorem4_nu(s.graph.num_centers(), s.params.p_comp, s.params.p_comm_max, cfg.tau) << '\n'
      << "F_star = " << s.reference.value << '\n';
  return out.str();
}

Theorem4Report run_theorem4_check(const ExperimentConfig& cfg) {
  const Scenario s = build_scenario(cfg);
  const SimConfig sim{cfg.tau, cfg.delay, cfg.seeds.front(), cfg.nonblocking, 0.0};
  return check_theorem4(s.graph, s.params, sim, cfg.theorem4_t, cfg.theorem4_trials);
}

}  // namespace adfs
