#include "adfs/simtime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "adfs/adfs.hpp"

namespace adfs {

IdealizedClock::IdealizedClock(std::size_t num_nodes, const SimConfig& config)
    : config_(config), rng_(config.seed, 1), clocks_(num_nodes, 0.0), busy_(num_nodes, 0.0) {
  if (num_nodes == 0) throw std::invalid_argument("IdealizedClock: no nodes");
  if (!(config.tau > 0.0)) throw std::invalid_argument("SimConfig: tau must be positive");
  if (!(config.send_cost >= 0.0)) throw std::invalid_argument("SimConfig: send_cost must be nonnegative");
}

double IdealizedClock::draw(double scale) {
  return config_.delay == DelayModel::Exponential ? scale * rng_.exponential() : scale;
}

double IdealizedClock::communicate(std::size_t i, std::size_t j) {
  if (i >= clocks_.size() || j >= clocks_.size() || i == j)
    throw std::invalid_argument("IdealizedClock: invalid communication endpoints");
  const double d = draw(config_.tau);
  const double ci = clocks_[i];
  const double cj = clocks_[j];
  if (config_.nonblocking) {
    clocks_[i] = std::max(ci + config_.send_cost, cj + d);
    clocks_[j] = std::max(cj + config_.send_cost, ci + d);
    busy_[i] += config_.send_cost;
    busy_[j] += config_.send_cost;
  } else {
    clocks_[i] = clocks_[j] = std::max(ci, cj) + d;
    busy_[i] += d;
    busy_[j] += d;
  }
  now_ = std::max({now_, clocks_[i], clocks_[j]});
  ++steps_;
  return now_;
}

double IdealizedClock::compute(std::size_t i) {
  if (i >= clocks_.size()) throw std::invalid_argument("IdealizedClock: invalid node");
  const double d = draw(1.0);
  clocks_[i] += d;
  busy_[i] += d;
  now_ = std::max(now_, clocks_[i]);
  ++steps_;
  return now_;
}

double IdealizedClock::apply(const ScheduleEntry& entry) {
  return entry.communication ? communicate(entry.i, entry.j) : compute(entry.i);
}

double IdealizedClock::apply(const AugmentedGraph& g, std::size_t e) { return apply(schedule_entry(g, e)); }

ScheduleEntry schedule_entry(const AugmentedGraph& g, std::size_t e) {
  const AugmentedEdge& ed = g.edge(e);
  ScheduleEntry entry;
  entry.communication = ed.kind == EdgeKind::Communication;
  entry.i = ed.u;
  entry.j = entry.communication ? ed.v : ed.u;
  return entry;
}

TimeTrace execute_schedule(std::span<const ScheduleEntry> entries, std::size_t num_nodes,
                           const SimConfig& config) {
  IdealizedClock clock(num_nodes, config);
  TimeTrace out;
  out.T_of_t.reserve(entries.size());
  for (const ScheduleEntry& entry : entries) out.T_of_t.push_back(clock.apply(entry));
  out.node_clocks = clock.node_clocks();
  out.busy_time = clock.busy_time();
  return out;
}

TimeTrace execute_schedule(const RunParameters& params, std::uint64_t schedule_seed, const AugmentedGraph& g,
                           const SimConfig& config, std::size_t t_max) {
  Schedule schedule(params.p, schedule_seed);
  IdealizedClock clock(g.num_centers(), config);
  TimeTrace out;
  out.T_of_t.reserve(t_max);
  for (std::size_t t = 0; t < t_max; ++t) out.T_of_t.push_back(clock.apply(g, schedule.next()));
  out.node_clocks = clock.node_clocks();
  out.busy_time = clock.busy_time();
  out.nu_bound = theorem4_nu(g.num_centers(), params.p_comp, params.p_comm_max, config.tau);
  return out;
}

void write_time_trace_csv(std::ostream& out, const TimeTrace& trace) {
  out << "t,T_of_t\n";
  char buf[64];
  for (std::size_t t = 0; t < trace.T_of_t.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%.17g", trace.T_of_t[t]);
    out << (t + 1) << ',' << buf << '\n';
  }
}

double theorem4_nu(std::size_t n, double p_comp, double p_comm_max, double tau, double C) {
  return C * (p_comp + tau * p_comm_max) / static_cast<double>(n);
}

Theorem4Report check_theorem4(const AugmentedGraph& g, const RunParameters& params, const SimConfig& config,
                              std::size_t t, std::size_t trials, double C) {
  if (t == 0 || trials == 0) throw std::invalid_argument("check_theorem4: t and trials must be positive");
  const std::size_t n = g.num_centers();
  Theorem4Report r;
  r.C = C;
  r.t = t;
  r.trials = trials;
  r.nu = theorem4_nu(n, params.p_comp, params.p_comm_max, config.tau, C);

  std::vector<double> comp(n, 0.0);
  for (std::size_t leaf = 0; leaf < g.num_leaves(); ++leaf) comp[g.leaf_center(leaf)] += params.p[g.leaf_edge(leaf)];
  const auto [lo, hi] = std::minmax_element(comp.begin(), comp.end());
  const bool uniform = *hi - *lo <= 1e-9 * std::max(1.0, *hi);
  const bool rates = params.p_comp > params.p_comm_max || config.tau > 1.0;
  r.in_scope = uniform && rates;
  if (!uniform) r.scope_note = "outside theorem scope: per-node computation probability is not uniform";
  else if (!rates) r.scope_note = "outside theorem scope: p_comp <= p_comm_max and tau <= 1";

  const double denom = params.p_comp + config.tau * params.p_comm_max;
  for (std::size_t k = 0; k < trials; ++k) {
    SimConfig trial = config;
    trial.seed = config.seed + k;
    const TimeTrace tr = execute_schedule(params, trial.seed, g, trial, t);
    const double T = tr.T_of_t.back();
    r.T_final.push_back(T);
    r.C_hat.push_back(static_cast<double>(n) * T / (static_cast<double>(t) * denom));
    if (T >= r.nu * static_cast<double>(t)) ++r.exceed_count;
  }
  double sum = 0.0;
  for (double c : r.C_hat) sum += c;
  r.C_hat_mean = sum / static_cast<double>(trials);
  r.C_hat_max = *std::max_element(r.C_hat.begin(), r.C_hat.end());
  return r;
}

std::string format_theorem4(const Theorem4Report& r) {
  std::ostringstream out;
  out.precision(10);
  out << "nu = " << r.nu << '\n'
      << "C = " << r.C << '\n'
      << "t = " << r.t << '\n'
      << "trials = " << r.trials << '\n'
      << "exceed_count = " << r.exceed_count << '\n'
      << "exceed_fraction = " << static_cast<double>(r.exceed_count) / static_cast<double>(r.trials) << '\n'
      << "C_hat_mean = " << r.C_hat_mean << '\n'
      << "C_hat_max = " << r.C_hat_max << '\n'
      << "in_scope = " << (r.in_scope ? "true" : "false") << '\n';
  if (!r.scope_note.empty()) out << "scope_note = " << r.scope_note << '\n';
  return out.str();
}

}  // namespace adfs
