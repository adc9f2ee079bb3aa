#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "adfs/graph.hpp"
#include "adfs/rng.hpp"

namespace adfs {

struct RunParameters;

enum class DelayModel { Deterministic, Exponential };

struct SimConfig {
  double tau = 1.0;
  DelayModel delay = DelayModel::Deterministic;
  std::uint64_t seed = 0;
  /// A node resumes as soon as it has sent; it still waits for its peer's message.
  bool nonblocking = false;
  double send_cost = 0.0;
};

struct ScheduleEntry {
  bool communication = false;
  std::size_t i = 0;  // center doing the computation, or first endpoint
  std::size_t j = 0;  // second endpoint (communication only)
};

/// Per-node clocks driven one schedule entry at a time.
class IdealizedClock {
 public:
  IdealizedClock(std::size_t num_nodes, const SimConfig& config);

  /// Returns T(t) after the entry.
  double communicate(std::size_t i, std::size_t j);
  double compute(std::size_t i);
  double apply(const ScheduleEntry& entry);
  /// Entry for augmented edge e; leaves are attributed to their center.
  double apply(const AugmentedGraph& g, std::size_t e);

  double now() const { return now_; }
  std::size_t steps() const { return steps_; }
  const std::vector<double>& node_clocks() const { return clocks_; }
  /// Total duration of entries each node took part in.
  const std::vector<double>& busy_time() const { return busy_; }

 private:
  double draw(double scale);

  SimConfig config_;
  Rng rng_;
  std::vector<double> clocks_;
  std::vector<double> busy_;
  double now_ = 0.0;
  std::size_t steps_ = 0;
};

struct TimeTrace {
  std::vector<double> node_clocks;
  std::vector<double> T_of_t;  // T_of_t[t - 1] after t entries
  std::vector<double> busy_time;
  double nu_bound = 0.0;        // filled when probabilities are supplied
};

TimeTrace execute_schedule(std::span<const ScheduleEntry> entries, std::size_t num_nodes,
                           const SimConfig& config);
/// Draws `t_max` edges from the shared schedule of `params` seeded with `schedule_seed`.
TimeTrace execute_schedule(const RunParameters& params, std::uint64_t schedule_seed,
                           const AugmentedGraph& g, const SimConfig& config, std::size_t t_max);

/// CSV with columns t,T_of_t.
void write_time_trace_csv(std::ostream& out, const TimeTrace& trace);

ScheduleEntry schedule_entry(const AugmentedGraph& g, std::size_t e);

/// nu = C (p_comp + tau p_comm_max) / n
double theorem4_nu(std::size_t n, double p_comp, double p_comm_max, double tau, double C = 24.0);

struct Theorem4Report {
  double nu = 0.0;
  double C = 24.0;
  std::size_t t = 0;
  std::size_t trials = 0;
  std::size_t exceed_count = 0;
  std::vector<double> T_final;
  std::vector<double> C_hat;  // n T(t) / (t (p_comp + tau p_comm_max))
  double C_hat_mean = 0.0;
  double C_hat_max = 0.0;
  bool in_scope = true;
  std::string scope_note;
};

/// Runs `trials` schedules of length t with seeds config.seed + k.
Theorem4Report check_theorem4(const AugmentedGraph& g, const RunParameters& params,
                              const SimConfig& config, std::size_t t, std::size_t trials,
                              double C = 24.0);

std::string format_theorem4(const Theorem4Report& r);

}  // namespace adfs
