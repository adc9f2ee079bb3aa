#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adfs/adfs.hpp"
#include "adfs/baselines.hpp"
#include "adfs/graph.hpp"
#include "adfs/objective.hpp"
#include "adfs/simtime.hpp"

namespace adfs {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Algorithm { Adfs, NsAdfs, PointSaga, Agd };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct ExperimentConfig {
  std::size_t grid_rows = 2;
  std::size_t grid_cols = 2;
  std::string graph_file;  // overrides the grid when set
  std::string dataset;     // CSV; overrides m and d when set
  std::size_t m = 100;
  Eigen::Index d = 2;
  double sigma = 1.0;
  double tau = 1.0;
  DelayModel delay = DelayModel::Deterministic;
  bool nonblocking = false;
  std::vector<Algorithm> algorithms{Algorithm::Adfs};
  std::size_t T = 10000;
  std::map<Algorithm, std::size_t> T_override;
  /// Step size overrides for the baselines (point_saga.step, agd.step).
  std::map<Algorithm, double> step_override;
  double target = 0.0;
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t data_seed = 0;
  std::optional<double> p_comm;
  std::size_t checkpoint_every = 0;
  std::string out;
  std::size_t theorem4_t = 100000;
  std::size_t theorem4_trials = 20;

  std::size_t iterations(Algorithm a) const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Sets one `key = value` pair; throws ConfigError for unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Applies a `KEY=VALUE` override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
/// Flat `key = value` lines; `#` starts a comment.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

struct Scenario {
  ProblemInstance problem;
  AugmentedGraph graph;
  SpectralReport spec;
  RunParameters params;
  ReferenceSolution reference;
};

Scenario build_scenario(const ExperimentConfig& cfg);

struct TracePoint {
  std::size_t iteration = 0;
  double idealized_time = 0.0;
  double primal_subopt = 0.0;
};

/// Linear interpolation between the checkpoints that bracket the first crossing; NaN if never reached.
double crossing_time(const std::vector<TracePoint>& trace, double threshold);

struct RunRecord {
  Algorithm algorithm = Algorithm::Adfs;
  std::uint64_t seed = 0;
  std::vector<TracePoint> trace;
  bool reached_target = false;
  std::vector<double> crossings;  // one per crossing threshold
};

struct ExperimentResult {
  Scenario scenario;
  std::vector<RunRecord> runs;
  double nu = 0.0;
  std::string summary;
};

inline const std::vector<double> kCrossingThresholds{1e-2, 1e-4, 1e-6};

/// Writes one CSV per (algorithm, seed) and summary.txt into cfg.out when it is nonempty.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);
std::vector<TracePoint> read_trace_csv(std::istream& in);

/// Median over seeds of the crossing time at `threshold`; NaN if any seed misses it.
double median_crossing(const ExperimentResult& r, Algorithm a, double threshold);

std::string dump_parameters(const ExperimentConfig& cfg);

Theorem4Report run_theorem4_check(const ExperimentConfig& cfg);

}  // namespace adfs
