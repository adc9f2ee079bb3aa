#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adfs/objective.hpp"

namespace adfs {

struct BaselineCheckpoint {
  std::size_t iteration = 0;
  double idealized_time = 0.0;
  double primal_subopt = 0.0;
};

struct BaselineOptions {
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: max(1, T / 1000)
  std::vector<std::size_t> extra_checkpoints;
  double F_star = 0.0;
  double target = 0.0;
  std::optional<double> step;  // overrides the derived step size
  std::optional<Vector> x0;
  /// Recompute the table mean after every step and record the drift (O(N d) per step).
  bool check_mean_invariant = false;
  bool divergence_check = true;
};

struct BaselineTrace {
  std::vector<BaselineCheckpoint> checkpoints;
  Vector theta;
  std::size_t iterations = 0;
  bool reached_target = false;
  double step = 0.0;
  double momentum = 0.0;
  double max_mean_error = 0.0;
};

/// Step size for N components g_k = f_k + (sigma / N)/2 ||.||^2.
double point_saga_step(const ProblemInstance& problem);

/// Each step processes one sample: one unit of idealized time.
BaselineTrace run_point_saga(const ProblemInstance& problem, std::size_t T, const BaselineOptions& options);

/// Largest eigenvalue of the global Hessian bound, and the total strong convexity.
std::pair<double, double> global_smoothness(const ProblemInstance& problem);

/// Constant-step Nesterov method; each step costs N units of idealized time.
BaselineTrace run_agd(const ProblemInstance& problem, std::size_t T, const BaselineOptions& options = {});

}  // namespace adfs
