#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "adfs/adfs.hpp"

namespace adfs::detail {

class DivergenceMonitor {
 public:
  explicit DivergenceMonitor(bool enabled) : enabled_(enabled) {}

  void observe(std::size_t iteration, double value) {
    if (!enabled_) return;
    if (!initial_) {
      initial_ = value;
      return;
    }
    if (!std::isfinite(value) || (*initial_ > 0.0 && value > 10.0 * *initial_)) {
      if (++strikes_ >= 3) {
        std::ostringstream msg;
        msg << "divergence detected at iteration " << iteration << ": suboptimality " << value
            << " exceeds 10x its initial value " << *initial_ << " for 3 consecutive checkpoints";
        throw DivergenceError(msg.str());
      }
    } else {
      strikes_ = 0;
    }
  }

 private:
  bool enabled_;
  std::optional<double> initial_;
  int strikes_ = 0;
};

inline std::size_t default_every(std::size_t every, std::size_t T) {
  return every ? every : (T / 1000 > 0 ? T / 1000 : 1);
}

inline std::set<std::size_t> checkpoint_set(std::size_t T, std::size_t every, const std::vector<std::size_t>& extra) {
  std::set<std::size_t> out;
  for (std::size_t t : extra)
    if (t <= T) out.insert(t);
  for (std::size_t t = 0; t <= T; t += every) out.insert(t);
  out.insert(T);
  return out;
}

}  // namespace adfs::detail
