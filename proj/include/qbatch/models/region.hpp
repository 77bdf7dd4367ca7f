#pragma once

#include <string>
#include <vector>

#include "qbatch/common.hpp"

namespace qbatch {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Per-component box for initial-state sampling.
using InitRegion = std::vector<Interval>;

inline void check_region(const InitRegion& region, std::size_t dim, const std::string& who) {
  if (region.size() != dim)
    throw ConfigError(who + ": init region has " + std::to_string(region.size()) + " intervals, expected " +
                      std::to_string(dim));
  for (const auto& iv : region)
    if (!(iv.lo <= iv.hi)) throw ConfigError(who + ": init region interval with lo > hi");
}

}  // namespace qbatch
