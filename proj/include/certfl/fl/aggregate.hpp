#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace certfl::fl {

struct ClientUpdate {
  std::size_t client_id = 0;
  std::vector<double> params;
  // Ground truth for reporting; the aggregator never reads it.
  bool is_malicious = false;
};

// Coordinate-wise median; an even count takes the mean of the two middle
// values.
std::vector<double> median_aggregate(std::span<const ClientUpdate> updates);

}  // namespace certfl::fl
