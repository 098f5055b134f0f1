#include "certfl/fl/aggregate.hpp"

#include <algorithm>

#include "certfl/error.hpp"
#include "certfl/tensor.hpp"

namespace certfl::fl {

std::vector<double> median_aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw InputError("median of zero updates");
  const std::size_t p = updates.front().params.size();
  for (const auto& u : updates) {
    if (u.params.size() != p) {
      throw InputError("update from client " + std::to_string(u.client_id) + " has " + std::to_string(u.params.size()) +
                       " parameters, expected " + std::to_string(p));
    }
    require_finite(u.params, "client update");
  }
  const std::size_t n = updates.size();
  std::vector<double> out(p), column(n);
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = updates[i].params[k];
    const auto mid = column.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(column.begin(), mid, column.end());
    if (n % 2 == 1) {
      out[k] = *mid;
    } else {
      const double hi = *mid;
      const double lo = *std::max_element(column.begin(), mid);
      out[k] = lo + (hi - lo) / 2.0;
    }
  }
  return out;
}

}  // namespace certfl::fl
