#include "certfl/data/splits.hpp"

#include "certfl/error.hpp"

namespace certfl::data {

DefenderSplits make_splits(const LabeledDataset& data, std::size_t cert_n, std::size_t val_n,
                           bool allow_empty_cert) {
  if (cert_n == 0 && !allow_empty_cert) {
    throw ConfigError("certification split is empty but the gate's certification checks are enabled");
  }
  if (cert_n + val_n >= data.size()) {
    throw ConfigError("dataset of " + std::to_string(data.size()) + " points cannot hold " + std::to_string(cert_n) +
                      " certification + " + std::to_string(val_n) + " validation points and a client pool");
  }
  DefenderSplits s;
  s.ranges = {0, cert_n, cert_n, cert_n + val_n, cert_n + val_n, data.size()};
  s.cert_set = data.slice(s.ranges.cert_begin, s.ranges.cert_end, data.name() + ":cert");
  s.validation_set = data.slice(s.ranges.val_begin, s.ranges.val_end, data.name() + ":validation");
  s.client_pool = data.slice(s.ranges.pool_begin, s.ranges.pool_end, data.name() + ":clients");
  return s;
}

}  // namespace certfl::data
