#pragma once

#include <cstddef>

#include "certfl/data/dataset.hpp"

namespace certfl::data {

// Index ranges of each split inside the source dataset.
struct SplitRanges {
  std::size_t cert_begin = 0, cert_end = 0;
  std::size_t val_begin = 0, val_end = 0;
  std::size_t pool_begin = 0, pool_end = 0;
};

// The defender keeps the head of the training order: certification points
// first, then validation points; everything after feeds the clients.
struct DefenderSplits {
  LabeledDataset cert_set;
  LabeledDataset validation_set;
  LabeledDataset client_pool;
  SplitRanges ranges;
};

// cert = [0, cert_n), validation = [cert_n, cert_n + val_n), client_pool =
// the rest. cert_n = 0 is accepted only with allow_empty_cert (gates that
// skip certification).
DefenderSplits make_splits(const LabeledDataset& data, std::size_t cert_n, std::size_t val_n,
                           bool allow_empty_cert = false);

}  // namespace certfl::data
