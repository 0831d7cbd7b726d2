#pragma once

#include "refinery/types.hpp"

namespace refinery {

/// Each row divided by its maximum absolute entry; all-zero rows pass
/// through unchanged.
FeatureMatrix linf_normalize(const FeatureMatrix& f);

struct FusedRepresentation {
  FeatureMatrix matrix;  // n x (spe_dim + fine_dim)
  std::size_t spe_dim = 0;
  std::size_t fine_dim = 0;
};

/// Row-wise concatenation of linf_normalize(spe) and linf_normalize(fine),
/// in that order.
FusedRepresentation fuse(const FeatureMatrix& spe, const FeatureMatrix& fine);

}  // namespace refinery
