#include "refinery/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace refinery {

FeatureMatrix linf_normalize(const FeatureMatrix& f) {
  FeatureMatrix out = f;
  for (std::size_t i = 0; i < out.n_samples; ++i) {
    auto row = out.row(i);
    double mx = 0.0;
    for (double v : row) mx = std::max(mx, std::abs(v));
    if (mx == 0.0) continue;
    for (auto& v : row) v /= mx;
  }
  return out;
}

FusedRepresentation fuse(const FeatureMatrix& spe, const FeatureMatrix& fine) {
  if (spe.n_samples != fine.n_samples) {
    throw Error(ErrorKind::dimension,
                "fuse: sample counts differ (" + std::to_string(spe.n_samples) +
                    " vs " + std::to_string(fine.n_samples) + ")");
  }
  const FeatureMatrix a = linf_normalize(spe);
  const FeatureMatrix b = linf_normalize(fine);
  FusedRepresentation out;
  out.spe_dim = spe.dim;
  out.fine_dim = fine.dim;
  out.matrix = FeatureMatrix(spe.n_samples, spe.dim + fine.dim);
  for (std::size_t i = 0; i < spe.n_samples; ++i) {
    auto dst = out.matrix.row(i);
    const auto ra = a.row(i);
    const auto rb = b.row(i);
    std::copy(ra.begin(), ra.end(), dst.begin());
    std::copy(rb.begin(), rb.end(), dst.begin() + std::ptrdiff_t(spe.dim));
  }
  return out;
}

}  // namespace refinery
