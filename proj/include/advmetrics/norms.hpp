#pragma once

#include "advmetrics/image.hpp"

namespace advmetrics {

/// The four pixel Lp distances of a perturbation. On any difference vector
/// linf <= l2 <= l1 <= l0 * linf.
struct NormQuadruple {
  double l0 = 0.0;    ///< count of coordinates changed beyond the tolerance
  double l1 = 0.0;    ///< sum of absolute differences
  double l2 = 0.0;    ///< Euclidean length of the difference
  double linf = 0.0;  ///< largest absolute difference
};

/// Lp distances between the pair's images, computed on the flat
/// per-coordinate difference. l0 counts coordinates (channel entries) whose
/// absolute difference exceeds l0_tolerance; the tolerance exists because
/// file round-trips can introduce sub-visible nonzero differences.
NormQuadruple compute_norms(const ImagePair& pair, double l0_tolerance = 0.0);

}  // namespace advmetrics
