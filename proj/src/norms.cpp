#include "advmetrics/norms.hpp"

namespace advmetrics {

NormQuadruple compute_norms(const ImagePair& pair, double l0_tolerance) {
  if (l0_tolerance < 0.0) {
    throw Error("compute_norms: l0_tolerance must be >= 0");
  }
  const Eigen::ArrayXd v = diff(pair);
  const Eigen::ArrayXd a = v.abs();
  NormQuadruple n;
  n.l0 = static_cast<double>((a > l0_tolerance).count());
  n.l1 = a.sum();
  n.l2 = std::sqrt(v.square().sum());
  n.linf = a.maxCoeff();
  return n;
}

}  // namespace advmetrics
