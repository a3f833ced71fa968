#pragma once

#include <cstdint>
#include <string>

#include "advmetrics/image.hpp"
#include "advmetrics/quality.hpp"

namespace advmetrics {

/// Synthetic perturbation families, each stressing a different kind of
/// measurement: dense bounded noise (linf), dense Gaussian noise (l2/mse),
/// few large coordinate edits (l0), and a localized intensity patch
/// (blockiness).
enum class PerturbationFamily {
  uniform_linf,
  gaussian,
  sparse_pixels,
  block_patch,
};

PerturbationFamily parse_perturbation_family(const std::string& name);
std::string perturbation_family_name(PerturbationFamily family);

struct PerturbationSpec {
  PerturbationFamily family = PerturbationFamily::gaussian;
  /// uniform_linf: bound epsilon; gaussian: sigma; sparse_pixels: per-
  /// coordinate delta; block_patch: intensity offset.
  double magnitude = 1.0;
  /// sparse_pixels: coordinates changed; block_patch: patch side length.
  int count = 1;
  std::uint64_t seed = 0;
};

/// Apply the family's perturbation to `base`, clipped to [0, 255].
/// Deterministic under spec.seed.
ImagePair generate_pair(const ImageTensor& base, const PerturbationSpec& spec,
                        std::string pair_id);

/// Threshold-on-metric stand-in for a real adversarial-input detector.
struct OracleDetectorSpec {
  std::string metric = "mse";  ///< one of the 12 feature names
  double threshold = 0.0;
  double flip_noise = 0.0;  ///< probability of flipping the label, [0, 0.5)
};

/// True when a larger value of the named metric means a stronger
/// perturbation (l-norms and the error metrics); false for the similarity
/// metrics uqi, scc, vifp, psnrb.
bool metric_increases_with_perturbation(const std::string& metric);

/// Value of a single named metric on the pair; psnrb's +inf sentinel is
/// replaced by cfg.psnrb_cap_db so the result is always finite.
double metric_value(const ImagePair& pair, const std::string& metric,
                    const QualityConfig& cfg = {}, double l0_tolerance = 0.0);

/// 1 when the named metric crosses the threshold on the detected side,
/// flipped with probability flip_noise under the per-sample stream.
int oracle_label(const ImagePair& pair, const OracleDetectorSpec& spec,
                 const QualityConfig& cfg, std::uint64_t sample_seed,
                 double l0_tolerance = 0.0);

/// Textured base image: integer-valued white noise, deterministic per seed.
ImageTensor noise_image(Eigen::Index height, Eigen::Index width,
                        Eigen::Index channels, std::uint64_t seed);

}  // namespace advmetrics
