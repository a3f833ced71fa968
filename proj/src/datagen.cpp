#include "advmetrics/datagen.hpp"

#include <cmath>

#include "advmetrics/norms.hpp"
#include "advmetrics/rng.hpp"

namespace advmetrics {

PerturbationFamily parse_perturbation_family(const std::string& name) {
  if (name == "uniform_linf") return PerturbationFamily::uniform_linf;
  if (name == "gaussian") return PerturbationFamily::gaussian;
  if (name == "sparse_pixels") return PerturbationFamily::sparse_pixels;
  if (name == "block_patch") return PerturbationFamily::block_patch;
  throw SpecError("unknown perturbation family '" + name + "'");
}

std::string perturbation_family_name(PerturbationFamily family) {
  switch (family) {
    case PerturbationFamily::uniform_linf:
      return "uniform_linf";
    case PerturbationFamily::gaussian:
      return "gaussian";
    case PerturbationFamily::sparse_pixels:
      return "sparse_pixels";
    case PerturbationFamily::block_patch:
      return "block_patch";
  }
  throw SpecError("invalid perturbation family");
}

ImagePair generate_pair(const ImageTensor& base, const PerturbationSpec& spec,
                        std::string pair_id) {
  if (spec.magnitude <= 0.0) {
    throw SpecError("generate_pair: magnitude must be positive");
  }
  if (spec.count < 1) {
    throw SpecError("generate_pair: count must be >= 1");
  }

  RngStream stream(spec.seed);
  Eigen::ArrayXd v = base.values();
  switch (spec.family) {
    case PerturbationFamily::uniform_linf:
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] += stream.uniform(-spec.magnitude, spec.magnitude);
      }
      break;
    case PerturbationFamily::gaussian:
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] += stream.normal(0.0, spec.magnitude);
      }
      break;
    case PerturbationFamily::sparse_pixels: {
      if (static_cast<Eigen::Index>(spec.count) > base.size()) {
        throw SpecError("generate_pair: sparse count exceeds coordinates");
      }
      const auto coords = stream.sample_without_replacement(
          static_cast<std::size_t>(base.size()),
          static_cast<std::size_t>(spec.count));
      for (const std::size_t i : coords) {
        const double sign = stream.below(2) == 0 ? 1.0 : -1.0;
        v[static_cast<Eigen::Index>(i)] += sign * spec.magnitude;
      }
      break;
    }
    case PerturbationFamily::block_patch: {
      const Eigen::Index side = spec.count;
      if (side > base.height() || side > base.width()) {
        throw SpecError("generate_pair: patch does not fit inside the image");
      }
      const auto r0 = static_cast<Eigen::Index>(
          stream.below(static_cast<std::uint64_t>(base.height() - side + 1)));
      const auto c0 = static_cast<Eigen::Index>(
          stream.below(static_cast<std::uint64_t>(base.width() - side + 1)));
      for (Eigen::Index r = r0; r < r0 + side; ++r) {
        for (Eigen::Index c = c0; c < c0 + side; ++c) {
          for (Eigen::Index ch = 0; ch < base.channels(); ++ch) {
            v[(r * base.width() + c) * base.channels() + ch] += spec.magnitude;
          }
        }
      }
      break;
    }
  }

  v = v.max(0.0).min(255.0);
  return ImagePair(base,
                   ImageTensor(base.height(), base.width(), base.channels(),
                               std::move(v)),
                   std::move(pair_id));
}

bool metric_increases_with_perturbation(const std::string& metric) {
  if (metric == "l0" || metric == "l1" || metric == "l2" ||
      metric == "linf" || metric == "mse" || metric == "ergas" ||
      metric == "sam" || metric == "rase") {
    return true;
  }
  if (metric == "uqi" || metric == "scc" || metric == "vifp" ||
      metric == "psnrb") {
    return false;
  }
  throw Error("unknown metric '" + metric + "'");
}

double metric_value(const ImagePair& pair, const std::string& metric,
                    const QualityConfig& cfg, double l0_tolerance) {
  if (metric == "l0" || metric == "l1" || metric == "l2" || metric == "linf") {
    const NormQuadruple n = compute_norms(pair, l0_tolerance);
    if (metric == "l0") return n.l0;
    if (metric == "l1") return n.l1;
    if (metric == "l2") return n.l2;
    return n.linf;
  }
  if (metric == "mse") return mse(pair);
  if (metric == "uqi") return uqi(pair, cfg);
  if (metric == "ergas") return ergas(pair, cfg);
  if (metric == "sam") return sam(pair);
  if (metric == "scc") return scc(pair);
  if (metric == "rase") return rase(pair);
  if (metric == "vifp") return vifp(pair, cfg);
  if (metric == "psnrb") {
    const double v = psnrb(pair, cfg);
    return std::isinf(v) ? cfg.psnrb_cap_db : v;
  }
  throw Error("unknown metric '" + metric + "'");
}

int oracle_label(const ImagePair& pair, const OracleDetectorSpec& spec,
                 const QualityConfig& cfg, std::uint64_t sample_seed,
                 double l0_tolerance) {
  if (!(spec.flip_noise >= 0.0 && spec.flip_noise < 0.5)) {
    throw Error("oracle_label: flip_noise must be in [0, 0.5)");
  }
  if (!std::isfinite(spec.threshold)) {
    throw Error("oracle_label: threshold must be finite");
  }
  const double value = metric_value(pair, spec.metric, cfg, l0_tolerance);
  int label;
  if (metric_increases_with_perturbation(spec.metric)) {
    label = value > spec.threshold ? 1 : 0;
  } else {
    label = value < spec.threshold ? 1 : 0;
  }
  if (spec.flip_noise > 0.0) {
    RngStream stream(sample_seed);
    if (stream.uniform01() < spec.flip_noise) label ^= 1;
  }
  return label;
}

ImageTensor noise_image(Eigen::Index height, Eigen::Index width,
                        Eigen::Index channels, std::uint64_t seed) {
  RngStream stream(seed);
  Eigen::ArrayXd v(height * width * channels);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = static_cast<double>(stream.below(256));
  }
  return ImageTensor(height, width, channels, std::move(v));
}

}  // namespace advmetrics
