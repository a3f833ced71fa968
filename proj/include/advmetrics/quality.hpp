#pragma once

#include "advmetrics/image.hpp"

namespace advmetrics {

/// Free parameters of the quality metrics. Defaults follow the common
/// reference implementations of these metrics so that values computed here
/// line up with the usual published numbers.
struct QualityConfig {
  Eigen::Index uqi_window = 8;      ///< UQI sliding-window side
  double ergas_ratio = 4.0;         ///< ERGAS resolution ratio r
  double ergas_mean_epsilon = 1e-12;  ///< floor for per-band means
  int vifp_scales = 4;              ///< VIFP pyramid depth
  double vifp_sigma_nsq = 2.0;      ///< VIFP noise variance sigma_n^2
  Eigen::Index psnrb_block = 8;     ///< PSNR-B block size
  double psnrb_peak = 255.0;        ///< PSNR-B peak signal L
  double psnrb_cap_db = 100.0;      ///< finite stand-in for +inf when serialized
};

/// The eight full-reference quality metrics of one image pair. psnrb may be
/// +infinity (identical images); everything else is finite.
struct QualityVector {
  double mse = 0.0;
  double uqi = 0.0;
  double ergas = 0.0;
  double sam = 0.0;
  double scc = 0.0;
  double rase = 0.0;
  double vifp = 0.0;
  double psnrb = 0.0;
};

/// Mean squared coordinate difference over all h*w*c coordinates.
double mse(const ImagePair& pair);

/// Universal Quality Index, averaged over all sliding w x w windows of all
/// channels, w = min(cfg.uqi_window, H, W), stride 1, population
/// (co)variances. A window whose Q denominator is zero contributes 1 when
/// the two windows are identical and is skipped otherwise; if every window
/// is skipped the input is degenerate.
double uqi(const ImagePair& pair, const QualityConfig& cfg = {});

/// Relative dimensionless global error: (100/r) * RMS over bands of
/// per-band RMSE divided by the per-band mean of the original (floored at
/// cfg.ergas_mean_epsilon).
double ergas(const ImagePair& pair, const QualityConfig& cfg = {});

/// Mean per-pixel spectral angle, radians. A pixel where both spectral
/// vectors are zero contributes 0; where exactly one is zero, pi/2.
double sam(const ImagePair& pair);

/// Spatial correlation coefficient: Pearson correlation of the two images
/// after 3x3 Laplacian high-pass filtering (valid region), averaged over
/// channels. A channel whose filtered signal has zero variance contributes
/// 1 when the filtered signals are identical, 0 otherwise.
double scc(const ImagePair& pair);

/// Relative average spectral error: (100/M) * RMS over bands of per-band
/// RMSE, M the global mean of the original. M == 0 yields +infinity.
double rase(const ImagePair& pair);

/// Pixel-domain Visual Information Fidelity over cfg.vifp_scales scales.
/// Per channel, the image pyramid is built by Gaussian smoothing and
/// 2x decimation; local window statistics at each scale accumulate the
/// information numerator and denominator, whose ratio is averaged over
/// channels. A channel whose reference carries no local variance at any
/// scale (0/0) is defined as 1. Throws DegenerateInput when the image is
/// too small for every scale.
double vifp(const ImagePair& pair, const QualityConfig& cfg = {});

/// Block-sensitive PSNR: 10*log10(L^2 / (MSE + BEF)), BEF the Yim-Bovik
/// blocking-effect factor of the adversarial image, averaged over channels.
/// Identical images give +infinity.
double psnrb(const ImagePair& pair, const QualityConfig& cfg = {});

/// All eight metrics on the same pair.
QualityVector quality_vector(const ImagePair& pair,
                             const QualityConfig& cfg = {});

}  // namespace advmetrics
