#include "advmetrics/quality.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "advmetrics/convolve.hpp"

namespace advmetrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_shape(const ImagePair& pair, const char* op) {
  if (!pair.original.same_shape(pair.adversarial)) {
    throw ShapeMismatch(std::string(op) + ": image shapes differ");
  }
}

/// Per-band root-mean-square error.
double band_rmse(const ImageTensor& x, const ImageTensor& y, Eigen::Index c) {
  const Eigen::ArrayXXd d = y.channel(c) - x.channel(c);
  return std::sqrt(d.square().mean());
}

}  // namespace

double mse(const ImagePair& pair) {
  require_same_shape(pair, "mse");
  return diff(pair).square().mean();
}

double uqi(const ImagePair& pair, const QualityConfig& cfg) {
  require_same_shape(pair, "uqi");
  const Eigen::Index h = pair.original.height();
  const Eigen::Index w = pair.original.width();
  const Eigen::Index win = std::min(cfg.uqi_window, std::min(h, w));
  const double n = static_cast<double>(win) * static_cast<double>(win);

  double total = 0.0;
  Eigen::Index used = 0;
  for (Eigen::Index c = 0; c < pair.original.channels(); ++c) {
    const Eigen::ArrayXXd x = pair.original.channel(c);
    const Eigen::ArrayXXd y = pair.adversarial.channel(c);
    const Eigen::ArrayXXd sx = window_sums(x, win);
    const Eigen::ArrayXXd sy = window_sums(y, win);
    const Eigen::ArrayXXd sxx = window_sums(x.square(), win);
    const Eigen::ArrayXXd syy = window_sums(y.square(), win);
    const Eigen::ArrayXXd sxy = window_sums(x * y, win);

    for (Eigen::Index j = 0; j < sx.cols(); ++j) {
      for (Eigen::Index i = 0; i < sx.rows(); ++i) {
        const double mx = sx(i, j) / n;
        const double my = sy(i, j) / n;
        const double vx = sxx(i, j) / n - mx * mx;
        const double vy = syy(i, j) / n - my * my;
        const double cov = sxy(i, j) / n - mx * my;
        const double denom = (vx + vy) * (mx * mx + my * my);
        if (denom == 0.0) {
          const bool identical =
              (x.block(i, j, win, win) == y.block(i, j, win, win)).all();
          if (identical) {
            total += 1.0;
            ++used;
          }
          continue;
        }
        total += 4.0 * cov * mx * my / denom;
        ++used;
      }
    }
  }
  if (used == 0) {
    throw DegenerateInput("uqi: every window was skipped");
  }
  return total / static_cast<double>(used);
}

double ergas(const ImagePair& pair, const QualityConfig& cfg) {
  require_same_shape(pair, "ergas");
  const Eigen::Index channels = pair.original.channels();
  double acc = 0.0;
  for (Eigen::Index c = 0; c < channels; ++c) {
    const double rmse = band_rmse(pair.original, pair.adversarial, c);
    const double mean =
        std::max(pair.original.channel(c).mean(), cfg.ergas_mean_epsilon);
    const double ratio = rmse / mean;
    acc += ratio * ratio;
  }
  return (100.0 / cfg.ergas_ratio) *
         std::sqrt(acc / static_cast<double>(channels));
}

double sam(const ImagePair& pair) {
  require_same_shape(pair, "sam");
  const Eigen::Index pixels =
      pair.original.height() * pair.original.width();
  double total = 0.0;
  for (Eigen::Index p = 0; p < pixels; ++p) {
    const auto x = pair.original.pixel(p);
    const auto y = pair.adversarial.pixel(p);
    const double nx = x.norm();
    const double ny = y.norm();
    if (nx == 0.0 || ny == 0.0) {
      if (nx != ny) total += std::numbers::pi / 2.0;  // exactly one is zero
      continue;
    }
    // Half-angle form of arccos of the cosine similarity; unlike acos it
    // is exact for parallel vectors and stable near 0 and pi.
    const Eigen::VectorXd ux = x / nx;
    const Eigen::VectorXd uy = y / ny;
    total += 2.0 * std::atan2((ux - uy).norm(), (ux + uy).norm());
  }
  return total / static_cast<double>(pixels);
}

double scc(const ImagePair& pair) {
  require_same_shape(pair, "scc");
  if (pair.original.height() < 3 || pair.original.width() < 3) {
    throw DegenerateInput("scc: image must be at least 3x3");
  }
  Eigen::ArrayXXd laplacian(3, 3);
  laplacian << 0, -1, 0, -1, 4, -1, 0, -1, 0;

  double total = 0.0;
  const Eigen::Index channels = pair.original.channels();
  for (Eigen::Index c = 0; c < channels; ++c) {
    const Eigen::ArrayXXd fx = filter2_valid(pair.original.channel(c), laplacian);
    const Eigen::ArrayXXd fy =
        filter2_valid(pair.adversarial.channel(c), laplacian);
    const Eigen::ArrayXXd dx = fx - fx.mean();
    const Eigen::ArrayXXd dy = fy - fy.mean();
    const double sxx = dx.square().sum();
    const double syy = dy.square().sum();
    if (sxx == 0.0 || syy == 0.0) {
      total += (fx == fy).all() ? 1.0 : 0.0;
      continue;
    }
    total += (dx * dy).sum() / std::sqrt(sxx * syy);
  }
  return total / static_cast<double>(channels);
}

double rase(const ImagePair& pair) {
  require_same_shape(pair, "rase");
  const Eigen::Index channels = pair.original.channels();
  const double global_mean = pair.original.values().mean();
  if (global_mean == 0.0) return kInf;
  double acc = 0.0;
  for (Eigen::Index c = 0; c < channels; ++c) {
    const double rmse = band_rmse(pair.original, pair.adversarial, c);
    acc += rmse * rmse;
  }
  return (100.0 / global_mean) * std::sqrt(acc / static_cast<double>(channels));
}

namespace {

struct VifpAccum {
  double num = 0.0;
  double den = 0.0;
  Eigen::Index windows = 0;
};

/// One channel of pixel-domain VIF, accumulated over all scales with a
/// non-empty stats region.
VifpAccum vifp_channel(Eigen::ArrayXXd ref, Eigen::ArrayXXd dist,
                       const QualityConfig& cfg) {
  constexpr double kEps = 1e-10;
  VifpAccum acc;
  const int scales = cfg.vifp_scales;
  for (int s = 1; s <= scales; ++s) {
    const Eigen::Index n = (Eigen::Index{1} << (scales - s + 1)) + 1;
    const Eigen::ArrayXXd win = gaussian_kernel(n, static_cast<double>(n) / 5.0);

    if (s > 1) {
      // Pyramid step: smooth, then keep every second sample.
      if (ref.rows() < n || ref.cols() < n) break;
      ref = decimate2(filter2_valid(ref, win));
      dist = decimate2(filter2_valid(dist, win));
    }
    if (ref.rows() < n || ref.cols() < n) continue;

    const Eigen::ArrayXXd mu1 = filter2_valid(ref, win);
    const Eigen::ArrayXXd mu2 = filter2_valid(dist, win);
    const Eigen::ArrayXXd s1 = filter2_valid(ref.square(), win) - mu1.square();
    const Eigen::ArrayXXd s2 = filter2_valid(dist.square(), win) - mu2.square();
    const Eigen::ArrayXXd s12 = filter2_valid(ref * dist, win) - mu1 * mu2;

    for (Eigen::Index j = 0; j < mu1.cols(); ++j) {
      for (Eigen::Index i = 0; i < mu1.rows(); ++i) {
        double v1 = std::max(s1(i, j), 0.0);
        double v2 = std::max(s2(i, j), 0.0);
        const double v12 = s12(i, j);

        double g = v12 / (v1 + kEps);
        double sv = v2 - g * v12;
        if (v1 < kEps) {
          g = 0.0;
          sv = v2;
          v1 = 0.0;
        }
        if (v2 < kEps) {
          g = 0.0;
          sv = 0.0;
        }
        if (g < 0.0) {
          sv = v2;
          g = 0.0;
        }
        if (sv <= kEps) sv = kEps;

        acc.num += std::log10(1.0 + g * g * v1 / (sv + cfg.vifp_sigma_nsq));
        acc.den += std::log10(1.0 + v1 / cfg.vifp_sigma_nsq);
      }
    }
    acc.windows += mu1.size();
  }
  return acc;
}

}  // namespace

double vifp(const ImagePair& pair, const QualityConfig& cfg) {
  require_same_shape(pair, "vifp");
  if (cfg.vifp_scales < 1) {
    throw Error("vifp: vifp_scales must be >= 1");
  }
  double total = 0.0;
  const Eigen::Index channels = pair.original.channels();
  for (Eigen::Index c = 0; c < channels; ++c) {
    const VifpAccum acc =
        vifp_channel(pair.original.channel(c), pair.adversarial.channel(c), cfg);
    if (acc.windows == 0) {
      throw DegenerateInput("vifp: image too small for every scale");
    }
    if (acc.den == 0.0) {
      // The reference showed no local variance in any window: there was no
      // information to lose (num is necessarily 0 too), fidelity 1.
      total += 1.0;
      continue;
    }
    total += acc.num / acc.den;
  }
  return total / static_cast<double>(channels);
}

namespace {

/// Yim-Bovik blocking-effect factor of one channel: eta * (D_B - D_Bc) when
/// the mean squared jump across block boundaries exceeds the one between
/// in-block neighbors, else 0.
double channel_bef(const ImageTensor& img, Eigen::Index c,
                   Eigen::Index block) {
  const Eigen::ArrayXXd y = img.channel(c);
  const Eigen::Index h = y.rows();
  const Eigen::Index w = y.cols();

  double sum_b = 0.0, sum_bc = 0.0;
  Eigen::Index n_b = 0, n_bc = 0;
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j + 1 < w; ++j) {
      const double d = y(i, j) - y(i, j + 1);
      if ((j + 1) % block == 0) {
        sum_b += d * d;
        ++n_b;
      } else {
        sum_bc += d * d;
        ++n_bc;
      }
    }
  }
  for (Eigen::Index i = 0; i + 1 < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const double d = y(i, j) - y(i + 1, j);
      if ((i + 1) % block == 0) {
        sum_b += d * d;
        ++n_b;
      } else {
        sum_bc += d * d;
        ++n_bc;
      }
    }
  }

  const double d_b = n_b > 0 ? sum_b / static_cast<double>(n_b) : 0.0;
  const double d_bc = n_bc > 0 ? sum_bc / static_cast<double>(n_bc) : 0.0;
  if (d_b <= d_bc) return 0.0;
  const double eta = std::log2(static_cast<double>(block)) /
                     std::log2(static_cast<double>(std::min(h, w)));
  return eta * (d_b - d_bc);
}

}  // namespace

double psnrb(const ImagePair& pair, const QualityConfig& cfg) {
  require_same_shape(pair, "psnrb");
  const Eigen::Index h = pair.original.height();
  const Eigen::Index w = pair.original.width();
  if (h < cfg.psnrb_block || w < cfg.psnrb_block) {
    throw DegenerateInput("psnrb: image smaller than one block");
  }

  const double err = mse(pair);
  if (err == 0.0) return kInf;  // identical images: no distortion to rate

  double bef = 0.0;
  const Eigen::Index channels = pair.adversarial.channels();
  for (Eigen::Index c = 0; c < channels; ++c) {
    bef += channel_bef(pair.adversarial, c, cfg.psnrb_block);
  }
  bef /= static_cast<double>(channels);

  const double mse_b = err + bef;
  return 10.0 * std::log10(cfg.psnrb_peak * cfg.psnrb_peak / mse_b);
}

QualityVector quality_vector(const ImagePair& pair, const QualityConfig& cfg) {
  QualityVector q;
  q.mse = mse(pair);
  q.uqi = uqi(pair, cfg);
  q.ergas = ergas(pair, cfg);
  q.sam = sam(pair);
  q.scc = scc(pair);
  q.rase = rase(pair);
  q.vifp = vifp(pair, cfg);
  q.psnrb = psnrb(pair, cfg);
  return q;
}

}  // namespace advmetrics
