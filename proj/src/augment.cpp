#include "ruc/augment.hpp"

#include <cmath>
#include <limits>

namespace ruc {

void AugmentConfig::validate() const {
  if (weak_sigma < 0.0 || strong_sigma < 0.0) throw ConfigError("augmentation jitter must be non-negative");
  if (!(weak_sigma < strong_sigma) && !(weak_sigma == 0.0 && strong_sigma == 0.0))
    throw ConfigError("strong jitter must exceed weak jitter");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(scale >= 0.0 && scale < 1.0)) throw ConfigError("scale jitter must lie in [0, 1)");
  if (!(alpha > 0.0)) throw ConfigError("mixup alpha must be positive");
  if (!(temperature > 0.0)) throw ConfigError("sharpening temperature must be positive");
}

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig cfg;
  cfg.weak_sigma = 0.0;
  cfg.strong_sigma = 0.0;
  cfg.dropout = 0.0;
  cfg.scale = 0.0;
  return cfg;
}

FeatureVector weak_aug(const FeatureVector& x, const AugmentConfig& cfg, Rng& rng) {
  if (cfg.weak_sigma == 0.0) return x;
  std::normal_distribution<double> noise(0.0, cfg.weak_sigma);
  FeatureVector out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += noise(rng);
  return out;
}

FeatureVector strong_aug(const FeatureVector& x, const AugmentConfig& cfg, Rng& rng) {
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(cfg.scale >= 0.0 && cfg.scale < 1.0)) throw ConfigError("scale jitter must lie in [0, 1)");
  if (cfg.strong_sigma < 0.0) throw ConfigError("strong jitter must be non-negative");
  FeatureVector out = x;
  if (cfg.strong_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.strong_sigma);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += noise(rng);
  }
  if (cfg.dropout > 0.0) {
    std::bernoulli_distribution drop(cfg.dropout);
    for (Eigen::Index i = 0; i < out.size(); ++i)
      if (drop(rng)) out[i] = 0.0;
  }
  if (cfg.scale > 0.0) {
    std::uniform_real_distribution<double> factor(1.0 - cfg.scale, 1.0 + cfg.scale);
    out *= factor(rng);
  }
  return out;
}

MixedSample mixup_with_lambda(const FeatureVector& x1, const ProbVector& y1, const FeatureVector& x2,
                              const ProbVector& y2, double lambda) {
  if (x1.size() != x2.size()) throw ShapeError("mixup inputs differ in dimension");
  if (y1.size() != y2.size()) throw ShapeError("mixup labels differ in length");
  const double l = std::max(lambda, 1.0 - lambda);
  return {l * x1 + (1.0 - l) * x2, l * y1 + (1.0 - l) * y2};
}

MixedSample mixup(const FeatureVector& x1, const ProbVector& y1, const FeatureVector& x2,
                  const ProbVector& y2, double alpha, Rng& rng) {
  return mixup_with_lambda(x1, y1, x2, y2, sample_symmetric_beta(alpha, rng));
}

ProbVector sharpen(const ProbVector& p, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("sharpening temperature must be positive");
  if (temperature == 1.0) return p;
  const double top = p.maxCoeff();
  if (!(top > 0.0)) throw ConfigError("cannot sharpen an all-zero vector");
  const double log_top = std::log(top);
  ProbVector out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    out[i] = p[i] > 0.0 ? std::exp((std::log(p[i]) - log_top) / temperature) : 0.0;
  return out / out.sum();
}

}  // namespace ruc
