#pragma once

#include "ruc/rng.hpp"
#include "ruc/types.hpp"

namespace ruc {

/// Vector stand-ins for the weak (crop/flip) and strong (RandAugment) image
/// augmentations, plus MixUp and sharpening parameters.
struct AugmentConfig {
  double weak_sigma = 0.1;
  double strong_sigma = 0.4;
  /// Per-coordinate zeroing probability of the strong augmentation.
  double dropout = 0.1;
  /// Strong augmentation rescales by a factor drawn from [1 - scale, 1 + scale].
  double scale = 0.1;
  double alpha = 0.75;
  double temperature = 0.5;

  /// Strong jitter must exceed weak jitter unless both are switched off.
  void validate() const;
  bool enabled() const { return weak_sigma > 0.0 || strong_sigma > 0.0 || dropout > 0.0 || scale > 0.0; }
  static AugmentConfig disabled();
};

/// x + N(0, weak_sigma^2 I).
FeatureVector weak_aug(const FeatureVector& x, const AugmentConfig& cfg, Rng& rng);

/// Gaussian jitter, then per-coordinate dropout, then a global scale factor.
FeatureVector strong_aug(const FeatureVector& x, const AugmentConfig& cfg, Rng& rng);

struct MixedSample {
  FeatureVector x;
  ProbVector y;
};

/// lambda ~ Beta(alpha, alpha), then mixup_with_lambda.
MixedSample mixup(const FeatureVector& x1, const ProbVector& y1, const FeatureVector& x2,
                  const ProbVector& y2, double alpha, Rng& rng);

/// lambda' = max(lambda, 1 - lambda); x' = lambda' x1 + (1 - lambda') x2, same for y.
MixedSample mixup_with_lambda(const FeatureVector& x1, const ProbVector& y1, const FeatureVector& x2,
                              const ProbVector& y2, double lambda);

/// p_i^(1/T) / sum_j p_j^(1/T), evaluated in log space.
ProbVector sharpen(const ProbVector& p, double temperature);

}  // namespace ruc
