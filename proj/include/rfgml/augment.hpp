#pragma once

// Training-time augmentation: CutMix on spectrogram segments and the
// channel-swap helper. CutMix pastes an axis-aligned rectangle of segment B
// into segment A (the same rectangle on every plane) and mixes the labels by
// the realized area: y = lambda_realized * yA + (1 - lambda_realized) * yB.

#include "rfgml/common.hpp"
#include "rfgml/dsp.hpp"

namespace rfgml {

struct CutMixConfig {
  double alpha = 0.7;   // Beta(alpha, alpha) for the area split
  bool enabled = true;
};

// Beta(alpha, alpha) via two Gamma draws: g1 / (g1 + g2).
double sample_beta(double alpha, Rng& rng);

struct CutMixResult {
  SpectrogramSegment segment;
  double label = 0.0;
  double lambda_realized = 1.0;  // kept-area fraction of segment A
};

// Pastes a rectangle with area fraction ~= (1 - lambda) of B into A at a
// uniformly random, fully contained position. lambda = 1 returns A intact;
// lambda = 0 returns B. Side lengths are round(dim * sqrt(1 - lambda)),
// clamped to at least one cell when a rectangle exists at all, so the
// realized area differs from the request by at most one row + one column.
CutMixResult cutmix(const SpectrogramSegment& a, double label_a,
                    const SpectrogramSegment& b, double label_b, double lambda,
                    Rng& rng);

// Label arithmetic used by cutmix, exposed for direct checks.
double mix_label(double lambda, double label_a, double label_b);

}  // namespace rfgml
