#include "rfgml/augment.hpp"

#include <cmath>

namespace rfgml {

double sample_beta(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ContractError("sample_beta: alpha must be > 0");
  const double g1 = rng.gamma(alpha);
  const double g2 = rng.gamma(alpha);
  return g1 / (g1 + g2);
}

double mix_label(double lambda, double label_a, double label_b) {
  return lambda * label_a + (1.0 - lambda) * label_b;
}

CutMixResult cutmix(const SpectrogramSegment& a, double label_a,
                    const SpectrogramSegment& b, double label_b, double lambda,
                    Rng& rng) {
  if (a.bands != b.bands || a.frames != b.frames)
    throw ContractError("cutmix: segment shapes differ (" +
                        std::to_string(a.bands) + "x" + std::to_string(a.frames) +
                        " vs " + std::to_string(b.bands) + "x" +
                        std::to_string(b.frames) + ")");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ContractError("cutmix: lambda must lie in [0, 1]");

  CutMixResult res;
  res.segment = a;
  const int H = a.bands;
  const int W = a.frames;
  const double side = std::sqrt(1.0 - lambda);
  int rh = static_cast<int>(std::lround(H * side));
  int rw = static_cast<int>(std::lround(W * side));
  if (lambda < 1.0) {
    rh = std::max(1, std::min(H, rh));
    rw = std::max(1, std::min(W, rw));
  } else {
    rh = 0;
    rw = 0;
  }
  if (rh > 0 && rw > 0) {
    const int y0 = rng.uniform_int(0, H - rh);
    const int x0 = rng.uniform_int(0, W - rw);
    for (int p = 0; p < 4; ++p) {
      for (int y = y0; y < y0 + rh; ++y) {
        float* dst =
            res.segment.planes[p].data() + static_cast<std::size_t>(y) * W + x0;
        const float* src =
            b.planes[p].data() + static_cast<std::size_t>(y) * W + x0;
        for (int x = 0; x < rw; ++x) dst[x] = src[x];
      }
    }
  }
  res.lambda_realized = 1.0 - static_cast<double>(rh) * rw /
                                  (static_cast<double>(H) * W);
  res.label = mix_label(res.lambda_realized, label_a, label_b);
  return res;
}

}  // namespace rfgml
