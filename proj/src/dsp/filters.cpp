#include <algorithm>
#include <cmath>

#include "rfgml/dsp.hpp"
#include "rfgml/kernels.hpp"

namespace rfgml {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Modified Bessel function I0, power series.
double bessel_i0(double x) {
  const double h = 0.5 * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= (h / k) * (h / k);
    sum += term;
    if (term < sum * 1e-18) break;
  }
  return sum;
}

}  // namespace

std::vector<double> lowpass_taps(double cutoff_hz) {
  const double nyquist = kSampleRate / 2.0;
  if (!(cutoff_hz > 0.0 && cutoff_hz < nyquist))
    throw ContractError("lowpass: cutoff " + std::to_string(cutoff_hz) +
                        " Hz outside (0, " + std::to_string(nyquist) + ")");
  // Kaiser design, 80 dB stopband. The transition band starts at the cutoff
  // and is kept narrower than 8% of it, so attenuation at 1.15*cutoff is far
  // past the spec'd 60 dB.
  const double atten_db = 80.0;
  const double trans_hz = std::min(0.08 * cutoff_hz, 0.9 * (nyquist - cutoff_hz));
  const double beta = 0.1102 * (atten_db - 8.7);
  const double d_omega = 2.0 * kPi * trans_hz / kSampleRate;
  int taps = static_cast<int>(std::ceil((atten_db - 8.0) / (2.285 * d_omega))) + 1;
  if (taps % 2 == 0) ++taps;
  taps = std::min(taps, 32001);
  const int mid = (taps - 1) / 2;
  // -6 dB point at the middle of the transition band.
  const double fc = (cutoff_hz + 0.5 * trans_hz) / kSampleRate;
  const double i0b = bessel_i0(beta);
  std::vector<double> h(taps);
  for (int i = 0; i < taps; ++i) {
    const int k = i - mid;
    const double sinc =
        k == 0 ? 2.0 * fc : std::sin(2.0 * kPi * fc * k) / (kPi * k);
    const double r = static_cast<double>(k) / mid;
    const double kaiser = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    h[i] = sinc * kaiser;
  }
  return h;
}

AudioBuffer lowpass(const AudioBuffer& buffer, double cutoff_hz) {
  const std::vector<double> h = lowpass_taps(cutoff_hz);
  const int taps = static_cast<int>(h.size());
  const int mid = (taps - 1) / 2;
  AudioBuffer out;
  out.channels = buffer.channels;
  out.samples.resize(buffer.samples.size());
  const std::size_t n = buffer.frames();
  std::vector<double> padded(n + taps - 1, 0.0);
  for (int c = 0; c < buffer.channels; ++c) {
    for (std::size_t i = 0; i < n; ++i)
      padded[mid + i] = buffer.samples[i * buffer.channels + c];
    // Delay-compensated: y[i] = sum_k h[k] x[i + k - mid].
    for (std::size_t i = 0; i < n; ++i)
      out.samples[i * buffer.channels + c] =
          kernels::dot(taps, h.data(), padded.data() + i);
    std::fill(padded.begin(), padded.end(), 0.0);
  }
  return out;
}

double estimate_bandwidth(const AudioBuffer& buffer) {
  if (buffer.duration_seconds() < 1.0)
    throw ContractError("estimate_bandwidth: need at least 1 s of audio, got " +
                        std::to_string(buffer.duration_seconds()) + " s");
  constexpr int N = 2048;
  constexpr int hop = 1024;
  const int nbins = N / 2 + 1;
  // Blackman-Harris window: sidelobes at -92 dB keep a pure tone's skirt well
  // under the -60 dB threshold (a Hann window's sidelobes would smear it).
  std::vector<double> window(N);
  for (int i = 0; i < N; ++i) {
    const double t = 2.0 * kPi * i / N;
    window[i] = 0.35875 - 0.48829 * std::cos(t) + 0.14128 * std::cos(2.0 * t) -
                0.01168 * std::cos(3.0 * t);
  }
  const std::size_t n = buffer.frames();
  const int frames = static_cast<int>((n - N) / hop) + 1;
  std::vector<double> psd(nbins, 0.0);
  std::vector<std::complex<double>> buf(N);
  for (int c = 0; c < buffer.channels; ++c) {
    for (int t = 0; t < frames; ++t) {
      const std::size_t off = static_cast<std::size_t>(t) * hop;
      for (int i = 0; i < N; ++i)
        buf[i] = std::complex<double>(
            buffer.samples[(off + i) * buffer.channels + c] * window[i], 0.0);
      fft_radix2(buf);
      for (int i = 0; i < nbins; ++i) psd[i] += std::norm(buf[i]);
    }
  }
  const double peak = *std::max_element(psd.begin(), psd.end());
  if (peak <= 0.0) return 0.0;  // digital silence
  const double threshold = peak * 1e-6;  // -60 dB
  int highest = 0;
  for (int i = 0; i < nbins; ++i) {
    if (psd[i] > threshold) highest = i;
  }
  return static_cast<double>(highest) * kSampleRate / N;
}

}  // namespace rfgml
