#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rfgml/dsp.hpp"
#include "rfgml/kernels.hpp"

namespace rfgml {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw ContractError("fft_radix2: size must be a power of two, got " +
                        std::to_string(n));
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

void FrontendConfig::validate() const {
  if (bands < 1) throw ContractError("frontend: bands must be >= 1");
  if (!(fmin_hz > 0.0 && fmax_hz > fmin_hz))
    throw ContractError("frontend: need 0 < fmin < fmax");
  if (fmax_hz >= kSampleRate / 2.0)
    throw ContractError("frontend: fmax must be below Nyquist");
  if (window_samples < 2 || (window_samples & (window_samples - 1)) != 0)
    throw ContractError("frontend: window_samples must be a power of two");
  if (hop_samples < 1 || hop_samples > window_samples)
    throw ContractError("frontend: hop_samples must lie in [1, window]");
  if (filter_order < 1) throw ContractError("frontend: filter_order must be >= 1");
  if (segment_frames < 1)
    throw ContractError("frontend: segment_frames must be >= 1");
}

std::uint64_t FrontendConfig::hash() const {
  // FNV-1a over a canonical textual encoding of every field.
  char buf[160];
  const int len = std::snprintf(
      buf, sizeof buf, "b=%d fmin=%.17g fmax=%.17g win=%d hop=%d ord=%d fl=%.17g seg=%d",
      bands, fmin_hz, fmax_hz, window_samples, hop_samples, filter_order,
      log_floor_db, segment_frames);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(buf[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json FrontendConfig::to_json() const {
  return nlohmann::json{{"bands", bands},
                        {"fmin_hz", fmin_hz},
                        {"fmax_hz", fmax_hz},
                        {"window_samples", window_samples},
                        {"hop_samples", hop_samples},
                        {"filter_order", filter_order},
                        {"log_floor_db", log_floor_db},
                        {"segment_frames", segment_frames}};
}

FrontendConfig FrontendConfig::from_json(const nlohmann::json& j) {
  try {
    FrontendConfig c;
    c.bands = j.at("bands").get<int>();
    c.fmin_hz = j.at("fmin_hz").get<double>();
    c.fmax_hz = j.at("fmax_hz").get<double>();
    c.window_samples = j.at("window_samples").get<int>();
    c.hop_samples = j.at("hop_samples").get<int>();
    c.filter_order = j.at("filter_order").get<int>();
    c.log_floor_db = j.at("log_floor_db").get<double>();
    c.segment_frames = j.at("segment_frames").get<int>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed frontend config JSON: ") +
                        e.what());
  }
}

double erb_rate(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }

double erb_rate_inverse(double rate) {
  return (std::pow(10.0, rate / 21.4) - 1.0) / 0.00437;
}

double erb_bandwidth(double hz) { return 24.7 * (1.0 + 4.37 * hz / 1000.0); }

std::vector<double> erb_center_frequencies(int bands, double fmin_hz,
                                           double fmax_hz) {
  if (bands < 1) throw ContractError("erb_center_frequencies: bands >= 1");
  std::vector<double> centers(bands);
  const double lo = erb_rate(fmin_hz);
  const double hi = erb_rate(fmax_hz);
  if (bands == 1) {
    centers[0] = erb_rate_inverse(0.5 * (lo + hi));
    return centers;
  }
  for (int i = 0; i < bands; ++i) {
    const double r = lo + (hi - lo) * static_cast<double>(i) /
                              static_cast<double>(bands - 1);
    centers[i] = erb_rate_inverse(r);
  }
  return centers;
}

namespace {

// Power-domain gammatone weighting matrix, bands x (N/2 + 1). Each row is the
// squared magnitude response of an order-n gammatone centered at the band
// frequency, normalized to unit sum (band energy = convex combination of bin
// powers).
std::vector<double> gammatone_weights(const FrontendConfig& cfg,
                                      const std::vector<double>& centers) {
  const int nbins = cfg.window_samples / 2 + 1;
  std::vector<double> w(static_cast<std::size_t>(cfg.bands) * nbins, 0.0);
  const double bin_hz = static_cast<double>(kSampleRate) / cfg.window_samples;
  for (int b = 0; b < cfg.bands; ++b) {
    const double fc = centers[b];
    // 1.019 * ERB is the classic bandwidth parameter for a 4th-order
    // gammatone; |H(f)|^2 = (1 + ((f-fc)/bw)^2)^-order.
    const double bw = 1.019 * erb_bandwidth(fc);
    double* row = w.data() + static_cast<std::size_t>(b) * nbins;
    double sum = 0.0;
    for (int i = 0; i < nbins; ++i) {
      const double u = (i * bin_hz - fc) / bw;
      row[i] = std::pow(1.0 + u * u, -static_cast<double>(cfg.filter_order));
      sum += row[i];
    }
    for (int i = 0; i < nbins; ++i) row[i] /= sum;
  }
  return w;
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(n));
  return w;
}

// One signal -> one spectrogram plane (band-major float storage).
void analyze_plane(const std::vector<double>& signal, const FrontendConfig& cfg,
                   const std::vector<double>& window, double window_sum,
                   const std::vector<double>& weights, int frames,
                   std::vector<float>& plane) {
  const int N = cfg.window_samples;
  const int nbins = N / 2 + 1;
  const double floor_power = std::pow(10.0, cfg.log_floor_db / 10.0);
  // Power scale chosen so a full-scale sine lands at ~ -3 dB (its power).
  const double power_scale = 2.0 / (window_sum * window_sum);
  plane.assign(static_cast<std::size_t>(cfg.bands) * frames, 0.0f);
  std::vector<std::complex<double>> buf(N);
  std::vector<double> power(nbins);
  for (int t = 0; t < frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * cfg.hop_samples;
    for (int i = 0; i < N; ++i)
      buf[i] = std::complex<double>(signal[off + i] * window[i], 0.0);
    fft_radix2(buf);
    for (int i = 0; i < nbins; ++i) power[i] = power_scale * std::norm(buf[i]);
    for (int b = 0; b < cfg.bands; ++b) {
      const double e =
          kernels::dot(nbins, weights.data() + static_cast<std::size_t>(b) * nbins,
                       power.data());
      const double db = 10.0 * std::log10(std::max(e, floor_power));
      plane[static_cast<std::size_t>(b) * frames + t] =
          static_cast<float>(db - cfg.log_floor_db);
    }
  }
}

}  // namespace

Spectrogram gammatone_spectrogram(const AudioBuffer& buffer,
                                  const FrontendConfig& config) {
  config.validate();
  const AudioBuffer st = ensure_stereo(buffer);
  const std::size_t n = st.frames();
  if (n < static_cast<std::size_t>(config.window_samples))
    throw ContractError(
        "gammatone_spectrogram: audio shorter than one analysis window (" +
        std::to_string(n) + " < " + std::to_string(config.window_samples) +
        " samples)");
  const int frames = static_cast<int>((n - config.window_samples) /
                                      config.hop_samples) + 1;

  std::vector<double> left(n), right(n), mid(n), side(n);
  for (std::size_t i = 0; i < n; ++i) {
    left[i] = st.samples[2 * i];
    right[i] = st.samples[2 * i + 1];
    mid[i] = 0.5 * (left[i] + right[i]);
    side[i] = 0.5 * (left[i] - right[i]);
  }

  Spectrogram spec;
  spec.bands = config.bands;
  spec.frames = frames;
  spec.hop_seconds = config.hop_seconds();
  spec.band_centers_hz =
      erb_center_frequencies(config.bands, config.fmin_hz, config.fmax_hz);
  spec.config_hash = config.hash();

  const std::vector<double> window = hann_window(config.window_samples);
  double wsum = 0.0;
  for (double w : window) wsum += w;
  const std::vector<double> weights =
      gammatone_weights(config, spec.band_centers_hz);

  const std::vector<double>* sigs[4] = {&left, &right, &mid, &side};
  for (int p = 0; p < 4; ++p)
    analyze_plane(*sigs[p], config, window, wsum, weights, frames,
                  spec.planes[p]);
  return spec;
}

void swap_lr(Spectrogram& spec) { std::swap(spec.planes[0], spec.planes[1]); }

void swap_lr(SpectrogramSegment& seg) {
  std::swap(seg.planes[0], seg.planes[1]);
}

std::vector<SpectrogramSegment> segment_spectrogram(const Spectrogram& spec,
                                                    int segment_frames) {
  if (segment_frames < 1)
    throw ContractError("segment_spectrogram: segment_frames must be >= 1");
  const int nseg = (spec.frames + segment_frames - 1) / segment_frames;
  std::vector<SpectrogramSegment> out(nseg);
  for (int s = 0; s < nseg; ++s) {
    SpectrogramSegment& seg = out[s];
    seg.bands = spec.bands;
    seg.frames = segment_frames;
    const int t0 = s * segment_frames;
    const int avail = std::min(segment_frames, spec.frames - t0);
    seg.padded = avail < segment_frames;
    for (int p = 0; p < 4; ++p) {
      seg.planes[p].assign(
          static_cast<std::size_t>(spec.bands) * segment_frames, 0.0f);
      for (int b = 0; b < spec.bands; ++b) {
        const float* src =
            spec.planes[p].data() + static_cast<std::size_t>(b) * spec.frames + t0;
        float* dst =
            seg.planes[p].data() + static_cast<std::size_t>(b) * segment_frames;
        std::memcpy(dst, src, static_cast<std::size_t>(avail) * sizeof(float));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// RFGS spectrogram container
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::ifstream& in, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ContractError(std::string("read_spectrogram: truncated ") + what);
  return v;
}

}  // namespace

void write_spectrogram(const std::string& path, const Spectrogram& spec) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("write_spectrogram: cannot open '" + path + "'");
  out.write("RFGS", 4);
  put_raw<std::uint32_t>(out, 1);  // version
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(spec.bands));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(spec.frames));
  put_raw<double>(out, spec.hop_seconds);
  for (double c : spec.band_centers_hz) put_raw<double>(out, c);
  for (const auto& plane : spec.planes)
    out.write(reinterpret_cast<const char*>(plane.data()),
              static_cast<std::streamsize>(plane.size() * sizeof(float)));
  if (!out) throw ContractError("write_spectrogram: short write to '" + path + "'");
}

Spectrogram read_spectrogram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("read_spectrogram: cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RFGS", 4) != 0)
    throw ContractError("read_spectrogram: bad magic in '" + path + "'");
  const auto version = get_raw<std::uint32_t>(in, "version");
  if (version != 1)
    throw ContractError("read_spectrogram: unsupported version " +
                        std::to_string(version));
  Spectrogram spec;
  spec.bands = static_cast<int>(get_raw<std::uint32_t>(in, "band count"));
  spec.frames = static_cast<int>(get_raw<std::uint32_t>(in, "frame count"));
  if (spec.bands < 1 || spec.frames < 1)
    throw ContractError("read_spectrogram: invalid dimensions");
  spec.hop_seconds = get_raw<double>(in, "hop");
  spec.band_centers_hz.resize(spec.bands);
  for (auto& c : spec.band_centers_hz) c = get_raw<double>(in, "band centers");
  const std::size_t plane_n =
      static_cast<std::size_t>(spec.bands) * spec.frames;
  for (auto& plane : spec.planes) {
    plane.resize(plane_n);
    in.read(reinterpret_cast<char*>(plane.data()),
            static_cast<std::streamsize>(plane_n * sizeof(float)));
    if (!in) throw ContractError("read_spectrogram: truncated plane data");
  }
  return spec;
}

}  // namespace rfgml
