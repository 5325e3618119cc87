#pragma once

// Audio ingest and the Gammatone spectrogram frontend. Everything runs at
// 48 kHz; other rates are rejected at load time. The spectrogram carries four
// planes per signal set — left, right, mid = (L+R)/2, side = (L-R)/2 — on an
// ERB-spaced Gammatone band grid, log-compressed with an affine floor so all
// stored values are >= 0 (0 == the floor, units are dB above floor).

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfgml/common.hpp"

namespace rfgml {

inline constexpr int kSampleRate = 48000;

struct AudioBuffer {
  int channels = 0;  // 1 or 2
  std::vector<double> samples;  // interleaved, [-1, 1] nominal

  std::size_t frames() const {
    return channels ? samples.size() / channels : 0;
  }
  double duration_seconds() const {
    return static_cast<double>(frames()) / kSampleRate;
  }
};

// WAV reader: PCM16 / PCM24 / IEEE float32, mono or stereo, 48 kHz only.
// Integer samples are normalized by the integer full scale (e.g. 32768).
AudioBuffer load_wav(const std::string& path);
// Writer emits IEEE float32 so generated audio round-trips bit-exactly.
void write_wav(const std::string& path, const AudioBuffer& buffer);

// Mid/side from an interleaved stereo buffer: M = (L+R)/2, S = (L-R)/2.
void mid_side(const AudioBuffer& stereo, std::vector<double>& mid,
              std::vector<double>& side);

// Mono -> dual-mono stereo (L = R); stereo passes through.
AudioBuffer ensure_stereo(const AudioBuffer& buffer);

struct FrontendConfig {
  int bands = 64;
  double fmin_hz = 50.0;
  double fmax_hz = 23000.0;
  int window_samples = 2048;  // 42.7 ms at 48 kHz
  int hop_samples = 1024;     // 21.3 ms
  int filter_order = 4;       // gammatone order for the weighting matrix
  double log_floor_db = -80.0;
  int segment_frames = 240;   // ~5.12 s per model input segment

  double window_seconds() const {
    return static_cast<double>(window_samples) / kSampleRate;
  }
  double hop_seconds() const {
    return static_cast<double>(hop_samples) / kSampleRate;
  }
  void validate() const;
  std::uint64_t hash() const;  // FNV-1a over the canonical field encoding
  nlohmann::json to_json() const;
  static FrontendConfig from_json(const nlohmann::json& j);
};

// ERB-rate scale helpers (Glasberg & Moore).
double erb_rate(double hz);
double erb_rate_inverse(double rate);
double erb_bandwidth(double hz);
// `bands` center frequencies equally spaced on the ERB-rate scale over
// [fmin, fmax]; strictly increasing, all below Nyquist.
std::vector<double> erb_center_frequencies(int bands, double fmin_hz,
                                           double fmax_hz);

struct Spectrogram {
  int bands = 0;
  int frames = 0;
  double hop_seconds = 0.0;
  std::vector<double> band_centers_hz;
  // planes[0]=L, [1]=R, [2]=M, [3]=S; each bands x frames, band-major.
  std::array<std::vector<float>, 4> planes;
  std::uint64_t config_hash = 0;

  float& at(int plane, int band, int frame) {
    return planes[plane][static_cast<std::size_t>(band) * frames + frame];
  }
  float at(int plane, int band, int frame) const {
    return planes[plane][static_cast<std::size_t>(band) * frames + frame];
  }
};

// Full four-plane Gammatone spectrogram of a stereo (or dual-mono) buffer.
// Requires at least one analysis window of audio.
Spectrogram gammatone_spectrogram(const AudioBuffer& buffer,
                                  const FrontendConfig& config);

// Exchanges the L and R planes; M and S are untouched (the side signal only
// flips sign under a channel swap, which leaves its power spectrum as-is).
void swap_lr(Spectrogram& spec);

struct SpectrogramSegment {
  int bands = 0;
  int frames = 0;  // == config.segment_frames
  std::array<std::vector<float>, 4> planes;
  bool padded = false;  // tail segment zero-padded at the floor level
};

// Non-overlapping segments of `segment_frames` frames; a shorter tail is
// padded with the floor value (stored 0) and flagged.
std::vector<SpectrogramSegment> segment_spectrogram(const Spectrogram& spec,
                                                    int segment_frames);
void swap_lr(SpectrogramSegment& seg);

// Linear-phase FIR lowpass (Kaiser windowed sinc), delay-compensated so the
// output aligns with and has the same length as the input. Stopband is down
// >= 60 dB for frequencies above 1.15 * cutoff. 0 < cutoff < Nyquist.
AudioBuffer lowpass(const AudioBuffer& buffer, double cutoff_hz);
// The designed taps (exposed for response tests).
std::vector<double> lowpass_taps(double cutoff_hz);

// Effective bandwidth: highest frequency bin of the long-term average power
// spectrum still within 60 dB of the spectrum's peak. Requires >= 1 s of
// audio. Digital silence returns 0.
double estimate_bandwidth(const AudioBuffer& buffer);

// Binary spectrogram container ("RFGS"): header (magic, version, bands,
// frames, hop seconds, band centers as float64 LE) + 4 planes float32 LE,
// band-major. Round-trips bit-exactly.
void write_spectrogram(const std::string& path, const Spectrogram& spec);
Spectrogram read_spectrogram(const std::string& path);

// Radix-2 complex FFT, in place; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

// Spectrogram store shared by training and evaluation. Memoizes per audio
// path; with a cache directory set, blobs persist as .rfgs files keyed by
// (path, frontend hash) so repeat runs skip extraction. prefetch() extracts
// missing entries, optionally on `jobs` threads.
class FeatureCache {
 public:
  explicit FeatureCache(const FrontendConfig& config,
                        std::string cache_dir = "");
  const Spectrogram& spectrogram(const std::string& audio_path);
  const std::vector<SpectrogramSegment>& segments(
      const std::string& audio_path);
  void prefetch(const std::vector<std::string>& paths, int jobs = 1);

 private:
  std::string disk_path(const std::string& audio_path) const;
  const Spectrogram& insert(const std::string& path, Spectrogram&& spec);
  FrontendConfig cfg_;
  std::string dir_;
  std::map<std::string, Spectrogram> specs_;
  std::map<std::string, std::vector<SpectrogramSegment>> segs_;
};

}  // namespace rfgml
