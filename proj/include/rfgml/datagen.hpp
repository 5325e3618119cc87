#pragma once

// Synthetic corpus generation: a parametric "codec" (lowpass + additive
// white noise ladder), simulated MUSHRA listeners drawing logistic scores
// around per-condition true qualities, and a bundled source-material
// generator (tone complexes, noise bursts, AM noise) so the toolkit needs no
// external audio. Everything is deterministic per seed.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rfgml/dsp.hpp"
#include "rfgml/manifest.hpp"

namespace rfgml {

inline constexpr const char* kAnchor35Label = "anchor_3.5k";
inline constexpr const char* kAnchor7kLabel = "anchor_7k";

struct DegradationSpec {
  int level = 0;  // 0 = transparent passthrough
  double cutoff_hz = 0.0;
  double noise_snr_db = 0.0;  // +infinity = no noise
  std::string label;
};

// Five levels: cutoffs (23k, 14k, 10k, 7k, 5k) Hz, SNRs (inf, 45, 35, 28, 22)
// dB, labels codec_l0..codec_l4. Level 0 is bit-exact passthrough.
std::vector<DegradationSpec> default_ladder();

// Cutoffs and SNRs must be nonincreasing in level; labels distinct.
void validate_ladder(const std::vector<DegradationSpec>& ladder);

struct ListenerModel {
  std::map<std::string, double> true_quality;  // condition -> MUSHRA points
  std::map<std::string, double> spread_a;      // condition -> logistic scale
  int n_listeners = 10;
};

// hidden_reference: quality 100, spread 2.5; anchors 3.5k/7k: 12/25, spread
// 3.0; ladder levels: qualities (100, 85, 65, 45, 30) by level, spread 5.0.
ListenerModel default_listener_model(const std::vector<DegradationSpec>& ladder,
                                     int n_listeners);

// Lowpass at spec.cutoff_hz then white noise at spec.noise_snr_db relative
// to the filtered signal power, clamped to [-1, 1]. Level 0 returns the
// input bit-exactly. Deterministic per seed.
AudioBuffer synth_codec(const AudioBuffer& input, const DegradationSpec& spec,
                        std::uint64_t seed);

// n_listeners logistic draws around the condition's true quality, clipped to
// [0, 100]. Unknown conditions are rejected.
std::vector<double> synth_listener_scores(const ListenerModel& model,
                                          const std::string& condition,
                                          Rng& rng);

// Bundled source material: kind cycles with index through tone complex,
// noise bursts, and amplitude-modulated noise, plus a broadband noise floor.
// Stereo, 48 kHz, exactly 246784 samples (one full 240-frame segment),
// peak-normalized to 0.8.
AudioBuffer synth_excerpt(int index, std::uint64_t seed);

struct SourceExcerpt {
  std::string excerpt_id;
  std::string path;  // 48 kHz WAV
};

// Per excerpt: hidden reference + 3.5k/7k lowpass anchors + every ladder
// level, each with n_listeners score records. Writes the degraded WAVs and
// manifest.csv under out_dir (audio paths relative to it) and returns the
// manifest, which passes validate_manifest.
Manifest generate_corpus(const std::string& out_dir,
                         const std::vector<SourceExcerpt>& sources,
                         const std::vector<DegradationSpec>& ladder,
                         const ListenerModel& listeners, std::uint64_t seed);

// Synthesizes n_excerpts source signals (ex000, ex001, ...) into out_dir and
// runs generate_corpus over them.
Manifest generate_synthetic_corpus(const std::string& out_dir, int n_excerpts,
                                   const std::vector<DegradationSpec>& ladder,
                                   const ListenerModel& listeners,
                                   std::uint64_t seed);

}  // namespace rfgml
