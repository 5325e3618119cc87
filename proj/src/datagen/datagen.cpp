#include "rfgml/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>

namespace rfgml {

namespace {

namespace fs = std::filesystem;

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kInf = std::numeric_limits<double>::infinity();

// One full model segment: (240 - 1) * 1024 + 2048 samples -> 240 frames.
constexpr int kExcerptSamples = 246784;

bool same_file_path(const std::string& a, const std::string& b) {
  return fs::absolute(a).lexically_normal() ==
         fs::absolute(b).lexically_normal();
}

}  // namespace

std::vector<DegradationSpec> default_ladder() {
  return {
      {0, 23000.0, kInf, "codec_l0"},
      {1, 14000.0, 45.0, "codec_l1"},
      {2, 10000.0, 35.0, "codec_l2"},
      {3, 7000.0, 28.0, "codec_l3"},
      {4, 5000.0, 22.0, "codec_l4"},
  };
}

void validate_ladder(const std::vector<DegradationSpec>& ladder) {
  if (ladder.empty()) throw ContractError("degradation ladder is empty");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const DegradationSpec& d = ladder[i];
    if (d.label.empty())
      throw ContractError("degradation ladder has an empty label");
    if (d.label == kHiddenReference || d.label == kAnchor35Label ||
        d.label == kAnchor7kLabel)
      throw ContractError("degradation label collides with a reserved "
                          "condition name: " + d.label);
    if (!labels.insert(d.label).second)
      throw ContractError("duplicate degradation label: " + d.label);
    if (!(d.cutoff_hz > 0.0))
      throw ContractError("degradation cutoff must be positive: " + d.label);
    if (std::isnan(d.noise_snr_db))
      throw ContractError("degradation SNR is NaN: " + d.label);
    if (i > 0) {
      if (ladder[i].level <= ladder[i - 1].level)
        throw ContractError("degradation levels must be strictly increasing");
      if (ladder[i].cutoff_hz > ladder[i - 1].cutoff_hz)
        throw ContractError("degradation cutoffs must be nonincreasing "
                            "in level");
      if (ladder[i].noise_snr_db > ladder[i - 1].noise_snr_db)
        throw ContractError("degradation SNRs must be nonincreasing in level");
    }
  }
}

ListenerModel default_listener_model(const std::vector<DegradationSpec>& ladder,
                                     int n_listeners) {
  validate_ladder(ladder);
  if (n_listeners < 1)
    throw ContractError("listener model needs n_listeners >= 1");
  static const double kLevelQuality[5] = {100.0, 85.0, 65.0, 45.0, 30.0};
  ListenerModel lm;
  lm.n_listeners = n_listeners;
  lm.true_quality[kHiddenReference] = 100.0;
  lm.spread_a[kHiddenReference] = 2.5;
  lm.true_quality[kAnchor35Label] = 12.0;
  lm.spread_a[kAnchor35Label] = 3.0;
  lm.true_quality[kAnchor7kLabel] = 25.0;
  lm.spread_a[kAnchor7kLabel] = 3.0;
  for (const DegradationSpec& d : ladder) {
    if (d.level < 0 || d.level > 4)
      throw ContractError("no default quality for ladder level " +
                          std::to_string(d.level));
    lm.true_quality[d.label] = kLevelQuality[d.level];
    lm.spread_a[d.label] = 5.0;
  }
  return lm;
}

AudioBuffer synth_codec(const AudioBuffer& input, const DegradationSpec& spec,
                        std::uint64_t seed) {
  if (input.channels < 1 || input.samples.empty())
    throw ContractError("synth_codec: empty input buffer");
  if (spec.level == 0) return input;  // transparent: bit-exact passthrough
  AudioBuffer out = lowpass(input, spec.cutoff_hz);
  if (std::isfinite(spec.noise_snr_db)) {
    double power = 0.0;
    for (double v : out.samples) power += v * v;
    power /= static_cast<double>(out.samples.size());
    const double sigma =
        std::sqrt(power / std::pow(10.0, spec.noise_snr_db / 10.0));
    Rng rng(seed);
    for (double& v : out.samples) v += sigma * rng.normal();
  }
  for (double& v : out.samples) v = std::clamp(v, -1.0, 1.0);
  return out;
}

std::vector<double> synth_listener_scores(const ListenerModel& model,
                                          const std::string& condition,
                                          Rng& rng) {
  auto q = model.true_quality.find(condition);
  auto a = model.spread_a.find(condition);
  if (q == model.true_quality.end() || a == model.spread_a.end())
    throw ContractError("unknown listening condition: " + condition);
  if (model.n_listeners < 1)
    throw ContractError("listener model needs n_listeners >= 1");
  if (a->second < 0.0)
    throw ContractError("listener spread must be >= 0: " + condition);
  std::vector<double> scores(static_cast<std::size_t>(model.n_listeners));
  for (double& s : scores) {
    const double u = rng.uniform();
    // Logistic inverse-CDF draw; spread 0 collapses to the true quality.
    s = std::clamp(q->second + a->second * std::log(u / (1.0 - u)),
                   0.0, 100.0);
  }
  return scores;
}

AudioBuffer synth_excerpt(int index, std::uint64_t seed) {
  if (index < 0) throw ContractError("excerpt index must be >= 0");
  AudioBuffer buf;
  buf.channels = 2;
  buf.samples.assign(static_cast<std::size_t>(kExcerptSamples) * 2, 0.0);
  auto at = [&buf](int ch, int i) -> double& {
    return buf.samples[static_cast<std::size_t>(i) * 2 + ch];
  };
  Rng rng(derive_seed(seed, "excerpt", static_cast<std::uint64_t>(index)));
  const double dt = 1.0 / kSampleRate;
  switch (index % 3) {
    case 0: {  // harmonic tone complex, slightly decorrelated phases
      const double f0 = rng.uniform(80.0, 400.0);
      for (int k = 1; k <= 10; ++k) {
        const double f = f0 * k;
        if (f > 20000.0) break;
        const double amp = 0.5 / k;
        const double ph_l = rng.uniform(0.0, 2.0 * kPi);
        const double ph_r = ph_l + rng.uniform(-0.3, 0.3);
        const double w = 2.0 * kPi * f;
        for (int i = 0; i < kExcerptSamples; ++i) {
          const double t = i * dt;
          at(0, i) += amp * std::sin(w * t + ph_l);
          at(1, i) += amp * std::sin(w * t + ph_r);
        }
      }
      break;
    }
    case 1: {  // gated noise bursts, shared envelope, independent noise
      std::vector<double> env(kExcerptSamples, 0.0);
      const int ramp = 480;  // 10 ms raised-cosine edges
      bool on = true;
      int i = 0;
      while (i < kExcerptSamples) {
        const int len =
            static_cast<int>(rng.uniform(0.08, 0.35) * kSampleRate);
        for (int j = 0; j < len && i < kExcerptSamples; ++j, ++i) {
          if (!on) continue;
          double g = 1.0;
          if (j < ramp) g = 0.5 - 0.5 * std::cos(kPi * j / ramp);
          const int rem = len - 1 - j;
          if (rem < ramp)
            g = std::min(g, 0.5 - 0.5 * std::cos(kPi * rem / ramp));
          env[i] = g;
        }
        on = !on;
      }
      for (int n = 0; n < kExcerptSamples; ++n) {
        at(0, n) = 0.3 * env[n] * rng.normal();
        at(1, n) = 0.3 * env[n] * rng.normal();
      }
      break;
    }
    default: {  // amplitude-modulated noise
      const double fm = rng.uniform(1.5, 6.0);
      const double ph = rng.uniform(0.0, 2.0 * kPi);
      for (int n = 0; n < kExcerptSamples; ++n) {
        const double m = 0.55 + 0.45 * std::sin(2.0 * kPi * fm * n * dt + ph);
        at(0, n) = 0.3 * m * rng.normal();
        at(1, n) = 0.3 * m * rng.normal();
      }
      break;
    }
  }
  // Broadband floor keeps every analysis band above the log floor.
  for (double& v : buf.samples) v += 0.02 * rng.normal();
  double peak = 0.0;
  for (double v : buf.samples) peak = std::max(peak, std::fabs(v));
  if (peak > 0.0) {
    const double gain = 0.8 / peak;
    for (double& v : buf.samples) v *= gain;
  }
  return buf;
}

namespace {

void append_scores(Manifest& manifest, const ListenerModel& listeners,
                   const std::string& excerpt_id, const std::string& condition,
                   const std::string& rel_path, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "scores:" + excerpt_id + ":" + condition));
  const std::vector<double> scores =
      synth_listener_scores(listeners, condition, rng);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    char lid[16];
    std::snprintf(lid, sizeof lid, "l%02zu", j);
    manifest.push_back({excerpt_id, condition, lid, scores[j], rel_path});
  }
}

}  // namespace

Manifest generate_corpus(const std::string& out_dir,
                         const std::vector<SourceExcerpt>& sources,
                         const std::vector<DegradationSpec>& ladder,
                         const ListenerModel& listeners, std::uint64_t seed) {
  if (sources.size() < 2)
    throw ContractError("corpus generation needs at least 2 source excerpts");
  validate_ladder(ladder);
  std::set<std::string> ids;
  for (const SourceExcerpt& s : sources) {
    if (s.excerpt_id.empty())
      throw ContractError("source excerpt has an empty excerpt_id");
    if (!ids.insert(s.excerpt_id).second)
      throw ContractError("duplicate excerpt_id: " + s.excerpt_id);
  }
  fs::create_directories(out_dir);
  Manifest manifest;
  for (const SourceExcerpt& src : sources) {
    const AudioBuffer buf = load_wav(src.path);
    const std::string ref_name = src.excerpt_id + "_ref.wav";
    const std::string ref_path = (fs::path(out_dir) / ref_name).string();
    if (!same_file_path(src.path, ref_path)) write_wav(ref_path, buf);
    append_scores(manifest, listeners, src.excerpt_id, kHiddenReference,
                  ref_name, seed);
    const struct { const char* label; double cutoff; } anchors[] = {
        {kAnchor35Label, 3500.0}, {kAnchor7kLabel, 7000.0}};
    for (const auto& anchor : anchors) {
      const std::string name =
          src.excerpt_id + "_" + anchor.label + ".wav";
      write_wav((fs::path(out_dir) / name).string(),
                lowpass(buf, anchor.cutoff));
      append_scores(manifest, listeners, src.excerpt_id, anchor.label, name,
                    seed);
    }
    for (const DegradationSpec& spec : ladder) {
      const std::string name = src.excerpt_id + "_" + spec.label + ".wav";
      const AudioBuffer deg = synth_codec(
          buf, spec,
          derive_seed(seed, "codec:" + src.excerpt_id + ":" + spec.label));
      write_wav((fs::path(out_dir) / name).string(), deg);
      append_scores(manifest, listeners, src.excerpt_id, spec.label, name,
                    seed);
    }
  }
  save_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
  validate_manifest(manifest, out_dir, true);
  return manifest;
}

Manifest generate_synthetic_corpus(const std::string& out_dir, int n_excerpts,
                                   const std::vector<DegradationSpec>& ladder,
                                   const ListenerModel& listeners,
                                   std::uint64_t seed) {
  if (n_excerpts < 2)
    throw ContractError("corpus generation needs at least 2 source excerpts");
  fs::create_directories(out_dir);
  std::vector<SourceExcerpt> sources;
  sources.reserve(static_cast<std::size_t>(n_excerpts));
  for (int i = 0; i < n_excerpts; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "ex%03d", i);
    const std::string path =
        (fs::path(out_dir) / (std::string(id) + "_ref.wav")).string();
    write_wav(path, synth_excerpt(i, seed));
    sources.push_back({id, path});
  }
  return generate_corpus(out_dir, sources, ladder, listeners, seed);
}

}  // namespace rfgml
