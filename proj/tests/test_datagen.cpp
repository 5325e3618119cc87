// Synthetic-corpus tests: degradation ladder validation, the parametric
// codec (passthrough exactness, SNR calibration, clamping), simulated
// listeners, bundled source material, and full corpus generation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rfgml/common.hpp"
#include "rfgml/datagen.hpp"
#include "rfgml/dsp.hpp"
#include "rfgml/manifest.hpp"

using namespace rfgml;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("rfgml_datagen_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

AudioBuffer noise_audio(double seconds, double amp, std::uint64_t seed,
                        int channels = 1) {
  AudioBuffer b;
  b.channels = channels;
  b.samples.resize(static_cast<std::size_t>(seconds * kSampleRate) *
                   channels);
  Rng rng(seed);
  for (auto& s : b.samples) s = amp * rng.normal();
  return b;
}

bool samples_equal(const AudioBuffer& a, const AudioBuffer& b) {
  return a.channels == b.channels && a.samples.size() == b.samples.size() &&
         std::memcmp(a.samples.data(), b.samples.data(),
                     a.samples.size() * sizeof(double)) == 0;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// First three ladder levels: enough structure for corpus tests while
// keeping the lowpass work small.
std::vector<DegradationSpec> short_ladder() {
  auto l = default_ladder();
  l.resize(3);
  return l;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ladder
// ---------------------------------------------------------------------------

TEST_CASE("default_ladder: frozen shape and parameters") {
  const auto l = default_ladder();
  REQUIRE(l.size() == 5);
  const double cutoffs[5] = {23000.0, 14000.0, 10000.0, 7000.0, 5000.0};
  const double snrs[5] = {kInf, 45.0, 35.0, 28.0, 22.0};
  for (int i = 0; i < 5; ++i) {
    CHECK(l[i].level == i);
    CHECK(l[i].cutoff_hz == cutoffs[i]);
    CHECK(l[i].noise_snr_db == snrs[i]);
    CHECK(l[i].label == "codec_l" + std::to_string(i));
  }
  CHECK_NOTHROW(validate_ladder(l));
}

TEST_CASE("validate_ladder: rejects malformed ladders") {
  CHECK_THROWS_AS(validate_ladder({}), ContractError);

  auto l = default_ladder();
  l[2].label = "";
  CHECK_THROWS_WITH_AS(validate_ladder(l), doctest::Contains("empty label"),
                       ContractError);

  l = default_ladder();
  l[1].label = kHiddenReference;
  CHECK_THROWS_WITH_AS(validate_ladder(l), doctest::Contains("reserved"),
                       ContractError);
  l[1].label = kAnchor35Label;
  CHECK_THROWS_AS(validate_ladder(l), ContractError);
  l[1].label = kAnchor7kLabel;
  CHECK_THROWS_AS(validate_ladder(l), ContractError);

  l = default_ladder();
  l[3].label = l[2].label;
  CHECK_THROWS_WITH_AS(validate_ladder(l), doctest::Contains("duplicate"),
                       ContractError);

  l = default_ladder();
  l[0].cutoff_hz = 0.0;
  CHECK_THROWS_WITH_AS(validate_ladder(l), doctest::Contains("positive"),
                       ContractError);

  l = default_ladder();
  l[4].noise_snr_db = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(validate_ladder(l), doctest::Contains("NaN"),
                       ContractError);

  l = default_ladder();
  l[2].level = 1;  // duplicate level
  CHECK_THROWS_WITH_AS(validate_ladder(l),
                       doctest::Contains("strictly increasing"),
                       ContractError);

  l = default_ladder();
  l[2].cutoff_hz = 15000.0;  // rises above level 1's 14 kHz
  CHECK_THROWS_WITH_AS(validate_ladder(l), doctest::Contains("cutoffs"),
                       ContractError);

  l = default_ladder();
  l[2].noise_snr_db = 50.0;  // rises above level 1's 45 dB
  CHECK_THROWS_WITH_AS(validate_ladder(l), doctest::Contains("SNRs"),
                       ContractError);
}

// ---------------------------------------------------------------------------
// Listener model
// ---------------------------------------------------------------------------

TEST_CASE("default_listener_model: frozen qualities and spreads") {
  const ListenerModel lm = default_listener_model(default_ladder(), 10);
  CHECK(lm.n_listeners == 10);
  CHECK(lm.true_quality.at(kHiddenReference) == 100.0);
  CHECK(lm.spread_a.at(kHiddenReference) == 2.5);
  CHECK(lm.true_quality.at(kAnchor35Label) == 12.0);
  CHECK(lm.spread_a.at(kAnchor35Label) == 3.0);
  CHECK(lm.true_quality.at(kAnchor7kLabel) == 25.0);
  CHECK(lm.spread_a.at(kAnchor7kLabel) == 3.0);
  const double quality[5] = {100.0, 85.0, 65.0, 45.0, 30.0};
  for (int i = 0; i < 5; ++i) {
    const std::string label = "codec_l" + std::to_string(i);
    CHECK(lm.true_quality.at(label) == quality[i]);
    CHECK(lm.spread_a.at(label) == 5.0);
  }
  // 3 fixed conditions + 5 ladder levels.
  CHECK(lm.true_quality.size() == 8);

  CHECK_THROWS_AS(default_listener_model(default_ladder(), 0), ContractError);
  auto bad = default_ladder();
  for (auto& d : bad) d.level += 1;  // level 5 has no default quality
  CHECK_THROWS_WITH_AS(default_listener_model(bad, 10),
                       doctest::Contains("no default quality"),
                       ContractError);
}

// ---------------------------------------------------------------------------
// Codec
// ---------------------------------------------------------------------------

TEST_CASE("synth_codec: level 0 is a bit-exact passthrough") {
  const AudioBuffer in = noise_audio(0.25, 0.3, 42, 2);
  const DegradationSpec spec{0, 23000.0, kInf, "codec_l0"};
  const AudioBuffer out1 = synth_codec(in, spec, 1);
  const AudioBuffer out2 = synth_codec(in, spec, 999);  // seed irrelevant
  CHECK(samples_equal(out1, in));
  CHECK(samples_equal(out2, in));
}

TEST_CASE("synth_codec: infinite SNR means lowpass only") {
  const AudioBuffer in = noise_audio(0.5, 0.15, 7);
  const DegradationSpec spec{1, 14000.0, kInf, "x"};
  const AudioBuffer out = synth_codec(in, spec, 3);
  const AudioBuffer lp = lowpass(in, 14000.0);
  CHECK(samples_equal(out, lp));
}

TEST_CASE("synth_codec: additive noise hits the requested SNR") {
  // Small amplitude keeps the sum inside [-1, 1], so the clamp is inert and
  // out - lowpass isolates the injected noise exactly.
  const AudioBuffer in = noise_audio(1.0, 0.15, 11);
  const DegradationSpec spec{3, 7000.0, 28.0, "codec_l3"};
  const AudioBuffer out = synth_codec(in, spec, 17);
  const AudioBuffer lp = lowpass(in, 7000.0);
  REQUIRE(out.samples.size() == lp.samples.size());
  double p_sig = 0.0, p_noise = 0.0;
  for (std::size_t i = 0; i < lp.samples.size(); ++i) {
    p_sig += lp.samples[i] * lp.samples[i];
    const double d = out.samples[i] - lp.samples[i];
    p_noise += d * d;
  }
  REQUIRE(p_noise > 0.0);
  const double measured_snr_db = 10.0 * std::log10(p_sig / p_noise);
  // 48000 iid noise samples estimate their own power to ~0.7% (1 sigma).
  CHECK(measured_snr_db == doctest::Approx(28.0).epsilon(0.01));

  // Deterministic per seed, different across seeds.
  CHECK(samples_equal(out, synth_codec(in, spec, 17)));
  CHECK_FALSE(samples_equal(out, synth_codec(in, spec, 18)));
}

TEST_CASE("synth_codec: output is clamped to [-1, 1]") {
  const AudioBuffer in = noise_audio(0.5, 0.3, 5);
  const DegradationSpec spec{1, 14000.0, -20.0, "loud"};  // noise >> signal
  const AudioBuffer out = synth_codec(in, spec, 2);
  double mx = -kInf, mn = kInf;
  for (double v : out.samples) {
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  // At -20 dB SNR the noise sigma is ~10x the signal rms: with 24000 draws
  // the rails are certainly hit.
  CHECK(mx == 1.0);
  CHECK(mn == -1.0);
}

TEST_CASE("synth_codec: empty input rejected") {
  AudioBuffer empty;
  empty.channels = 1;
  const DegradationSpec spec{1, 14000.0, 45.0, "x"};
  CHECK_THROWS_AS(synth_codec(empty, spec, 1), ContractError);
}

// ---------------------------------------------------------------------------
// Listeners
// ---------------------------------------------------------------------------

TEST_CASE("synth_listener_scores: moments match the logistic model") {
  ListenerModel lm;
  lm.true_quality["cond"] = 60.0;
  lm.spread_a["cond"] = 5.0;
  lm.n_listeners = 20000;
  Rng rng(321);
  const std::vector<double> s = synth_listener_scores(lm, "cond", rng);
  REQUIRE(s.size() == 20000);
  double mean = 0.0;
  for (double v : s) {
    CHECK(v >= 0.0);
    CHECK(v <= 100.0);
    mean += v;
  }
  mean /= double(s.size());
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  var /= double(s.size());
  // Logistic(60, a=5): mean 60, std pi*5/sqrt(3) = 9.068996821171089;
  // clipping at 0/100 is negligible at these parameters.
  CHECK(mean == doctest::Approx(60.0).epsilon(0.005));
  CHECK(std::sqrt(var) == doctest::Approx(9.068996821171089).epsilon(0.02));
}

TEST_CASE("synth_listener_scores: edge cases and contracts") {
  ListenerModel lm;
  lm.true_quality["exact"] = 73.25;
  lm.spread_a["exact"] = 0.0;
  lm.true_quality["top"] = 100.0;
  lm.spread_a["top"] = 2.5;
  lm.n_listeners = 200;

  Rng rng(9);
  for (double v : synth_listener_scores(lm, "exact", rng))
    CHECK(v == 73.25);  // zero spread collapses to the true quality

  // At the top of the scale, scores clip from above only.
  const std::vector<double> top = synth_listener_scores(lm, "top", rng);
  double mean = 0.0;
  for (double v : top) {
    CHECK(v <= 100.0);
    mean += v;
  }
  mean /= double(top.size());
  CHECK(mean > 95.0);
  CHECK(mean < 100.0);

  // Identical generator state reproduces the draw.
  Rng a(77), b(77);
  CHECK(synth_listener_scores(lm, "top", a) ==
        synth_listener_scores(lm, "top", b));

  Rng r2(1);
  CHECK_THROWS_WITH_AS(synth_listener_scores(lm, "nope", r2),
                       doctest::Contains("unknown listening condition"),
                       ContractError);
  ListenerModel bad = lm;
  bad.n_listeners = 0;
  CHECK_THROWS_AS(synth_listener_scores(bad, "top", r2), ContractError);
  bad = lm;
  bad.spread_a["top"] = -1.0;
  CHECK_THROWS_AS(synth_listener_scores(bad, "top", r2), ContractError);
}

// ---------------------------------------------------------------------------
// Source material
// ---------------------------------------------------------------------------

TEST_CASE("synth_excerpt: stereo, fixed length, normalized peak") {
  for (int idx = 0; idx < 3; ++idx) {  // one of each signal kind
    const AudioBuffer b = synth_excerpt(idx, 100);
    CHECK(b.channels == 2);
    CHECK(b.frames() == 246784);
    double peak = 0.0;
    bool finite = true;
    for (double v : b.samples) {
      peak = std::max(peak, std::fabs(v));
      finite = finite && std::isfinite(v);
    }
    CHECK(finite);
    CHECK(peak == doctest::Approx(0.8).epsilon(1e-12));
  }
}

TEST_CASE("synth_excerpt: exactly one full analysis segment") {
  // (246784 - 2048) / 1024 + 1 = 240 frames = the default segment length.
  FrontendConfig cfg;  // defaults: 2048 window, 1024 hop, 240 frames/segment
  const Spectrogram spec = gammatone_spectrogram(synth_excerpt(1, 3), cfg);
  CHECK(spec.frames == 240);
  const auto segs = segment_spectrogram(spec, cfg.segment_frames);
  REQUIRE(segs.size() == 1);
  CHECK_FALSE(segs[0].padded);
}

TEST_CASE("synth_excerpt: deterministic per (index, seed)") {
  CHECK(samples_equal(synth_excerpt(2, 5), synth_excerpt(2, 5)));
  CHECK_FALSE(samples_equal(synth_excerpt(2, 5), synth_excerpt(2, 6)));
  CHECK_FALSE(samples_equal(synth_excerpt(2, 5), synth_excerpt(5, 5)));
  CHECK_THROWS_AS(synth_excerpt(-1, 5), ContractError);
}

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

TEST_CASE("generate_corpus: complete structure and exact passthrough") {
  TempDir tmp("corpus");
  const auto ladder = short_ladder();
  const ListenerModel lm = default_listener_model(ladder, 4);

  // Two short stereo noise sources.
  std::vector<SourceExcerpt> sources;
  for (int i = 0; i < 2; ++i) {
    const std::string id = i == 0 ? "a" : "b";
    const std::string p = tmp.file("src_" + id + ".wav");
    write_wav(p, noise_audio(0.5, 0.2, 70 + std::uint64_t(i), 2));
    sources.push_back({id, p});
  }
  const std::string out = tmp.file("corpus");
  const Manifest m = generate_corpus(out, sources, ladder, lm, 2026);

  // 2 excerpts x (reference + 2 anchors + 3 ladder levels) x 4 listeners.
  CHECK(m.size() == 2 * 6 * 4);
  std::map<std::string, std::set<std::string>> conditions;
  std::set<std::string> listeners;
  for (const auto& r : m) {
    conditions[r.excerpt_id].insert(r.system_id);
    listeners.insert(r.listener_id);
    CHECK(r.audio_path.front() != '/');  // relative to the corpus dir
    CHECK(r.score >= 0.0);
    CHECK(r.score <= 100.0);
  }
  const std::set<std::string> expect = {kHiddenReference, kAnchor35Label,
                                        kAnchor7kLabel,   "codec_l0",
                                        "codec_l1",       "codec_l2"};
  REQUIRE(conditions.size() == 2);
  CHECK(conditions.at("a") == expect);
  CHECK(conditions.at("b") == expect);
  CHECK(listeners == std::set<std::string>{"l00", "l01", "l02", "l03"});
  CHECK_NOTHROW(validate_manifest(m, out, true));

  // Every advertised file exists.
  const std::vector<std::string> ids = {"a", "b"};
  const std::vector<std::string> conds = {"ref",      kAnchor35Label,
                                          kAnchor7kLabel, "codec_l0",
                                          "codec_l1", "codec_l2"};
  for (const std::string& id : ids)
    for (const std::string& cond : conds)
      CHECK(std::filesystem::exists(
          std::filesystem::path(out) / (id + "_" + cond + ".wav")));

  // Level 0 output is the reference, sample for sample.
  CHECK(samples_equal(load_wav((std::filesystem::path(out) /
                                "a_codec_l0.wav").string()),
                      load_wav((std::filesystem::path(out) /
                                "a_ref.wav").string())));

  // The on-disk manifest round-trips (scores printed with 4 decimals).
  const Manifest loaded =
      load_manifest((std::filesystem::path(out) / "manifest.csv").string());
  REQUIRE(loaded.size() == m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(loaded[i].excerpt_id == m[i].excerpt_id);
    CHECK(loaded[i].system_id == m[i].system_id);
    CHECK(loaded[i].listener_id == m[i].listener_id);
    CHECK(loaded[i].audio_path == m[i].audio_path);
    CHECK(std::fabs(loaded[i].score - m[i].score) <= 5e-5);
  }

  // Scores come from the documented per-(excerpt, condition) stream.
  Rng check(derive_seed(2026, "scores:a:" + std::string(kHiddenReference)));
  const std::vector<double> expect_scores =
      synth_listener_scores(lm, kHiddenReference, check);
  std::size_t j = 0;
  for (const auto& r : m)
    if (r.excerpt_id == "a" && r.system_id == kHiddenReference) {
      REQUIRE(j < expect_scores.size());
      CHECK(r.score == expect_scores[j]);
      ++j;
    }
  CHECK(j == 4);
}

TEST_CASE("generate_corpus: byte-identical outputs per seed") {
  TempDir tmp("corpus_det");
  const auto ladder = short_ladder();
  const ListenerModel lm = default_listener_model(ladder, 3);
  std::vector<SourceExcerpt> sources;
  for (int i = 0; i < 2; ++i) {
    const std::string id = "ex" + std::to_string(i);
    const std::string p = tmp.file(id + ".wav");
    write_wav(p, noise_audio(0.4, 0.2, 300 + std::uint64_t(i), 2));
    sources.push_back({id, p});
  }
  const Manifest m1 =
      generate_corpus(tmp.file("out1"), sources, ladder, lm, 55);
  const Manifest m2 =
      generate_corpus(tmp.file("out2"), sources, ladder, lm, 55);
  REQUIRE(m1.size() == m2.size());
  for (std::size_t i = 0; i < m1.size(); ++i) {
    CHECK(m1[i].score == m2[i].score);  // exact: same derived streams
    CHECK(m1[i].audio_path == m2[i].audio_path);
  }
  CHECK(read_bytes(tmp.file("out1") + "/manifest.csv") ==
        read_bytes(tmp.file("out2") + "/manifest.csv"));
  CHECK(read_bytes(tmp.file("out1") + "/ex0_codec_l1.wav") ==
        read_bytes(tmp.file("out2") + "/ex0_codec_l1.wav"));

  const Manifest m3 =
      generate_corpus(tmp.file("out3"), sources, ladder, lm, 56);
  bool any_diff = false;
  for (std::size_t i = 0; i < m1.size(); ++i)
    any_diff = any_diff || m1[i].score != m3[i].score;
  CHECK(any_diff);
}

TEST_CASE("generate_corpus: contract violations") {
  TempDir tmp("corpus_bad");
  const auto ladder = short_ladder();
  const ListenerModel lm = default_listener_model(ladder, 2);
  const std::string p = tmp.file("one.wav");
  write_wav(p, noise_audio(0.3, 0.2, 1, 2));

  CHECK_THROWS_WITH_AS(
      generate_corpus(tmp.file("o1"), {{"a", p}}, ladder, lm, 1),
      doctest::Contains("at least 2"), ContractError);
  CHECK_THROWS_WITH_AS(
      generate_corpus(tmp.file("o2"), {{"a", p}, {"a", p}}, ladder, lm, 1),
      doctest::Contains("duplicate"), ContractError);
  CHECK_THROWS_WITH_AS(
      generate_corpus(tmp.file("o3"), {{"", p}, {"b", p}}, ladder, lm, 1),
      doctest::Contains("empty"), ContractError);
}

TEST_CASE("generate_synthetic_corpus: end-to-end with bundled material") {
  TempDir tmp("synth");
  const auto ladder = short_ladder();
  const ListenerModel lm = default_listener_model(ladder, 3);
  const std::string out = tmp.file("corpus");
  const Manifest m = generate_synthetic_corpus(out, 2, ladder, lm, 99);

  CHECK(m.size() == 2 * 6 * 3);
  std::set<std::string> excerpts;
  for (const auto& r : m) excerpts.insert(r.excerpt_id);
  CHECK(excerpts == std::set<std::string>{"ex000", "ex001"});
  CHECK(std::filesystem::exists(std::filesystem::path(out) /
                                "ex000_ref.wav"));
  CHECK(std::filesystem::exists(std::filesystem::path(out) /
                                "ex001_anchor_7k.wav"));
  CHECK_NOTHROW(validate_manifest(m, out, true));

  // The written reference is the bundled excerpt for that index and seed.
  const AudioBuffer ref =
      load_wav((std::filesystem::path(out) / "ex000_ref.wav").string());
  AudioBuffer expect = synth_excerpt(0, 99);
  // write_wav stores float32; compare after the same round-trip.
  TempDir rt("synth_rt");
  write_wav(rt.file("e.wav"), expect);
  CHECK(samples_equal(ref, load_wav(rt.file("e.wav"))));

  CHECK_THROWS_AS(generate_synthetic_corpus(tmp.file("x"), 1, ladder, lm, 1),
                  ContractError);
}
