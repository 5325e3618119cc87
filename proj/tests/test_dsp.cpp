// Audio ingest + Gammatone frontend tests. Frequency-domain expectations are
// frozen from an independent high-precision derivation; WAV fixtures are
// hand-assembled byte strings so the reader is tested against the format, not
// against the writer.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rfgml/common.hpp"
#include "rfgml/dsp.hpp"

using namespace rfgml;

namespace {

constexpr double kTau = 6.28318530717958647692;

// Scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("rfgml_dsp_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void put_u16le(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32le(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Minimal RIFF/WAVE container around raw sample bytes.
std::string wav_bytes(std::uint16_t format, std::uint16_t channels,
                      std::uint32_t rate, std::uint16_t bits,
                      const std::string& data) {
  std::string s = "RIFF";
  put_u32le(s, 4 + 24 + 8 + static_cast<std::uint32_t>(data.size()));
  s += "WAVEfmt ";
  put_u32le(s, 16);
  put_u16le(s, format);
  put_u16le(s, channels);
  put_u32le(s, rate);
  put_u32le(s, rate * channels * bits / 8);
  put_u16le(s, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16le(s, bits);
  s += "data";
  put_u32le(s, static_cast<std::uint32_t>(data.size()));
  s += data;
  return s;
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  REQUIRE(out.good());
}

std::string pcm16_data(const std::vector<std::int16_t>& samples) {
  std::string d;
  for (std::int16_t v : samples)
    put_u16le(d, static_cast<std::uint16_t>(v));
  return d;
}

AudioBuffer make_sine(double freq_hz, double seconds, double amp,
                      int channels) {
  AudioBuffer b;
  b.channels = channels;
  const std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
  b.samples.resize(n * channels);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = amp * std::sin(kTau * freq_hz * static_cast<double>(i) /
                                    kSampleRate);
    for (int c = 0; c < channels; ++c) b.samples[i * channels + c] = v;
  }
  return b;
}

AudioBuffer make_noise(double seconds, double amp, int channels,
                       std::uint64_t seed) {
  AudioBuffer b;
  b.channels = channels;
  const std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
  b.samples.resize(n * channels);
  Rng rng(seed);
  for (auto& s : b.samples) s = amp * rng.normal();
  return b;
}

// Magnitude response of an FIR at one frequency, evaluated directly.
double fir_response(const std::vector<double>& h, double freq_hz) {
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double ph = -kTau * freq_hz * static_cast<double>(k) / kSampleRate;
    acc += h[k] * std::complex<double>(std::cos(ph), std::sin(ph));
  }
  return std::abs(acc);
}

}  // namespace

// ---------------------------------------------------------------------------
// WAV reader / writer
// ---------------------------------------------------------------------------

TEST_CASE("wav: float32 write/read round-trips bit-exactly") {
  TempDir tmp("wav_rt");
  AudioBuffer in;
  in.channels = 2;
  // Values chosen exactly representable in float32.
  in.samples = {0.5, -0.25, 0.0078125, -1.0, 1.0, 0.0};
  const std::string p = tmp.file("rt.wav");
  write_wav(p, in);
  const AudioBuffer out = load_wav(p);
  CHECK(out.channels == 2);
  REQUIRE(out.samples.size() == in.samples.size());
  for (std::size_t i = 0; i < in.samples.size(); ++i)
    CHECK(out.samples[i] == in.samples[i]);
}

TEST_CASE("wav: float32 mono round-trip equals double-to-float cast") {
  TempDir tmp("wav_mono");
  AudioBuffer in;
  in.channels = 1;
  in.samples = {0.1, -0.3, 0.7, 1.0 / 3.0};
  const std::string p = tmp.file("mono.wav");
  write_wav(p, in);
  const AudioBuffer out = load_wav(p);
  CHECK(out.channels == 1);
  REQUIRE(out.samples.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(out.samples[i] ==
          static_cast<double>(static_cast<float>(in.samples[i])));
}

TEST_CASE("wav: PCM16 decodes with 1/32768 full-scale normalization") {
  TempDir tmp("wav_pcm16");
  const std::string p = tmp.file("pcm16.wav");
  write_bytes(p, wav_bytes(1, 1, 48000, 16, pcm16_data({32767, -32768, 0, 1, -1})));
  const AudioBuffer out = load_wav(p);
  CHECK(out.channels == 1);
  REQUIRE(out.samples.size() == 5);
  CHECK(out.samples[0] == 0.999969482421875);  // 32767/32768
  CHECK(out.samples[1] == -1.0);
  CHECK(out.samples[2] == 0.0);
  CHECK(out.samples[3] == 3.0517578125e-5);  // 1/32768
  CHECK(out.samples[4] == -3.0517578125e-5);
}

TEST_CASE("wav: PCM24 decodes with 1/8388608 full-scale normalization") {
  TempDir tmp("wav_pcm24");
  auto put24 = [](std::string& d, std::int32_t v) {
    d.push_back(static_cast<char>(v & 0xff));
    d.push_back(static_cast<char>((v >> 8) & 0xff));
    d.push_back(static_cast<char>((v >> 16) & 0xff));
  };
  std::string d;
  put24(d, 8388607);
  put24(d, -8388608);
  put24(d, 0);
  put24(d, -1);
  const std::string p = tmp.file("pcm24.wav");
  write_bytes(p, wav_bytes(1, 2, 48000, 24, d));
  const AudioBuffer out = load_wav(p);
  CHECK(out.channels == 2);
  REQUIRE(out.samples.size() == 4);
  CHECK(out.samples[0] == 8388607.0 / 8388608.0);
  CHECK(out.samples[1] == -1.0);
  CHECK(out.samples[2] == 0.0);
  CHECK(out.samples[3] == -1.0 / 8388608.0);
}

TEST_CASE("wav: unsupported containers and formats are rejected") {
  TempDir tmp("wav_bad");
  const std::string d = pcm16_data({0, 0});

  const std::string rate = tmp.file("rate.wav");
  write_bytes(rate, wav_bytes(1, 1, 44100, 16, d));
  CHECK_THROWS_WITH_AS(load_wav(rate),
                       doctest::Contains("44100"), ContractError);

  const std::string chans = tmp.file("chans.wav");
  write_bytes(chans, wav_bytes(1, 3, 48000, 16, d));
  CHECK_THROWS_AS(load_wav(chans), ContractError);

  const std::string bits = tmp.file("bits.wav");
  write_bytes(bits, wav_bytes(1, 1, 48000, 8, d));
  CHECK_THROWS_AS(load_wav(bits), ContractError);

  const std::string alaw = tmp.file("alaw.wav");
  write_bytes(alaw, wav_bytes(6, 1, 48000, 16, d));
  CHECK_THROWS_AS(load_wav(alaw), ContractError);

  const std::string junk = tmp.file("junk.wav");
  write_bytes(junk, "this is not audio at all, sorry");
  CHECK_THROWS_AS(load_wav(junk), ContractError);

  // data chunk length runs past end of file
  std::string trunc_bytes = wav_bytes(1, 1, 48000, 16, d);
  trunc_bytes.resize(trunc_bytes.size() - 2);
  const std::string trunc = tmp.file("trunc.wav");
  write_bytes(trunc, trunc_bytes);
  CHECK_THROWS_WITH_AS(load_wav(trunc), doctest::Contains("truncated"),
                       ContractError);

  // fmt present, data chunk absent
  std::string nodata = "RIFF";
  put_u32le(nodata, 4 + 24);
  nodata += "WAVEfmt ";
  put_u32le(nodata, 16);
  put_u16le(nodata, 1);
  put_u16le(nodata, 1);
  put_u32le(nodata, 48000);
  put_u32le(nodata, 96000);
  put_u16le(nodata, 2);
  put_u16le(nodata, 16);
  const std::string nodata_p = tmp.file("nodata.wav");
  write_bytes(nodata_p, nodata);
  CHECK_THROWS_WITH_AS(load_wav(nodata_p), doctest::Contains("data"),
                       ContractError);

  CHECK_THROWS_AS(load_wav(tmp.file("missing.wav")), ContractError);
}

TEST_CASE("wav: writer rejects malformed buffers") {
  TempDir tmp("wav_werr");
  AudioBuffer b;
  b.channels = 3;
  b.samples = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(write_wav(tmp.file("x.wav"), b), ContractError);
  b.channels = 2;
  b.samples = {0.0, 0.0, 0.0};  // odd count for stereo
  CHECK_THROWS_AS(write_wav(tmp.file("y.wav"), b), ContractError);
}

TEST_CASE("wav: reader skips unknown chunks before data") {
  TempDir tmp("wav_extra");
  // LIST chunk of odd length between fmt and data exercises word alignment.
  std::string s = "RIFF";
  const std::string d = pcm16_data({100, -100});
  put_u32le(s, 4 + 24 + (8 + 3 + 1) + 8 + static_cast<std::uint32_t>(d.size()));
  s += "WAVEfmt ";
  put_u32le(s, 16);
  put_u16le(s, 1);
  put_u16le(s, 1);
  put_u32le(s, 48000);
  put_u32le(s, 96000);
  put_u16le(s, 2);
  put_u16le(s, 16);
  s += "LIST";
  put_u32le(s, 3);
  s += "abc";
  s.push_back('\0');  // alignment pad
  s += "data";
  put_u32le(s, static_cast<std::uint32_t>(d.size()));
  s += d;
  const std::string p = tmp.file("extra.wav");
  write_bytes(p, s);
  const AudioBuffer out = load_wav(p);
  REQUIRE(out.samples.size() == 2);
  CHECK(out.samples[0] == 100.0 / 32768.0);
  CHECK(out.samples[1] == -100.0 / 32768.0);
}

TEST_CASE("mid_side: exact arithmetic and stereo requirement") {
  AudioBuffer st;
  st.channels = 2;
  st.samples = {1.0, 0.5, 0.5, -0.5};  // L = {1, 0.5}, R = {0.5, -0.5}
  std::vector<double> mid, side;
  mid_side(st, mid, side);
  REQUIRE(mid.size() == 2);
  CHECK(mid[0] == 0.75);
  CHECK(side[0] == 0.25);
  CHECK(mid[1] == 0.0);
  CHECK(side[1] == 0.5);

  AudioBuffer mono;
  mono.channels = 1;
  mono.samples = {0.1};
  CHECK_THROWS_AS(mid_side(mono, mid, side), ContractError);
}

TEST_CASE("ensure_stereo: duplicates mono, passes stereo through") {
  AudioBuffer mono;
  mono.channels = 1;
  mono.samples = {0.25, -0.75};
  const AudioBuffer st = ensure_stereo(mono);
  CHECK(st.channels == 2);
  REQUIRE(st.samples.size() == 4);
  CHECK(st.samples[0] == 0.25);
  CHECK(st.samples[1] == 0.25);
  CHECK(st.samples[2] == -0.75);
  CHECK(st.samples[3] == -0.75);

  AudioBuffer stereo;
  stereo.channels = 2;
  stereo.samples = {0.1, 0.2};
  const AudioBuffer same = ensure_stereo(stereo);
  CHECK(same.channels == 2);
  CHECK(same.samples == stereo.samples);

  AudioBuffer bad;
  bad.channels = 0;
  CHECK_THROWS_AS(ensure_stereo(bad), ContractError);
}

// ---------------------------------------------------------------------------
// FFT
// ---------------------------------------------------------------------------

TEST_CASE("fft: impulse transforms to all-ones exactly") {
  std::vector<std::complex<double>> a(64, {0.0, 0.0});
  a[0] = {1.0, 0.0};
  fft_radix2(a);
  for (const auto& v : a) {
    CHECK(v.real() == 1.0);
    CHECK(v.imag() == 0.0);
  }
}

TEST_CASE("fft: matches naive DFT on random input") {
  const int n = 256;
  Rng rng(20240817);
  std::vector<std::complex<double>> x(n);
  for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  // O(n^2) reference, written independently of the radix-2 code path.
  std::vector<std::complex<double>> ref(n, {0.0, 0.0});
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int t = 0; t < n; ++t) {
      const double ph = -kTau * static_cast<double>(k) * t / n;
      acc += x[t] * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    ref[k] = acc;
  }
  std::vector<std::complex<double>> got = x;
  fft_radix2(got);
  double worst = 0.0;
  for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(got[k] - ref[k]));
  CHECK(worst < 1e-9);
}

TEST_CASE("fft: size contract") {
  std::vector<std::complex<double>> a(12);
  CHECK_THROWS_AS(fft_radix2(a), ContractError);
  a.clear();
  CHECK_THROWS_AS(fft_radix2(a), ContractError);
  a = {{3.5, -1.25}};
  fft_radix2(a);  // size 1 is a no-op transform
  CHECK(a[0] == std::complex<double>(3.5, -1.25));
}

// ---------------------------------------------------------------------------
// ERB scale
// ---------------------------------------------------------------------------

TEST_CASE("erb scale: frozen values and inverse round-trip") {
  CHECK(erb_rate(1000.0) == doctest::Approx(15.62144971397049).epsilon(1e-12));
  CHECK(erb_rate(50.0) == doctest::Approx(1.8366664173439026).epsilon(1e-12));
  CHECK(erb_rate(23000.0) ==
        doctest::Approx(42.939288914391206).epsilon(1e-12));
  CHECK(erb_bandwidth(1000.0) == doctest::Approx(132.639).epsilon(1e-12));
  CHECK(erb_bandwidth(50.0) == doctest::Approx(30.09695).epsilon(1e-12));
  for (double f : {50.0, 123.0, 1000.0, 4321.0, 12000.0, 23000.0})
    CHECK(erb_rate_inverse(erb_rate(f)) == doctest::Approx(f).epsilon(1e-10));
}

TEST_CASE("erb centers: monotonic grid spanning [fmin, fmax]") {
  const auto centers = erb_center_frequencies(64, 50.0, 23000.0);
  REQUIRE(centers.size() == 64);
  CHECK(centers.front() == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(centers.back() == doctest::Approx(23000.0).epsilon(1e-9));
  for (std::size_t i = 1; i < centers.size(); ++i)
    CHECK(centers[i] > centers[i - 1]);
  for (double c : centers) CHECK(c < kSampleRate / 2.0);

  // Equal spacing on the ERB-rate scale, not in Hz.
  const double step = erb_rate(centers[1]) - erb_rate(centers[0]);
  for (std::size_t i = 1; i < centers.size(); ++i)
    CHECK(erb_rate(centers[i]) - erb_rate(centers[i - 1]) ==
          doctest::Approx(step).epsilon(1e-9));

  const auto one = erb_center_frequencies(1, 100.0, 200.0);
  REQUIRE(one.size() == 1);
  CHECK(one[0] > 100.0);
  CHECK(one[0] < 200.0);
  CHECK_THROWS_AS(erb_center_frequencies(0, 50.0, 23000.0), ContractError);
}

// ---------------------------------------------------------------------------
// Frontend configuration
// ---------------------------------------------------------------------------

TEST_CASE("frontend config: validation catches each bad field") {
  FrontendConfig good;
  CHECK_NOTHROW(good.validate());

  auto broken = [](auto mutate) {
    FrontendConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(broken([](FrontendConfig& c) { c.bands = 0; }).validate(),
                  ContractError);
  CHECK_THROWS_AS(broken([](FrontendConfig& c) { c.fmin_hz = 0.0; }).validate(),
                  ContractError);
  CHECK_THROWS_AS(
      broken([](FrontendConfig& c) { c.fmax_hz = c.fmin_hz; }).validate(),
      ContractError);
  CHECK_THROWS_AS(
      broken([](FrontendConfig& c) { c.fmax_hz = 24000.0; }).validate(),
      ContractError);
  CHECK_THROWS_AS(
      broken([](FrontendConfig& c) { c.window_samples = 1000; }).validate(),
      ContractError);
  CHECK_THROWS_AS(
      broken([](FrontendConfig& c) { c.window_samples = 1; }).validate(),
      ContractError);
  CHECK_THROWS_AS(
      broken([](FrontendConfig& c) { c.hop_samples = 0; }).validate(),
      ContractError);
  CHECK_THROWS_AS(broken([](FrontendConfig& c) {
                    c.hop_samples = c.window_samples + 1;
                  }).validate(),
                  ContractError);
  CHECK_THROWS_AS(
      broken([](FrontendConfig& c) { c.filter_order = 0; }).validate(),
      ContractError);
  CHECK_THROWS_AS(
      broken([](FrontendConfig& c) { c.segment_frames = 0; }).validate(),
      ContractError);
}

TEST_CASE("frontend config: JSON round-trip preserves every field") {
  FrontendConfig c;
  c.bands = 48;
  c.fmin_hz = 62.5;
  c.fmax_hz = 21000.0;
  c.window_samples = 4096;
  c.hop_samples = 2048;
  c.filter_order = 3;
  c.log_floor_db = -70.0;
  c.segment_frames = 120;
  const FrontendConfig back = FrontendConfig::from_json(c.to_json());
  CHECK(back.bands == c.bands);
  CHECK(back.fmin_hz == c.fmin_hz);
  CHECK(back.fmax_hz == c.fmax_hz);
  CHECK(back.window_samples == c.window_samples);
  CHECK(back.hop_samples == c.hop_samples);
  CHECK(back.filter_order == c.filter_order);
  CHECK(back.log_floor_db == c.log_floor_db);
  CHECK(back.segment_frames == c.segment_frames);
  CHECK(back.hash() == c.hash());

  nlohmann::json j = c.to_json();
  j.erase("bands");
  CHECK_THROWS_AS(FrontendConfig::from_json(j), ContractError);
  nlohmann::json bad = c.to_json();
  bad["fmax_hz"] = 30000.0;
  CHECK_THROWS_AS(FrontendConfig::from_json(bad), ContractError);
}

TEST_CASE("frontend config: hash is sensitive to each field") {
  const FrontendConfig base;
  const std::uint64_t h0 = base.hash();
  CHECK(h0 == FrontendConfig().hash());  // deterministic

  FrontendConfig c = base;
  c.bands = 32;
  CHECK(c.hash() != h0);
  c = base;
  c.fmin_hz = 60.0;
  CHECK(c.hash() != h0);
  c = base;
  c.fmax_hz = 22000.0;
  CHECK(c.hash() != h0);
  c = base;
  c.window_samples = 4096;
  c.hop_samples = 1024;
  CHECK(c.hash() != h0);
  c = base;
  c.hop_samples = 512;
  CHECK(c.hash() != h0);
  c = base;
  c.filter_order = 2;
  CHECK(c.hash() != h0);
  c = base;
  c.log_floor_db = -60.0;
  CHECK(c.hash() != h0);
  c = base;
  c.segment_frames = 100;
  CHECK(c.hash() != h0);
}

// ---------------------------------------------------------------------------
// Gammatone spectrogram
// ---------------------------------------------------------------------------

namespace {

FrontendConfig small_config() {
  FrontendConfig c;
  c.bands = 32;
  c.window_samples = 1024;
  c.hop_samples = 512;
  c.segment_frames = 40;
  return c;
}

}  // namespace

TEST_CASE("spectrogram: silence sits exactly at the stored floor") {
  AudioBuffer silence;
  silence.channels = 1;
  silence.samples.assign(24000, 0.0);
  const FrontendConfig cfg = small_config();
  const Spectrogram spec = gammatone_spectrogram(silence, cfg);
  CHECK(spec.bands == 32);
  CHECK(spec.frames == (24000 - 1024) / 512 + 1);
  CHECK(spec.hop_seconds == 512.0 / 48000.0);
  CHECK(spec.config_hash == cfg.hash());
  REQUIRE(spec.band_centers_hz.size() == 32);
  for (int p = 0; p < 4; ++p) {
    REQUIRE(spec.planes[p].size() ==
            static_cast<std::size_t>(spec.bands) * spec.frames);
    for (float v : spec.planes[p]) CHECK(v == 0.0f);
  }
}

TEST_CASE("spectrogram: frame count follows (n - window)/hop + 1") {
  const FrontendConfig cfg = small_config();
  AudioBuffer b;
  b.channels = 1;
  b.samples.assign(1024 + 512 * 9, 0.0);
  CHECK(gammatone_spectrogram(b, cfg).frames == 10);
  b.samples.assign(1024 + 512 * 9 - 1, 0.0);
  CHECK(gammatone_spectrogram(b, cfg).frames == 9);
  b.samples.assign(1024, 0.0);
  CHECK(gammatone_spectrogram(b, cfg).frames == 1);
  b.samples.assign(1023, 0.0);
  CHECK_THROWS_WITH_AS(gammatone_spectrogram(b, cfg),
                       doctest::Contains("shorter"), ContractError);
}

TEST_CASE("spectrogram: a pure tone peaks in the nearest band") {
  const FrontendConfig cfg = small_config();
  const AudioBuffer tone = make_sine(1000.0, 0.5, 0.5, 1);
  const Spectrogram spec = gammatone_spectrogram(tone, cfg);

  // Pick the band with the most energy on a middle frame.
  const int t = spec.frames / 2;
  int best = 0;
  for (int b = 1; b < spec.bands; ++b)
    if (spec.at(2, b, t) > spec.at(2, best, t)) best = b;
  CHECK(std::abs(spec.band_centers_hz[best] - 1000.0) <
        1.019 * erb_bandwidth(1000.0));

  // Dual-mono input: L, R and M planes identical, S plane exactly at floor.
  CHECK(spec.planes[0] == spec.planes[1]);
  CHECK(spec.planes[0] == spec.planes[2]);
  for (float v : spec.planes[3]) CHECK(v == 0.0f);
}

TEST_CASE("spectrogram: halving amplitude lowers level by 6.0206 dB") {
  const FrontendConfig cfg = small_config();
  AudioBuffer loud = make_noise(0.5, 0.3, 1, 99001);
  AudioBuffer quiet = loud;
  for (auto& s : quiet.samples) s *= 0.5;
  const Spectrogram a = gammatone_spectrogram(loud, cfg);
  const Spectrogram b = gammatone_spectrogram(quiet, cfg);
  int checked = 0;
  for (std::size_t i = 0; i < a.planes[2].size(); ++i) {
    if (a.planes[2][i] > 10.0f) {  // clear of the floor clamp on both sides
      CHECK(static_cast<double>(a.planes[2][i]) -
                static_cast<double>(b.planes[2][i]) ==
            doctest::Approx(6.0205999132796239).epsilon(1e-4));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("spectrogram: swapping input channels equals swapping L/R planes") {
  const FrontendConfig cfg = small_config();
  AudioBuffer st;
  st.channels = 2;
  const std::size_t n = 24000;
  st.samples.resize(2 * n);
  Rng rng(5150);
  for (std::size_t i = 0; i < n; ++i) {
    st.samples[2 * i] = 0.4 * rng.normal();
    st.samples[2 * i + 1] = 0.2 * rng.normal() +
                            0.3 * std::sin(kTau * 2500.0 * i / kSampleRate);
  }
  AudioBuffer swapped = st;
  for (std::size_t i = 0; i < n; ++i)
    std::swap(swapped.samples[2 * i], swapped.samples[2 * i + 1]);

  const Spectrogram orig = gammatone_spectrogram(st, cfg);
  Spectrogram flipped = gammatone_spectrogram(st, cfg);
  swap_lr(flipped);
  CHECK(flipped.planes[0] == orig.planes[1]);
  CHECK(flipped.planes[1] == orig.planes[0]);
  CHECK(flipped.planes[2] == orig.planes[2]);
  CHECK(flipped.planes[3] == orig.planes[3]);

  // The side signal flips sign under a channel swap; its power is unchanged,
  // so analyzing swapped audio reproduces the swapped planes bit-exactly.
  const Spectrogram reanalyzed = gammatone_spectrogram(swapped, cfg);
  for (int p = 0; p < 4; ++p) CHECK(reanalyzed.planes[p] == flipped.planes[p]);

  swap_lr(flipped);  // involution
  for (int p = 0; p < 4; ++p) CHECK(flipped.planes[p] == orig.planes[p]);
}

TEST_CASE("spectrogram: full-scale sine lands near its analytic level") {
  // Stored value = 10*log10(tone power) - floor with the frontend's power
  // scaling; a full-scale sine has power 1/2 -> -3.01 dB -> stored ~76.99 for
  // an -80 dB floor. A unit-sum band row captures about bin_hz / (1.019 *
  // erb_bw * 0.982) of a tone's power (~ -4.5 dB here), and off-bin Hann
  // scalloping costs up to another ~1.4 dB, so the peak band must sit within
  // (analytic - 8, analytic]. Catches gross power-normalization errors.
  const FrontendConfig cfg = small_config();
  const AudioBuffer tone = make_sine(997.0, 0.5, 1.0, 1);
  const Spectrogram spec = gammatone_spectrogram(tone, cfg);
  const int t = spec.frames / 2;
  float peak = 0.0f;
  for (int b = 0; b < spec.bands; ++b) peak = std::max(peak, spec.at(2, b, t));
  const double analytic = 10.0 * std::log10(0.5) - cfg.log_floor_db;
  CHECK(static_cast<double>(peak) < analytic + 0.1);
  CHECK(static_cast<double>(peak) > analytic - 8.0);
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

TEST_CASE("segments: non-overlapping tiles with padded tail") {
  const FrontendConfig cfg = small_config();
  const AudioBuffer noise = make_noise(1.0, 0.2, 1, 424242);
  const Spectrogram spec = gammatone_spectrogram(noise, cfg);
  REQUIRE(spec.frames == 92);

  const auto segs = segment_spectrogram(spec, 40);
  REQUIRE(segs.size() == 3);
  CHECK_FALSE(segs[0].padded);
  CHECK_FALSE(segs[1].padded);
  CHECK(segs[2].padded);
  for (const auto& seg : segs) {
    CHECK(seg.bands == spec.bands);
    CHECK(seg.frames == 40);
  }
  // Tile content matches the source region; the padded tail is exactly zero.
  for (int p = 0; p < 4; ++p) {
    for (int b = 0; b < spec.bands; ++b) {
      for (int t = 0; t < 40; ++t) {
        CHECK(segs[1].planes[p][static_cast<std::size_t>(b) * 40 + t] ==
              spec.at(p, b, 40 + t));
        const float tail = segs[2].planes[p][static_cast<std::size_t>(b) * 40 + t];
        if (t < 12)
          CHECK(tail == spec.at(p, b, 80 + t));
        else
          CHECK(tail == 0.0f);
      }
    }
  }

  const auto exact = segment_spectrogram(spec, 92);
  REQUIRE(exact.size() == 1);
  CHECK_FALSE(exact[0].padded);
  CHECK_THROWS_AS(segment_spectrogram(spec, 0), ContractError);
}

TEST_CASE("segments: swap_lr touches only the first two planes") {
  const FrontendConfig cfg = small_config();
  const AudioBuffer noise = make_noise(0.6, 0.2, 2, 77);
  const Spectrogram spec = gammatone_spectrogram(noise, cfg);
  auto segs = segment_spectrogram(spec, 40);
  const SpectrogramSegment before = segs[0];
  swap_lr(segs[0]);
  CHECK(segs[0].planes[0] == before.planes[1]);
  CHECK(segs[0].planes[1] == before.planes[0]);
  CHECK(segs[0].planes[2] == before.planes[2]);
  CHECK(segs[0].planes[3] == before.planes[3]);
}

// ---------------------------------------------------------------------------
// Lowpass filter
// ---------------------------------------------------------------------------

TEST_CASE("lowpass taps: linear-phase design meets its response contract") {
  const std::vector<double> h = lowpass_taps(3500.0);
  CHECK(h.size() % 2 == 1);
  for (std::size_t i = 0; i < h.size() / 2; ++i)
    CHECK(h[i] == h[h.size() - 1 - i]);

  CHECK(fir_response(h, 0.0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(fir_response(h, 1750.0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(fir_response(h, 3150.0) == doctest::Approx(1.0).epsilon(1e-3));
  // >= 60 dB down from 1.15 * cutoff out to Nyquist.
  for (double f = 1.15 * 3500.0; f < 24000.0; f += 250.0)
    CHECK(fir_response(h, f) < 1e-3);
}

TEST_CASE("lowpass taps: response contract holds across the ladder cutoffs") {
  for (double cutoff : {3500.0, 7000.0, 10000.0, 14000.0, 23000.0}) {
    CAPTURE(cutoff);
    const std::vector<double> h = lowpass_taps(cutoff);
    CHECK(fir_response(h, 0.5 * cutoff) == doctest::Approx(1.0).epsilon(2e-3));
    for (double f = 1.15 * cutoff; f < 24000.0; f += 199.0)
      CHECK(fir_response(h, f) < 1e-3);
  }
  CHECK_THROWS_AS(lowpass_taps(0.0), ContractError);
  CHECK_THROWS_AS(lowpass_taps(24000.0), ContractError);
  CHECK_THROWS_AS(lowpass_taps(-100.0), ContractError);
}

TEST_CASE("lowpass: delay-compensated, per-channel, length-preserving") {
  const std::size_t n = 48000;
  AudioBuffer st;
  st.channels = 2;
  st.samples.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    st.samples[2 * i] = 0.5 * std::sin(kTau * 500.0 * i / kSampleRate);
    st.samples[2 * i + 1] = 0.3 * std::sin(kTau * 800.0 * i / kSampleRate);
  }
  const AudioBuffer out = lowpass(st, 3500.0);
  CHECK(out.channels == 2);
  REQUIRE(out.samples.size() == st.samples.size());

  const int mid = (static_cast<int>(lowpass_taps(3500.0).size()) - 1) / 2;
  double worst = 0.0;
  for (std::size_t i = mid; i < n - mid; ++i) {
    worst = std::max(worst, std::abs(out.samples[2 * i] - st.samples[2 * i]));
    worst = std::max(worst,
                     std::abs(out.samples[2 * i + 1] - st.samples[2 * i + 1]));
  }
  CHECK(worst < 2e-3);  // passband tones pass through aligned and unscaled
}

TEST_CASE("lowpass: removes out-of-band tone") {
  const std::size_t n = 48000;
  AudioBuffer b;
  b.channels = 1;
  b.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    b.samples[i] = 0.7 * std::sin(kTau * 9000.0 * i / kSampleRate);
  const AudioBuffer out = lowpass(b, 3500.0);
  const int mid = (static_cast<int>(lowpass_taps(3500.0).size()) - 1) / 2;
  double worst = 0.0;
  for (std::size_t i = mid; i < n - mid; ++i)
    worst = std::max(worst, std::abs(out.samples[i]));
  CHECK(worst < 1e-3);
}

// ---------------------------------------------------------------------------
// Bandwidth estimate
// ---------------------------------------------------------------------------

TEST_CASE("bandwidth: silence, tones and lowpassed noise") {
  AudioBuffer silence;
  silence.channels = 1;
  silence.samples.assign(48000, 0.0);
  CHECK(estimate_bandwidth(silence) == 0.0);

  AudioBuffer brief;
  brief.channels = 1;
  brief.samples.assign(24000, 0.0);
  CHECK_THROWS_AS(estimate_bandwidth(brief), ContractError);

  const AudioBuffer tone = make_sine(1000.0, 2.0, 0.5, 1);
  const double bw_tone = estimate_bandwidth(tone);
  CHECK(bw_tone >= 900.0);
  CHECK(bw_tone <= 1300.0);

  const AudioBuffer noise = make_noise(2.0, 0.25, 1, 314159);
  const AudioBuffer cut = lowpass(noise, 3500.0);
  const double bw = estimate_bandwidth(cut);
  CHECK(bw >= 3400.0);
  CHECK(bw <= 3900.0);

  // Unfiltered white noise spans essentially the whole spectrum.
  CHECK(estimate_bandwidth(noise) > 20000.0);
}

// ---------------------------------------------------------------------------
// Spectrogram container
// ---------------------------------------------------------------------------

namespace {

Spectrogram handmade_spec() {
  Spectrogram s;
  s.bands = 3;
  s.frames = 5;
  s.hop_seconds = 1024.0 / 48000.0;
  s.band_centers_hz = {101.5, 1502.25, 9013.125};
  for (int p = 0; p < 4; ++p) {
    s.planes[p].resize(15);
    for (int i = 0; i < 15; ++i)
      s.planes[p][i] = static_cast<float>(p * 100 + i) * 0.4375f;
  }
  return s;
}

}  // namespace

TEST_CASE("spectrogram container: round-trips bit-exactly") {
  TempDir tmp("rfgs_rt");
  const Spectrogram s = handmade_spec();
  const std::string p = tmp.file("s.rfgs");
  write_spectrogram(p, s);
  const Spectrogram r = read_spectrogram(p);
  CHECK(r.bands == s.bands);
  CHECK(r.frames == s.frames);
  CHECK(r.hop_seconds == s.hop_seconds);
  CHECK(r.band_centers_hz == s.band_centers_hz);
  for (int pl = 0; pl < 4; ++pl) CHECK(r.planes[pl] == s.planes[pl]);
  // The container carries no frontend identity; that lives in the cache key.
  CHECK(r.config_hash == 0);
}

TEST_CASE("spectrogram container: corruption is rejected") {
  TempDir tmp("rfgs_bad");
  const Spectrogram s = handmade_spec();
  const std::string good = tmp.file("good.rfgs");
  write_spectrogram(good, s);

  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();

  std::string magic_bytes = bytes;
  magic_bytes[3] = 'X';
  const std::string magic = tmp.file("magic.rfgs");
  write_bytes(magic, magic_bytes);
  CHECK_THROWS_WITH_AS(read_spectrogram(magic), doctest::Contains("magic"),
                       ContractError);

  std::string ver_bytes = bytes;
  ver_bytes[4] = 9;
  const std::string ver = tmp.file("ver.rfgs");
  write_bytes(ver, ver_bytes);
  CHECK_THROWS_WITH_AS(read_spectrogram(ver), doctest::Contains("version"),
                       ContractError);

  std::string short_bytes = bytes.substr(0, 20);
  const std::string shorty = tmp.file("short.rfgs");
  write_bytes(shorty, short_bytes);
  CHECK_THROWS_WITH_AS(read_spectrogram(shorty), doctest::Contains("truncated"),
                       ContractError);

  std::string clipped = bytes.substr(0, bytes.size() - 8);
  const std::string clip = tmp.file("clip.rfgs");
  write_bytes(clip, clipped);
  CHECK_THROWS_WITH_AS(read_spectrogram(clip), doctest::Contains("truncated"),
                       ContractError);

  CHECK_THROWS_AS(read_spectrogram(tmp.file("absent.rfgs")), ContractError);
}

// ---------------------------------------------------------------------------
// Feature cache
// ---------------------------------------------------------------------------

TEST_CASE("feature cache: memoizes in memory") {
  TempDir tmp("cache_mem");
  const std::string wav = tmp.file("a.wav");
  write_wav(wav, make_noise(0.6, 0.2, 1, 808));
  FeatureCache cache(small_config());  // no disk directory
  const Spectrogram& first = cache.spectrogram(wav);
  const Spectrogram& second = cache.spectrogram(wav);
  CHECK(&first == &second);
  const auto& segs1 = cache.segments(wav);
  const auto& segs2 = cache.segments(wav);
  CHECK(&segs1 == &segs2);
  CHECK(segs1.size() ==
        static_cast<std::size_t>((first.frames + 39) / 40));
  CHECK(segs1[0].frames == 40);
}

TEST_CASE("feature cache: disk blobs satisfy later instances without audio") {
  TempDir tmp("cache_disk");
  const std::string wav = tmp.file("b.wav");
  write_wav(wav, make_noise(0.6, 0.25, 2, 909));
  const std::string dir = tmp.file("feat");
  const FrontendConfig cfg = small_config();

  Spectrogram copy;
  {
    FeatureCache first(cfg, dir);
    copy = first.spectrogram(wav);  // extracts and persists
  }
  // One .rfgs blob appeared.
  int blobs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    blobs += e.path().extension() == ".rfgs";
  CHECK(blobs == 1);

  // Remove the source audio: a second cache must be served from disk.
  std::filesystem::remove(wav);
  FeatureCache second(cfg, dir);
  const Spectrogram& loaded = second.spectrogram(wav);
  CHECK(loaded.bands == copy.bands);
  CHECK(loaded.frames == copy.frames);
  CHECK(loaded.config_hash == cfg.hash());
  for (int p = 0; p < 4; ++p) CHECK(loaded.planes[p] == copy.planes[p]);

  // A different frontend keys to a different blob, so the deleted audio is
  // actually needed — proving configs do not share cache entries.
  FrontendConfig other = cfg;
  other.bands = 16;
  FeatureCache third(other, dir);
  CHECK_THROWS_AS(third.spectrogram(wav), ContractError);
}

TEST_CASE("feature cache: prefetch across threads matches serial extraction") {
  TempDir tmp("cache_jobs");
  const FrontendConfig cfg = small_config();
  std::vector<std::string> paths;
  for (int i = 0; i < 4; ++i) {
    const std::string wav = tmp.file("n" + std::to_string(i) + ".wav");
    write_wav(wav, make_noise(0.6, 0.2, 1, 1000 + static_cast<std::uint64_t>(i)));
    paths.push_back(wav);
  }
  FeatureCache serial(cfg);
  FeatureCache threaded(cfg);
  threaded.prefetch(paths, 3);
  for (const auto& p : paths) {
    const Spectrogram& a = serial.spectrogram(p);
    const Spectrogram& b = threaded.spectrogram(p);
    for (int pl = 0; pl < 4; ++pl) CHECK(a.planes[pl] == b.planes[pl]);
  }
  // Prefetched entries come back by reference, not recomputed.
  const Spectrogram& x = threaded.spectrogram(paths[0]);
  const Spectrogram& y = threaded.spectrogram(paths[0]);
  CHECK(&x == &y);
}
