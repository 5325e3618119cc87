#include "rfgml/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include "rfgml/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint and feature files assume a little-endian host");

namespace rfgml {

Variant variant_from_string(const std::string& s) {
  if (s == "full_reference" || s == "fr") return Variant::full_reference;
  if (s == "reference_free" || s == "rf") return Variant::reference_free;
  throw ContractError("unknown model variant: " + s);
}

std::string to_string(Variant v) {
  return v == Variant::full_reference ? "full_reference" : "reference_free";
}

InitMode init_mode_from_string(const std::string& s) {
  if (s == "def") return InitMode::def;
  if (s == "deg") return InitMode::deg;
  if (s == "degF") return InitMode::degF;
  if (s == "all") return InitMode::all;
  throw ContractError("unknown init mode: " + s);
}

std::string to_string(InitMode m) {
  switch (m) {
    case InitMode::def: return "def";
    case InitMode::deg: return "deg";
    case InitMode::degF: return "degF";
    default: return "all";
  }
}

ModelConfig ModelConfig::desk_default(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.frontend = FrontendConfig{};
  auto br = [](std::vector<ConvSpec> convs, bool pool_first = false) {
    BranchSpec b;
    b.pool_first = pool_first;
    b.convs = std::move(convs);
    return b;
  };
  // In-A twice, In-B, In-C; widths tuned to ~139k parameters total.
  c.blocks = {
      BlockSpec{"in_a",
                {br({{8, 1, 1}}), br({{4, 1, 1}, {8, 3, 3}}),
                 br({{4, 1, 1}, {6, 5, 5}}), br({{6, 1, 1}}, true)},
                2},
      BlockSpec{"in_a",
                {br({{16, 1, 1}}), br({{12, 1, 1}, {24, 3, 3}}),
                 br({{12, 1, 1}, {12, 5, 5}}), br({{12, 1, 1}}, true)},
                2},
      BlockSpec{"in_b",
                {br({{32, 1, 1}}), br({{24, 1, 1}, {40, 3, 3}}),
                 br({{20, 1, 1}, {32, 1, 7}, {40, 7, 1}}),
                 br({{24, 1, 1}}, true)},
                2},
      BlockSpec{"in_c",
                {br({{64, 1, 1}}), br({{32, 1, 1}, {56, 1, 3}}),
                 br({{32, 1, 1}, {56, 3, 1}}), br({{40, 1, 1}}, true)},
                1},
  };
  c.se_ratio = 4;
  c.fc_widths = {176, 80, 40};
  return c;
}

static int block_out_channels(const BlockSpec& b) {
  int out = 0;
  for (const auto& br : b.branches) {
    if (br.convs.empty()) throw ContractError("branch has no convolutions");
    out += br.convs.back().out_ch;
  }
  return out;
}

void ModelConfig::validate() const {
  frontend.validate();
  if (blocks.size() != 4)
    throw ContractError("model requires exactly 4 inception blocks");
  static const char* kinds[4] = {"in_a", "in_a", "in_b", "in_c"};
  for (std::size_t i = 0; i < 4; ++i) {
    if (blocks[i].kind != kinds[i])
      throw ContractError("block " + std::to_string(i) + " must be kind " +
                          kinds[i] + ", got " + blocks[i].kind);
    if (blocks[i].branches.empty())
      throw ContractError("block " + std::to_string(i) + " has no branches");
    if (blocks[i].pool_stride < 1)
      throw ContractError("block pool_stride must be >= 1");
    for (const auto& br : blocks[i].branches) {
      if (br.convs.empty()) throw ContractError("branch has no convolutions");
      for (const auto& cv : br.convs) {
        if (cv.out_ch < 1 || cv.kh < 1 || cv.kw < 1)
          throw ContractError("convolution spec has non-positive dimensions");
        if (cv.kh % 2 == 0 || cv.kw % 2 == 0)
          throw ContractError("convolution kernels must be odd-sized");
      }
    }
  }
  if (se_ratio < 1) throw ContractError("se_ratio must be >= 1");
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    int c = block_out_channels(blocks[i]);
    if (c % se_ratio != 0)
      throw ContractError("block " + std::to_string(i) + " output channels (" +
                          std::to_string(c) + ") not divisible by se_ratio");
  }
  if (fc_widths.size() != 3)
    throw ContractError("fc_widths must list exactly 3 layer widths");
  for (int w : fc_widths)
    if (w < 1) throw ContractError("fc widths must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json jb = nlohmann::json::array();
  for (const auto& b : blocks) {
    nlohmann::json jbr = nlohmann::json::array();
    for (const auto& br : b.branches) {
      nlohmann::json jc = nlohmann::json::array();
      for (const auto& cv : br.convs)
        jc.push_back({{"out", cv.out_ch}, {"kh", cv.kh}, {"kw", cv.kw}});
      jbr.push_back({{"pool_first", br.pool_first}, {"convs", jc}});
    }
    jb.push_back({{"kind", b.kind},
                  {"branches", jbr},
                  {"pool_stride", b.pool_stride}});
  }
  return nlohmann::json{{"variant", to_string(variant)},
                        {"frontend", frontend.to_json()},
                        {"blocks", jb},
                        {"se_ratio", se_ratio},
                        {"fc_widths", fc_widths}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.frontend = FrontendConfig::from_json(j.at("frontend"));
    c.blocks.clear();
    for (const auto& jb : j.at("blocks")) {
      BlockSpec b;
      b.kind = jb.at("kind").get<std::string>();
      b.pool_stride = jb.at("pool_stride").get<int>();
      for (const auto& jbr : jb.at("branches")) {
        BranchSpec br;
        br.pool_first = jbr.at("pool_first").get<bool>();
        for (const auto& jc : jbr.at("convs"))
          br.convs.push_back(ConvSpec{jc.at("out").get<int>(),
                                      jc.at("kh").get<int>(),
                                      jc.at("kw").get<int>()});
        b.branches.push_back(std::move(br));
      }
      c.blocks.push_back(std::move(b));
    }
    c.se_ratio = j.at("se_ratio").get<int>();
    c.fc_widths = j.at("fc_widths").get<std::vector<int>>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed model config JSON: ") +
                        e.what());
  }
}

// Walks every parameter in construction order. fn(name, shape, fan_in).
static void enumerate_params(
    const ModelConfig& cfg,
    const std::function<void(const std::string&, const std::vector<int>&,
                             std::size_t)>& fn) {
  int in_ch = cfg.input_channels();
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& b = cfg.blocks[i];
    for (std::size_t jx = 0; jx < b.branches.size(); ++jx) {
      const auto& br = b.branches[jx];
      int c = in_ch;
      for (std::size_t k = 0; k < br.convs.size(); ++k) {
        const auto& cv = br.convs[k];
        std::string base = "block" + std::to_string(i) + ".b" +
                           std::to_string(jx) + ".c" + std::to_string(k);
        std::size_t fan_in =
            std::size_t(c) * std::size_t(cv.kh) * std::size_t(cv.kw);
        fn(base + ".w", {cv.out_ch, c, cv.kh, cv.kw}, fan_in);
        fn(base + ".b", {cv.out_ch}, fan_in);
        c = cv.out_ch;
      }
    }
    in_ch = block_out_channels(b);
    if (i + 1 < cfg.blocks.size()) {
      int c = in_ch;
      int r = c / cfg.se_ratio;
      std::string base = "se" + std::to_string(i);
      fn(base + ".reduce.w", {r, c}, std::size_t(c));
      fn(base + ".reduce.b", {r}, std::size_t(c));
      fn(base + ".expand.w", {c, r}, std::size_t(r));
      fn(base + ".expand.b", {c}, std::size_t(r));
    }
  }
  int width = in_ch;
  for (std::size_t i = 0; i < cfg.fc_widths.size(); ++i) {
    int w = cfg.fc_widths[i];
    std::string base = "fc" + std::to_string(i);
    fn(base + ".w", {w, width}, std::size_t(width));
    fn(base + ".b", {w}, std::size_t(width));
    width = w;
  }
  fn("head.w", {2, width}, std::size_t(width));
  fn("head.b", {2}, std::size_t(width));
}

std::size_t param_count(const ModelConfig& config) {
  config.validate();
  std::size_t total = 0;
  enumerate_params(config, [&](const std::string&, const std::vector<int>& shp,
                               std::size_t) { total += numel(shp); });
  return total;
}

NormStats NormStats::identity(int bands) {
  NormStats s;
  s.bands = bands;
  s.mean.assign(std::size_t(4) * bands, 0.0);
  s.std.assign(std::size_t(4) * bands, 1.0);
  return s;
}

Tensor Model::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ContractError("unknown model parameter: " + name);
  return params_[it->second].second;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

std::size_t Model::param_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : params_) total += t.size();
  return total;
}

// Donor compatibility for the transfer modes: identical inception/SE
// topology and frontend; only the input-channel count differs (8 vs 4).
static void check_donor(const ModelConfig& target, const Model* donor,
                        InitMode mode) {
  if (donor == nullptr)
    throw ContractError("init mode " + to_string(mode) +
                        " requires a donor checkpoint");
  const ModelConfig& d = donor->config();
  if (d.variant != Variant::full_reference)
    throw ContractError("transfer donor must be a full_reference model");
  if (target.variant != Variant::reference_free)
    throw ContractError("transfer target must be a reference_free model");
  if (d.frontend.hash() != target.frontend.hash())
    throw ContractError("donor and target frontend configurations differ");
  if (d.se_ratio != target.se_ratio || d.blocks.size() != target.blocks.size())
    throw ContractError("donor and target block structure differs");
  for (std::size_t i = 0; i < d.blocks.size(); ++i) {
    const auto& db = d.blocks[i];
    const auto& tb = target.blocks[i];
    bool same = db.kind == tb.kind && db.pool_stride == tb.pool_stride &&
                db.branches.size() == tb.branches.size();
    if (same) {
      for (std::size_t jx = 0; jx < db.branches.size(); ++jx) {
        const auto& dbr = db.branches[jx];
        const auto& tbr = tb.branches[jx];
        if (dbr.pool_first != tbr.pool_first ||
            dbr.convs.size() != tbr.convs.size()) {
          same = false;
          break;
        }
        for (std::size_t k = 0; k < dbr.convs.size(); ++k) {
          const auto& a = dbr.convs[k];
          const auto& bcv = tbr.convs[k];
          if (a.out_ch != bcv.out_ch || a.kh != bcv.kh || a.kw != bcv.kw) {
            same = false;
            break;
          }
        }
        if (!same) break;
      }
    }
    if (!same)
      throw ContractError("donor and target block structure differs");
  }
}

// Copies the donor's degraded-channel kernel slice (input channels 4..7)
// into a 4-channel target kernel, plus the bias.
static void slice_input_conv(Tensor dst_w, Tensor dst_b, const Tensor& src_w,
                             const Tensor& src_b) {
  const auto& ds = dst_w.shape();
  const auto& ss = src_w.shape();
  if (ds.size() != 4 || ss.size() != 4 || ss[1] != 8 || ds[1] != 4 ||
      ds[0] != ss[0] || ds[2] != ss[2] || ds[3] != ss[3])
    throw ContractError("donor input kernel shape incompatible with slice");
  std::size_t kk = std::size_t(ds[2]) * std::size_t(ds[3]);
  for (std::size_t o = 0; o < std::size_t(ds[0]); ++o)
    for (std::size_t c = 0; c < 4; ++c)
      std::memcpy(dst_w.data() + (o * 4 + c) * kk,
                  src_w.data() + (o * 8 + (4 + c)) * kk, kk * sizeof(double));
  std::memcpy(dst_b.data(), src_b.data(), dst_b.size() * sizeof(double));
}

Model Model::build(const ModelConfig& config, InitMode mode,
                   const Model* donor, std::uint64_t seed) {
  config.validate();
  Model m;
  m.cfg_ = config;
  m.norm_ = NormStats::identity(config.frontend.bands);

  // Fresh init for every tensor first (identical draw sequence across all
  // modes), then the transfer modes overwrite their targets.
  Rng rng(derive_seed(seed, "model_init", 0));
  enumerate_params(config, [&](const std::string& name,
                               const std::vector<int>& shp,
                               std::size_t fan_in) {
    // He-style gain for the weights: the relu trunk has no normalization
    // layers, so a 1/sqrt(fan) bound (gain ~0.41 per layer) would shrink the
    // input signal to ~1e-5 of its scale by the head and the network starts
    // out as a near-constant function. sqrt(6/fan) keeps activation variance
    // roughly unit through the stack. Biases keep the conventional
    // 1/sqrt(fan) bound.
    const bool is_weight = name.size() > 2 && name.ends_with(".w");
    double bound = is_weight ? std::sqrt(6.0 / double(fan_in))
                             : 1.0 / std::sqrt(double(fan_in));
    Tensor t = random_uniform(shp, rng, -bound, bound);
    t.set_requires_grad(true);
    m.index_[name] = m.params_.size();
    m.params_.emplace_back(name, t);
  });

  if (mode != InitMode::def) {
    check_donor(config, donor, mode);
    // Every branch's first conv in block 0 reads the input planes directly;
    // those kernels take the donor's degraded-half slice.
    std::vector<std::string> sliced;
    for (std::size_t jx = 0; jx < config.blocks[0].branches.size(); ++jx) {
      std::string base = "block0.b" + std::to_string(jx) + ".c0";
      slice_input_conv(m.param(base + ".w"), m.param(base + ".b"),
                       donor->param(base + ".w"), donor->param(base + ".b"));
      sliced.push_back(base + ".w");
      sliced.push_back(base + ".b");
    }
    if (mode == InitMode::degF) m.frozen_ = sliced;
    if (mode == InitMode::all) {
      for (auto& [name, t] : m.params_) {
        bool is_sliced =
            std::find(sliced.begin(), sliced.end(), name) != sliced.end();
        bool is_fc = name.rfind("fc", 0) == 0 || name.rfind("head", 0) == 0;
        if (is_sliced || is_fc) continue;
        Tensor src = donor->param(name);
        if (src.shape() != t.shape())
          throw ContractError("donor parameter shape mismatch: " + name);
        std::memcpy(t.data(), src.data(), t.size() * sizeof(double));
      }
    }
  }
  return m;
}

std::pair<Tensor, Tensor> Model::forward_graph(Graph& g,
                                               const Tensor& input) const {
  const auto& shp = input.shape();
  if (shp.size() != 3 || shp[0] != cfg_.input_channels() ||
      shp[1] != cfg_.frontend.bands || shp[2] != cfg_.frontend.segment_frames)
    throw ContractError("forward input shape does not match model config");

  Tensor x = input;
  for (std::size_t i = 0; i < cfg_.blocks.size(); ++i) {
    const auto& b = cfg_.blocks[i];
    std::vector<Tensor> outs;
    for (std::size_t jx = 0; jx < b.branches.size(); ++jx) {
      const auto& br = b.branches[jx];
      Tensor t = x;
      if (br.pool_first) t = g.avg_pool2d(t, 3, 3, 1, 1);
      for (std::size_t k = 0; k < br.convs.size(); ++k) {
        const auto& cv = br.convs[k];
        std::string base = "block" + std::to_string(i) + ".b" +
                           std::to_string(jx) + ".c" + std::to_string(k);
        t = g.conv2d(t, param(base + ".w"), param(base + ".b"), {1, 1},
                     {(cv.kh - 1) / 2, (cv.kw - 1) / 2});
        t = g.relu(t);
      }
      outs.push_back(t);
    }
    x = g.concat_channels(outs);
    if (b.pool_stride > 1)
      x = g.avg_pool2d(x, b.pool_stride, b.pool_stride, b.pool_stride, 0);
    if (i + 1 < cfg_.blocks.size()) {
      std::string base = "se" + std::to_string(i);
      Tensor s = g.global_avg_pool(x);
      s = g.relu(g.linear(s, param(base + ".reduce.w"), param(base + ".reduce.b")));
      s = g.sigmoid(g.linear(s, param(base + ".expand.w"), param(base + ".expand.b")));
      x = g.channel_scale(x, s);
    }
  }
  Tensor h = g.global_avg_pool(x);
  for (std::size_t i = 0; i < cfg_.fc_widths.size(); ++i) {
    std::string base = "fc" + std::to_string(i);
    h = g.relu(g.linear(h, param(base + ".w"), param(base + ".b")));
  }
  Tensor head = g.linear(h, param("head.w"), param("head.b"));
  Tensor mu = g.scale(g.sigmoid(g.select(head, 0)), 100.0);
  Tensor log_a = g.select(head, 1);
  return {mu, log_a};
}

static void check_segment(const SpectrogramSegment& seg,
                          const FrontendConfig& fc) {
  if (seg.bands != fc.bands || seg.frames != fc.segment_frames)
    throw ContractError("segment dimensions do not match model input");
}

static void fill_planes(double* dst, const SpectrogramSegment& seg,
                        const NormStats& norm) {
  std::size_t plane = std::size_t(seg.bands) * std::size_t(seg.frames);
  for (int p = 0; p < 4; ++p)
    for (int b = 0; b < seg.bands; ++b) {
      double mu = norm.mean[std::size_t(p) * seg.bands + b];
      double sd = norm.std[std::size_t(p) * seg.bands + b];
      const float* src = seg.planes[p].data() + std::size_t(b) * seg.frames;
      double* out = dst + std::size_t(p) * plane + std::size_t(b) * seg.frames;
      for (int t = 0; t < seg.frames; ++t) out[t] = (double(src[t]) - mu) / sd;
    }
}

Tensor Model::input_tensor(const SpectrogramSegment& degraded) const {
  if (cfg_.variant != Variant::reference_free)
    throw ContractError("full_reference model requires a reference segment");
  check_segment(degraded, cfg_.frontend);
  Tensor t = Tensor::zeros({4, degraded.bands, degraded.frames});
  fill_planes(t.data(), degraded, norm_);
  return t;
}

Tensor Model::input_tensor(const SpectrogramSegment& reference,
                           const SpectrogramSegment& degraded) const {
  if (cfg_.variant != Variant::full_reference)
    throw ContractError("reference_free model takes no reference segment");
  check_segment(reference, cfg_.frontend);
  check_segment(degraded, cfg_.frontend);
  std::size_t plane = std::size_t(degraded.bands) * std::size_t(degraded.frames);
  Tensor t = Tensor::zeros({8, degraded.bands, degraded.frames});
  fill_planes(t.data(), reference, norm_);
  fill_planes(t.data() + 4 * plane, degraded, norm_);
  return t;
}

ScoreDistribution Model::forward(const SpectrogramSegment& degraded) const {
  Graph g;
  auto [mu, la] = forward_graph(g, g.leaf(input_tensor(degraded)));
  return ScoreDistribution{mu.item(), la.item()};
}

ScoreDistribution Model::forward(const SpectrogramSegment& reference,
                                 const SpectrogramSegment& degraded) const {
  Graph g;
  auto [mu, la] = forward_graph(g, g.leaf(input_tensor(reference, degraded)));
  return ScoreDistribution{mu.item(), la.item()};
}

// Segment scores are pooled by averaging mu and the scale a (not log a).
static ScoreDistribution pool_segments(const std::vector<ScoreDistribution>& d) {
  double mu = 0.0, a = 0.0;
  for (const auto& s : d) {
    mu += s.mu;
    a += s.a();
  }
  mu /= double(d.size());
  a /= double(d.size());
  return ScoreDistribution{mu, std::log(a)};
}

ScoreDistribution predict_segments(const Model& model,
                                   const std::vector<SpectrogramSegment>& degraded) {
  if (degraded.empty()) throw ContractError("prediction requires segments");
  std::vector<ScoreDistribution> per;
  per.reserve(degraded.size());
  for (const auto& s : degraded) per.push_back(model.forward(s));
  return pool_segments(per);
}

ScoreDistribution predict_segments(const Model& model,
                                   const std::vector<SpectrogramSegment>& reference,
                                   const std::vector<SpectrogramSegment>& degraded) {
  if (degraded.empty()) throw ContractError("prediction requires segments");
  if (reference.size() != degraded.size())
    throw ContractError("reference and degraded segment counts differ");
  std::vector<ScoreDistribution> per;
  per.reserve(degraded.size());
  for (std::size_t i = 0; i < degraded.size(); ++i)
    per.push_back(model.forward(reference[i], degraded[i]));
  return pool_segments(per);
}

ScoreDistribution predict_file(const Model& model, const AudioBuffer& audio) {
  const auto& fc = model.config().frontend;
  Spectrogram spec = gammatone_spectrogram(ensure_stereo(audio), fc);
  return predict_segments(model,
                          segment_spectrogram(spec, fc.segment_frames));
}

ScoreDistribution predict_pair(const Model& model, const AudioBuffer& reference,
                               const AudioBuffer& degraded) {
  const auto& fc = model.config().frontend;
  Spectrogram rs = gammatone_spectrogram(ensure_stereo(reference), fc);
  Spectrogram ds = gammatone_spectrogram(ensure_stereo(degraded), fc);
  return predict_segments(model, segment_spectrogram(rs, fc.segment_frames),
                          segment_spectrogram(ds, fc.segment_frames));
}

// ---- checkpoint I/O ----

namespace {

constexpr char kMagic[4] = {'R', 'F', 'G', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ContractError(std::string("checkpoint truncated reading ") + what);
  return v;
}

void get_bytes(std::ifstream& is, void* dst, std::size_t n, const char* what) {
  is.read(reinterpret_cast<char*>(dst), std::streamsize(n));
  if (!is) throw ContractError(std::string("checkpoint truncated reading ") + what);
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path,
                     const nlohmann::json& meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ContractError("cannot open checkpoint for writing: " + path);
  nlohmann::json hdr{{"config", model.config().to_json()},
                     {"frozen", model.frozen_names()},
                     {"meta", meta}};
  std::string js = hdr.dump();  // keys sorted -> canonical bytes
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, js.size());
  os.write(js.data(), std::streamsize(js.size()));
  put<std::uint32_t>(os, std::uint32_t(model.named_params().size()));
  for (const auto& [name, t] : model.named_params()) {
    put<std::uint16_t>(os, std::uint16_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    put<std::uint8_t>(os, 2);  // dtype: 1 = f32, 2 = f64
    put<std::uint8_t>(os, std::uint8_t(t.shape().size()));
    for (int d : t.shape()) put<std::uint32_t>(os, std::uint32_t(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             std::streamsize(t.size() * sizeof(double)));
  }
  const NormStats& ns = model.norm();
  put<std::uint32_t>(os, std::uint32_t(ns.bands));
  os.write(reinterpret_cast<const char*>(ns.mean.data()),
           std::streamsize(ns.mean.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(ns.std.data()),
           std::streamsize(ns.std.size() * sizeof(double)));
  if (!os) throw ContractError("checkpoint write failed: " + path);
}

Model load_checkpoint_impl(const std::string& path, nlohmann::json* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContractError("cannot open checkpoint: " + path);
  char magic[4];
  get_bytes(is, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ContractError("not a model checkpoint (bad magic): " + path);
  auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw ContractError("unsupported checkpoint version " +
                        std::to_string(version));
  auto jlen = get<std::uint64_t>(is, "header length");
  if (jlen > (std::uint64_t(1) << 30))
    throw ContractError("checkpoint header length implausible");
  std::string js(jlen, '\0');
  get_bytes(is, js.data(), jlen, "header");
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("checkpoint header is not valid JSON: ") +
                        e.what());
  }
  Model m;
  m.cfg_ = ModelConfig::from_json(hdr.at("config"));
  if (hdr.contains("frozen"))
    m.frozen_ = hdr.at("frozen").get<std::vector<std::string>>();
  if (meta != nullptr)
    *meta = hdr.contains("meta") ? hdr.at("meta") : nlohmann::json::object();

  enumerate_params(m.cfg_, [&](const std::string& name,
                               const std::vector<int>& shp, std::size_t) {
    Tensor t = Tensor::zeros(shp);
    t.set_requires_grad(true);
    m.index_[name] = m.params_.size();
    m.params_.emplace_back(name, t);
  });

  auto n = get<std::uint32_t>(is, "parameter count");
  if (n != m.params_.size())
    throw ContractError("checkpoint parameter table does not match configuration");
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name_len = get<std::uint16_t>(is, "parameter name length");
    std::string name(name_len, '\0');
    get_bytes(is, name.data(), name_len, "parameter name");
    auto dtype = get<std::uint8_t>(is, "parameter dtype");
    if (dtype != 1 && dtype != 2)
      throw ContractError("unsupported parameter dtype in checkpoint");
    auto ndim = get<std::uint8_t>(is, "parameter rank");
    std::vector<int> shp(ndim);
    for (auto& d : shp)
      d = int(get<std::uint32_t>(is, "parameter dimension"));
    auto it = m.index_.find(name);
    if (it == m.index_.end())
      throw ContractError("checkpoint has unknown parameter: " + name);
    Tensor t = m.params_[it->second].second;
    if (t.shape() != shp)
      throw ContractError("checkpoint parameter shape mismatch: " + name);
    if (dtype == 2) {
      get_bytes(is, t.data(), t.size() * sizeof(double), name.c_str());
    } else {
      std::vector<float> tmp(t.size());
      get_bytes(is, tmp.data(), tmp.size() * sizeof(float), name.c_str());
      for (std::size_t k = 0; k < tmp.size(); ++k) t.data()[k] = double(tmp[k]);
    }
  }
  auto bands = get<std::uint32_t>(is, "normalization bands");
  if (bands != std::uint32_t(m.cfg_.frontend.bands))
    throw ContractError("checkpoint normalization bands mismatch");
  m.norm_.bands = int(bands);
  m.norm_.mean.resize(std::size_t(4) * bands);
  m.norm_.std.resize(std::size_t(4) * bands);
  get_bytes(is, m.norm_.mean.data(), m.norm_.mean.size() * sizeof(double),
            "normalization means");
  get_bytes(is, m.norm_.std.data(), m.norm_.std.size() * sizeof(double),
            "normalization stds");
  return m;
}

Model load_checkpoint(const std::string& path, nlohmann::json* meta) {
  return load_checkpoint_impl(path, meta);
}

}  // namespace rfgml
