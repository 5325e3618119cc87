#include "rfgml/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>

#include "rfgml/evaluation.hpp"
#include "rfgml/score.hpp"

namespace rfgml {

std::vector<int> split_folds(const Manifest& manifest, int folds,
                             std::uint64_t seed) {
  if (folds < 2) throw ContractError("folds must be >= 2");
  std::vector<std::string> excerpts;
  for (const auto& r : manifest)
    if (std::find(excerpts.begin(), excerpts.end(), r.excerpt_id) ==
        excerpts.end())
      excerpts.push_back(r.excerpt_id);
  if (excerpts.size() < std::size_t(folds))
    throw ContractError("folds exceed excerpt count");
  Rng rng(derive_seed(seed, "folds", 0));
  for (std::size_t i = excerpts.size(); i > 1; --i)
    std::swap(excerpts[i - 1], excerpts[rng.uniform_int(0, i - 1)]);
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < excerpts.size(); ++i)
    fold_of[excerpts[i]] = int(i % std::size_t(folds));
  std::vector<int> out(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i)
    out[i] = fold_of.at(manifest[i].excerpt_id);
  return out;
}

NormStats compute_normalization(const std::vector<const Spectrogram*>& specs) {
  if (specs.empty())
    throw ContractError("normalization requires at least one spectrogram");
  int bands = specs[0]->bands;
  NormStats st;
  st.bands = bands;
  st.mean.assign(std::size_t(4) * bands, 0.0);
  st.std.assign(std::size_t(4) * bands, 0.0);
  std::vector<double> sum(std::size_t(4) * bands, 0.0);
  std::vector<double> sumsq(std::size_t(4) * bands, 0.0);
  std::size_t frames_total = 0;
  for (const Spectrogram* s : specs) {
    if (s->bands != bands)
      throw ContractError("normalization inputs have mixed band counts");
    frames_total += std::size_t(s->frames);
    for (int p = 0; p < 4; ++p)
      for (int b = 0; b < bands; ++b) {
        const float* row = s->planes[p].data() + std::size_t(b) * s->frames;
        double acc = 0.0, acc2 = 0.0;
        for (int t = 0; t < s->frames; ++t) {
          double v = row[t];
          acc += v;
          acc2 += v * v;
        }
        sum[std::size_t(p) * bands + b] += acc;
        sumsq[std::size_t(p) * bands + b] += acc2;
      }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    double mean = sum[i] / double(frames_total);
    double var = sumsq[i] / double(frames_total) - mean * mean;
    st.mean[i] = mean;
    st.std[i] = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
  }
  return st;
}

namespace {

struct Sample {
  SpectrogramSegment seg;
  SpectrogramSegment ref;  // full-reference only
  double label = 0.0;
};

std::vector<std::vector<double>> snapshot_params(const Model& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.named_params())
    out.emplace_back(t.data(), t.data() + t.size());
  return out;
}

void restore_params(Model& m, const std::vector<std::vector<double>>& snap) {
  const auto& ps = m.named_params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Tensor t = ps[i].second;
    std::memcpy(t.data(), snap[i].data(), snap[i].size() * sizeof(double));
  }
}

}  // namespace

TrainResult train(const TrainConfig& config) {
  TrainConfig cfg = config;
  cfg.model.variant = cfg.variant;
  cfg.model.validate();
  if (cfg.batch_size < 1) throw ContractError("batch_size must be >= 1");
  if (cfg.epochs_per_fold < 0)
    throw ContractError("epochs_per_fold must be >= 0");
  if (!(cfg.lr >= 0.0)) throw ContractError("learning rate must be >= 0");

  Manifest manifest = load_manifest(cfg.manifest_path);
  std::string base = manifest_dir(cfg.manifest_path);
  validate_manifest(manifest, base, true);
  const bool fr = cfg.variant == Variant::full_reference;

  std::optional<Model> donor;
  if (cfg.init != InitMode::def) {
    if (cfg.donor_path.empty())
      throw ContractError("init mode " + to_string(cfg.init) +
                          " requires a donor checkpoint");
    donor = load_checkpoint(cfg.donor_path);
  }

  std::vector<std::string> rec_path(manifest.size());
  std::map<std::string, std::string> ref_path;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    rec_path[i] = resolve_audio_path(base, manifest[i].audio_path);
    if (manifest[i].system_id == kHiddenReference)
      ref_path[manifest[i].excerpt_id] = rec_path[i];
  }

  FeatureCache cache(cfg.model.frontend, cfg.features_dir);
  {
    std::vector<std::string> all = rec_path;
    for (const auto& [e, p] : ref_path) all.push_back(p);
    cache.prefetch(all, cfg.jobs);
  }

  // Input normalization over the distinct audio files of the whole manifest.
  NormStats stats;
  {
    std::set<std::string> distinct(rec_path.begin(), rec_path.end());
    std::vector<const Spectrogram*> specs;
    for (const auto& p : distinct) specs.push_back(&cache.spectrogram(p));
    stats = compute_normalization(specs);
  }

  Model built = Model::build(cfg.model, cfg.init,
                             donor ? &*donor : nullptr, cfg.seed);
  built.norm() = stats;
  donor.reset();

  TrainResult result{std::move(built), {}, {}, false, ""};
  Model& model = result.model;

  AdamState adam(model.parameters(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  std::vector<int> fold_of = split_folds(manifest, cfg.folds, cfg.seed);

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", 0));
  Rng seg_rng(derive_seed(cfg.seed, "segment", 0));
  Rng aug_rng(derive_seed(cfg.seed, "augment", 0));

  auto snapshot = snapshot_params(model);

  auto make_sample = [&](std::size_t idx, Rng& pick) {
    Sample s;
    const auto& segs = cache.segments(rec_path[idx]);
    std::size_t si =
        segs.size() == 1 ? 0 : std::size_t(pick.uniform_int(0, segs.size() - 1));
    s.seg = segs[si];
    s.label = manifest[idx].score;
    if (fr) {
      const auto& rsegs = cache.segments(ref_path.at(manifest[idx].excerpt_id));
      if (rsegs.size() != segs.size())
        throw ContractError(
            "reference and degraded segment counts differ for excerpt " +
            manifest[idx].excerpt_id);
      s.ref = rsegs[si];
    }
    return s;
  };

  bool stop = false;
  for (int val_fold = 0; val_fold < cfg.folds && !stop; ++val_fold)
  for (int fold_epoch = 0; fold_epoch < cfg.epochs_per_fold && !stop;
       ++fold_epoch) {
    int epoch = val_fold * cfg.epochs_per_fold + fold_epoch;
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < manifest.size(); ++i)
      (fold_of[i] == val_fold ? val_idx : train_idx).push_back(i);
    for (std::size_t i = train_idx.size(); i > 1; --i)
      std::swap(train_idx[i - 1], train_idx[shuffle_rng.uniform_int(0, i - 1)]);
    result.grad_records.push_back(train_idx);

    double nll_sum = 0.0;
    std::size_t nll_count = 0;
    bool failed = false;
    std::string reason;
    try {
      for (std::size_t start = 0; start < train_idx.size();
           start += std::size_t(cfg.batch_size)) {
        std::size_t stop =
            std::min(train_idx.size(), start + std::size_t(cfg.batch_size));
        double inv_b = 1.0 / double(stop - start);
        for (Tensor p : model.parameters()) p.zero_grad();
        for (std::size_t bi = start; bi < stop; ++bi) {
          std::size_t idx = train_idx[bi];
          Sample s = make_sample(idx, seg_rng);
          if (cfg.swap_augment && aug_rng.uniform() < 0.5) {
            swap_lr(s.seg);
            if (fr) swap_lr(s.ref);
          }
          if (cfg.cutmix.enabled && aug_rng.uniform() < 0.5) {
            std::size_t pj =
                train_idx[aug_rng.uniform_int(0, train_idx.size() - 1)];
            Sample partner = make_sample(pj, aug_rng);
            double lam = sample_beta(cfg.cutmix.alpha, aug_rng);
            Rng pos_rng = aug_rng;  // identical rectangle on the reference
            auto mixed = cutmix(s.seg, s.label, partner.seg, partner.label,
                                lam, aug_rng);
            s.seg = std::move(mixed.segment);
            s.label = mixed.label;
            if (fr) {
              auto rmix = cutmix(s.ref, 0.0, partner.ref, 0.0, lam, pos_rng);
              s.ref = std::move(rmix.segment);
            }
          }
          Tensor input = fr ? model.input_tensor(s.ref, s.seg)
                            : model.input_tensor(s.seg);
          Graph g;
          auto [mu, la] = model.forward_graph(g, g.leaf(input));
          Tensor loss_node = g.logistic_nll(mu, la, s.label);
          double lv = loss_node.item();
          double closed = nll(ScoreDistribution{mu.item(), la.item()}, s.label);
          if (!(std::abs(lv - closed) <= 1e-9))
            throw NumericError("loss value disagrees with closed form");
          g.backward(g.scale(loss_node, inv_b));
          nll_sum += lv;
          ++nll_count;
        }
        for (const auto& name : model.frozen_names())
          model.param(name).zero_grad();
        adam.step();
      }
    } catch (const NumericError& e) {
      failed = true;
      reason = e.what();
    }
    if (failed) {
      restore_params(model, snapshot);
      result.aborted = true;
      result.abort_reason = reason;
      stop = true;
      continue;
    }

    // Validation on the held-out fold; one prediction per distinct item.
    std::map<std::pair<std::string, std::string>, ScoreDistribution> items;
    std::map<std::pair<std::string, std::string>, std::vector<double>>
        item_scores;
    for (std::size_t idx : val_idx) {
      auto key =
          std::make_pair(manifest[idx].excerpt_id, manifest[idx].system_id);
      item_scores[key].push_back(manifest[idx].score);
      if (items.count(key)) continue;
      items[key] =
          fr ? predict_segments(
                   model, cache.segments(ref_path.at(manifest[idx].excerpt_id)),
                   cache.segments(rec_path[idx]))
             : predict_segments(model, cache.segments(rec_path[idx]));
    }
    double vsum = 0.0;
    for (std::size_t idx : val_idx)
      vsum += nll(items.at(std::make_pair(manifest[idx].excerpt_id,
                                          manifest[idx].system_id)),
                  manifest[idx].score);
    std::vector<double> xs, ys;
    for (const auto& [key, sc] : item_scores) {
      xs.push_back(std::accumulate(sc.begin(), sc.end(), 0.0) /
                   double(sc.size()));
      ys.push_back(items.at(key).mu);
    }
    EpochMetrics row;
    row.epoch = epoch;
    row.fold = val_fold;
    row.train_nll = nll_count ? nll_sum / double(nll_count)
                              : std::numeric_limits<double>::quiet_NaN();
    row.val_nll = val_idx.empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : vsum / double(val_idx.size());
    try {
      row.val_rp = pearson(xs, ys);
      row.val_rs = spearman(xs, ys);
    } catch (const ContractError&) {
      row.val_rp = std::numeric_limits<double>::quiet_NaN();
      row.val_rs = std::numeric_limits<double>::quiet_NaN();
    }
    result.metrics.push_back(row);
    snapshot = snapshot_params(model);
  }
  return result;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochMetrics>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ContractError("cannot open metrics file for writing: " + path);
  os << "epoch,fold,train_nll,val_nll,val_rp,val_rs\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6g,%.6g,%.6g,%.6g", r.epoch,
                  r.fold, r.train_nll, r.val_nll, r.val_rp, r.val_rs);
    os << buf << "\n";
  }
  if (!os) throw ContractError("metrics write failed: " + path);
}

}  // namespace rfgml
