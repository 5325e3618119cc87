#include "rfgml/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "rfgml/common.hpp"

namespace rfgml {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    double r = 0.5 * (double(i + 1) + double(j + 1));  // mean of 1-based span
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ContractError("correlation inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw ContractError("correlation requires at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw ContractError("correlation undefined: zero variance input");
  return sxy / std::sqrt(sxx * syy);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ContractError("correlation inputs differ in length");
  return pearson(average_ranks(x), average_ranks(y));
}

AggregateScore aggregate_mushra(const std::vector<double>& scores,
                                double level) {
  if (scores.empty())
    throw ContractError("aggregate requires at least one score");
  if (!(level >= 0.0 && level < 1.0))
    throw ContractError("confidence level must lie in [0, 1)");
  AggregateScore a;
  a.n = scores.size();
  for (double s : scores) a.mean += s;
  a.mean /= double(a.n);
  if (a.n >= 2) {
    double ss = 0.0;
    for (double s : scores) ss += (s - a.mean) * (s - a.mean);
    a.sd = std::sqrt(ss / double(a.n - 1));
    double t = t_quantile(0.5 * (1.0 + level), double(a.n - 1));
    double half = t * a.sd / std::sqrt(double(a.n));
    a.has_ci = true;
    a.ci_lo = a.mean - half;
    a.ci_hi = a.mean + half;
  }
  return a;
}

double mu_metric(const std::vector<SystemScore>& scores) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : scores)
    if (s.system_id == kHiddenReference) {
      sum += s.predicted.mu;
      ++n;
    }
  if (n == 0)
    throw ContractError("mu_metric requires at least one hidden_reference item");
  return sum / double(n);
}

namespace {

struct ItemKey {
  std::string excerpt, system;
  bool operator<(const ItemKey& o) const {
    return excerpt != o.excerpt ? excerpt < o.excerpt : system < o.system;
  }
};

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

EvaluationReport evaluate_manifest(const Model& model,
                                   const std::string& manifest_path,
                                   const std::string& features_dir, int jobs) {
  Manifest m = load_manifest(manifest_path);
  std::string base = manifest_dir(manifest_path);
  validate_manifest(m, base, true);
  const bool fr = model.config().variant == Variant::full_reference;

  std::map<std::string, std::string> ref_path;  // excerpt -> reference audio
  for (const auto& r : m)
    if (r.system_id == kHiddenReference)
      ref_path[r.excerpt_id] = resolve_audio_path(base, r.audio_path);

  FeatureCache cache(model.config().frontend, features_dir);
  std::vector<std::string> paths;
  for (const auto& r : m)
    paths.push_back(resolve_audio_path(base, r.audio_path));
  cache.prefetch(paths, jobs);

  // One prediction per distinct item; every record of the item shares it.
  std::map<ItemKey, ScoreDistribution> pred;
  std::map<ItemKey, std::vector<double>> scores;
  for (const auto& r : m) {
    ItemKey key{r.excerpt_id, r.system_id};
    scores[key].push_back(r.score);
    if (pred.count(key)) continue;
    std::string p = resolve_audio_path(base, r.audio_path);
    pred[key] = fr ? predict_segments(model,
                                      cache.segments(ref_path.at(r.excerpt_id)),
                                      cache.segments(p))
                   : predict_segments(model, cache.segments(p));
  }

  EvaluationReport rep;
  std::vector<double> xs, ys;
  for (const auto& [key, sc] : scores) {
    const ScoreDistribution& d = pred.at(key);
    SystemScore item;
    item.excerpt_id = key.excerpt;
    item.system_id = key.system;
    item.predicted = d;
    item.n_listeners = sc.size();
    AggregateScore agg = aggregate_mushra(sc, 0.95);
    item.subjective_mean = agg.mean;
    item.subjective_has_ci = agg.has_ci;
    item.subjective_ci_lo = agg.ci_lo;
    item.subjective_ci_hi = agg.ci_hi;
    rep.items.push_back(item);
    xs.push_back(item.subjective_mean);
    ys.push_back(d.mu);
  }
  double nll_sum = 0.0;
  for (const auto& r : m)
    nll_sum += nll(pred.at(ItemKey{r.excerpt_id, r.system_id}), r.score);
  rep.mean_nll = nll_sum / double(m.size());
  rep.hidden_reference_mu = mu_metric(rep.items);
  try {
    rep.pearson_r = pearson(xs, ys);
    rep.spearman_r = spearman(xs, ys);
  } catch (const ContractError&) {
    rep.pearson_r = kNaN;
    rep.spearman_r = kNaN;
  }

  // Per-excerpt correlations across that excerpt's systems.
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      by_excerpt;
  for (const auto& it : rep.items) {
    by_excerpt[it.excerpt_id].first.push_back(it.subjective_mean);
    by_excerpt[it.excerpt_id].second.push_back(it.predicted.mu);
  }
  for (const auto& [eid, xy] : by_excerpt) {
    ExcerptCorrelation ec;
    ec.excerpt_id = eid;
    ec.n_systems = xy.first.size();
    try {
      ec.pearson_r = pearson(xy.first, xy.second);
      ec.spearman_r = spearman(xy.first, xy.second);
    } catch (const ContractError&) {
      ec.pearson_r = kNaN;
      ec.spearman_r = kNaN;
    }
    rep.per_excerpt.push_back(ec);
  }
  return rep;
}

void write_items_csv(const std::string& path, const EvaluationReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ContractError("cannot open report for writing: " + path);
  os << "excerpt_id,system_id,listeners,mean_score,ci_lo,ci_hi,"
        "predicted_mu,predicted_std\n";
  for (const auto& it : report.items) {
    double lo = it.subjective_has_ci ? it.subjective_ci_lo : kNaN;
    double hi = it.subjective_has_ci ? it.subjective_ci_hi : kNaN;
    os << it.excerpt_id << ',' << it.system_id << ',' << it.n_listeners << ','
       << fmt_g(it.subjective_mean) << ',' << fmt_g(lo) << ',' << fmt_g(hi)
       << ',' << fmt_g(it.predicted.mu) << ',' << fmt_g(std_of(it.predicted))
       << "\n";
  }
  if (!os) throw ContractError("report write failed: " + path);
}

void write_excerpt_correlations_csv(const std::string& path,
                                    const EvaluationReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ContractError("cannot open report for writing: " + path);
  os << "excerpt_id,n_systems,pearson,spearman\n";
  for (const auto& ec : report.per_excerpt)
    os << ec.excerpt_id << ',' << ec.n_systems << ',' << fmt_g(ec.pearson_r)
       << ',' << fmt_g(ec.spearman_r) << "\n";
  if (!os) throw ContractError("report write failed: " + path);
}

double write_scaling_report(const std::string& path,
                            const EvaluationReport& report,
                            const std::vector<std::string>& conditions) {
  if (conditions.empty())
    throw ContractError("scaling report requires at least one condition");
  struct Cond {
    double score_sum = 0.0, mu_sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, Cond> pool;
  for (const auto& it : report.items) {
    auto& c = pool[it.system_id];
    c.score_sum += it.subjective_mean;
    c.mu_sum += it.predicted.mu;
    ++c.n;
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ContractError("cannot open report for writing: " + path);
  os << "rank,system_id,n_items,mean_score,mean_mu\n";
  std::vector<double> ranks, mus;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    auto it = pool.find(conditions[i]);
    if (it == pool.end())
      throw ContractError("unknown condition in ladder: " + conditions[i]);
    const Cond& c = it->second;
    os << (i + 1) << ',' << conditions[i] << ',' << c.n << ','
       << fmt_g(c.score_sum / double(c.n)) << ','
       << fmt_g(c.mu_sum / double(c.n)) << "\n";
    ranks.push_back(double(i + 1));
    mus.push_back(c.mu_sum / double(c.n));
  }
  if (!os) throw ContractError("report write failed: " + path);
  if (conditions.size() < 2) return kNaN;
  try {
    return spearman(ranks, mus);
  } catch (const ContractError&) {
    return kNaN;
  }
}

double write_bandwidth_scatter(const std::string& path, const Model& model,
                               const std::vector<std::string>& files,
                               int jobs) {
  if (files.size() < 3)
    throw ContractError("bandwidth scatter requires at least 3 files");
  if (model.config().variant != Variant::reference_free)
    throw ContractError("bandwidth scatter requires a reference_free model");
  FeatureCache cache(model.config().frontend, "");
  cache.prefetch(files, jobs);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ContractError("cannot open report for writing: " + path);
  os << "path,bandwidth_hz,predicted_mu\n";
  std::vector<double> bw, mu;
  for (const auto& p : files) {
    double b = estimate_bandwidth(load_wav(p));
    double pm = predict_segments(model, cache.segments(p)).mu;
    bw.push_back(b);
    mu.push_back(pm);
    os << p << ',' << fmt_g(b) << ',' << fmt_g(pm) << "\n";
  }
  if (!os) throw ContractError("report write failed: " + path);
  try {
    return pearson(bw, mu);
  } catch (const ContractError&) {
    return kNaN;
  }
}

}  // namespace rfgml
