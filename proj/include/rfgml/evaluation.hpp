#pragma once

// Correlation metrics, MUSHRA aggregation with Student-t confidence
// intervals, and the evaluation reports: held-out metrics per (excerpt,
// system) item, the quality-scaling table over an ordered condition ladder,
// and the bandwidth-vs-prediction scatter.

#include <string>
#include <vector>

#include "rfgml/manifest.hpp"
#include "rfgml/model.hpp"
#include "rfgml/score.hpp"

namespace rfgml {

// 1-based average ranks (ties get the mean of the tied rank span).
std::vector<double> average_ranks(const std::vector<double>& v);

// Both require n >= 2 and throw ContractError when either side has zero
// variance (the correlation is undefined there, and silence would hide it).
double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct AggregateScore {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1 denominator)
  std::size_t n = 0;
  bool has_ci = false;  // CI needs n >= 2
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Mean, sample sd, and mean +- t_{(1+level)/2, n-1} * sd / sqrt(n).
// n == 1 yields the mean with the CI marked unavailable.
AggregateScore aggregate_mushra(const std::vector<double>& scores,
                                double level = 0.95);

// One (excerpt, system) item: the model's predicted distribution next to the
// subjective listener aggregate.
struct SystemScore {
  std::string excerpt_id;
  std::string system_id;
  ScoreDistribution predicted;
  double subjective_mean = 0.0;
  bool subjective_has_ci = false;
  double subjective_ci_lo = 0.0;
  double subjective_ci_hi = 0.0;
  std::size_t n_listeners = 0;
};

// Mean predicted mu over hidden-reference items only; other systems are
// ignored. Throws when no hidden-reference item is present.
double mu_metric(const std::vector<SystemScore>& scores);

struct ExcerptCorrelation {
  std::string excerpt_id;
  std::size_t n_systems = 0;
  double pearson_r = 0.0;  // NaN when undefined for this excerpt
  double spearman_r = 0.0;
};

struct EvaluationReport {
  std::vector<SystemScore> items;        // one per (excerpt, system)
  double pearson_r = 0.0;                // pooled over items
  double spearman_r = 0.0;
  double mean_nll = 0.0;                 // over individual listener records
  double hidden_reference_mu = 0.0;      // the MU metric
  std::vector<ExcerptCorrelation> per_excerpt;
};

// Runs the model over every item in the manifest (full-reference models pair
// each item with its excerpt's hidden_reference audio). features_dir may be
// empty; when set, extracted spectrograms are cached there as .rfgs blobs.
EvaluationReport evaluate_manifest(const Model& model,
                                   const std::string& manifest_path,
                                   const std::string& features_dir = "",
                                   int jobs = 1);

// Per-item CSV:
// excerpt_id,system_id,listeners,mean_score,ci_lo,ci_hi,predicted_mu,predicted_std
void write_items_csv(const std::string& path, const EvaluationReport& report);

// Per-excerpt correlation CSV: excerpt_id,n_systems,pearson,spearman.
void write_excerpt_correlations_csv(const std::string& path,
                                    const EvaluationReport& report);

// Per-condition table over `conditions`, which list system_ids in ladder
// order (best intended quality first; the 1-based position is the
// degradation rank). CSV: rank,system_id,n_items,mean_score,mean_mu.
// Returns Spearman(rank, mean predicted mu) — a model that scales correctly
// gives -1. A single condition yields NaN (monotonicity undefined).
// Conditions absent from the report are rejected.
double write_scaling_report(const std::string& path,
                            const EvaluationReport& report,
                            const std::vector<std::string>& conditions);

// Per-file table (path,bandwidth_hz,predicted_mu) from estimated audio
// bandwidth vs a reference-free model's prediction. Requires >= 3 files.
// Returns the Pearson correlation, NaN when degenerate (e.g. identical
// files).
double write_bandwidth_scatter(const std::string& path, const Model& model,
                               const std::vector<std::string>& files,
                               int jobs = 1);

}  // namespace rfgml
