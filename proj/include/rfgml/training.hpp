#pragma once

// Training loop: excerpt-grouped k-fold rotation on a single model instance
// (for fold i in 0..k-1, train epochs_per_fold epochs with fold i held out,
// continuing the same weights), per-batch gradient accumulation, channel-swap
// and CutMix augmentation, and an NLL objective on individual listener
// scores. Deterministic for a fixed seed.

#include <cstdint>
#include <string>
#include <vector>

#include "rfgml/augment.hpp"
#include "rfgml/manifest.hpp"
#include "rfgml/model.hpp"

namespace rfgml {

// Fold id per record. Folds group whole excerpts (every row of an excerpt
// lands in one fold); excerpt-to-fold assignment is a seeded shuffle and
// fold sizes differ by at most one excerpt.
std::vector<int> split_folds(const Manifest& manifest, int folds,
                             std::uint64_t seed);

// Per-plane, per-band mean/std over every frame of the given spectrograms.
// Standard deviations are floored at 1e-6.
NormStats compute_normalization(const std::vector<const Spectrogram*>& specs);

struct TrainConfig {
  std::string manifest_path;
  Variant variant = Variant::reference_free;
  InitMode init = InitMode::def;
  std::string donor_path;  // checkpoint, required for deg/degF/all
  ModelConfig model = ModelConfig::desk_default(Variant::reference_free);

  double lr = 1e-4;
  int batch_size = 8;
  int folds = 5;
  int epochs_per_fold = 10;  // total epochs = folds * epochs_per_fold
  // Each enabled augmentation applies independently with probability 1/2 per
  // sample; CutMix partners are drawn uniformly from the training fold.
  bool swap_augment = true;
  CutMixConfig cutmix;

  std::uint64_t seed = 1234;
  int jobs = 1;             // parallel feature extraction
  std::string features_dir; // optional on-disk feature cache
};

struct EpochMetrics {
  int epoch = 0;  // global epoch index across the fold rotation
  int fold = 0;   // validation fold this epoch
  double train_nll = 0.0;
  double val_nll = 0.0;
  double val_rp = 0.0;  // Pearson of per-item mean prediction vs mean score
  double val_rs = 0.0;  // Spearman; NaN when undefined
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> metrics;
  // Manifest indices that contributed gradients, per epoch, in visit order.
  std::vector<std::vector<std::size_t>> grad_records;
  bool aborted = false;       // non-finite update detected
  std::string abort_reason;   // empty unless aborted
};

TrainResult train(const TrainConfig& config);

// CSV: epoch,fold,train_nll,val_nll,val_rp,val_rs (%.6g floats).
void write_metrics_csv(const std::string& path,
                       const std::vector<EpochMetrics>& rows);

}  // namespace rfgml
