// rfgml: single command-line entry point for the toolkit.
//
// Subcommands: synth, featurize, train, predict, simulate, evaluate,
// scaling-report, bandwidth-scatter, transfer-init. Exit codes: 0 success,
// 1 usage error, 2 data/contract error, 3 numerical failure. Every failure
// prints a single-line machine-parsable message on stderr. All randomness
// in one invocation fans out from --seed; --jobs only parallelizes feature
// extraction, so outputs stay byte-reproducible.

#include <algorithm>
#include <clocale>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfgml/common.hpp"
#include "rfgml/datagen.hpp"
#include "rfgml/dsp.hpp"
#include "rfgml/evaluation.hpp"
#include "rfgml/manifest.hpp"
#include "rfgml/model.hpp"
#include "rfgml/score.hpp"
#include "rfgml/training.hpp"

namespace {

using namespace rfgml;

std::string f6(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ';');
  return s;
}

std::string data_dir_manifest(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("RFGML_DATA_DIR"); env && *env)
    return std::string(env) + "/manifest.csv";
  throw ContractError(
      "no --manifest given and RFGML_DATA_DIR is not set");
}

std::vector<std::string> distinct_audio_paths(const std::string& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  const std::string base = manifest_dir(manifest_path);
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const ListeningRecord& r : m) {
    std::string p = resolve_audio_path(base, r.audio_path);
    if (seen.insert(p).second) out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------- synth ---

struct SynthArgs {
  std::string out;
  int excerpts = 5;
  int listeners = 10;
  std::vector<int> levels;
  std::uint64_t seed = 1234;
};

int run_synth(const SynthArgs& a) {
  std::vector<DegradationSpec> ladder = default_ladder();
  if (!a.levels.empty()) {
    std::vector<DegradationSpec> keep;
    for (const DegradationSpec& d : ladder)
      if (std::find(a.levels.begin(), a.levels.end(), d.level) !=
          a.levels.end())
        keep.push_back(d);
    if (keep.size() != a.levels.size())
      throw ContractError("--levels must be a subset of 0..4");
    ladder = std::move(keep);
  }
  const ListenerModel lm = default_listener_model(ladder, a.listeners);
  generate_synthetic_corpus(a.out, a.excerpts, ladder, lm, a.seed);
  std::printf("%s/manifest.csv\n", a.out.c_str());
  return 0;
}

// ------------------------------------------------------------ featurize ---

struct FeaturizeArgs {
  std::vector<std::string> files;
  std::string manifest;
  std::string cache;
  int jobs = 1;
};

int run_featurize(const FeaturizeArgs& a) {
  std::vector<std::string> paths = a.files;
  if (!a.manifest.empty())
    for (std::string& p : distinct_audio_paths(a.manifest))
      paths.push_back(std::move(p));
  if (paths.empty())
    throw ContractError("featurize needs audio files or --manifest");
  FeatureCache cache(FrontendConfig{}, a.cache);
  cache.prefetch(paths, a.jobs);
  std::printf("path,bands,frames\n");
  for (const std::string& p : paths) {
    const Spectrogram& s = cache.spectrogram(p);
    std::printf("%s,%d,%d\n", p.c_str(), s.bands, s.frames);
  }
  return 0;
}

// ---------------------------------------------------------------- train ---

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string metrics;
  std::string variant = "rf";
  std::string mode = "def";
  std::string donor;
  double lr = 1e-4;
  int batch = 8;
  int folds = 5;
  int epochs_per_fold = 10;
  bool no_swap = false;
  bool no_cutmix = false;
  double cutmix_alpha = 0.7;
  std::uint64_t seed = 1234;
  int jobs = 1;
  std::string cache;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  cfg.manifest_path = data_dir_manifest(a.manifest);
  cfg.variant = variant_from_string(a.variant);
  cfg.init = init_mode_from_string(a.mode);
  cfg.donor_path = a.donor;
  cfg.model = ModelConfig::desk_default(cfg.variant);
  cfg.lr = a.lr;
  cfg.batch_size = a.batch;
  cfg.folds = a.folds;
  cfg.epochs_per_fold = a.epochs_per_fold;
  cfg.swap_augment = !a.no_swap;
  cfg.cutmix.enabled = !a.no_cutmix;
  cfg.cutmix.alpha = a.cutmix_alpha;
  cfg.seed = a.seed;
  cfg.jobs = a.jobs;
  cfg.features_dir = a.cache;

  TrainResult result = train(cfg);

  nlohmann::json meta;
  meta["variant"] = to_string(cfg.variant);
  meta["init"] = to_string(cfg.init);
  meta["seed"] = cfg.seed;
  meta["epochs"] = cfg.folds * cfg.epochs_per_fold;
  save_checkpoint(result.model, a.out, meta);
  const std::string metrics_path =
      a.metrics.empty() ? a.out + ".metrics.csv" : a.metrics;
  write_metrics_csv(metrics_path, result.metrics);
  if (result.aborted)
    throw NumericError("training aborted (" + result.abort_reason +
                       "); last good snapshot written to " + a.out);
  std::printf("%s\n", a.out.c_str());
  return 0;
}

// -------------------------------------------------------- transfer-init ---

struct TransferArgs {
  std::string donor;
  std::string mode = "deg";
  std::string out;
  std::uint64_t seed = 1234;
};

int run_transfer_init(const TransferArgs& a) {
  const Model donor = load_checkpoint(a.donor);
  ModelConfig cfg = ModelConfig::desk_default(Variant::reference_free);
  cfg.frontend = donor.config().frontend;
  cfg.blocks = donor.config().blocks;
  cfg.se_ratio = donor.config().se_ratio;
  Model model =
      Model::build(cfg, init_mode_from_string(a.mode), &donor, a.seed);
  model.norm() = donor.norm();  // same corpus statistics as the donor
  nlohmann::json meta;
  meta["init"] = a.mode;
  meta["donor"] = a.donor;
  meta["seed"] = a.seed;
  save_checkpoint(model, a.out, meta);
  std::printf("%s\n", a.out.c_str());
  return 0;
}

// -------------------------------------------------------------- predict ---

struct PredictArgs {
  std::string checkpoint;
  std::string reference;
  std::vector<std::string> files;
  int listeners = 10;
  double level = 0.95;
  std::string cache;
  int jobs = 1;
};

int run_predict(const PredictArgs& a) {
  const Model model = load_checkpoint(a.checkpoint);
  const bool fr = model.config().variant == Variant::full_reference;
  if (fr && a.reference.empty())
    throw ContractError(
        "full-reference checkpoints need --reference <wav>");
  FeatureCache cache(model.config().frontend, a.cache);
  std::vector<std::string> prefetch = a.files;
  if (fr) prefetch.push_back(a.reference);
  cache.prefetch(prefetch, a.jobs);
  std::printf("path,mu,log_a,std,ci_lo,ci_hi,n\n");
  for (const std::string& path : a.files) {
    const ScoreDistribution d =
        fr ? predict_segments(model, cache.segments(a.reference),
                              cache.segments(path))
           : predict_segments(model, cache.segments(path));
    const auto ci = confidence_interval(d, a.listeners, a.level);
    std::printf("%s,%s,%s,%s,%s,%s,%d\n", path.c_str(), f6(d.mu).c_str(),
                f6(d.log_a).c_str(), f6(std_of(d)).c_str(), f6(ci.first).c_str(),
                f6(ci.second).c_str(), a.listeners);
  }
  return 0;
}

// ------------------------------------------------------------- simulate ---

struct SimulateArgs {
  int n = 10;
  std::uint64_t seed = 1234;
  double mu = std::nan("");
  double a_scale = std::nan("");
  std::string checkpoint;
  std::string audio;
  std::string reference;
  bool no_clip = false;
};

int run_simulate(const SimulateArgs& a) {
  ScoreDistribution d;
  if (!a.checkpoint.empty()) {
    if (a.audio.empty())
      throw ContractError("simulate --checkpoint needs --audio <wav>");
    const Model model = load_checkpoint(a.checkpoint);
    if (model.config().variant == Variant::full_reference) {
      if (a.reference.empty())
        throw ContractError(
            "full-reference checkpoints need --reference <wav>");
      d = predict_pair(model, load_wav(a.reference), load_wav(a.audio));
    } else {
      d = predict_file(model, load_wav(a.audio));
    }
  } else {
    if (std::isnan(a.mu) || std::isnan(a.a_scale))
      throw ContractError("simulate needs --mu and --a (or --checkpoint)");
    if (a.a_scale < 0.0) throw ContractError("--a must be >= 0");
    d.mu = a.mu;
    d.log_a = std::log(a.a_scale);
  }
  Rng rng(derive_seed(a.seed, "simulate"));
  for (int i = 0; i < a.n; ++i) {
    double s = sample(d, rng);
    if (!a.no_clip) s = std::clamp(s, 0.0, 100.0);
    std::printf("%s\n", f6(s).c_str());
  }
  return 0;
}

// ------------------------------------------------------------- evaluate ---

struct EvaluateArgs {
  std::string checkpoint;
  std::string manifest;
  std::string items;
  std::string excerpts;
  std::string cache;
  int jobs = 1;
};

int run_evaluate(const EvaluateArgs& a) {
  const Model model = load_checkpoint(a.checkpoint);
  const EvaluationReport report = evaluate_manifest(
      model, data_dir_manifest(a.manifest), a.cache, a.jobs);
  if (!a.items.empty()) write_items_csv(a.items, report);
  if (!a.excerpts.empty()) write_excerpt_correlations_csv(a.excerpts, report);
  std::printf("pearson_r,spearman_r,mean_nll,hidden_reference_mu\n");
  std::printf("%s,%s,%s,%s\n", f6(report.pearson_r).c_str(),
              f6(report.spearman_r).c_str(), f6(report.mean_nll).c_str(),
              f6(report.hidden_reference_mu).c_str());
  return 0;
}

// -------------------------------------------------------- scaling-report ---

struct ScalingArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::vector<std::string> conditions;
  std::string cache;
  int jobs = 1;
};

int run_scaling_report(const ScalingArgs& a) {
  const Model model = load_checkpoint(a.checkpoint);
  const std::string manifest_path = data_dir_manifest(a.manifest);
  std::vector<std::string> conditions = a.conditions;
  if (conditions.empty()) {
    // Default ladder: every codec_l* system in the manifest, level order.
    std::set<std::string> seen;
    for (const ListeningRecord& r : load_manifest(manifest_path))
      if (r.system_id.rfind("codec_l", 0) == 0) seen.insert(r.system_id);
    conditions.assign(seen.begin(), seen.end());
    if (conditions.empty())
      throw ContractError(
          "no codec_l* conditions in manifest; pass --conditions");
  }
  const EvaluationReport report =
      evaluate_manifest(model, manifest_path, a.cache, a.jobs);
  const double rs = write_scaling_report(a.out, report, conditions);
  std::printf("spearman_rank_mu\n%s\n", f6(rs).c_str());
  return 0;
}

// ---------------------------------------------------- bandwidth-scatter ---

struct ScatterArgs {
  std::string checkpoint;
  std::string manifest;
  std::vector<std::string> files;
  std::string out;
  int jobs = 1;
};

int run_bandwidth_scatter(const ScatterArgs& a) {
  const Model model = load_checkpoint(a.checkpoint);
  std::vector<std::string> files = a.files;
  if (!a.manifest.empty())
    for (std::string& p : distinct_audio_paths(a.manifest))
      files.push_back(std::move(p));
  const double r = write_bandwidth_scatter(a.out, model, files, a.jobs);
  std::printf("pearson_bandwidth_mu\n%s\n", f6(r).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  CLI::App app{"Reference-free coded-audio quality toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rfgml 1.0.0");

  SynthArgs sy;
  CLI::App* synth =
      app.add_subcommand("synth", "Generate a synthetic listening-test corpus");
  synth->add_option("--out", sy.out, "Output corpus directory")->required();
  synth->add_option("--excerpts", sy.excerpts, "Number of source excerpts")
      ->check(CLI::Range(2, 10000))
      ->capture_default_str();
  synth->add_option("--listeners", sy.listeners, "Simulated listeners per item")
      ->check(CLI::Range(1, 10000))
      ->capture_default_str();
  synth
      ->add_option("--levels", sy.levels,
                   "Ladder levels to include (subset of 0..4; default all)")
      ->delimiter(',');
  synth->add_option("--seed", sy.seed, "Root random seed")
      ->capture_default_str();

  FeaturizeArgs fz;
  CLI::App* featurize = app.add_subcommand(
      "featurize", "Extract Gammatone spectrograms into a feature cache");
  featurize->add_option("files", fz.files, "Audio files (48 kHz WAV)");
  featurize->add_option("--manifest", fz.manifest,
                        "Also featurize every file in this manifest");
  featurize->add_option("--cache", fz.cache, "On-disk feature cache directory");
  featurize->add_option("--jobs", fz.jobs, "Parallel extraction threads")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();

  TrainArgs tr;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a model on a listening-test manifest");
  train_cmd->add_option("--manifest", tr.manifest,
                        "Training manifest (default $RFGML_DATA_DIR/manifest.csv)");
  train_cmd->add_option("--out", tr.out, "Output checkpoint path")->required();
  train_cmd->add_option("--metrics", tr.metrics,
                        "Metrics CSV path (default <out>.metrics.csv)");
  train_cmd->add_option("--variant", tr.variant, "Model variant")
      ->check(CLI::IsMember({"fr", "rf"}))
      ->capture_default_str();
  train_cmd->add_option("--mode", tr.mode, "Weight init / transfer mode")
      ->check(CLI::IsMember({"def", "deg", "degF", "all"}))
      ->capture_default_str();
  train_cmd->add_option("--donor", tr.donor,
                        "Donor checkpoint (required for deg/degF/all)");
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")
      ->capture_default_str();
  train_cmd->add_option("--batch", tr.batch, "Batch size")
      ->check(CLI::Range(1, 4096))
      ->capture_default_str();
  train_cmd->add_option("--folds", tr.folds, "Cross-validation folds")
      ->check(CLI::Range(2, 100))
      ->capture_default_str();
  train_cmd
      ->add_option("--epochs-per-fold", tr.epochs_per_fold,
                   "Epochs per fold rotation (total = folds * this)")
      ->check(CLI::Range(0, 100000))
      ->capture_default_str();
  train_cmd->add_flag("--no-swap", tr.no_swap,
                      "Disable channel-swap augmentation");
  train_cmd->add_flag("--no-cutmix", tr.no_cutmix,
                      "Disable CutMix augmentation");
  train_cmd->add_option("--cutmix-alpha", tr.cutmix_alpha,
                        "CutMix Beta(alpha, alpha) parameter")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "Root random seed")
      ->capture_default_str();
  train_cmd->add_option("--jobs", tr.jobs, "Parallel feature extraction")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
  train_cmd->add_option("--cache", tr.cache,
                        "On-disk feature cache directory");

  TransferArgs ti;
  CLI::App* transfer = app.add_subcommand(
      "transfer-init",
      "Build an untrained reference-free model from a donor checkpoint");
  transfer->add_option("--donor", ti.donor, "Donor checkpoint")->required();
  transfer->add_option("--mode", ti.mode, "Transfer mode")
      ->check(CLI::IsMember({"def", "deg", "degF", "all"}))
      ->capture_default_str();
  transfer->add_option("--out", ti.out, "Output checkpoint path")->required();
  transfer->add_option("--seed", ti.seed, "Seed for the fresh parameters")
      ->capture_default_str();

  PredictArgs pr;
  CLI::App* predict =
      app.add_subcommand("predict", "Predict score distributions per file");
  predict->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")
      ->required();
  predict->add_option("--reference", pr.reference,
                      "Reference WAV (full-reference checkpoints)");
  predict->add_option("files", pr.files, "Degraded audio files")
      ->required();
  predict->add_option("--listeners", pr.listeners,
                      "Listener count for the CI columns")
      ->check(CLI::Range(2, 100000))
      ->capture_default_str();
  predict->add_option("--level", pr.level, "Confidence level")
      ->check(CLI::Range(0.0, 0.9999))
      ->capture_default_str();
  predict->add_option("--cache", pr.cache, "On-disk feature cache directory");
  predict->add_option("--jobs", pr.jobs, "Parallel feature extraction")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();

  SimulateArgs si;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Sample listener scores from a score distribution");
  simulate->add_option("--n", si.n, "Number of draws")
      ->check(CLI::Range(1, 100000000))
      ->capture_default_str();
  simulate->add_option("--seed", si.seed, "Root random seed")
      ->capture_default_str();
  simulate->add_option("--mu", si.mu, "Distribution location");
  simulate->add_option("--a", si.a_scale, "Logistic scale (>= 0)");
  simulate->add_option("--checkpoint", si.checkpoint,
                       "Predict the distribution with this checkpoint");
  simulate->add_option("--audio", si.audio, "Audio file for --checkpoint");
  simulate->add_option("--reference", si.reference,
                       "Reference WAV (full-reference checkpoints)");
  simulate->add_flag("--no-clip", si.no_clip,
                     "Do not clip draws to [0, 100]");

  EvaluateArgs ev;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Evaluate a checkpoint against a listening-test manifest");
  evaluate->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")
      ->required();
  evaluate->add_option("--manifest", ev.manifest,
                       "Manifest (default $RFGML_DATA_DIR/manifest.csv)");
  evaluate->add_option("--items", ev.items, "Per-item CSV output path");
  evaluate->add_option("--excerpts", ev.excerpts,
                       "Per-excerpt correlation CSV output path");
  evaluate->add_option("--cache", ev.cache, "On-disk feature cache directory");
  evaluate->add_option("--jobs", ev.jobs, "Parallel feature extraction")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();

  ScalingArgs sc;
  CLI::App* scaling = app.add_subcommand(
      "scaling-report", "Per-condition mean predictions over a quality ladder");
  scaling->add_option("--checkpoint", sc.checkpoint, "Model checkpoint")
      ->required();
  scaling->add_option("--manifest", sc.manifest,
                      "Manifest (default $RFGML_DATA_DIR/manifest.csv)");
  scaling->add_option("--out", sc.out, "Report CSV output path")->required();
  scaling
      ->add_option("--conditions", sc.conditions,
                   "Comma-separated system ids, best quality first "
                   "(default: codec_l* systems in the manifest)")
      ->delimiter(',');
  scaling->add_option("--cache", sc.cache, "On-disk feature cache directory");
  scaling->add_option("--jobs", sc.jobs, "Parallel feature extraction")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();

  ScatterArgs bw;
  CLI::App* scatter = app.add_subcommand(
      "bandwidth-scatter",
      "Estimated bandwidth vs predicted quality per file");
  scatter->add_option("--checkpoint", bw.checkpoint,
                      "Reference-free model checkpoint")
      ->required();
  scatter->add_option("--manifest", bw.manifest,
                      "Take the file list from this manifest");
  scatter->add_option("files", bw.files, "Audio files (>= 3 overall)");
  scatter->add_option("--out", bw.out, "Scatter CSV output path")->required();
  scatter->add_option("--jobs", bw.jobs, "Parallel feature extraction")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "rfgml: usage: %s\n", one_line(e.what()).c_str());
    return 1;
  }

  try {
    if (*synth) return run_synth(sy);
    if (*featurize) return run_featurize(fz);
    if (*train_cmd) return run_train(tr);
    if (*transfer) return run_transfer_init(ti);
    if (*predict) return run_predict(pr);
    if (*simulate) return run_simulate(si);
    if (*evaluate) return run_evaluate(ev);
    if (*scaling) return run_scaling_report(sc);
    if (*scatter) return run_bandwidth_scatter(bw);
  } catch (const ContractError& e) {
    std::fprintf(stderr, "rfgml: contract: %s\n", one_line(e.what()).c_str());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "rfgml: numeric: %s\n", one_line(e.what()).c_str());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rfgml: error: %s\n", one_line(e.what()).c_str());
    return 3;
  }
  return 0;
}
