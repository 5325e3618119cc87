#pragma once

// Listening-test manifests: one CSV row per (excerpt, system, listener)
// triple with the listener's MUSHRA score and the path of the audio the
// listener graded. Paths are stored relative to the manifest file. Every
// excerpt must include a "hidden_reference" system row; its audio doubles as
// the reference signal for full-reference feature extraction.

#include <string>
#include <vector>

namespace rfgml {

inline constexpr const char* kHiddenReference = "hidden_reference";
inline constexpr const char* kManifestHeader =
    "excerpt_id,system_id,listener_id,score,audio_path";

struct ListeningRecord {
  std::string excerpt_id;
  std::string system_id;
  std::string listener_id;
  double score = 0.0;  // MUSHRA, [0, 100]
  std::string audio_path;
};

using Manifest = std::vector<ListeningRecord>;

Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& manifest);

// Directory containing a manifest file ("." when the path has no directory).
std::string manifest_dir(const std::string& manifest_path);
// Joins a manifest-relative audio path onto the manifest's directory.
std::string resolve_audio_path(const std::string& base_dir,
                               const std::string& audio_path);

// Scores in range, every excerpt has a hidden_reference row, and (when
// check_files) every referenced audio file exists under base_dir.
void validate_manifest(const Manifest& manifest, const std::string& base_dir,
                       bool check_files = true);

}  // namespace rfgml
