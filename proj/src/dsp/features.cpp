#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "rfgml/dsp.hpp"

namespace rfgml {

FeatureCache::FeatureCache(const FrontendConfig& config, std::string cache_dir)
    : cfg_(config), dir_(std::move(cache_dir)) {
  cfg_.validate();
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string FeatureCache::disk_path(const std::string& audio_path) const {
  // FNV-1a over the absolute path and the frontend hash.
  std::string key =
      std::filesystem::absolute(audio_path).lexically_normal().string();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(p[i]);
      h *= 0x100000001b3ULL;
    }
  };
  mix(key.data(), key.size());
  std::uint64_t ch = cfg_.hash();
  mix(reinterpret_cast<const char*>(&ch), sizeof ch);
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.rfgs",
                static_cast<unsigned long long>(h));
  return (std::filesystem::path(dir_) / name).string();
}

const Spectrogram& FeatureCache::insert(const std::string& path,
                                        Spectrogram&& spec) {
  auto [it, fresh] = specs_.emplace(path, std::move(spec));
  if (fresh && !dir_.empty()) {
    std::string dp = disk_path(path);
    if (!std::filesystem::exists(dp)) write_spectrogram(dp, it->second);
  }
  return it->second;
}

const Spectrogram& FeatureCache::spectrogram(const std::string& audio_path) {
  auto it = specs_.find(audio_path);
  if (it != specs_.end()) return it->second;
  if (!dir_.empty()) {
    std::string dp = disk_path(audio_path);
    if (std::filesystem::exists(dp)) {
      Spectrogram spec = read_spectrogram(dp);
      // The cache key embeds the frontend hash, so a blob at this name was
      // extracted with this config; the dimension check guards corruption.
      if (spec.bands == cfg_.bands) {
        spec.config_hash = cfg_.hash();
        return insert(audio_path, std::move(spec));
      }
    }
  }
  return insert(audio_path,
                gammatone_spectrogram(ensure_stereo(load_wav(audio_path)), cfg_));
}

const std::vector<SpectrogramSegment>& FeatureCache::segments(
    const std::string& audio_path) {
  auto it = segs_.find(audio_path);
  if (it != segs_.end()) return it->second;
  const Spectrogram& spec = spectrogram(audio_path);
  auto [slot, fresh] =
      segs_.emplace(audio_path,
                    segment_spectrogram(spec, cfg_.segment_frames));
  return slot->second;
}

void FeatureCache::prefetch(const std::vector<std::string>& paths, int jobs) {
  std::vector<std::string> pending;
  for (const auto& p : paths) {
    if (specs_.count(p)) continue;
    if (!dir_.empty() && std::filesystem::exists(disk_path(p))) {
      spectrogram(p);  // serial disk read
      if (specs_.count(p)) continue;
    }
    if (std::find(pending.begin(), pending.end(), p) == pending.end())
      pending.push_back(p);
  }
  if (pending.empty()) return;
  if (jobs < 2 || pending.size() < 2) {
    for (const auto& p : pending) spectrogram(p);
    return;
  }
  std::vector<Spectrogram> out(pending.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) break;
      out[i] = gammatone_spectrogram(ensure_stereo(load_wav(pending[i])), cfg_);
    }
  };
  std::vector<std::thread> threads;
  std::size_t n = std::min<std::size_t>(std::size_t(jobs), pending.size());
  threads.reserve(n);
  for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < pending.size(); ++i)
    insert(pending[i], std::move(out[i]));
}

}  // namespace rfgml
