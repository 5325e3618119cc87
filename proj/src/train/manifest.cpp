#include "rfgml/manifest.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rfgml/common.hpp"

namespace rfgml {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_score(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || end != s.c_str() + s.size())
    throw ContractError("manifest line " + std::to_string(line_no) +
                        ": score is not a number: " + s);
  return v;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ContractError("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(is, line))
    throw ContractError("manifest is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader)
    throw ContractError("manifest header must be exactly \"" +
                        std::string(kManifestHeader) + "\"");
  Manifest m;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 5)
      throw ContractError("manifest line " + std::to_string(line_no) +
                          ": expected 5 fields, got " +
                          std::to_string(f.size()));
    ListeningRecord r;
    r.excerpt_id = f[0];
    r.system_id = f[1];
    r.listener_id = f[2];
    r.score = parse_score(f[3], line_no);
    r.audio_path = f[4];
    if (r.excerpt_id.empty() || r.system_id.empty() || r.listener_id.empty() ||
        r.audio_path.empty())
      throw ContractError("manifest line " + std::to_string(line_no) +
                          ": empty field");
    m.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ContractError("cannot open manifest for writing: " + path);
  os << kManifestHeader << "\n";
  char buf[64];
  for (const auto& r : manifest) {
    std::snprintf(buf, sizeof buf, "%.4f", r.score);
    os << r.excerpt_id << ',' << r.system_id << ',' << r.listener_id << ','
       << buf << ',' << r.audio_path << "\n";
  }
  if (!os) throw ContractError("manifest write failed: " + path);
}

std::string manifest_dir(const std::string& manifest_path) {
  std::filesystem::path p(manifest_path);
  auto d = p.parent_path();
  return d.empty() ? std::string(".") : d.string();
}

std::string resolve_audio_path(const std::string& base_dir,
                               const std::string& audio_path) {
  std::filesystem::path p(audio_path);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

void validate_manifest(const Manifest& manifest, const std::string& base_dir,
                       bool check_files) {
  if (manifest.empty()) throw ContractError("manifest has no records");
  std::set<std::string> excerpts;
  std::set<std::string> with_reference;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& r = manifest[i];
    if (!(r.score >= 0.0 && r.score <= 100.0))
      throw ContractError("manifest record " + std::to_string(i) +
                          ": score outside [0, 100]");
    excerpts.insert(r.excerpt_id);
    if (r.system_id == kHiddenReference) with_reference.insert(r.excerpt_id);
    if (check_files) {
      std::string full = resolve_audio_path(base_dir, r.audio_path);
      if (!std::filesystem::exists(full))
        throw ContractError("manifest audio file missing: " + full);
    }
  }
  for (const auto& e : excerpts)
    if (!with_reference.count(e))
      throw ContractError("excerpt " + e + " has no hidden_reference row");
}

}  // namespace rfgml
