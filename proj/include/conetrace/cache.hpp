#pragma once

// Content-addressed on-disk cache for computed spectra and Bessel zeros.
// Entries carry the sha256 of their payload; a mismatch on read counts as a
// miss and the value is recomputed and rewritten. If the cache root cannot
// be written, entries live in memory for the lifetime of the object.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "conetrace/bessel_zeros.hpp"
#include "conetrace/hash.hpp"
#include "conetrace/spectra.hpp"

namespace conetrace {

inline constexpr const char* kCacheEnv = "CONETRACE_CACHE_DIR";

// Environment override first, then the configured directory.
inline std::string resolve_cache_root(const std::string& configured) {
  if (const char* env = std::getenv(kCacheEnv); env && *env) return env;
  return configured;
}

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t corrupt = 0;
  std::size_t prefix_reuse = 0;
};

class DiskCache {
 public:
  // Empty root: memory only.
  explicit DiskCache(std::string root, std::ostream* warn = &std::cerr) : root_(std::move(root)) {
    if (root_.empty()) {
      disk_ = false;
      return;
    }
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    const auto probe = std::filesystem::path(root_) / ".probe";
    {
      std::ofstream out(probe);
      disk_ = !ec && bool(out << "ok");
    }
    std::filesystem::remove(probe, ec);
    if (!disk_ && warn) {
      *warn << "warning: cache directory '" << root_ << "' is not writable; using an in-memory cache\n";
    }
  }

  bool on_disk() const { return disk_; }
  const std::string& root() const { return root_; }
  const CacheStats& stats() const { return stats_; }

  // Raw payload for (kind, key), verified against its stored hash.
  std::optional<std::string> get(const std::string& kind, const std::string& key) {
    std::lock_guard lock(mutex_);
    std::string text;
    if (disk_) {
      std::ifstream in(path(kind, key), std::ios::binary);
      if (!in) return std::nullopt;
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    } else {
      auto it = memory_.find(kind + "/" + key);
      if (it == memory_.end()) return std::nullopt;
      text = it->second;
    }
    const auto nl = text.find('\n');
    if (nl == std::string::npos || text.substr(0, nl) != sha256_hex(text.substr(nl + 1))) {
      ++stats_.corrupt;
      return std::nullopt;
    }
    return text.substr(nl + 1);
  }

  // Atomic publish: write a temporary file, then rename over the entry.
  void put(const std::string& kind, const std::string& key, const std::string& payload) {
    std::lock_guard lock(mutex_);
    const std::string text = sha256_hex(payload) + "\n" + payload;
    if (!disk_) {
      memory_[kind + "/" + key] = text;
      return;
    }
    const auto target = path(kind, key);
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
    const auto tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << text;
      if (!out) {
        memory_[kind + "/" + key] = text;
        return;
      }
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) memory_[kind + "/" + key] = text;
  }

  std::filesystem::path path(const std::string& kind, const std::string& key) const {
    return std::filesystem::path(root_) / kind / (key + ".entry");
  }

  void count_hit() { ++stats_.hits; }
  void count_miss() { ++stats_.misses; }
  void count_prefix() { ++stats_.prefix_reuse; }

 private:
  std::string root_;
  bool disk_ = false;
  std::map<std::string, std::string> memory_;
  std::mutex mutex_;
  CacheStats stats_;
};

// The spectrum iterated_cone_spectrum(inner, bc, cutoff) would return, cut
// from one built with a larger cutoff (sorted spectra are prefix-closed).
inline CrossSectionSpectrum truncate_iterated_spectrum(const CrossSectionSpectrum& s, double cutoff) {
  CrossSectionSpectrum out = s;
  std::erase_if(out.entries, [&](const SpectrumEntry& e) { return e.nu > cutoff; });
  out.complete_below = cutoff;
  for (auto& [k, v] : out.params) {
    if (k == "cutoff") v = format_double(cutoff);
  }
  return out;
}

// Iterated-cone spectra keyed by (inner hash, bc, scan step); the stored
// entry is the largest cutoff built so far.
inline CrossSectionSpectrum cached_iterated_cone_spectrum(DiskCache& cache, const CrossSectionSpectrum& inner,
                                                          DoubleBc bc, double cutoff,
                                                          std::size_t workers = 1) {
  const std::string key =
      sha256_hex("iterated-cone\n" + spectrum_hash(inner) + "\n" + to_string(bc) + "\n" +
                 format_double(kDefaultScanStep) + "\n");
  if (auto text = cache.get("spectra", key)) {
    try {
      const auto stored = parse_spectrum(*text);
      if (stored.complete_below >= cutoff) {
        if (stored.complete_below == cutoff) {
          cache.count_hit();
          return stored;
        }
        cache.count_prefix();
        return truncate_iterated_spectrum(stored, cutoff);
      }
    } catch (const Error&) {
      // unreadable entry: rebuild below
    }
  }
  cache.count_miss();
  auto s = iterated_cone_spectrum(inner, bc, cutoff, kDefaultScanStep, workers);
  cache.put("spectra", key, serialize_spectrum(s));
  return s;
}

// Zeros of J_nu: the first `count`, reusing any longer stored prefix.
inline std::vector<double> cached_bessel_zeros(DiskCache& cache, double nu, std::size_t count,
                                               ZeroKind kind = ZeroKind::j) {
  const std::string key = sha256_hex("zeros\n" + format_double(nu) + "\n" +
                                     (kind == ZeroKind::j ? "j" : "robin") + "\n");
  std::vector<double> zeros;
  if (auto text = cache.get("zeros", key)) {
    try {
      const auto j = nlohmann::json::parse(*text);
      for (const auto& v : j.at("zeros")) zeros.push_back(std::strtod(v.get<std::string>().c_str(), nullptr));
    } catch (const std::exception&) {
      zeros.clear();
    }
  }
  if (zeros.size() >= count) {
    zeros.size() == count ? cache.count_hit() : cache.count_prefix();
    zeros.resize(count);
    return zeros;
  }
  cache.count_miss();
  detail::extend_zeros(nu, kind, zeros, count);
  nlohmann::json j;
  j["nu"] = format_double(nu);
  j["kind"] = kind == ZeroKind::j ? "j" : "robin";
  j["zeros"] = nlohmann::json::array();
  for (double z : zeros) j["zeros"].push_back(format_double(z));
  cache.put("zeros", key, j.dump());
  return zeros;
}

// Seed `zc` with the first `count` zeros of each (nu, count), computing and
// storing the ones the cache lacks.
inline void preload_zero_cache(DiskCache& cache, ZeroCache& zc,
                               const std::vector<std::pair<double, std::size_t>>& orders) {
  for (const auto& [nu, count] : orders) zc.seed(nu, ZeroKind::j, cached_bessel_zeros(cache, nu, count));
}

}  // namespace conetrace
