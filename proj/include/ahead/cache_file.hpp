#pragma once

// Parameter fingerprints and the on-disk sub-game cache.
//
// Cache file layout (text, one file per fingerprint):
//   # ahead-subgame-cache v1 fingerprint=<16 hex digits>
//   x_a_q,x_b_q,np_a,np_b,g_a,g_b
//   <int64>,<int64>,<int>,<int>,<%.17g>,<%.17g>
// x_a_q, x_b_q are the quantised deviations (x / x_quantum). A header whose
// version or fingerprint differs from the expected one makes the file
// invisible to the reader. Readers take a shared flock on <file>.lock and
// writers an exclusive one; writes merge with the current file contents and
// replace it atomically.

#include <ahead/model.hpp>
#include <ahead/subgame.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace ahead {

inline constexpr int kCacheVersion = 1;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex16(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

inline std::string canonical_text(const ModelParams& p) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "sigma=%.17g;K=%.17g;q=%.17g;v_a=%.17g;v_b=%.17g;lambda_minus=%.17g;lambda_plus=%.17g;"
                  "h=%.17g;T=%.17g;delta=%.17g;n_hat=%d;sim_mode=%s;n_hat_ab=%d;p_minus_pstar0=%.17g;"
                  "target_rounding=%s",
                  p.sigma, p.K, p.q, p.v_a, p.v_b, p.lambda_minus, p.lambda_plus, p.h, p.T, p.delta, p.n_hat,
                  to_string(p.sim_mode), p.n_hat_ab, p.p_minus_pstar0, to_string(p.target_rounding));
    return buf;
}

inline std::string canonical_text(const UniformAxis& a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "[%.17g,%.17g,%d]", a.lo, a.hi, a.nodes);
    return buf;
}

/// Fingerprint of everything a sub-game value depends on, plus the full
/// parameter set.
inline std::uint64_t subgame_fingerprint(const ModelParams& p, const GridSpec& g, const SubgameOptions& o) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "|v%d|m_max=%d;delta_auc=%.17g;scheme=%s;x_quantum=%.17g", kCacheVersion,
                  g.m_max, g.auction_step(p), to_string(o.scheme), o.x_quantum);
    return fnv1a(canonical_text(p) + buf);
}

/// Fingerprint of a full run configuration (model, lattice, sub-game grid, extras).
inline std::uint64_t run_fingerprint(const ModelParams& p, const GridSpec& g, const SubgameOptions& o,
                                     const std::string& extra = {}) {
    std::string s = canonical_text(p) + "|s=" + canonical_text(g.s) + ";l_a=" + canonical_text(g.l_a) +
                    ";l_b=" + canonical_text(g.l_b) + ";n_max=" + std::to_string(g.n_max_a) + "," +
                    std::to_string(g.n_max_b) + "|" + extra;
    return fnv1a(s, subgame_fingerprint(p, g, o));
}

class FileLock {
public:
    FileLock(const std::filesystem::path& path, bool exclusive) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw ConfigError("cannot open lock file " + path.string());
        if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
            ::close(fd_);
            throw ConfigError("cannot lock " + path.string());
        }
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

class SubgameCacheFile {
public:
    SubgameCacheFile(std::filesystem::path dir, std::uint64_t fingerprint)
        : dir_(std::move(dir)), fingerprint_(fingerprint) {}

    std::filesystem::path path() const { return dir_ / ("subgame-" + hex16(fingerprint_) + ".csv"); }

    std::string header() const {
        return "# ahead-subgame-cache v" + std::to_string(kCacheVersion) + " fingerprint=" + hex16(fingerprint_);
    }

    /// Loads matching entries into `cache`; returns the number loaded.
    std::size_t load(SubgameCache& cache) const {
        if (!std::filesystem::exists(path())) return 0;
        std::vector<std::pair<SubgameCache::QuantKey, AuctionValues>> rows;
        {
            FileLock lock(lock_path(), false);
            rows = read_rows();
        }
        for (const auto& [k, v] : rows) cache.insert(k, v);
        return rows.size();
    }

    /// Merges the cache contents into the file.
    std::size_t save(const SubgameCache& cache) const {
        std::filesystem::create_directories(dir_);
        FileLock lock(lock_path(), true);
        std::map<SubgameCache::QuantKey, AuctionValues> merged;
        for (const auto& [k, v] : read_rows()) merged.emplace(k, v);
        for (const auto& [k, v] : cache.snapshot()) merged.insert_or_assign(k, v);
        const auto tmp = path().string() + ".tmp." + std::to_string(::getpid());
        {
            std::ofstream os(tmp, std::ios::trunc);
            if (!os) throw ConfigError("cannot write cache file " + tmp);
            os << header() << "\n" << "x_a_q,x_b_q,np_a,np_b,g_a,g_b\n";
            char buf[160];
            for (const auto& [k, v] : merged) {
                std::snprintf(buf, sizeof buf, "%lld,%lld,%d,%d,%.17g,%.17g\n", static_cast<long long>(k.x_a),
                              static_cast<long long>(k.x_b), k.np_a, k.np_b, v.g_a, v.g_b);
                os << buf;
            }
        }
        std::filesystem::rename(tmp, path());
        return merged.size();
    }

private:
    std::filesystem::path lock_path() const { return path().string() + ".lock"; }

    std::vector<std::pair<SubgameCache::QuantKey, AuctionValues>> read_rows() const {
        std::vector<std::pair<SubgameCache::QuantKey, AuctionValues>> rows;
        std::ifstream is(path());
        if (!is) return rows;
        std::string line;
        if (!std::getline(is, line) || line != header()) return rows;
        std::getline(is, line);  // column names
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            long long xa = 0, xb = 0;
            int npa = 0, npb = 0;
            double ga = 0.0, gb = 0.0;
            if (std::sscanf(line.c_str(), "%lld,%lld,%d,%d,%lf,%lf", &xa, &xb, &npa, &npb, &ga, &gb) != 6) {
                rows.clear();  // damaged file: ignore it entirely
                return rows;
            }
            rows.push_back({{xa, xb, npa, npb}, {ga, gb}});
        }
        return rows;
    }

    std::filesystem::path dir_;
    std::uint64_t fingerprint_;
};

}  // namespace ahead
