#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "sae/linalg.hpp"
#include "sae/rng.hpp"

namespace testutil {

/// Self-deleting scratch directory for file-based tests.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        dir_ = std::filesystem::temp_directory_path() /
               ("saetrain-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter_++));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path path() const { return dir_; }
    std::string file(const std::string& name) const { return (dir_ / name).string(); }

private:
    static inline int counter_ = 0;
    std::filesystem::path dir_;
};

inline sae::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                 double lo = 0.0, double hi = 1.0) {
    sae::Matrix m(rows, cols);
    sae::Rng rng(seed);
    for (double& v : m.values()) v = lo + (hi - lo) * rng.uniform();
    return m;
}

inline sae::Matrix random_binary_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    sae::Matrix m(rows, cols);
    sae::Rng rng(seed);
    for (double& v : m.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return m;
}

inline bool matrices_equal(const sae::Matrix& a, const sae::Matrix& b) {
    return a.same_shape(b) && a.values() == b.values();
}

inline double max_abs_diff(const sae::Matrix& a, const sae::Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i)
        worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    return worst;
}

/// Symmetric relative error with a floor that keeps near-zero pairs sane.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max(floor, std::abs(a) + std::abs(b));
}

}  // namespace testutil
