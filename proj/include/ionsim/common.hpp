#ifndef IONSIM_COMMON_HPP
#define IONSIM_COMMON_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

// Unit convention: all energies, frequencies and rates are angular
// (rad/ns), i.e. omega = two_pi * (frequency in GHz). Times are in ns.
// The CLI converts to/from ordinary frequencies in GHz at the boundary.

namespace ionsim {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Fold x into the half-open interval [-omega/2, omega/2).
inline double fold_modular(double x, double omega) {
    double r = x - omega * std::floor(x / omega);
    if (r >= omega / 2) r -= omega;
    return r;
}

// Distance between two folded values, insensitive to the fold boundary.
inline double fold_distance(double a, double b, double omega) {
    double d = std::abs(fold_modular(a - b, omega));
    return std::min(d, omega - d);
}

// A perturbative denominator came too close to zero.
struct ResonanceError : std::runtime_error {
    int level_i, level_j;
    double detuning;
    ResonanceError(int i, int j, double det)
        : std::runtime_error("resonant denominator for transition (" + std::to_string(i) + "," +
                             std::to_string(j) + "), detuning " + std::to_string(det)),
          level_i(i), level_j(j), detuning(det) {}
};

// Requested level is not converged at the current charge cutoff.
struct TruncationError : std::runtime_error {
    int level;
    double drift;
    explicit TruncationError(int lvl, double d)
        : std::runtime_error("transmon level " + std::to_string(lvl) +
                             " not converged at this charge cutoff (relative drift " +
                             std::to_string(d) + ")"),
          level(lvl), drift(d) {}
};

struct IntegrationError : std::runtime_error {
    double defect;
    explicit IntegrationError(const std::string& what, double d)
        : std::runtime_error(what + " (defect " + std::to_string(d) + ")"), defect(d) {}
};

namespace detail {

// Eigendecomposition of a real symmetric matrix. On return `a` holds the
// eigenvectors (one per column, ascending eigenvalue order).
Eigen::VectorXd eigh_inplace(Eigen::MatrixXd& a);

// Run fn(i) for i in [0, n) on up to `workers` threads. Exceptions from
// workers are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// Deterministic per-sample RNG stream seed derived from (seed, index).
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace detail
}  // namespace ionsim

#endif
