#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nesp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kMachEps = std::numeric_limits<double>::epsilon();

/// Central-difference step for second-order accuracy: eps^(1/3), scaled per component.
inline double fd_step(double scale) {
    return std::cbrt(kMachEps) * std::max(1.0, std::abs(scale));
}

// ---------------------------------------------------------------------------
// Errors. Category is preserved so the CLI can map failures to exit codes.
// ---------------------------------------------------------------------------

enum class ErrorKind {
    Model,       // dimension mismatch, invalid system data
    Parameter,   // bad parameter value (eps <= 0, ...)
    Evaluation,  // non-finite values, domain errors
    Parse,       // sysdsl lexical/syntax errors
    Numerical,   // solver failures: no contraction, divergence, step underflow
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) throw Error(kind, msg);
}

// ---------------------------------------------------------------------------
// Deterministic probe generation. All randomized checks in the library draw
// from fixed-seed generators so runs are reproducible bit-for-bit.
// ---------------------------------------------------------------------------

class ProbeRng {
public:
    explicit ProbeRng(std::uint64_t seed = 0x9E3779B97F4A7C15ull) : gen_(seed) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen_);
    }

    Vec vector(int n, double radius) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = uniform(-radius, radius);
        return v;
    }

private:
    std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Log-log slope fitting for the convergence sweeps.
// ---------------------------------------------------------------------------

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;  // log10 of the constant
    int points_used = 0;
    bool floor_detected = false;  // too few points above the tolerance floor
};

/// Least-squares fit of log10(err) vs log10(eps). Points with err below
/// `floor` (tolerance-floor estimate) are excluded.
inline SlopeFit fit_loglog_slope(const std::vector<double>& eps,
                                 const std::vector<double>& err,
                                 double floor = 0.0) {
    SlopeFit fit;
    std::vector<double> lx, ly;
    for (size_t i = 0; i < eps.size(); ++i) {
        if (!(err[i] > floor) || !std::isfinite(err[i])) continue;
        lx.push_back(std::log10(eps[i]));
        ly.push_back(std::log10(err[i]));
    }
    fit.points_used = static_cast<int>(lx.size());
    if (fit.points_used < 2) {
        fit.floor_detected = true;
        return fit;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double n = static_cast<double>(lx.size());
    const double denom = n * sxx - sx * sx;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

/// FNV-1a, used for input hashes in run manifests.
inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace nesp
