#pragma once

#include "nesp/common.hpp"
#include "nesp/integrate.hpp"
#include "nesp/model.hpp"

namespace nesp::slowlimit {

/// Axis-aligned probe box in x.
struct ProbeBox {
    Vec center;
    double radius = 0.3;
    int samples_per_axis = 7;
};

struct SweepResult {
    std::vector<double> eps;
    std::vector<double> error;
    SlopeFit fit;
    double floor_estimate = 0.0;
    std::string norm;        // which norm the errors are in
    double t0 = 0, T = 0;    // window
    std::string to_csv() const;
    std::string to_json() const;
};

/// The iterated almost-invariant-slow-manifold transformation
///   y_{k+1} = y_k + eps J^{-1} g_k(x, 0, t, eps),
/// each step wrapping the previous system's oracles by exact composition.
class TransformChain {
public:
    explicit TransformChain(const SlowFastSystem& sys);

    int order() const { return static_cast<int>(systems_.size()) - 1; }
    const SlowFastSystem& system(int k) const { return systems_.at(k); }
    const SlowFastSystem& top() const { return systems_.back(); }

    /// One more transformation step. Warns (via the returned flag) past
    /// order 3 with finite-difference oracles: each push consumes one order
    /// of smoothness.
    bool push();  // returns false when the smoothness-budget warning fires

    /// Forward map y -> y_k at order k (composition of the steps).
    Vec forward(const Vec& x, const Vec& y, double t, double eps) const;
    /// Inverse map y_k -> y.
    Vec inverse(const Vec& x, const Vec& yk, double t, double eps) const;

private:
    std::vector<SlowFastSystem> systems_;
    Mat Jinv_;
};

/// sup over the probe box and t grid of |g(x, 0, t, eps)|.
double residual_norm(const SlowFastSystem& sys, const ProbeBox& box,
                     const std::vector<double>& t_grid, double eps);

/// Residual-vs-eps sweep of a chain level; slope expected ~ k+1 on systems
/// with O(eps) driving.
SweepResult chain_residual_sweep(const TransformChain& chain, int level, const ProbeBox& box,
                                 const std::vector<double>& t_grid,
                                 const std::vector<double>& eps_list);

enum class StudyKind {
    Thm31,       // |x - x0|_sup + |y|_sup vs limit system, O(eps)
    Thm32,       // linearized flows, dx-error in the plain norm
    PrincipalFT  // Lemma L:FT: against the principal system (eps kept in f)
};

struct StudyConfig {
    Vec x0;                  // slow initial condition
    Vec dx0, dy0;            // variational initial data (Thm32)
    double t0 = 0.0;
    double T = 5.0;
    std::vector<double> eps_list;
    integrate::IntegratorOptions opts;
    int sample_count = 200;  // sup-norm sampling resolution
    int jobs = 1;
};

/// Runs paired integrations per eps and fits the log-log slope; points at the
/// integrator tolerance floor (estimated by a tolerance-halving control run)
/// are excluded from the fit.
SweepResult convergence_study(const SlowFastSystem& sys, StudyKind kind, const StudyConfig& cfg);

}  // namespace nesp::slowlimit
