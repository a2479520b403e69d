#pragma once

#include "nesp/common.hpp"
#include "nesp/linalg.hpp"
#include "nesp/model.hpp"

#include <memory>

namespace nesp::integrate {

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-11;
    double h_init = 0.0;     // 0 = automatic
    double h_min = 1e-14;    // below this: step-underflow error
    double h_max = 0.0;      // 0 = |t1 - t0|
    long max_steps = 50'000'000;
};

struct StepStats {
    long accepted = 0;
    long rejected = 0;
    double h_min_used = std::numeric_limits<double>::infinity();
    double h_max_used = 0.0;
};

/// Generic right-hand side on the integration state.
using RhsFn = std::function<void(double t, const Vec& z, Vec& dz)>;

/// One orbit with cubic-Hermite dense output on the stored (node, derivative)
/// pairs. The stored state may be a transformed one (Lawson variables); the
/// physical state is recovered through the `to_physical` hook.
class Trajectory {
public:
    Trajectory() = default;

    double t_begin() const { return ts_.front(); }
    double t_end() const { return ts_.back(); }
    /// true if t lies within the covered interval (either time direction)
    bool covers(double t) const;
    int state_dim() const { return ts_.empty() ? 0 : static_cast<int>(zs_[0].size()); }
    size_t node_count() const { return ts_.size(); }

    /// Dense evaluation of the stored state. Exact at nodes.
    Vec eval_stored(double t) const;
    /// Dense evaluation mapped to physical variables.
    Vec eval(double t) const;

    /// Splits the physical state into (x, y) for a fast-slow system layout.
    void eval_xy(double t, int n_x, Vec& x, Vec& y) const;

    const std::vector<double>& nodes() const { return ts_; }
    const Vec& node_state(size_t i) const { return zs_[i]; }

    // metadata
    double eps = 0.0;
    std::string flow;  // "full" | "limit" | "variational" | ...
    IntegratorOptions opts;
    StepStats stats;

    /// CSV with header "t, x1..xn, y1..yn" (physical states at nodes).
    std::string to_csv(int n_x) const;

    // Construction interface used by the integrators.
    void push_node(double t, const Vec& z, const Vec& dz);
    void set_physical_map(std::function<Vec(double, const Vec&)> map) { to_physical_ = std::move(map); }
    void finalize();

private:
    size_t locate(double t) const;
    std::vector<double> ts_;
    std::vector<Vec> zs_;
    std::vector<Vec> dzs_;
    std::function<Vec(double, const Vec&)> to_physical_;
    bool forward_ = true;
};

/// Adaptive Dormand-Prince 5(4). Integrates from t0 to t1 (backward allowed),
/// recording every accepted step into the returned trajectory.
Trajectory integrate_ode(const RhsFn& rhs, const Vec& z0, double t0, double t1,
                         const IntegratorOptions& opts);

/// Rotation e^{s J / eps} applied via the real Schur form of J.
class FastRotor {
public:
    FastRotor(const Mat& J, double eps);
    Vec apply(double s, const Vec& y) const;   // e^{s J/eps} y
    Vec apply_inv(double s, const Vec& y) const { return apply(-s, y); }
    double eps() const { return eps_; }

private:
    linalg::Propagator prop_;
    double eps_;
};

// ---------------------------------------------------------------------------
// Flows of the fast-slow system
// ---------------------------------------------------------------------------

/// Full flow of x' = Ax + f, y' = (J/eps) y + g, integrated in the
/// Lawson-transformed variables (x, w) with y(t) = e^{(t-t0) J/eps} w(t).
/// The stored state is (x, w); eval() returns physical (x, y).
Trajectory integrate_full(const SlowFastSystem& sys, const Vec& x0, const Vec& y0, double t0,
                          double t1, double eps, const IntegratorOptions& opts = {});

/// Limit flow (eps = 0): x0' = A x0 + f(x0, 0, t, 0); for eps > 0 the
/// principal flow x*' = A x* + f(x*, 0, t, eps). State is x only.
Trajectory integrate_limit(const SlowFastSystem& sys, const Vec& x0, double t0, double t1,
                           double eps, const IntegratorOptions& opts = {});

/// Linearization along `base` (a full-flow trajectory), with the same Lawson
/// treatment of (J/eps) dy. State is (dx, dy) physical on eval().
Trajectory variational_full(const SlowFastSystem& sys, const Trajectory& base, const Vec& dx0,
                            const Vec& dy0, double t0, double t1, double eps,
                            const IntegratorOptions& opts = {});

/// Principal linearization (eq of dx* along x*-trajectory, Lawson fast part):
///   dx' = A dx + D_x f(x*, 0, t, eps) dx,   dy' = (J/eps) dy + D_y g(x*, 0, t, eps) dy.
/// Pass eps = 0 to linearize the singular limit itself.
Trajectory variational_limit(const SlowFastSystem& sys, const Trajectory& base_x, const Vec& dx0,
                             const Vec& dy0, double t0, double t1, double eps,
                             const IntegratorOptions& opts = {});

/// Evolution operator of dy' = (J/eps + D_y g(x*(t), 0, t, eps)) dy from t0 to
/// t1, column by column along an x-trajectory.
Mat fast_evolution(const SlowFastSystem& sys, const Trajectory& x_traj, double t0, double t1,
                   double eps, const IntegratorOptions& opts = {});

}  // namespace nesp::integrate
