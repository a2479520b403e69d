#pragma once

#include "nesp/common.hpp"
#include "nesp/integrate.hpp"
#include "nesp/linalg.hpp"
#include "nesp/model.hpp"
#include "nesp/slowlimit.hpp"

#include <memory>
#include <mutex>
#include <optional>

namespace nesp::manifold {

using linalg::DichotomySplit;

// ---------------------------------------------------------------------------
// Cut-off modification
// ---------------------------------------------------------------------------

/// Quintic monotone bump: 1 on [0, 1/3], 0 on [1, inf), |lambda'| <= 3.
double cutoff_lambda(double rho);
double cutoff_lambda_prime(double rho);

/// The modified fields of eq 4.5: linear parts frozen at the origin (eps = 0)
/// and the remainder cut off at radius r in |x| + |y|.
class CutSystem {
public:
    CutSystem(const SlowFastSystem& sys, double r);

    const SlowFastSystem& sys() const { return *sys_; }
    double radius() const { return r_; }
    const Mat& A_f() const { return A_f_; }
    const Mat& f_y() const { return f_y_; }
    const Mat& g_x() const { return g_x_; }
    const Mat& g_y() const { return g_y_; }

    /// Cut nonlinearities F, G (vanish outside the r-ball).
    Vec F(const Vec& x, const Vec& y, double t, double eps) const;
    Vec G(const Vec& x, const Vec& y, double t, double eps) const;
    /// Uncut remainders F1 = f - f_x x - f_y y, G1 analogous.
    Vec F1(const Vec& x, const Vec& y, double t, double eps) const;
    Vec G1(const Vec& x, const Vec& y, double t, double eps) const;

    /// Sampled sup of |D(F1, G1)| over the cut ball (the r-bar surrogate).
    double measure_rbar(double eps, int probes = 160) const;

private:
    std::shared_ptr<const SlowFastSystem> sys_;
    double r_;
    Mat f_x_, f_y_, g_x_, g_y_, A_f_;
};

// ---------------------------------------------------------------------------
// Solver configuration and reports
// ---------------------------------------------------------------------------

struct LPConfig {
    double eta = std::numeric_limits<double>::quiet_NaN();        // auto from rates
    double eta_prime = std::numeric_limits<double>::quiet_NaN();  // fibers
    double eps_star = 0.0;       // 0 = choose by maximizing the certificate
    double cutoff_radius = 0.5;  // r
    double t_trunc = 0.0;        // 0 = from e^{(a1-eta) T} < 0.01 tol
    double picard_tol = 1e-10;
    int max_iters = 80;
    integrate::IntegratorOptions ode{1e-10, 1e-12};
    /// When set, sigma(eta) <= 0 raises the no-contraction error; otherwise
    /// the certificate is only reported and convergence is monitored.
    bool enforce_certificate = false;
    double probe_delta = 1e-3;  // finite-difference step for graph derivatives
    double relift_interval = 0.0;  // base-orbit re-lift cadence (0 = off)
};

struct ContractionReport {
    double sigma1 = 0, sigma2 = 0, sigma3 = 0;
    double eps_star = 0, r_bar = 0, K = 0;
    double sigma() const { return std::min({sigma1, sigma2, sigma3}); }
    bool certified() const { return sigma() > 0; }
};

struct LPReport {
    ContractionReport contraction;
    double eta = 0;
    double T_trunc = 0;
    int iterations = 0;
    double final_delta = 0;        // last Picard increment in the weighted norm
    double contraction_ratio = 0;  // measured delta_k / delta_{k-1}
    double fixed_point_residual = 0;  // one extra application of the operator
    std::string to_json() const;
};

/// Result of one Lyapunov-Perron point solve: the graph value, the full phase
/// point xi + h, and the converged orbit (x(t), y(t)) on the solve interval.
struct LPPoint {
    Vec h;      // graph value (complementary coordinates)
    Vec point;  // full (x, y) phase point at time 0
    LPReport report;
    std::function<Vec(double)> orbit_x;  // defined on [t_lo, t_hi]
    std::function<Vec(double)> orbit_y;
    double t_lo = 0, t_hi = 0;
};

// ---------------------------------------------------------------------------
// The solver
// ---------------------------------------------------------------------------

/// Lyapunov-Perron solver bound to one (system, split, eps) triple.
/// All graph maps follow the paper's naming: the value of h_s is the stable
/// component of the center-unstable graph, etc.
class LPSolver {
public:
    LPSolver(const SlowFastSystem& sys, const DichotomySplit& split, double eps,
             const LPConfig& cfg = {});

    const CutSystem& cut() const { return *cut_; }
    const DichotomySplit& split() const { return split_; }
    const ContractionReport& certificate() const { return cert_; }
    double eps() const { return eps_; }
    const LPConfig& config() const { return cfg_; }

    /// h_s(xi_cu, xi_y, t0, eps): backward Picard solve of the cu-operator.
    /// xi_cu must lie in X^cu (P_cu xi_cu = xi_cu).
    LPPoint solve_cu_graph(const Vec& xi_cu, const Vec& xi_y, double t0) const;

    /// h_cu(xi_s, t0, eps) = ((I - P_s) x(0), y(0)): forward solve of the
    /// (uncut) stable operator. Throws radius error when the orbit escapes.
    LPPoint solve_s_graph(const Vec& xi_s, double t0) const;

    /// h_cs(xi_u, t0, eps): unstable manifold graph (time-reversed s-solve).
    LPPoint solve_u_graph(const Vec& xi_u, double t0) const;

    /// h_u(xi_cs, xi_y, t0, eps): center-stable graph (time-reversed cu-solve).
    LPPoint solve_cs_graph(const Vec& xi_cs, const Vec& xi_y, double t0) const;

    /// Psi = (Psi_s, Psi_u): center graph by damped cs/cu alternation.
    LPPoint solve_center_graph(const Vec& xi_c, const Vec& xi_y, double t0) const;

    /// h_s*(xi_cu, t0, eps): slow-only (y frozen at 0) center-unstable graph
    /// of the principal system x' = A_f x + F(x, 0, t, eps).
    LPPoint unperturbed_cu_graph(const Vec& xi_cu, double t0) const;
    LPPoint unperturbed_s_graph(const Vec& xi_s, double t0) const;
    LPPoint unperturbed_u_graph(const Vec& xi_u, double t0) const;
    LPPoint unperturbed_cs_graph(const Vec& xi_cs, double t0) const;
    LPPoint unperturbed_center_graph(const Vec& xi_c, double t0) const;

    /// Stable fiber point sigma_cu(xi_s, (xi_c, xi_y), t0): base point on the
    /// center manifold, base orbit by forward integration, then the G_s
    /// Picard solve. slow_only selects the sigma* variant (xi_y ignored).
    LPPoint solve_fiber(const Vec& xi_s, const Vec& xi_c, const Vec& xi_y, double t0,
                        bool slow_only = false) const;

private:
    struct Roles;  // internal: projection/basis bundle per manifold type
    struct BaseOrbit;
    LPPoint solve_minus(const Roles& roles, const Vec& xi_x, const Vec& xi_y, double t0,
                        bool slow_only, bool cut_fields) const;
    LPPoint solve_plus(const Roles& roles, const Vec& xi_x, double t0, bool slow_only,
                       bool cut_fields, const BaseOrbit* base) const;
    LPPoint solve_center_impl(const Vec& xi_c, const Vec& xi_y, double t0, bool slow_only) const;
    Roles roles_cu() const;
    Roles roles_s() const;
    ContractionReport certify(double eta) const;
    const LPSolver& reversed() const;

    std::shared_ptr<const CutSystem> cut_;
    DichotomySplit split_;
    double eps_;
    LPConfig cfg_;
    ContractionReport cert_;
    std::shared_ptr<const linalg::Propagator> prop_Af_;
    std::shared_ptr<const linalg::Propagator> prop_fast_;  // J/eps + g_y
    bool dormant_;
    mutable std::shared_ptr<LPSolver> reversed_;
    mutable std::mutex rev_mutex_;
};

// ---------------------------------------------------------------------------
// Graphs on grids, studies
// ---------------------------------------------------------------------------

enum class ManifoldKind { S, U, CS, CU, C, Fiber };

struct ManifoldGraph {
    ManifoldKind kind;
    std::vector<Vec> nodes;   // base coordinates (xi)
    std::vector<Vec> values;  // graph values at the nodes
    double t0 = 0, eps = 0;
    LPReport report;  // of the last node solve
    std::string to_csv() const;
};

/// Tensor-grid graph over the given per-axis offsets (solved node by node;
/// nodes are independent and solved concurrently when jobs > 1).
ManifoldGraph sample_graph(const LPSolver& solver, ManifoldKind kind,
                           const std::vector<std::vector<double>>& axes, double t0,
                           int jobs = 1);

/// Local-invariance residual: flow xi + h(xi) for dt and measure the distance
/// to the graph at the arrival time.
double invariance_residual(const LPSolver& solver, ManifoldKind kind, const Vec& xi_x,
                           const Vec& xi_y, double t0, double dt);

struct GapStudyResult {
    slowlimit::SweepResult value_gap;        // |h_s - h_s*|
    slowlimit::SweepResult dxi_cu_gap;       // |D_xi_cu h_s - D_xi_cu h_s*|
    slowlimit::SweepResult dxi_y_norm;       // |D_xi_y h_s|
};

/// Prop P:appro realized as an eps-sweep (xi_y = 0 throughout).
GapStudyResult manifold_gap_study(const SlowFastSystem& sys, const DichotomySplit& split,
                                  const Vec& xi_cu, double t0,
                                  const std::vector<double>& eps_list, const LPConfig& cfg,
                                  int jobs = 1);

/// Prop thm4.26: |d/dt0 h_s| by central differences (step 1e-3), swept in eps.
slowlimit::SweepResult t0_sensitivity(const SlowFastSystem& sys, const DichotomySplit& split,
                                      const Vec& xi_cu, const Vec& xi_y, double t0,
                                      const std::vector<double>& eps_list, const LPConfig& cfg,
                                      int jobs = 1);

/// Theorem 5.5: |sigma_cu - sigma_cu*| at xi_y = 0, swept in eps.
slowlimit::SweepResult fiber_gap_study(const SlowFastSystem& sys, const DichotomySplit& split,
                                       const Vec& xi_s, const Vec& xi_c, double t0,
                                       const std::vector<double>& eps_list, const LPConfig& cfg,
                                       int jobs = 1);

}  // namespace nesp::manifold
