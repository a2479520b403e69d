#pragma once

#include "nesp/common.hpp"
#include "nesp/integrate.hpp"
#include "nesp/manifold.hpp"
#include "nesp/model.hpp"
#include "nesp/systems.hpp"

namespace nesp::melnikov {

using linalg::DichotomySplit;

// ---------------------------------------------------------------------------
// Homoclinic orbits of the limit system
// ---------------------------------------------------------------------------

class HomoclinicOrbit {
public:
    /// Wraps a closed-form orbit (validated: ODE residual <= 1e-9 on a dense
    /// grid, fitted decay rates within 10% of the dichotomy rates).
    static HomoclinicOrbit closed_form(const SlowFastSystem& sys, const DichotomySplit& split,
                                       const systems::HomoclinicReference& ref);

    /// Shooting construction: launch from the unstable eigendirection at
    /// offset delta0 = 1e-6 and integrate the limit flow until the far saddle
    /// is approached; requires dim X^u = dim X^s = 1.
    static HomoclinicOrbit shooting(const SlowFastSystem& sys, const DichotomySplit& split,
                                    double delta0 = 1e-6, double T_max = 60.0);

    Vec x(double t) const;
    Vec xdot(double t) const;
    const Vec& anchor() const { return x0_; }        // x_h(0)
    const Vec& x_plus() const { return x_plus_; }    // limit t -> +inf
    const Vec& x_minus() const { return x_minus_; }  // limit t -> -inf
    const Vec& loop_shift() const { return loop_shift_; }
    double rate_forward() const { return rate_fwd_; }
    double rate_backward() const { return rate_bwd_; }
    const std::string& source() const { return source_; }
    double residual() const { return residual_; }

private:
    std::function<Vec(double)> x_, xdot_;
    Vec x0_, x_plus_, x_minus_, loop_shift_;
    double rate_fwd_ = 0, rate_bwd_ = 0;
    double residual_ = 0;
    std::string source_;
    void validate(const SlowFastSystem& sys, const DichotomySplit& split);
};

// ---------------------------------------------------------------------------
// Section frame (eq 6.11)
// ---------------------------------------------------------------------------

struct SectionFrame {
    Vec x0;     // anchor on the orbit
    Vec v;      // velocity A x0 + f0(x0)
    Vec omega;  // in Sigma_x with DH(x0) omega = 1
    Vec dh;     // DH(x0)
    Mat pi_basis;  // orthonormal basis of ker DH(x0) ∩ v-perp (x-block)

    /// signed v-coordinate of p - x0 (x-block only; Sigma contains all of Y)
    double section_coordinate(const Vec& x) const {
        return v.dot(x - x0) / v.squaredNorm();
    }
    /// d-coordinate: DH(x0) (p - x0)
    double d_coordinate(const Vec& x) const { return dh.dot(x - x0); }
};

/// Builds the frame at the orbit anchor. Requires H (DH(x0) != 0, (D5)).
SectionFrame section_frame(const SlowFastSystem& sys, const HomoclinicOrbit& orbit);

// ---------------------------------------------------------------------------
// Melnikov function
// ---------------------------------------------------------------------------

/// omega(t, t0) = DH(x_h(t)) (d/d eps f - D_y f J^{-1} g)(x_h(t), 0, t + t0, 0).
double melnikov_integrand(const SlowFastSystem& sys, const HomoclinicOrbit& orbit, double t,
                          double t0);

struct QuadratureConfig {
    double tol = 1e-10;
    double T_tail = 0.0;  // 0 = automatic from the orbit decay rates
    int max_depth = 30;
};

struct MelnikovRoot {
    double t0 = 0;
    double M_prime = 0;  // 5-point stencil derivative at the root
};

struct MelnikovProfile {
    std::vector<double> t0;
    std::vector<double> M;
    std::vector<double> quad_err;
    std::vector<MelnikovRoot> roots;  // simple zeros only
    double T_tail = 0;
    double tail_bound = 0;
    double simplicity_threshold = 0;
    std::string to_csv() const;
};

MelnikovProfile melnikov_profile(const SlowFastSystem& sys, const HomoclinicOrbit& orbit,
                                 const std::vector<double>& t0_grid,
                                 const QuadratureConfig& quad = {});

// ---------------------------------------------------------------------------
// Splitting distance by manifold shooting (eq 6.38 left side)
// ---------------------------------------------------------------------------

struct SplittingConfig {
    double t1 = 0.0, t2 = 0.0;  // 0 = automatic via the eq 6.2 smallness rule
    manifold::LPConfig lp;
    integrate::IntegratorOptions ode{1e-10, 1e-12};
    double newton_tol = 1e-10;
    int max_newton = 30;
    double suspect_ratio = 50.0;  // |coords|/eps above this flags the result
};

struct SplittingResult {
    double H_diff = 0;      // H(P^u) - H(P^cs)
    Vec P_u, P_cs;          // matched points (x, y)
    double y_over_eps = 0;  // |y coordinate| / eps (eq 6.31 certificate)
    bool suspect = false;
    double t1_used = 0, t2_used = 0;
    double section_defect = 0;  // |Q_v(P - x0)| after matching
};

SplittingResult splitting_distance(const SlowFastSystem& sys, const DichotomySplit& split,
                                   const HomoclinicOrbit& orbit, double t0, double eps,
                                   const SplittingConfig& cfg = {});

// ---------------------------------------------------------------------------
// Conservative connection (section 6.3)
// ---------------------------------------------------------------------------

struct ConnectionConfig {
    double delta0 = 1e-4;  // launch offset along the 1-D stable/unstable manifolds
    int tau_grid = 11;
    double h_tol = 1e-10;
    manifold::LPConfig lp;
    integrate::IntegratorOptions ode{1e-10, 1e-12};
    double tube_T = 20.0;  // forward-integration tube check horizon
};

struct ConnectionResult {
    double tau0 = 0;
    Vec point;  // matched intersection point of M^cs and M^cu (x, y)
    double h_at_tau0 = 0;
    double h_at_0 = 0, h_at_1 = 0;
    bool degenerate_bracket = false;  // h identically ~0 (eps = 0 case)
    double dist_to_x0 = 0;
    double match_gap = 0;   // |p^s(tau0) - p^u(tau0)|, the realized intersection defect
    double tube_ratio = 0;  // sup_t (|P_c x| + |y|/eps) over its initial value
};

ConnectionResult conservative_connection(const SlowFastSystem& sys, const DichotomySplit& split,
                                         const HomoclinicOrbit& orbit, double eps,
                                         const ConnectionConfig& cfg = {});

/// min over the sampled center manifold of H(z, eps) / (|xi_c|^2 + |u|^2)
/// (u = y/eps scaling); positive value certifies the coercivity bound.
double energy_positivity_check(const SlowFastSystem& sys, const DichotomySplit& split,
                               double eps, double box_radius,
                               const manifold::LPConfig& lp = {}, int samples = 12);

}  // namespace nesp::melnikov
