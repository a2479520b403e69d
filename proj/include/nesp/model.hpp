#pragma once

#include "nesp/common.hpp"

#include <memory>
#include <optional>
#include <string>

namespace nesp {

/// Field oracle: (x, y, t, eps) -> vector. Must be a pure function.
using FieldFn = std::function<Vec(const Vec&, const Vec&, double, double)>;

/// First-derivative blocks of (f, g) plus parameter derivatives.
struct JacobianBlocks {
    Mat fx, fy, gx, gy;
    Vec fe, ge;  // d/d(eps)
    Vec ft, gt;  // d/dt
};

/// Oracle returning all blocks at once (optional; finite differences otherwise).
using JacobianFn = std::function<JacobianBlocks(const Vec&, const Vec&, double, double)>;

/// Taylor blocks of an invariant H(x, eps*u, eps) in u = y/eps, assumption (D8):
///   H = H0(x) + H1(x)u + H2(x)(u,u) + H3(x,u).
struct InvariantExpansion {
    std::function<double(const Vec&, double)> H0;              // (x, eps)
    std::function<Vec(const Vec&, double)> H1;                 // linear form on u
    std::function<Mat(const Vec&, double)> H2;                 // quadratic form on u
    std::function<double(const Vec&, const Vec&, double)> H3;  // remainder
    double c0 = 0, c1 = 0, c2 = 0;                             // (D8) constants
    double a_bar() const { return c0 * c2 - c1 * c1; }
};

/// Invariant oracle H(x, u, eps) with u = y/eps; optional Taylor blocks.
struct InvariantOracle {
    std::function<double(const Vec&, const Vec&, double)> H;
    std::optional<InvariantExpansion> expansion;
    /// Gradient of the unperturbed H(x) = H(x, 0, 0) in x; finite differences
    /// when not supplied.
    std::function<Vec(const Vec&)> DH0;
};

/// The fast-slow model  x' = A x + f(x,y,t,eps),  y' = (J/eps) y + g(x,y,t,eps).
struct SlowFastSystem {
    int n_x = 0;
    int n_y = 0;
    Mat A;  // n_x x n_x
    Mat J;  // n_y x n_y, antisymmetric, invertible
    FieldFn f;
    FieldFn g;
    JacobianFn jac;                      // optional
    std::optional<InvariantOracle> inv;  // optional H
    bool origin_fixed_point = false;     // (B2)
    bool autonomous_at_zero = false;     // (B1)
    bool fast_dormant = false;           // g == 0 and y decoupled from f
    /// Period vector of the slow fields in x (zero if none): f, g are
    /// invariant under x -> x + x_period. Used to chart manifolds around
    /// pendulum-type homoclinic loops.
    Vec x_period;
    std::string name;

    int dim() const { return n_x + n_y; }
};

namespace model {

/// dx = A x + f(...), dy = (1/eps) J y + g(...). Requires eps > 0.
void eval_rhs(const SlowFastSystem& sys, const Vec& x, const Vec& y, double t, double eps,
              Vec& dx, Vec& dy);

/// All first-derivative blocks; supplied oracle or central finite differences
/// with step eps_mach^(1/3) * max(1, |component|).
JacobianBlocks jacobian_blocks(const SlowFastSystem& sys, const Vec& x, const Vec& y, double t,
                               double eps);

struct CheckResult {
    std::string name;
    bool pass = false;
    double defect = 0.0;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    std::string to_string() const;
};

/// Numerical checks of (A2), (B1), (B2), Jacobian consistency, and the (D8)
/// expansion when present. Failures are carried in the report, not thrown.
ValidationReport validate(const SlowFastSystem& sys);

/// Convenience: f with y = 0 ("g_*" style evaluations are the g analogue).
Vec eval_f0(const SlowFastSystem& sys, const Vec& x, double t, double eps);
Vec eval_g0(const SlowFastSystem& sys, const Vec& x, double t, double eps);

}  // namespace model
}  // namespace nesp
