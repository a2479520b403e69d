#pragma once

#include "nesp/common.hpp"
#include "nesp/model.hpp"

#include <map>
#include <optional>
#include <string>

namespace nesp::systems {

/// Scalar forcing term F(x, y, t, eps); x is the original angle, y the radial
/// displacement. Defaults to zero.
using ForcingFn = std::function<double(double, double, double, double)>;

struct PendulumForcing {
    ForcingFn F1;  // angular equation
    ForcingFn F2;  // radial equation
};

/// Potential perturbation G(x, y, eps) for the conservative pendulum.
using PotentialFn = std::function<double(double, double, double)>;

/// Closed-form reference orbit metadata attached to catalog entries.
struct HomoclinicReference {
    std::function<Vec(double)> x;     // x_h(t) in the system's (shifted) chart
    std::function<Vec(double)> xdot;  // d/dt x_h(t)
    double decay_rate_forward = 0;    // |x_h(t) - x_h(+inf)| ~ e^{-rate t}
    double decay_rate_backward = 0;
    Vec x_plus;   // limit as t -> +inf (in shifted chart)
    Vec x_minus;  // limit as t -> -inf
    Vec loop_shift;  // x_minus + loop_shift = x_plus (period vector), zero if none
};

struct ReferenceData {
    std::optional<HomoclinicReference> homoclinic;
    std::optional<double> graph_coefficient;  // known invariant-graph coefficient
    Vec fixed_point_unshifted;                // fixed point in original variables
    std::map<std::string, double> values;     // misc named reference quantities
};

struct BuiltinSystem {
    SlowFastSystem sys;
    ReferenceData ref;
};

/// Dissipative elastic pendulum (eq 6.41 scaling, shifted about the
/// steady state (pi, 0, u^eps, u1^eps); the fixed-point equation is solved by
/// Newton at build time for the given eps). When `decouple` is set the linear
/// coupling eps*D_xF2(pi,...)*x is removed by the triangular similarity.
/// State: x = (angle - pi, angular momentum), y = (u, u1) with radial = eps*u.
BuiltinSystem elastic_pendulum_dissipative(double gravity, double damping,
                                           const PendulumForcing& forcing = {},
                                           double eps_build = 1e-2, bool decouple = true);

/// Conservative elastic pendulum (eq 6.45 scaling) shifted about its steady
/// state, with the invariant H and its (D8) Taylor blocks wired in.
/// State: x = (angle - x^eps, angular momentum), y = (radial - y^eps, eps * d(radial)/dt).
BuiltinSystem elastic_pendulum_conservative(double gravity, const PotentialFn& G = nullptr,
                                            double eps_build = 1e-2);

/// Rigid pendulum as a 2-slow / 2-dormant-fast system in the bottom chart:
///   x1' = x2,  x2' = -gravity sin(x1) + eps (-2 damping x2 + F(t)).
/// Carries the separatrix closed form and the limit invariant H.
BuiltinSystem rigid_pendulum(double gravity, double damping,
                             const std::function<double(double)>& forcing = nullptr);

/// 4-D degenerate-Hopf model after the mu = sqrt(eps) rescaling; the system's
/// eps argument is mu. a21 must have positive derivative at 0.
BuiltinSystem hopf4d(const std::function<double(double)>& a11,
                     const std::function<double(double)>& a12,
                     const std::function<double(double)>& a21,
                     const std::function<double(double)>& a22,
                     const std::function<double(double)>& b);

enum class QuadraticKind { StableGraph, UnstableGraph, CenterPlane };

/// 2-slow + 2-dormant-fast test systems with exactly known invariant graphs:
/// stable-graph coefficient -1/4, unstable-graph 1/3, center plane Psi = 0.
BuiltinSystem test_quadratic(QuadraticKind kind);

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

struct CatalogEntry {
    std::string name;
    std::string description;
    std::map<std::string, double> default_params;
    std::function<BuiltinSystem(const std::map<std::string, double>&)> make;
};

const std::vector<CatalogEntry>& catalog();

/// Builds a catalog system by name; throws Error(Parameter) on unknown names.
BuiltinSystem make_builtin(const std::string& name,
                           const std::map<std::string, double>& params = {});

/// sysdsl-document rendering of a catalog entry (expression-based entries only;
/// closure-based builtins are rendered to their defining equations as comments).
std::string export_document(const std::string& name);

}  // namespace nesp::systems
