#include "nesp/systems.hpp"

#include "nesp/linalg.hpp"
#include "nesp/sysdsl.hpp"

#include <cmath>
#include <memory>
#include <atomic>
#include <sstream>

namespace nesp::systems {

namespace {

constexpr double kPi = 3.14159265358979323846;

double fd_partial(const std::function<double(double)>& f, double s) {
    const double h = fd_step(s);
    return (f(s + h) - f(s - h)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Dissipative elastic pendulum, eq 6.41 scaling
// ---------------------------------------------------------------------------

struct DissipativeParams {
    double g;
    double gamma;
    PendulumForcing forcing;
    bool decouple;
    Mat A;  // slow linear part [[0,1],[g,0]]
    Mat J;  // [[0,1],[-1,0]]
};

double forcing_eval(const ForcingFn& F, double x, double y, double t, double eps) {
    return F ? F(x, y, t, eps) : 0.0;
}

/// Steady state: u1^eps = eps^2 gamma u^eps and u^eps = -eps g + eps^2 F2(pi, eps u^eps).
double solve_u_eps(const DissipativeParams& p, double eps) {
    if (eps == 0.0) return 0.0;
    double u = -eps * p.g;
    for (int it = 0; it < 50; ++it) {
        const double F2 = forcing_eval(p.forcing.F2, kPi, eps * u, 0.0, eps);
        const double r = -u - eps * p.g + eps * eps * F2;
        const double dF2 = p.forcing.F2
                               ? eps * fd_partial([&](double s) {
                                     return p.forcing.F2(kPi, s, 0.0, eps);
                                 }, eps * u)
                               : 0.0;
        const double dr = -1.0 + eps * eps * dF2;
        const double step = r / dr;
        u -= step;
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(u))) break;
    }
    const double res = -u - eps * p.g +
                       eps * eps * forcing_eval(p.forcing.F2, kPi, eps * u, 0.0, eps);
    require(std::abs(res) < 1e-12, ErrorKind::Numerical,
            "elastic_pendulum_dissipative: fixed-point Newton failed");
    return u;
}

struct DissipativeCache {
    double u_eps = 0.0;
    double DxF2 = 0.0;  // D_x F2(pi, eps u^eps, 0, eps)
    Mat L1;             // decoupling map, 2x2
};

inline std::uint64_t next_ctx_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

class DissipativeCtx {
public:
    explicit DissipativeCtx(const DissipativeParams& p) : p_(p), id_(next_ctx_id()) {}

    const DissipativeCache& at(double eps) const {
        thread_local std::map<std::uint64_t, std::map<double, DissipativeCache>> tls;
        auto& mine = tls[id_];
        auto it = mine.find(eps);
        if (it != mine.end()) return it->second;
        DissipativeCache c;
        c.u_eps = solve_u_eps(p_, eps);
        c.DxF2 = p_.forcing.F2 ? fd_partial([&](double s) {
            return p_.forcing.F2(s, eps * c.u_eps, 0.0, eps);
        }, kPi)
                               : 0.0;
        if (p_.decouple && eps > 0.0 && c.DxF2 != 0.0) {
            // (J - eps^2 gamma) L1 - L1 (eps A) = -eps^2 M3
            Mat M3 = Mat::Zero(2, 2);
            M3(1, 0) = c.DxF2;
            const Mat P = p_.J - eps * eps * p_.gamma * Mat::Identity(2, 2);
            c.L1 = linalg::solve_sylvester(P, Mat(eps * p_.A), Mat(-eps * eps * M3));
        } else {
            c.L1 = Mat::Zero(2, 2);
        }
        return mine.emplace(eps, std::move(c)).first->second;
    }

    const DissipativeParams& p() const { return p_; }

private:
    DissipativeParams p_;
    std::uint64_t id_;
};

}  // namespace

BuiltinSystem elastic_pendulum_dissipative(double gravity, double damping,
                                           const PendulumForcing& forcing, double eps_build,
                                           bool decouple) {
    require(damping >= 0.0, ErrorKind::Parameter, "elastic pendulum: damping must be >= 0");
    DissipativeParams p;
    p.g = gravity;
    p.gamma = damping;
    p.forcing = forcing;
    p.decouple = decouple;
    p.A = (Mat(2, 2) << 0, 1, gravity, 0).finished();
    p.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    auto ctx = std::make_shared<DissipativeCtx>(p);

    // Raw (un-decoupled) right-hand sides in shifted variables.
    // x = (xt, x1) with xt = angle - pi; y = (v, v1) with u = u^eps + v.
    auto f_raw = [ctx](const Vec& x, const Vec& y, double t, double eps) -> Vec {
        const auto& pp = ctx->p();
        const auto& c = ctx->at(eps);
        const double xt = x[0], x1 = x[1], v = y[0];
        const double rad = 1.0 + eps * (c.u_eps + v);
        Vec out(2);
        out[0] = x1 * (1.0 / (rad * rad) - 1.0);
        out[1] = pp.g * (rad * std::sin(xt) - xt) - 2.0 * eps * pp.gamma * x1 +
                 eps * forcing_eval(pp.forcing.F1, xt + kPi, eps * (c.u_eps + v), t, eps);
        return out;
    };
    auto g_raw = [ctx](const Vec& x, const Vec& y, double t, double eps) -> Vec {
        const auto& pp = ctx->p();
        const auto& c = ctx->at(eps);
        const double xt = x[0], x1 = x[1], v = y[0], v1 = y[1];
        const double rad = 1.0 + eps * (c.u_eps + v);
        Vec out(2);
        out[0] = -eps * pp.gamma * v;
        out[1] = -eps * pp.gamma * v1 + x1 * x1 / (rad * rad * rad) +
                 eps * eps * eps * pp.gamma * pp.gamma * v + pp.g * (1.0 - std::cos(xt)) +
                 eps * (forcing_eval(pp.forcing.F2, xt + kPi, eps * (c.u_eps + v), t, eps) -
                        forcing_eval(pp.forcing.F2, kPi, eps * c.u_eps, t, eps));
        return out;
    };

    SlowFastSystem sys;
    sys.n_x = 2;
    sys.n_y = 2;
    sys.A = p.A;
    sys.J = p.J;
    sys.autonomous_at_zero = true;

    // (B2) holds only if F1 vanishes at the steady state (assumption (P1)).
    bool p1_ok = true;
    if (forcing.F1) {
        for (double t : {0.0, 0.9, 2.3})
            for (double eps : {1e-1, 1e-2})
                p1_ok = p1_ok && std::abs(forcing.F1(kPi, eps * ctx->at(eps).u_eps, t, eps)) < 1e-13;
    }
    sys.origin_fixed_point = p1_ok;

    if (!decouple) {
        sys.f = f_raw;
        sys.g = g_raw;
        sys.name = "elastic_pendulum_raw";
    } else {
        // y = L1 x + y_hat removes the eps D_xF2 linear coupling (pre-6.43).
        const Mat A = p.A;
        const Mat J = p.J;
        sys.f = [ctx, f_raw](const Vec& x, const Vec& yh, double t, double eps) -> Vec {
            const Vec y = yh + ctx->at(eps).L1 * x;
            return f_raw(x, y, t, eps);
        };
        sys.g = [ctx, f_raw, g_raw, A, J](const Vec& x, const Vec& yh, double t,
                                          double eps) -> Vec {
            const Mat& L1 = ctx->at(eps).L1;
            const Vec y = yh + L1 * x;
            Vec out = g_raw(x, y, t, eps) - L1 * (A * x + f_raw(x, y, t, eps));
            if (eps > 0.0) out += (1.0 / eps) * (J * (L1 * x));
            return out;
        };
        sys.name = "elastic_pendulum";
    }

    sys.x_period = (Vec(2) << 2.0 * kPi, 0.0).finished();
    if (forcing.F1 || forcing.F2) {
        // periodicity of the forcing in the angle is required for the
        // loop-shift chart; probe it.
        bool periodic = true;
        for (double xx : {0.3, 1.7})
            for (double eps : {1e-2}) {
                if (forcing.F1)
                    periodic = periodic && std::abs(forcing.F1(xx, 0.01, 0.4, eps) -
                                                    forcing.F1(xx + 2 * kPi, 0.01, 0.4, eps)) < 1e-12;
                if (forcing.F2)
                    periodic = periodic && std::abs(forcing.F2(xx, 0.01, 0.4, eps) -
                                                    forcing.F2(xx + 2 * kPi, 0.01, 0.4, eps)) < 1e-12;
            }
        if (!periodic) sys.x_period = Vec();
    }

    // Limit invariant (rigid pendulum about the top): H = x1^2/2 + g(cos xt - 1),
    // zero on the separatrix level and at the origin.
    InvariantOracle inv;
    const double g = gravity;
    inv.H = [g](const Vec& x, const Vec&, double) {
        return 0.5 * x[1] * x[1] + g * (std::cos(x[0]) - 1.0);
    };
    inv.DH0 = [g](const Vec& x) {
        return (Vec(2) << -g * std::sin(x[0]), x[1]).finished();
    };
    sys.inv = inv;

    BuiltinSystem b;
    b.sys = sys;

    // Separatrix of the limit system in the shifted chart: from -2pi to 0.
    const double sq = std::sqrt(gravity);
    HomoclinicReference h;
    h.x = [sq](double t) {
        return (Vec(2) << 4.0 * std::atan(std::exp(sq * t)) - 2.0 * kPi,
                2.0 * sq / std::cosh(sq * t))
            .finished();
    };
    h.xdot = [sq](double t) {
        const double sech = 1.0 / std::cosh(sq * t);
        return (Vec(2) << 2.0 * sq * sech, -2.0 * sq * sq * sech * std::tanh(sq * t)).finished();
    };
    h.decay_rate_forward = sq;
    h.decay_rate_backward = sq;
    h.x_plus = Vec::Zero(2);
    h.x_minus = (Vec(2) << -2.0 * kPi, 0.0).finished();
    h.loop_shift = (Vec(2) << 2.0 * kPi, 0.0).finished();
    b.ref.homoclinic = h;
    b.ref.fixed_point_unshifted =
        (Vec(4) << kPi, 0.0, ctx->at(eps_build).u_eps,
         eps_build * eps_build * damping * ctx->at(eps_build).u_eps)
            .finished();
    b.ref.values["u_eps"] = ctx->at(eps_build).u_eps;
    b.ref.values["eps_build"] = eps_build;
    return b;
}

// ---------------------------------------------------------------------------
// Conservative elastic pendulum, eq 6.45 scaling
// ---------------------------------------------------------------------------

namespace {

struct ConservativeParams {
    double g;
    PotentialFn G;
};

double pot(const ConservativeParams& p, double x, double y, double eps) {
    return p.G ? p.G(x, y, eps) : 0.0;
}
double pot_x(const ConservativeParams& p, double x, double y, double eps) {
    if (!p.G) return 0.0;
    return fd_partial([&](double s) { return p.G(s, y, eps); }, x);
}
double pot_y(const ConservativeParams& p, double x, double y, double eps) {
    if (!p.G) return 0.0;
    return fd_partial([&](double s) { return p.G(x, s, eps); }, y);
}
double pot_yy(const ConservativeParams& p, double x, double y, double eps) {
    if (!p.G) return 0.0;
    const double h = std::sqrt(fd_step(y));
    return (pot_y(p, x, y + h, eps) - pot_y(p, x, y - h, eps)) / (2.0 * h);
}

struct ConservativeCache {
    double x_eps = kPi;
    double y_eps = 0.0;
};

class ConservativeCtx {
public:
    explicit ConservativeCtx(const ConservativeParams& p) : p_(p), id_(next_ctx_id()) {}

    const ConservativeCache& at(double eps) const {
        thread_local std::map<std::uint64_t, std::map<double, ConservativeCache>> tls;
        auto& mine = tls[id_];
        auto it = mine.find(eps);
        if (it != mine.end()) return it->second;
        ConservativeCache c;
        if (eps != 0.0) {
            // eq 6.46: g (1+y) sin x + eps DxG = 0,  y - eps^2 g cos x + eps^3 DyG = 0
            double x = kPi, y = -eps * eps * p_.g;
            for (int it2 = 0; it2 < 60; ++it2) {
                const double r1 = p_.g * (1 + y) * std::sin(x) + eps * pot_x(p_, x, y, eps);
                const double r2 = y - eps * eps * p_.g * std::cos(x) + eps * eps * eps * pot_y(p_, x, y, eps);
                Mat Jn(2, 2);
                const double hx = fd_step(x), hy = fd_step(y);
                Jn(0, 0) = (p_.g * (1 + y) * std::sin(x + hx) + eps * pot_x(p_, x + hx, y, eps) -
                            p_.g * (1 + y) * std::sin(x - hx) - eps * pot_x(p_, x - hx, y, eps)) /
                           (2 * hx);
                Jn(0, 1) = (p_.g * (1 + y + hy) * std::sin(x) + eps * pot_x(p_, x, y + hy, eps) -
                            p_.g * (1 + y - hy) * std::sin(x) - eps * pot_x(p_, x, y - hy, eps)) /
                           (2 * hy);
                Jn(1, 0) = (eps * eps * p_.g * (std::sin(x + hx) - std::sin(x - hx)) +
                            eps * eps * eps * (pot_y(p_, x + hx, y, eps) - pot_y(p_, x - hx, y, eps))) /
                           (2 * hx);
                Jn(1, 1) = 1.0 + eps * eps * eps *
                                     (pot_y(p_, x, y + hy, eps) - pot_y(p_, x, y - hy, eps)) /
                                     (2 * hy);
                const Vec step = Jn.fullPivLu().solve((Vec(2) << r1, r2).finished());
                x -= step[0];
                y -= step[1];
                if (step.cwiseAbs().maxCoeff() < 1e-15) break;
            }
            const double r1 = p_.g * (1 + y) * std::sin(x) + eps * pot_x(p_, x, y, eps);
            const double r2 = y - eps * eps * p_.g * std::cos(x) + eps * eps * eps * pot_y(p_, x, y, eps);
            require(std::abs(r1) + std::abs(r2) < 1e-12, ErrorKind::Numerical,
                    "elastic_pendulum_conservative: fixed-point Newton failed");
            c.x_eps = x;
            c.y_eps = y;
        }
        return mine.emplace(eps, std::move(c)).first->second;
    }

    const ConservativeParams& p() const { return p_; }

private:
    ConservativeParams p_;
    std::uint64_t id_;
};

}  // namespace

BuiltinSystem elastic_pendulum_conservative(double gravity, const PotentialFn& G,
                                            double eps_build) {
    ConservativeParams p;
    p.g = gravity;
    p.G = G;
    auto ctx = std::make_shared<ConservativeCtx>(p);

    SlowFastSystem sys;
    sys.n_x = 2;
    sys.n_y = 2;
    sys.A = (Mat(2, 2) << 0, 1, gravity, 0).finished();
    sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    sys.origin_fixed_point = true;
    sys.autonomous_at_zero = true;
    sys.name = "elastic_pendulum_conservative";
    // the shifted fields stay 2pi-periodic in the angle as long as G is
    sys.x_period = (Vec(2) << 2.0 * kPi, 0.0).finished();
    if (G) {
        bool periodic = true;
        for (double xx : {0.4, 2.1})
            periodic = periodic &&
                       std::abs(G(xx, 0.01, 1e-2) - G(xx + 2 * kPi, 0.01, 1e-2)) < 1e-12;
        if (!periodic) sys.x_period = Vec();
    }
    const double g = gravity;

    // x = (xt, x1), y = (yt, y1): angle = x^eps + xt, radial = y^eps + yt,
    // y1 = eps * d(radial)/dt.
    sys.f = [ctx, g](const Vec& x, const Vec& y, double, double eps) -> Vec {
        const auto& c = ctx->at(eps);
        const auto& pp = ctx->p();
        const double xt = x[0], x1 = x[1], yt = y[0];
        const double rad = 1.0 + c.y_eps + yt;
        Vec out(2);
        out[0] = x1 / (rad * rad) - x1;
        out[1] = -g * (rad * std::sin(c.x_eps + xt) - (1.0 + c.y_eps) * std::sin(c.x_eps)) -
                 eps * (pot_x(pp, c.x_eps + xt, c.y_eps + yt, eps) -
                        pot_x(pp, c.x_eps, c.y_eps, eps)) -
                 g * xt;
        return out;
    };
    sys.g = [ctx, g](const Vec& x, const Vec& y, double, double eps) -> Vec {
        const auto& c = ctx->at(eps);
        const auto& pp = ctx->p();
        const double xt = x[0], x1 = x[1], yt = y[0];
        const double rad = 1.0 + c.y_eps + yt;
        Vec out(2);
        out[0] = 0.0;
        out[1] = eps * x1 * x1 / (rad * rad * rad) +
                 eps * g * (std::cos(c.x_eps + xt) - std::cos(c.x_eps)) -
                 eps * eps * (pot_y(pp, c.x_eps + xt, c.y_eps + yt, eps) -
                              pot_y(pp, c.x_eps, c.y_eps, eps));
        return out;
    };

    // Invariant H(x, u, eps), u = y/eps, and its (D8) Taylor blocks.
    InvariantOracle inv;
    inv.H = [ctx, g](const Vec& x, const Vec& u, double eps) -> double {
        const auto& c = ctx->at(eps);
        const auto& pp = ctx->p();
        const double xt = x[0], x1 = x[1], v = u[0], u1 = u[1];
        const double rad = 1.0 + c.y_eps + eps * v;
        return x1 * x1 / (2.0 * rad * rad) + 0.5 * u1 * u1 + 0.5 * v * v +
               (eps == 0.0 ? 0.0 : (c.y_eps / eps) * v) +
               eps * (pot(pp, c.x_eps + xt, c.y_eps + eps * v, eps) -
                      pot(pp, c.x_eps, c.y_eps, eps)) -
               g * (rad * std::cos(c.x_eps + xt) - (1.0 + c.y_eps) * std::cos(c.x_eps));
    };
    inv.DH0 = [ctx, g](const Vec& x) {
        const auto& c = ctx->at(0.0);
        return (Vec(2) << g * std::sin(c.x_eps + x[0]) * (1.0 + c.y_eps), x[1]).finished();
    };

    InvariantExpansion ex;
    ex.H0 = [ctx, g](const Vec& x, double eps) -> double {
        const auto& c = ctx->at(eps);
        const auto& pp = ctx->p();
        const double xt = x[0], x1 = x[1];
        const double rad = 1.0 + c.y_eps;
        return x1 * x1 / (2.0 * rad * rad) -
               g * rad * (std::cos(c.x_eps + xt) - std::cos(c.x_eps)) +
               eps * (pot(pp, c.x_eps + xt, c.y_eps, eps) - pot(pp, c.x_eps, c.y_eps, eps));
    };
    ex.H1 = [ctx, g](const Vec& x, double eps) -> Vec {
        const auto& c = ctx->at(eps);
        const auto& pp = ctx->p();
        const double xt = x[0], x1 = x[1];
        const double rad = 1.0 + c.y_eps;
        Vec out(2);
        out[0] = -eps * x1 * x1 / (rad * rad * rad) +
                 (eps == 0.0 ? 0.0 : c.y_eps / eps) - eps * g * std::cos(c.x_eps + xt) +
                 eps * eps * pot_y(pp, c.x_eps + xt, c.y_eps, eps);
        out[1] = 0.0;
        return out;
    };
    ex.H2 = [ctx](const Vec& x, double eps) -> Mat {
        const auto& c = ctx->at(eps);
        const auto& pp = ctx->p();
        const double xt = x[0], x1 = x[1];
        const double rad = 1.0 + c.y_eps;
        Mat out = Mat::Zero(2, 2);
        out(0, 0) = 0.5 + 1.5 * eps * eps * x1 * x1 / (rad * rad * rad * rad) +
                    0.5 * eps * eps * eps * pot_yy(pp, c.x_eps + xt, c.y_eps, eps);
        out(1, 1) = 0.5;
        return out;
    };
    {
        auto H = inv.H;
        auto H0 = ex.H0;
        auto H1 = ex.H1;
        auto H2 = ex.H2;
        ex.H3 = [H, H0, H1, H2](const Vec& x, const Vec& u, double eps) -> double {
            return H(x, u, eps) - H0(x, eps) - H1(x, eps).dot(u) - u.dot(H2(x, eps) * u);
        };
    }
    // (D8) constants measured at the build eps: no center x-directions for the
    // pendulum, so c0 is conventionally 1.
    ex.c0 = 1.0;
    {
        const double h = 1e-6;
        Vec e1 = (Vec(2) << h, 0).finished(), e2 = (Vec(2) << 0, h).finished();
        const Vec d1 = (ex.H1(e1, eps_build) - ex.H1(Vec(-e1), eps_build)) / (2 * h);
        const Vec d2 = (ex.H1(e2, eps_build) - ex.H1(Vec(-e2), eps_build)) / (2 * h);
        ex.c1 = std::max(d1.cwiseAbs().maxCoeff(), d2.cwiseAbs().maxCoeff());
        const Mat H20 = ex.H2(Vec::Zero(2), eps_build);
        ex.c2 = H20.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff();
    }
    inv.expansion = ex;
    sys.inv = inv;

    BuiltinSystem b;
    b.sys = sys;
    const auto& cb = ctx->at(eps_build);

    // Separatrix of the limit system about the (eps = 0) steady state x = pi.
    const double sq = std::sqrt(gravity);
    HomoclinicReference h;
    h.x = [sq](double t) {
        return (Vec(2) << 4.0 * std::atan(std::exp(sq * t)) - 2.0 * kPi,
                2.0 * sq / std::cosh(sq * t))
            .finished();
    };
    h.xdot = [sq](double t) {
        const double sech = 1.0 / std::cosh(sq * t);
        return (Vec(2) << 2.0 * sq * sech, -2.0 * sq * sq * sech * std::tanh(sq * t)).finished();
    };
    h.decay_rate_forward = sq;
    h.decay_rate_backward = sq;
    h.x_plus = Vec::Zero(2);
    h.x_minus = (Vec(2) << -2.0 * kPi, 0.0).finished();
    h.loop_shift = (Vec(2) << 2.0 * kPi, 0.0).finished();
    b.ref.homoclinic = h;
    b.ref.fixed_point_unshifted = (Vec(4) << cb.x_eps, 0.0, cb.y_eps, 0.0).finished();
    b.ref.values["x_eps"] = cb.x_eps;
    b.ref.values["y_eps"] = cb.y_eps;
    b.ref.values["eps_build"] = eps_build;
    return b;
}

// ---------------------------------------------------------------------------
// Rigid pendulum (dormant fast block)
// ---------------------------------------------------------------------------

BuiltinSystem rigid_pendulum(double gravity, double damping,
                             const std::function<double(double)>& forcing) {
    SlowFastSystem sys;
    sys.n_x = 2;
    sys.n_y = 2;
    sys.A = (Mat(2, 2) << 0, 1, 0, 0).finished();
    sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    sys.fast_dormant = true;
    sys.autonomous_at_zero = true;
    sys.name = "rigid_pendulum";
    const double g = gravity, gamma = damping;
    auto F = forcing;
    sys.f = [g, gamma, F](const Vec& x, const Vec&, double t, double eps) -> Vec {
        Vec out(2);
        out[0] = 0.0;
        out[1] = -g * std::sin(x[0]) + eps * (-2.0 * gamma * x[1] + (F ? F(t) : 0.0));
        return out;
    };
    sys.g = [](const Vec&, const Vec&, double, double) { return Vec::Zero(2).eval(); };
    sys.x_period = (Vec(2) << 2.0 * kPi, 0.0).finished();

    InvariantOracle inv;
    inv.H = [g](const Vec& x, const Vec&, double) {
        return 0.5 * x[1] * x[1] - g * std::cos(x[0]) - g;
    };
    inv.DH0 = [g](const Vec& x) {
        return (Vec(2) << g * std::sin(x[0]), x[1]).finished();
    };
    sys.inv = inv;

    BuiltinSystem b;
    b.sys = sys;
    const double sq = std::sqrt(gravity);
    HomoclinicReference h;
    h.x = [sq](double t) {
        return (Vec(2) << 4.0 * std::atan(std::exp(sq * t)) - kPi, 2.0 * sq / std::cosh(sq * t))
            .finished();
    };
    h.xdot = [sq](double t) {
        const double sech = 1.0 / std::cosh(sq * t);
        return (Vec(2) << 2.0 * sq * sech, -2.0 * sq * sq * sech * std::tanh(sq * t)).finished();
    };
    h.decay_rate_forward = sq;
    h.decay_rate_backward = sq;
    h.x_plus = (Vec(2) << kPi, 0.0).finished();
    h.x_minus = (Vec(2) << -kPi, 0.0).finished();
    h.loop_shift = (Vec(2) << 2.0 * kPi, 0.0).finished();
    b.ref.homoclinic = h;
    b.ref.fixed_point_unshifted = (Vec(4) << kPi, 0.0, 0.0, 0.0).finished();
    return b;
}

// ---------------------------------------------------------------------------
// 4-D degenerate Hopf rescaling
// ---------------------------------------------------------------------------

BuiltinSystem hopf4d(const std::function<double(double)>& a11,
                     const std::function<double(double)>& a12,
                     const std::function<double(double)>& a21,
                     const std::function<double(double)>& a22,
                     const std::function<double(double)>& b) {
    auto ratio1 = [](const std::function<double(double)>& a, double mu) {
        // a(mu^2)/mu with a(0) = 0; derivative limit at mu = 0
        if (mu == 0.0) return 0.0;
        return a(mu * mu) / mu;
    };
    const double da21 = fd_partial(a21, 0.0);
    require(da21 > 0.0, ErrorKind::Parameter,
            "hopf4d: d a21/d eps (0) must be positive (hyperbolicity)");
    auto ratio2 = [da21](const std::function<double(double)>& a, double mu) {
        // a(mu^2)/mu^2 with a(0) = 0
        if (mu == 0.0) return da21;
        return a(mu * mu) / (mu * mu);
    };

    SlowFastSystem sys;
    sys.n_x = 2;
    sys.n_y = 2;
    sys.A = (Mat(2, 2) << 0, 1, da21, 0).finished();
    sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    sys.origin_fixed_point = true;
    sys.autonomous_at_zero = true;
    sys.name = "hopf4d";
    sys.f = [a11, a12, a21, a22, ratio1, ratio2, da21](const Vec& x, const Vec& y, double,
                                                       double mu) -> Vec {
        const double eps = mu * mu;
        Vec out(2);
        out[0] = ratio1(a11, mu) * x[0] + a12(eps) * x[1];
        out[1] = (ratio2(a21, mu) - da21) * x[0] + ratio1(a22, mu) * x[1] + x[0] * x[0] +
                 y[0] * y[0];
        return out;
    };
    sys.g = [b, ratio1](const Vec& x, const Vec& y, double, double mu) -> Vec {
        Vec out(2);
        out[0] = ratio1(b, mu) * y[0];
        out[1] = ratio1(b, mu) * y[1] + mu * x[0] * y[0];
        return out;
    };

    BuiltinSystem out;
    out.sys = sys;
    out.ref.fixed_point_unshifted = Vec::Zero(4);
    out.ref.values["da21"] = da21;
    return out;
}

// ---------------------------------------------------------------------------
// Quadratic test systems (known graphs)
// ---------------------------------------------------------------------------

BuiltinSystem test_quadratic(QuadraticKind kind) {
    SlowFastSystem sys;
    sys.n_y = 2;
    sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    sys.fast_dormant = true;
    sys.origin_fixed_point = true;
    sys.autonomous_at_zero = true;
    sys.g = [](const Vec&, const Vec&, double, double) { return Vec::Zero(2).eval(); };
    BuiltinSystem b;

    switch (kind) {
        case QuadraticKind::StableGraph:
            // x1' = -x1, x2' = 2 x2 + x1^2; stable manifold x2 = -x1^2/4
            sys.n_x = 2;
            sys.A = (Mat(2, 2) << -1, 0, 0, 2).finished();
            sys.f = [](const Vec& x, const Vec&, double, double) {
                return (Vec(2) << 0.0, x[0] * x[0]).finished();
            };
            sys.jac = [](const Vec& x, const Vec&, double, double) {
                JacobianBlocks jb;
                jb.fx = (Mat(2, 2) << 0, 0, 2 * x[0], 0).finished();
                jb.fy = Mat::Zero(2, 2);
                jb.gx = Mat::Zero(2, 2);
                jb.gy = Mat::Zero(2, 2);
                jb.fe = Vec::Zero(2);
                jb.ge = Vec::Zero(2);
                jb.ft = Vec::Zero(2);
                jb.gt = Vec::Zero(2);
                return jb;
            };
            sys.name = "quad_stable";
            b.ref.graph_coefficient = -0.25;
            break;
        case QuadraticKind::UnstableGraph:
            // x1' = x1, x2' = -x2 + x1^2; unstable manifold x2 = x1^2/3
            sys.n_x = 2;
            sys.A = (Mat(2, 2) << 1, 0, 0, -1).finished();
            sys.f = [](const Vec& x, const Vec&, double, double) {
                return (Vec(2) << 0.0, x[0] * x[0]).finished();
            };
            sys.jac = [](const Vec& x, const Vec&, double, double) {
                JacobianBlocks jb;
                jb.fx = (Mat(2, 2) << 0, 0, 2 * x[0], 0).finished();
                jb.fy = Mat::Zero(2, 2);
                jb.gx = Mat::Zero(2, 2);
                jb.gy = Mat::Zero(2, 2);
                jb.fe = Vec::Zero(2);
                jb.ge = Vec::Zero(2);
                jb.ft = Vec::Zero(2);
                jb.gt = Vec::Zero(2);
                return jb;
            };
            sys.name = "quad_unstable";
            b.ref.graph_coefficient = 1.0 / 3.0;
            break;
        case QuadraticKind::CenterPlane:
            // x1 center; x2 stable, x3 unstable; f vanishes on {x2 = x3 = 0}
            sys.n_x = 3;
            sys.A = (Mat(3, 3) << 0, 0, 0, 0, -1, 0, 0, 0, 1).finished();
            sys.f = [](const Vec& x, const Vec&, double, double) {
                return (Vec(3) << 0.0, x[0] * x[0] * x[1], x[0] * x[0] * x[2]).finished();
            };
            sys.name = "quad_center";
            b.ref.graph_coefficient = 0.0;
            break;
    }
    b.sys = sys;
    b.ref.fixed_point_unshifted = Vec::Zero(sys.dim());
    return b;
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

namespace {

double get_or(const std::map<std::string, double>& m, const std::string& k, double dflt) {
    auto it = m.find(k);
    return it == m.end() ? dflt : it->second;
}

}  // namespace

const std::vector<CatalogEntry>& catalog() {
    static const std::vector<CatalogEntry> entries = {
        {"elastic_pendulum",
         "dissipative elastic pendulum, shifted about the inverted steady state (decoupled)",
         {{"gravity", 1.0}, {"gamma", 0.1}, {"eps_build", 1e-2}},
         [](const std::map<std::string, double>& p) {
             return elastic_pendulum_dissipative(get_or(p, "gravity", 1.0),
                                                 get_or(p, "gamma", 0.1), {},
                                                 get_or(p, "eps_build", 1e-2), true);
         }},
        {"elastic_pendulum_raw",
         "dissipative elastic pendulum without the linear decoupling transform",
         {{"gravity", 1.0}, {"gamma", 0.1}, {"eps_build", 1e-2}},
         [](const std::map<std::string, double>& p) {
             return elastic_pendulum_dissipative(get_or(p, "gravity", 1.0),
                                                 get_or(p, "gamma", 0.1), {},
                                                 get_or(p, "eps_build", 1e-2), false);
         }},
        {"elastic_pendulum_conservative",
         "conservative elastic pendulum with invariant energy and (D8) blocks",
         {{"gravity", 1.0}, {"eps_build", 1e-2}},
         [](const std::map<std::string, double>& p) {
             return elastic_pendulum_conservative(get_or(p, "gravity", 1.0), nullptr,
                                                  get_or(p, "eps_build", 1e-2));
         }},
        {"rigid_pendulum",
         "rigid pendulum with dormant fast block; damping and sin(t) forcing at O(eps)",
         {{"gravity", 1.0}, {"gamma", 0.0}, {"sin_forcing", 0.0}},
         [](const std::map<std::string, double>& p) {
             const double amp = get_or(p, "sin_forcing", 0.0);
             std::function<double(double)> F;
             if (amp != 0.0) F = [amp](double t) { return amp * std::sin(t); };
             return rigid_pendulum(get_or(p, "gravity", 1.0), get_or(p, "gamma", 0.0), F);
         }},
        {"hopf4d",
         "4-D degenerate-Hopf model in rescaled variables (eps argument is mu)",
         {{"a21_slope", 1.0}, {"b_slope", 1.0}},
         [](const std::map<std::string, double>& p) {
             const double s = get_or(p, "a21_slope", 1.0);
             const double bs = get_or(p, "b_slope", 1.0);
             auto zero = [](double) { return 0.0; };
             return hopf4d(zero, zero, [s](double e) { return s * e; }, zero,
                           [bs](double e) { return bs * e; });
         }},
        {"quad_stable", "quadratic test system, stable graph x2 = -x1^2/4", {},
         [](const std::map<std::string, double>&) {
             return test_quadratic(QuadraticKind::StableGraph);
         }},
        {"quad_unstable", "quadratic test system, unstable graph x2 = x1^2/3", {},
         [](const std::map<std::string, double>&) {
             return test_quadratic(QuadraticKind::UnstableGraph);
         }},
        {"quad_center", "quadratic test system with invariant center plane", {},
         [](const std::map<std::string, double>&) {
             return test_quadratic(QuadraticKind::CenterPlane);
         }},
    };
    return entries;
}

BuiltinSystem make_builtin(const std::string& name, const std::map<std::string, double>& params) {
    for (const auto& e : catalog()) {
        if (e.name == name) return e.make(params);
    }
    throw Error(ErrorKind::Parameter, "unknown builtin system '" + name + "'");
}

std::string export_document(const std::string& name) {
    // The pendulum entries are defined through the build-time steady-state
    // shift, which is not expressible in the document language; they are
    // exported in unshifted form with the shift noted in a comment.
    std::ostringstream os;
    if (name == "rigid_pendulum") {
        os << "# rigid pendulum, dormant fast block\n"
           << "[dims]\nn_x = 2\nn_y = 2\n\n"
           << "[matrix A]\n0, 1;\n0, 0\n\n[matrix J]\n0, 1;\n-1, 0\n\n"
           << "[field f]\nf1 = 0\nf2 = -g*sin(x1) - 2*eps*gamma*x2\n\n"
           << "[field g]\ng1 = 0\ng2 = 0\n\n"
           << "[params]\ng = 1\ngamma = 0\n\n"
           << "[flags]\norigin_fixed_point = false\nautonomous_at_zero = true\n";
        return os.str();
    }
    if (name == "quad_stable" || name == "quad_unstable") {
        const bool stable = name == "quad_stable";
        os << "# quadratic test system, known graph coefficient "
           << (stable ? "-1/4" : "1/3") << "\n"
           << "[dims]\nn_x = 2\nn_y = 2\n\n"
           << "[matrix A]\n" << (stable ? "-1, 0;\n0, 2" : "1, 0;\n0, -1")
           << "\n\n[matrix J]\n0, 1;\n-1, 0\n\n"
           << "[field f]\nf1 = 0\nf2 = x1^2\n\n[field g]\ng1 = 0\ng2 = 0\n\n"
           << "[flags]\norigin_fixed_point = true\nautonomous_at_zero = true\n";
        return os.str();
    }
    if (name == "elastic_pendulum" || name == "elastic_pendulum_raw") {
        os << "# dissipative elastic pendulum, eq-6.41 scaling, UNSHIFTED variables\n"
           << "# (x1 = angle, x2 = angular momentum, y1 = u, y2 = u1; the builtin\n"
           << "#  shifts the steady state (pi, 0, u_eps, u1_eps) to the origin at load)\n"
           << "[dims]\nn_x = 2\nn_y = 2\n\n"
           << "[matrix A]\n0, 1;\n0, 0\n\n[matrix J]\n0, 1;\n-1, 0\n\n"
           << "[field f]\n"
           << "f1 = x2*(1/(1 + eps*y1)^2 - 1)\n"
           << "f2 = -g*(1 + eps*y1)*sin(x1) - 2*eps*gamma*x2\n\n"
           << "[field g]\n"
           << "g1 = -eps*gamma*y1\n"
           << "g2 = -eps*gamma*y2 + x2^2/(1 + eps*y1)^3 + eps^3*gamma^2*y1 + g*cos(x1)\n\n"
           << "[params]\ng = 1\ngamma = 0.1\n\n"
           << "[flags]\norigin_fixed_point = false\nautonomous_at_zero = true\n";
        return os.str();
    }
    if (name == "elastic_pendulum_conservative") {
        os << "# conservative elastic pendulum, eq-6.45 scaling, UNSHIFTED variables\n"
           << "# (x1 = angle, x2 = angular momentum, y1 = radial, y2 = eps*d(radial)/dt;\n"
           << "#  the builtin shifts the steady state (x_eps, 0, y_eps, 0) to the origin)\n"
           << "[dims]\nn_x = 2\nn_y = 2\n\n"
           << "[matrix A]\n0, 1;\n0, 0\n\n[matrix J]\n0, 1;\n-1, 0\n\n"
           << "[field f]\n"
           << "f1 = x2/(1 + y1)^2 - x2\n"
           << "f2 = -g*(1 + y1)*sin(x1)\n\n"
           << "[field g]\n"
           << "g1 = 0\n"
           << "g2 = eps*x2^2/(1 + y1)^3 + eps*g*cos(x1)\n\n"
           << "[invariant H]\n"
           << "H = x2^2/(2*(1 + eps*u1)^2) + u2^2/2 + u1^2/2 - g*(1 + eps*u1)*cos(x1)\n\n"
           << "[params]\ng = 1\n\n"
           << "[flags]\norigin_fixed_point = false\nautonomous_at_zero = true\n";
        return os.str();
    }
    if (name == "hopf4d") {
        os << "# 4-D degenerate-Hopf model in rescaled variables; eps plays mu\n"
           << "[dims]\nn_x = 2\nn_y = 2\n\n"
           << "[matrix A]\n0, 1;\n1, 0\n\n[matrix J]\n0, 1;\n-1, 0\n\n"
           << "[field f]\nf1 = 0\nf2 = x1^2 + y1^2\n\n"
           << "[field g]\ng1 = eps*y1\ng2 = eps*y2 + eps*x1*y1\n\n"
           << "[flags]\norigin_fixed_point = true\nautonomous_at_zero = true\n";
        return os.str();
    }
    if (name == "quad_center") {
        os << "# quadratic test system with invariant center plane {x2 = x3 = 0}\n"
           << "[dims]\nn_x = 3\nn_y = 2\n\n"
           << "[matrix A]\n0, 0, 0;\n0, -1, 0;\n0, 0, 1\n\n[matrix J]\n0, 1;\n-1, 0\n\n"
           << "[field f]\nf1 = 0\nf2 = x1^2*x2\nf3 = x1^2*x3\n\n"
           << "[field g]\ng1 = 0\ng2 = 0\n\n"
           << "[flags]\norigin_fixed_point = true\nautonomous_at_zero = true\n";
        return os.str();
    }
    throw Error(ErrorKind::Parameter, "unknown builtin system '" + name + "'");
}

}  // namespace nesp::systems
