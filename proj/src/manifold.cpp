#include "nesp/manifold.hpp"

#include <cstdio>
#include <cstdlib>
#include <future>
#include <mutex>
#include <sstream>

namespace nesp::manifold {

using integrate::IntegratorOptions;
using integrate::Trajectory;
using linalg::Propagator;

// ---------------------------------------------------------------------------
// Cut-off
// ---------------------------------------------------------------------------

double cutoff_lambda(double rho) {
    if (rho <= 1.0 / 3.0) return 1.0;
    if (rho >= 1.0) return 0.0;
    const double s = (rho - 1.0 / 3.0) * 1.5;  // in (0, 1)
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

double cutoff_lambda_prime(double rho) {
    if (rho <= 1.0 / 3.0 || rho >= 1.0) return 0.0;
    const double s = (rho - 1.0 / 3.0) * 1.5;
    return -1.5 * (30.0 * s * s - 60.0 * s * s * s + 30.0 * s * s * s * s);
}

CutSystem::CutSystem(const SlowFastSystem& sys, double r)
    : sys_(std::make_shared<SlowFastSystem>(sys)), r_(r) {
    require(r > 0.0, ErrorKind::Parameter, "CutSystem: cutoff radius must be positive");
    const Vec x0 = Vec::Zero(sys.n_x), y0 = Vec::Zero(sys.n_y);
    const JacobianBlocks b = model::jacobian_blocks(sys, x0, y0, 0.0, 0.0);
    f_x_ = b.fx;
    f_y_ = b.fy;
    g_x_ = b.gx;
    g_y_ = b.gy;
    A_f_ = sys.A + f_x_;
}

Vec CutSystem::F1(const Vec& x, const Vec& y, double t, double eps) const {
    return sys_->f(x, y, t, eps) - f_x_ * x - f_y_ * y;
}

Vec CutSystem::G1(const Vec& x, const Vec& y, double t, double eps) const {
    return sys_->g(x, y, t, eps) - g_x_ * x - g_y_ * y;
}

Vec CutSystem::F(const Vec& x, const Vec& y, double t, double eps) const {
    const double lam = cutoff_lambda((x.norm() + y.norm()) / r_);
    if (lam == 0.0) return Vec::Zero(sys_->n_x);
    return lam * F1(x, y, t, eps);
}

Vec CutSystem::G(const Vec& x, const Vec& y, double t, double eps) const {
    const double lam = cutoff_lambda((x.norm() + y.norm()) / r_);
    if (lam == 0.0) return Vec::Zero(sys_->n_y);
    return lam * G1(x, y, t, eps);
}

double CutSystem::measure_rbar(double eps, int probes) const {
    ProbeRng rng(7);
    const int nx = sys_->n_x, ny = sys_->n_y;
    double sup = 0.0;
    for (int k = 0; k < probes; ++k) {
        // points spread over the cut ball |x| + |y| <= r
        Vec x = rng.vector(nx, r_);
        Vec y = rng.vector(ny, r_);
        const double rho = x.norm() + y.norm();
        if (rho > r_) {
            const double scale = rng.uniform(0.0, 1.0) * r_ / rho;
            x *= scale;
            y *= scale;
        }
        const double t = rng.uniform(-3.0, 3.0);
        Mat D(nx + ny, nx + ny);
        Vec xp, xm, yp, ym;
        for (int j = 0; j < nx; ++j) {
            const double h = fd_step(x[j]);
            xp = x; xm = x;
            xp[j] += h; xm[j] -= h;
            D.col(j).head(nx) = (F1(xp, y, t, eps) - F1(xm, y, t, eps)) / (2 * h);
            D.col(j).tail(ny) = (G1(xp, y, t, eps) - G1(xm, y, t, eps)) / (2 * h);
        }
        for (int j = 0; j < ny; ++j) {
            const double h = fd_step(y[j]);
            yp = y; ym = y;
            yp[j] += h; ym[j] -= h;
            D.col(nx + j).head(nx) = (F1(x, yp, t, eps) - F1(x, ym, t, eps)) / (2 * h);
            D.col(nx + j).tail(ny) = (G1(x, yp, t, eps) - G1(x, ym, t, eps)) / (2 * h);
        }
        sup = std::max(sup, linalg::opnorm(D));
    }
    return sup;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string LPReport::to_json() const {
    std::ostringstream os;
    os.precision(12);
    os << "{\"sigma1\": " << contraction.sigma1 << ", \"sigma2\": " << contraction.sigma2
       << ", \"sigma3\": " << contraction.sigma3 << ", \"eps_star\": " << contraction.eps_star
       << ", \"r_bar\": " << contraction.r_bar << ", \"K\": " << contraction.K
       << ", \"certified\": " << (contraction.certified() ? "true" : "false")
       << ", \"eta\": " << eta << ", \"T_trunc\": " << T_trunc
       << ", \"iterations\": " << iterations << ", \"final_delta\": " << final_delta
       << ", \"contraction_ratio\": " << contraction_ratio
       << ", \"fixed_point_residual\": " << fixed_point_residual << "}";
    return os.str();
}

// ---------------------------------------------------------------------------
// Solver internals
// ---------------------------------------------------------------------------

namespace {

struct Subspace {
    Mat B;      // n x d orthonormal basis
    Mat C;      // d x n coordinate functional: B C = P, C B = I
    Mat A_sub;  // d x d restriction of A_f
    int d = 0;
};

Subspace make_subspace(const Mat& A_f, const Mat& P, const Mat& basis) {
    Subspace s;
    s.d = static_cast<int>(basis.cols());
    s.B = basis;
    if (s.d == 0) {
        s.C = Mat(0, A_f.rows());
        s.A_sub = Mat(0, 0);
        return s;
    }
    // C = (B^T B)^{-1} B^T P; B is orthonormal so B^T B = I
    s.C = s.B.transpose() * P;
    s.A_sub = s.C * A_f * s.B;
    return s;
}

SlowFastSystem reverse_system(const SlowFastSystem& sys) {
    SlowFastSystem r = sys;
    r.A = -sys.A;
    r.J = -sys.J;
    const FieldFn f = sys.f, g = sys.g;
    r.f = [f](const Vec& x, const Vec& y, double t, double eps) { return (-f(x, y, -t, eps)).eval(); };
    r.g = [g](const Vec& x, const Vec& y, double t, double eps) { return (-g(x, y, -t, eps)).eval(); };
    r.jac = nullptr;
    r.name = sys.name + "(reversed)";
    return r;
}

DichotomySplit reverse_split(const DichotomySplit& s) {
    DichotomySplit r;
    r.A_f = -s.A_f;
    r.P_s = s.P_u;
    r.P_u = s.P_s;
    r.P_c = s.P_c;
    r.basis_s = s.basis_u;
    r.basis_u = s.basis_s;
    r.basis_c = s.basis_c;
    r.dim_s = s.dim_u;
    r.dim_u = s.dim_s;
    r.dim_c = s.dim_c;
    r.gaps.a1 = -s.gaps.a2_prime;
    r.gaps.a2 = -s.gaps.a1_prime;
    r.gaps.a1_prime = -s.gaps.a2;
    r.gaps.a2_prime = -s.gaps.a1;
    r.K = s.K;
    return r;
}

Mat hcat(const Mat& a, const Mat& b) {
    Mat out(a.rows(), a.cols() + b.cols());
    if (a.cols() > 0) out.leftCols(a.cols()) = a;
    if (b.cols() > 0) out.rightCols(b.cols()) = b;
    return out;
}

}  // namespace

struct LPSolver::Roles {
    Subspace keep;  // subspace carrying the boundary data at t = 0
    Subspace out;   // complementary x-subspace determined by the fixed point
    Mat P_keep, P_out;
    double a_lo = 0, a_hi = 0;  // rate window for eta
    double eta = 0;
};

struct LPSolver::BaseOrbit {
    std::function<Vec(double)> x;  // on [0, T]
    std::function<Vec(double)> y;
    bool trivial = true;  // identically the origin
};

LPSolver::LPSolver(const SlowFastSystem& sys, const DichotomySplit& split, double eps,
                   const LPConfig& cfg)
    : split_(split), eps_(eps), cfg_(cfg), dormant_(sys.fast_dormant) {
    require(eps >= 0.0, ErrorKind::Parameter, "LPSolver: eps must be >= 0");
    cut_ = std::make_shared<CutSystem>(sys, cfg.cutoff_radius);
    prop_Af_ = std::make_shared<Propagator>(cut_->A_f());
    Mat Mfast = cut_->g_y();
    if (eps > 0.0) Mfast += sys.J / eps;
    prop_fast_ = std::make_shared<Propagator>(Mfast);

    const double eta_cu = std::isfinite(cfg.eta)
                              ? cfg.eta
                              : 0.5 * (split_.gaps.a1 + split_.gaps.a2);
    cert_ = certify(eta_cu);
    if (cfg_.enforce_certificate && !cert_.certified()) {
        std::ostringstream os;
        os << "LPSolver: contraction certificate failed (sigma1=" << cert_.sigma1
           << ", sigma2=" << cert_.sigma2 << ", sigma3=" << cert_.sigma3 << ")";
        throw Error(ErrorKind::Numerical, os.str());
    }
}

ContractionReport LPSolver::certify(double eta) const {
    ContractionReport rep;
    const auto& gaps = split_.gaps;
    const double K = split_.K;
    rep.K = K;
    rep.r_bar = cut_->measure_rbar(eps_);
    const double fy = linalg::opnorm(cut_->f_y());
    const double gx = linalg::opnorm(cut_->g_x());
    const double jinv = linalg::opnorm(cut_->sys().J.inverse());
    const double c0 = std::max({fy, gx, linalg::opnorm(cut_->g_y()), jinv, 1.0});
    const double s1 = 0.5 - c0 * c0 * eps_;
    const double denom_a2 = std::max(gaps.a2 - eta, 1e-6);
    const double denom_a1 = std::max(eta - gaps.a1, 1e-6);
    auto sigma23 = [&](double es) {
        const double s2 =
            1.0 - 3.0 * (K / denom_a2 + K / denom_a1 + 1.0) * (rep.r_bar + es * fy);
        const double s3 = 1.0 - (3.0 / es) * (K / denom_a2 + K + 1.0) *
                                    (rep.r_bar + 2.0 * eps_ * jinv * gx);
        return std::pair<double, double>(s2, s3);
    };
    // eps_star: spec default max(eps, 1e-3) makes sigma3 vacuous; choose it by
    // maximizing min(sigma2, sigma3) over [max(eps,1e-3), 1] instead (ledgered).
    double best_es = std::max(eps_, 1e-3), best = -1e300;
    if (cfg_.eps_star > 0.0) {
        best_es = cfg_.eps_star;
    } else {
        for (int i = 0; i <= 30; ++i) {
            const double es =
                std::exp(std::log(std::max(eps_, 1e-3)) +
                         (std::log(1.0) - std::log(std::max(eps_, 1e-3))) * i / 30.0);
            const auto [s2, s3] = sigma23(es);
            if (std::min(s2, s3) > best) {
                best = std::min(s2, s3);
                best_es = es;
            }
        }
    }
    const auto [s2, s3] = sigma23(best_es);
    rep.sigma1 = s1;
    rep.sigma2 = s2;
    rep.sigma3 = s3;
    rep.eps_star = best_es;
    return rep;
}

LPSolver::Roles LPSolver::roles_cu() const {
    Roles r;
    r.keep = make_subspace(cut_->A_f(), split_.P_cu(), hcat(split_.basis_c, split_.basis_u));
    r.out = make_subspace(cut_->A_f(), split_.P_s, split_.basis_s);
    r.P_keep = split_.P_cu();
    r.P_out = split_.P_s;
    r.a_lo = split_.gaps.a1;
    r.a_hi = split_.gaps.a2;
    r.eta = std::isfinite(cfg_.eta) ? cfg_.eta : 0.5 * (r.a_lo + r.a_hi);
    require(r.eta > r.a_lo && r.eta < r.a_hi, ErrorKind::Parameter,
            "LPSolver: eta outside (a1, a2)");
    return r;
}

LPSolver::Roles LPSolver::roles_s() const {
    Roles r;
    r.keep = make_subspace(cut_->A_f(), split_.P_s, split_.basis_s);
    r.out = make_subspace(cut_->A_f(), split_.P_cu(), hcat(split_.basis_c, split_.basis_u));
    r.P_keep = split_.P_s;
    r.P_out = split_.P_cu();
    r.a_lo = split_.gaps.a1;
    r.a_hi = std::min(split_.gaps.a2, 0.0);
    // decay window (a1, min{a2, 0}); for dormant-fast systems a2 may exceed 0
    double hi = r.a_hi;
    if (hi <= r.a_lo) hi = 0.5 * r.a_lo;  // degenerate window guard
    r.eta = std::isfinite(cfg_.eta) ? cfg_.eta : 0.5 * (r.a_lo + hi);
    require(r.eta > r.a_lo && r.eta < 0.0, ErrorKind::Parameter,
            "LPSolver: stable-side eta outside (a1, min{a2,0})");
    return r;
}

// ---------------------------------------------------------------------------
// The minus-side solve (center-unstable type), t in [-T, 0]
// ---------------------------------------------------------------------------

LPPoint LPSolver::solve_minus(const Roles& roles, const Vec& xi_x, const Vec& xi_y, double t0,
                              bool slow_only, bool /*cut_fields*/) const {
    const auto& cs = *cut_;
    const int nx = cs.sys().n_x, ny = cs.sys().n_y;
    const bool with_y = !slow_only && !dormant_;
    const double tol = cfg_.picard_tol;
    const double T = cfg_.t_trunc > 0.0
                         ? cfg_.t_trunc
                         : std::min(200.0, std::log(100.0 / tol) / (roles.eta - roles.a_lo));

    auto prop_keep = std::make_shared<Propagator>(roles.keep.A_sub);
    const Vec c0 = roles.keep.C * xi_x;
    const Vec w0 = slow_only ? Vec(Vec::Zero(ny)) : xi_y;

    // iterate representation: x(t) = B_keep c_keep(t) + B_out c_out(t),
    // y(t) = e^{t (J/eps + g_y)} w(t)
    struct Iter {
        std::function<Vec(double)> c_keep, c_out, w;
    };
    auto eval_xy = [&, this](const Iter& it, double t, Vec& x, Vec& y) {
        x = Vec::Zero(nx);
        if (roles.keep.d > 0) x += roles.keep.B * it.c_keep(t);
        if (roles.out.d > 0) x += roles.out.B * it.c_out(t);
        if (slow_only) {
            y = Vec::Zero(ny);
        } else {
            y = prop_fast_->apply(t, it.w(t));
        }
    };

    Iter cur;
    cur.c_keep = [prop_keep, c0](double t) { return prop_keep->apply(t, c0); };
    cur.c_out = [d = roles.out.d](double) { return Vec::Zero(d); };
    cur.w = [w0](double) { return w0; };

    LPPoint out;
    out.report.contraction = cert_;
    out.report.eta = roles.eta;
    out.report.T_trunc = T;

    const int n_samples = 41;
    double prev_delta = std::numeric_limits<double>::infinity();
    double ratio = 0.0;
    int rising = 0;
    bool converged = false;
    std::shared_ptr<Trajectory> leg_keep, leg_out, leg_w;

    for (int iter = 0; iter < cfg_.max_iters; ++iter) {
        const Iter prev = cur;
        // sources along the previous iterate
        auto src_x = [&, this](double t) -> Vec {
            Vec x, y;
            eval_xy(prev, t, x, y);
            Vec s = cs.F(x, y, t + t0, eps_);
            if (!slow_only) s += cs.f_y() * y;
            return s;
        };

        // keep-leg: backward from the boundary data at 0
        std::shared_ptr<Trajectory> new_keep, new_out, new_w;
        if (roles.keep.d > 0) {
            integrate::RhsFn rhs = [&](double t, const Vec& c, Vec& dc) {
                dc = roles.keep.A_sub * c + roles.keep.C * src_x(t);
            };
            new_keep = std::make_shared<Trajectory>(integrate::integrate_ode(rhs, c0, 0.0, -T,
                                                                             cfg_.ode));
        }
        // w-leg: backward from xi_y
        if (with_y) {
            integrate::RhsFn rhs = [&, this](double t, const Vec& w, Vec& dw) {
                (void)w;
                Vec x, y;
                eval_xy(prev, t, x, y);
                dw = prop_fast_->apply(-t, Vec(cs.G(x, y, t + t0, eps_) + cs.g_x() * x));
            };
            new_w = std::make_shared<Trajectory>(integrate::integrate_ode(rhs, w0, 0.0, -T,
                                                                          cfg_.ode));
        }
        // out-leg: forward from 0 at -T (tail truncated)
        if (roles.out.d > 0) {
            integrate::RhsFn rhs = [&](double t, const Vec& c, Vec& dc) {
                dc = roles.out.A_sub * c + roles.out.C * src_x(t);
            };
            new_out = std::make_shared<Trajectory>(integrate::integrate_ode(
                rhs, Vec::Zero(roles.out.d), -T, 0.0, cfg_.ode));
        }

        Iter next;
        next.c_keep = new_keep ? std::function<Vec(double)>(
                                     [new_keep](double t) { return new_keep->eval(t); })
                               : cur.c_keep;
        next.c_out = new_out ? std::function<Vec(double)>(
                                   [new_out](double t) { return new_out->eval(t); })
                             : cur.c_out;
        next.w = new_w ? std::function<Vec(double)>([new_w](double t) { return new_w->eval(t); })
                       : cur.w;

        // weighted-norm increment on a sample grid
        double delta = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            const double t = -T + (T * i) / (n_samples - 1);
            // weight capped at 1: the exponential weight is the proof device;
            // for stopping, geometric decay holds in the plain norm as well,
            // and the cap keeps integrator tail noise below the tolerance
            const double weight = std::min(1.0, std::exp(-roles.eta * t));
            Vec dx = Vec::Zero(nx);
            if (roles.keep.d > 0) dx += roles.keep.B * (next.c_keep(t) - prev.c_keep(t));
            if (roles.out.d > 0) dx += roles.out.B * (next.c_out(t) - prev.c_out(t));
            double dy = 0.0;
            if (with_y) dy = (next.w(t) - prev.w(t)).norm() / cert_.eps_star;
            delta = std::max(delta, weight * (dx.norm() + dy));
        }
        cur = next;
        leg_keep = new_keep;
        leg_out = new_out;
        leg_w = new_w;
        out.report.iterations = iter + 1;
        out.report.final_delta = delta;
        if (iter > 0 && prev_delta > 0) ratio = delta / prev_delta;
        out.report.contraction_ratio = ratio;
        if (delta < tol) {
            converged = true;
            break;
        }
        if (iter > 2 && delta > prev_delta) {
            if (++rising >= 3)
                throw Error(ErrorKind::Numerical,
                            "LPSolver: Picard iteration diverging (delta rising)");
        } else {
            rising = 0;
        }
        prev_delta = delta;
    }
    require(converged, ErrorKind::Numerical,
            "LPSolver: Picard did not converge within max iterations (last delta " +
                std::to_string(out.report.final_delta) + ")");
    out.report.fixed_point_residual = out.report.final_delta;

    // graph value and phase point at t = 0
    out.h = Vec::Zero(nx);
    if (roles.out.d > 0) out.h = roles.out.B * cur.c_out(0.0);
    Vec x0v, y0v;
    eval_xy(cur, 0.0, x0v, y0v);
    out.point = Vec(nx + ny);
    out.point.head(nx) = x0v;
    out.point.tail(ny) = y0v;
    const Iter final_it = cur;
    auto eval_pair = std::make_shared<Iter>(final_it);
    auto self_prop = prop_fast_;
    const auto rkeep = roles.keep, rout = roles.out;
    out.orbit_x = [eval_pair, rkeep, rout, nx](double t) {
        Vec x = Vec::Zero(nx);
        if (rkeep.d > 0) x += rkeep.B * eval_pair->c_keep(t);
        if (rout.d > 0) x += rout.B * eval_pair->c_out(t);
        return x;
    };
    const bool so = slow_only;
    out.orbit_y = [eval_pair, self_prop, so, ny](double t) {
        if (so) return Vec(Vec::Zero(ny));
        return self_prop->apply(t, eval_pair->w(t));
    };
    out.t_lo = -T;
    out.t_hi = 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// The plus-side solve (stable type / fibers), t in [0, T]
// ---------------------------------------------------------------------------

LPPoint LPSolver::solve_plus(const Roles& roles, const Vec& xi_x, double t0, bool slow_only,
                             bool cut_fields, const BaseOrbit* base) const {
    const auto& cs = *cut_;
    const int nx = cs.sys().n_x, ny = cs.sys().n_y;
    const bool with_y = !slow_only && !dormant_;
    const double tol = cfg_.picard_tol;
    const double T = cfg_.t_trunc > 0.0
                         ? cfg_.t_trunc
                         : std::min(200.0, std::log(100.0 / tol) / (-roles.eta));

    auto prop_keep = std::make_shared<Propagator>(roles.keep.A_sub);
    const Vec c0 = roles.keep.C * xi_x;

    auto field_F = [&, this](const Vec& x, const Vec& y, double t) -> Vec {
        if (base && !base->trivial) {
            const Vec bx = base->x(t);
            const Vec by = base->y(t);
            return cs.F(Vec(bx + x), Vec(by + y), t + t0, eps_) - cs.F(bx, by, t + t0, eps_);
        }
        return cut_fields ? cs.F(x, y, t + t0, eps_) : cs.F1(x, y, t + t0, eps_);
    };
    auto field_G = [&, this](const Vec& x, const Vec& y, double t) -> Vec {
        if (base && !base->trivial) {
            const Vec bx = base->x(t);
            const Vec by = base->y(t);
            return cs.G(Vec(bx + x), Vec(by + y), t + t0, eps_) - cs.G(bx, by, t + t0, eps_);
        }
        return cut_fields ? cs.G(x, y, t + t0, eps_) : cs.G1(x, y, t + t0, eps_);
    };

    struct Iter {
        std::function<Vec(double)> c_keep, c_out, w;
    };
    auto eval_xy = [&, this](const Iter& it, double t, Vec& x, Vec& y) {
        x = Vec::Zero(nx);
        if (roles.keep.d > 0) x += roles.keep.B * it.c_keep(t);
        if (roles.out.d > 0) x += roles.out.B * it.c_out(t);
        if (slow_only || !with_y) {
            y = Vec::Zero(ny);
        } else {
            y = prop_fast_->apply(t, it.w(t));
        }
    };

    Iter cur;
    cur.c_keep = [prop_keep, c0](double t) { return prop_keep->apply(t, c0); };
    cur.c_out = [d = roles.out.d](double) { return Vec::Zero(d); };
    cur.w = [ny](double) { return Vec(Vec::Zero(ny)); };

    LPPoint out;
    out.report.contraction = cert_;
    out.report.eta = roles.eta;
    out.report.T_trunc = T;

    const int n_samples = 41;
    const double escape_radius = 2.0 * cs.radius();
    double prev_delta = std::numeric_limits<double>::infinity();
    double ratio = 0.0;
    int rising = 0;
    bool converged = false;

    for (int iter = 0; iter < cfg_.max_iters; ++iter) {
        const Iter prev = cur;
        auto src_x = [&, this](double t) -> Vec {
            Vec x, y;
            eval_xy(prev, t, x, y);
            if (!cut_fields && x.norm() + y.norm() > escape_radius)
                throw Error(ErrorKind::Numerical,
                            "LPSolver: orbit escaped the validity ball (radius error)");
            Vec s = field_F(x, y, t);
            if (!slow_only) s += cs.f_y() * y;
            return s;
        };

        std::shared_ptr<Trajectory> new_keep, new_out, new_w;
        if (roles.keep.d > 0) {
            integrate::RhsFn rhs = [&](double t, const Vec& c, Vec& dc) {
                dc = roles.keep.A_sub * c + roles.keep.C * src_x(t);
            };
            new_keep = std::make_shared<Trajectory>(integrate::integrate_ode(rhs, c0, 0.0, T,
                                                                             cfg_.ode));
        }
        if (with_y) {
            integrate::RhsFn rhs = [&, this](double t, const Vec& w, Vec& dw) {
                (void)w;
                Vec x, y;
                eval_xy(prev, t, x, y);
                dw = prop_fast_->apply(-t, Vec(field_G(x, y, t) + cs.g_x() * x));
            };
            new_w = std::make_shared<Trajectory>(integrate::integrate_ode(rhs, Vec::Zero(ny), T,
                                                                          0.0, cfg_.ode));
        }
        if (roles.out.d > 0) {
            integrate::RhsFn rhs = [&](double t, const Vec& c, Vec& dc) {
                dc = roles.out.A_sub * c + roles.out.C * src_x(t);
            };
            new_out = std::make_shared<Trajectory>(integrate::integrate_ode(
                rhs, Vec::Zero(roles.out.d), T, 0.0, cfg_.ode));
        }

        Iter next;
        next.c_keep = new_keep ? std::function<Vec(double)>(
                                     [new_keep](double t) { return new_keep->eval(t); })
                               : cur.c_keep;
        next.c_out = new_out ? std::function<Vec(double)>(
                                   [new_out](double t) { return new_out->eval(t); })
                             : cur.c_out;
        next.w = new_w ? std::function<Vec(double)>([new_w](double t) { return new_w->eval(t); })
                       : cur.w;

        double delta = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            const double t = (T * i) / (n_samples - 1);
            const double weight = std::min(1.0, std::exp(-roles.eta * t));
            Vec dx = Vec::Zero(nx);
            if (roles.keep.d > 0) dx += roles.keep.B * (next.c_keep(t) - prev.c_keep(t));
            if (roles.out.d > 0) dx += roles.out.B * (next.c_out(t) - prev.c_out(t));
            double dy = 0.0;
            if (with_y) dy = (next.w(t) - prev.w(t)).norm() / cert_.eps_star;
            delta = std::max(delta, weight * (dx.norm() + dy));
        }
        cur = next;
        out.report.iterations = iter + 1;
        out.report.final_delta = delta;
        if (iter > 0 && prev_delta > 0) ratio = delta / prev_delta;
        out.report.contraction_ratio = ratio;
        if (std::getenv("NESP_LP_DEBUG"))
            std::fprintf(stderr, "[plus] iter=%d delta=%.3e\n", iter, delta);
        if (delta < tol) {
            converged = true;
            break;
        }
        if (iter > 2 && delta > prev_delta) {
            if (++rising >= 3)
                throw Error(ErrorKind::Numerical,
                            "LPSolver: Picard iteration diverging (delta rising)");
        } else {
            rising = 0;
        }
        prev_delta = delta;
    }
    require(converged, ErrorKind::Numerical,
            "LPSolver: Picard did not converge within max iterations (last delta " +
                std::to_string(out.report.final_delta) + ")");
    out.report.fixed_point_residual = out.report.final_delta;

    Vec x0v, y0v;
    eval_xy(cur, 0.0, x0v, y0v);
    out.h = Vec(nx + ny);
    out.h.head(nx) = roles.out.d > 0 ? Vec(roles.P_out * x0v) : Vec(Vec::Zero(nx));
    out.h.tail(ny) = y0v;
    out.point = Vec(nx + ny);
    out.point.head(nx) = x0v;
    out.point.tail(ny) = y0v;
    auto eval_pair = std::make_shared<Iter>(cur);
    auto self_prop = prop_fast_;
    const auto rkeep = roles.keep, rout = roles.out;
    out.orbit_x = [eval_pair, rkeep, rout, nx](double t) {
        Vec x = Vec::Zero(nx);
        if (rkeep.d > 0) x += rkeep.B * eval_pair->c_keep(t);
        if (rout.d > 0) x += rout.B * eval_pair->c_out(t);
        return x;
    };
    const bool has_y = with_y;
    out.orbit_y = [eval_pair, self_prop, has_y, ny](double t) {
        if (!has_y) return Vec(Vec::Zero(ny));
        return self_prop->apply(t, eval_pair->w(t));
    };
    out.t_lo = 0.0;
    out.t_hi = T;
    return out;
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

LPPoint LPSolver::solve_cu_graph(const Vec& xi_cu, const Vec& xi_y, double t0) const {
    require(xi_cu.size() == cut_->sys().n_x && xi_y.size() == cut_->sys().n_y, ErrorKind::Model,
            "solve_cu_graph: dimension mismatch");
    require((split_.P_cu() * xi_cu - xi_cu).norm() <= 1e-9 * std::max(1.0, xi_cu.norm()),
            ErrorKind::Parameter, "solve_cu_graph: xi_cu not in the center-unstable subspace");
    return solve_minus(roles_cu(), xi_cu, xi_y, t0, false, true);
}

LPPoint LPSolver::unperturbed_cu_graph(const Vec& xi_cu, double t0) const {
    return solve_minus(roles_cu(), xi_cu, Vec::Zero(cut_->sys().n_y), t0, true, true);
}

LPPoint LPSolver::solve_s_graph(const Vec& xi_s, double t0) const {
    require((split_.P_s * xi_s - xi_s).norm() <= 1e-9 * std::max(1.0, xi_s.norm()),
            ErrorKind::Parameter, "solve_s_graph: xi_s not in the stable subspace");
    return solve_plus(roles_s(), xi_s, t0, false, false, nullptr);
}

LPPoint LPSolver::unperturbed_s_graph(const Vec& xi_s, double t0) const {
    return solve_plus(roles_s(), xi_s, t0, true, false, nullptr);
}

const LPSolver& LPSolver::reversed() const {
    std::lock_guard<std::mutex> lock(rev_mutex_);
    if (!reversed_)
        reversed_ = std::make_shared<LPSolver>(reverse_system(cut_->sys()),
                                               reverse_split(split_), eps_, cfg_);
    return *reversed_;
}

LPPoint LPSolver::solve_u_graph(const Vec& xi_u, double t0) const {
    // M^u(sys, t0) = M^s(reversed sys, -t0)
    LPPoint p = reversed().solve_s_graph(xi_u, -t0);
    std::swap(p.t_lo, p.t_hi);
    p.t_lo = -p.t_lo;
    p.t_hi = -p.t_hi;
    auto ox = p.orbit_x;
    auto oy = p.orbit_y;
    p.orbit_x = [ox](double t) { return ox(-t); };
    p.orbit_y = [oy](double t) { return oy(-t); };
    return p;
}

LPPoint LPSolver::unperturbed_u_graph(const Vec& xi_u, double t0) const {
    return reversed().unperturbed_s_graph(xi_u, -t0);
}

LPPoint LPSolver::solve_cs_graph(const Vec& xi_cs, const Vec& xi_y, double t0) const {
    LPPoint p = reversed().solve_cu_graph(xi_cs, xi_y, -t0);
    std::swap(p.t_lo, p.t_hi);
    p.t_lo = -p.t_lo;
    p.t_hi = -p.t_hi;
    auto ox = p.orbit_x;
    auto oy = p.orbit_y;
    p.orbit_x = [ox](double t) { return ox(-t); };
    p.orbit_y = [oy](double t) { return oy(-t); };
    return p;
}

LPPoint LPSolver::unperturbed_cs_graph(const Vec& xi_cs, double t0) const {
    return reversed().unperturbed_cu_graph(xi_cs, -t0);
}

LPPoint LPSolver::solve_center_impl(const Vec& xi_c, const Vec& xi_y, double t0,
                                    bool slow_only) const {
    const int nx = cut_->sys().n_x, ny = cut_->sys().n_y;
    require((split_.P_c * xi_c - xi_c).norm() <= 1e-9 * std::max(1.0, xi_c.norm()),
            ErrorKind::Parameter, "solve_center_graph: xi_c not in the center subspace");
    Vec psi_s = Vec::Zero(nx), psi_u = Vec::Zero(nx);
    double damping = 1.0;
    double prev_delta = std::numeric_limits<double>::infinity();
    LPPoint last_cu;
    bool converged = false;
    int iters = 0;
    for (int k = 0; k < 100; ++k) {
        ++iters;
        // psi_s from the cu-graph at (xi_c + psi_u, xi_y)
        last_cu = slow_only ? unperturbed_cu_graph(Vec(xi_c + psi_u), t0)
                            : solve_cu_graph(Vec(xi_c + psi_u), xi_y, t0);
        const Vec new_s = last_cu.h;
        // psi_u from the cs-graph at (xi_c + new_s, xi_y)
        const LPPoint csp = slow_only ? unperturbed_cs_graph(Vec(xi_c + new_s), t0)
                                      : solve_cs_graph(Vec(xi_c + new_s), xi_y, t0);
        const Vec new_u = csp.h;
        const double delta = (new_s - psi_s).norm() + (new_u - psi_u).norm();
        psi_s += damping * (new_s - psi_s);
        psi_u += damping * (new_u - psi_u);
        if (delta < 1e-10) {
            converged = true;
            break;
        }
        if (delta > prev_delta) damping = std::max(0.25, damping * 0.5);
        prev_delta = delta;
    }
    require(converged, ErrorKind::Numerical,
            "solve_center_graph: cs/cu alternation did not converge");
    LPPoint out;
    out.report = last_cu.report;
    out.report.iterations = iters;
    out.h = psi_s + psi_u;
    out.point = Vec(nx + ny);
    out.point.head(nx) = xi_c + psi_s + psi_u;
    out.point.tail(ny) = slow_only ? Vec(Vec::Zero(ny)) : xi_y;
    out.orbit_x = last_cu.orbit_x;
    out.orbit_y = last_cu.orbit_y;
    out.t_lo = last_cu.t_lo;
    out.t_hi = last_cu.t_hi;
    return out;
}

LPPoint LPSolver::solve_center_graph(const Vec& xi_c, const Vec& xi_y, double t0) const {
    return solve_center_impl(xi_c, xi_y, t0, false);
}

LPPoint LPSolver::unperturbed_center_graph(const Vec& xi_c, double t0) const {
    return solve_center_impl(xi_c, Vec::Zero(cut_->sys().n_y), t0, true);
}

LPPoint LPSolver::solve_fiber(const Vec& xi_s, const Vec& xi_c, const Vec& xi_y, double t0,
                              bool slow_only) const {
    const int nx = cut_->sys().n_x, ny = cut_->sys().n_y;
    // spectral-gap set Lambda_2 check for the chosen (eta, eta')
    Roles rs = roles_s();
    const double eta = std::isfinite(cfg_.eta)
                           ? cfg_.eta
                           : std::max(0.5 * (split_.gaps.a1 + std::min(0.0, split_.gaps.a2)),
                                      0.45 * split_.gaps.a1);
    rs.eta = eta;
    double etap = cfg_.eta_prime;
    if (!std::isfinite(etap)) {
        const double lo = std::max(0.0, split_.gaps.a1_prime);
        etap = std::min(0.5 * (lo + split_.gaps.a2_prime),
                        0.9 * (split_.gaps.a2 - eta) > 0 ? 0.9 * (split_.gaps.a2 - eta)
                                                         : 0.5 * (lo + split_.gaps.a2_prime));
        if (etap <= lo) etap = 0.5 * (lo + split_.gaps.a2_prime);
    }
    {
        const auto& g = split_.gaps;
        const bool ok = g.a1 < 2 * eta && 2 * eta < eta && eta < std::min(0.0, g.a2) &&
                        g.a1_prime < etap && etap < g.a2_prime && g.a1 < eta + etap &&
                        eta + etap < g.a2;
        require(ok, ErrorKind::Numerical,
                "solve_fiber: spectral-gap set Lambda_2 empty for the chosen (eta, eta')");
    }

    // base point and orbit on the center manifold
    BaseOrbit base;
    const LPPoint psi = slow_only ? unperturbed_center_graph(xi_c, t0)
                                  : solve_center_graph(xi_c, xi_y, t0);
    const Vec base0 = psi.point;
    if (base0.norm() > 1e-13) {
        base.trivial = false;
        const double T = cfg_.t_trunc > 0.0
                             ? cfg_.t_trunc
                             : std::min(200.0, std::log(100.0 / cfg_.picard_tol) / (-eta));
        // forward integration of the cut system (eq 4.5) from the base point
        auto cs_ptr = cut_;
        auto pf = prop_fast_;
        const double eps = eps_;
        const bool so = slow_only;
        integrate::RhsFn rhs = [cs_ptr, pf, t0, eps, nx, ny, so](double t, const Vec& z,
                                                                 Vec& dz) {
            const Vec x = z.head(nx);
            const Vec w = z.tail(ny);
            const Vec y = so ? Vec(Vec::Zero(ny)) : pf->apply(t, w);
            dz.resize(nx + ny);
            dz.head(nx) = cs_ptr->A_f() * x + cs_ptr->F(x, y, t + t0, eps);
            if (!so) dz.head(nx) += cs_ptr->f_y() * y;
            dz.tail(ny) =
                so ? Vec(Vec::Zero(ny))
                   : pf->apply(-t, Vec(cs_ptr->G(x, y, t + t0, eps) + cs_ptr->g_x() * x));
        };
        Vec z0(nx + ny);
        z0.head(nx) = base0.head(nx);
        z0.tail(ny) = base0.tail(ny);
        auto btraj = std::make_shared<Trajectory>(
            integrate::integrate_ode(rhs, z0, 0.0, T, cfg_.ode));
        base.x = [btraj, nx](double t) { return Vec(btraj->eval(t).head(nx)); };
        base.y = [btraj, pf, nx, ny, so](double t) {
            if (so) return Vec(Vec::Zero(ny));
            return pf->apply(t, Vec(btraj->eval(t).tail(ny)));
        };
    }

    LPPoint fib = solve_plus(rs, xi_s, t0, slow_only, true, &base);
    LPPoint out = fib;
    out.point = base0 + fib.point;
    out.h = fib.point;  // the fiber offset (x~, y~)(0)
    return out;
}

// ---------------------------------------------------------------------------
// Graph sampling and studies
// ---------------------------------------------------------------------------

std::string ManifoldGraph::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    if (nodes.empty()) return "";
    for (int i = 0; i < nodes[0].size(); ++i) os << (i ? ", " : "") << "xi" << i + 1;
    for (int i = 0; i < values[0].size(); ++i) os << ", h" << i + 1;
    os << "\n";
    for (size_t k = 0; k < nodes.size(); ++k) {
        for (int i = 0; i < nodes[k].size(); ++i) os << (i ? ", " : "") << nodes[k][i];
        for (int i = 0; i < values[k].size(); ++i) os << ", " << values[k][i];
        os << "\n";
    }
    return os.str();
}

namespace {

LPPoint solve_kind(const LPSolver& solver, ManifoldKind kind, const Vec& xi_x, const Vec& xi_y,
                   double t0) {
    switch (kind) {
        case ManifoldKind::CU: return solver.solve_cu_graph(xi_x, xi_y, t0);
        case ManifoldKind::S: return solver.solve_s_graph(xi_x, t0);
        case ManifoldKind::U: return solver.solve_u_graph(xi_x, t0);
        case ManifoldKind::CS: return solver.solve_cs_graph(xi_x, xi_y, t0);
        case ManifoldKind::C: return solver.solve_center_graph(xi_x, xi_y, t0);
        case ManifoldKind::Fiber:
            return solver.solve_fiber(xi_x, Vec::Zero(xi_x.size()), xi_y, t0);
    }
    throw Error(ErrorKind::Parameter, "unknown manifold kind");
}

Mat kind_basis_x(const LPSolver& solver, ManifoldKind kind) {
    const auto& sp = solver.split();
    switch (kind) {
        case ManifoldKind::CU: {
            Mat b(sp.n(), sp.dim_c + sp.dim_u);
            if (sp.dim_c > 0) b.leftCols(sp.dim_c) = sp.basis_c;
            if (sp.dim_u > 0) b.rightCols(sp.dim_u) = sp.basis_u;
            return b;
        }
        case ManifoldKind::CS: {
            Mat b(sp.n(), sp.dim_c + sp.dim_s);
            if (sp.dim_c > 0) b.leftCols(sp.dim_c) = sp.basis_c;
            if (sp.dim_s > 0) b.rightCols(sp.dim_s) = sp.basis_s;
            return b;
        }
        case ManifoldKind::S:
        case ManifoldKind::Fiber: return sp.basis_s;
        case ManifoldKind::U: return sp.basis_u;
        case ManifoldKind::C: return sp.basis_c;
    }
    throw Error(ErrorKind::Parameter, "unknown manifold kind");
}

bool kind_has_y(ManifoldKind kind) {
    return kind == ManifoldKind::CU || kind == ManifoldKind::CS || kind == ManifoldKind::C ||
           kind == ManifoldKind::Fiber;
}

}  // namespace

ManifoldGraph sample_graph(const LPSolver& solver, ManifoldKind kind,
                           const std::vector<std::vector<double>>& axes, double t0, int jobs) {
    const Mat Bx = kind_basis_x(solver, kind);
    const int dx = static_cast<int>(Bx.cols());
    const int n_y_axes = kind_has_y(kind) ? static_cast<int>(axes.size()) - dx : 0;
    require(static_cast<int>(axes.size()) == dx + n_y_axes && n_y_axes >= 0,
            ErrorKind::Parameter,
            "sample_graph: axes count does not match the chart dimension");

    // enumerate tensor grid
    std::vector<Vec> nodes;
    std::vector<int> idx(axes.size(), 0);
    bool done = axes.empty();
    while (!done) {
        Vec node(axes.size());
        for (size_t i = 0; i < axes.size(); ++i) node[i] = axes[i][idx[i]];
        nodes.push_back(node);
        size_t d = 0;
        while (d < axes.size()) {
            if (++idx[d] < static_cast<int>(axes[d].size())) break;
            idx[d] = 0;
            ++d;
        }
        done = d == axes.size();
    }
    if (axes.empty()) nodes.push_back(Vec(0));

    ManifoldGraph g;
    g.kind = kind;
    g.t0 = t0;
    g.eps = solver.eps();
    g.nodes = nodes;
    g.values.resize(nodes.size());

    auto solve_node = [&](size_t k) {
        const Vec& node = nodes[k];
        Vec xi_x = Vec::Zero(solver.split().n());
        if (dx > 0) xi_x = Bx * node.head(dx);
        const int nyc = static_cast<int>(node.size()) - dx;
        Vec xi_y = Vec::Zero(solver.cut().sys().n_y);
        for (int i = 0; i < nyc; ++i) xi_y[i] = node[dx + i];
        LPPoint p = solve_kind(solver, kind, xi_x, xi_y, t0);
        g.values[k] = p.h;
        return p.report;
    };

    if (jobs > 1) {
        std::vector<std::future<LPReport>> futs;
        for (size_t k = 0; k < nodes.size(); ++k)
            futs.push_back(std::async(std::launch::async, solve_node, k));
        for (size_t k = 0; k < nodes.size(); ++k) g.report = futs[k].get();
    } else {
        for (size_t k = 0; k < nodes.size(); ++k) g.report = solve_node(k);
    }
    return g;
}

double invariance_residual(const LPSolver& solver, ManifoldKind kind, const Vec& xi_x,
                           const Vec& xi_y, double t0, double dt) {
    const auto& sys = solver.cut().sys();
    const int nx = sys.n_x;
    const LPPoint p = solve_kind(solver, kind, xi_x, xi_y, t0);
    const Vec z0 = p.point;
    require(z0.head(nx).norm() + z0.tail(sys.n_y).norm() < solver.cut().radius() / 3.0,
            ErrorKind::Parameter, "invariance_residual: point outside the un-cut ball");
    require(solver.eps() > 0.0, ErrorKind::Parameter,
            "invariance_residual: eps must be positive for the full flow");
    const auto traj = integrate::integrate_full(sys, z0.head(nx), z0.tail(sys.n_y), t0, t0 + dt,
                                                solver.eps(), solver.config().ode);
    const Vec z1 = traj.eval(t0 + dt);
    const auto& sp = solver.split();
    switch (kind) {
        case ManifoldKind::CU: {
            const Vec xi1 = sp.P_cu() * z1.head(nx);
            const LPPoint q = solver.solve_cu_graph(xi1, z1.tail(sys.n_y), t0 + dt);
            return (Vec(sp.P_s * z1.head(nx)) - q.h).norm();
        }
        case ManifoldKind::S: {
            const Vec xi1 = sp.P_s * z1.head(nx);
            const LPPoint q = solver.solve_s_graph(xi1, t0 + dt);
            Vec val(nx + sys.n_y);
            val.head(nx) = (Mat::Identity(nx, nx) - sp.P_s) * z1.head(nx);
            val.tail(sys.n_y) = z1.tail(sys.n_y);
            return (val - q.h).norm();
        }
        case ManifoldKind::U: {
            const Vec xi1 = sp.P_u * z1.head(nx);
            const LPPoint q = solver.solve_u_graph(xi1, t0 + dt);
            Vec val(nx + sys.n_y);
            val.head(nx) = (Mat::Identity(nx, nx) - sp.P_u) * z1.head(nx);
            val.tail(sys.n_y) = z1.tail(sys.n_y);
            return (val - q.h).norm();
        }
        case ManifoldKind::CS: {
            const Vec xi1 = sp.P_cs() * z1.head(nx);
            const LPPoint q = solver.solve_cs_graph(xi1, z1.tail(sys.n_y), t0 + dt);
            return (Vec(sp.P_u * z1.head(nx)) - q.h).norm();
        }
        default:
            throw Error(ErrorKind::Parameter, "invariance_residual: unsupported kind");
    }
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

namespace {

struct GapLeg {
    double value_gap = 0, dcu_gap = 0, dy_norm = 0;
};

GapLeg gap_leg(const SlowFastSystem& sys, const DichotomySplit& split, const Vec& xi_cu,
               double t0, double eps, const LPConfig& cfg) {
    LPSolver solver(sys, split, eps, cfg);
    const int ny = sys.n_y;
    GapLeg leg;
    const LPPoint full = solver.solve_cu_graph(xi_cu, Vec::Zero(ny), t0);
    const LPPoint star = solver.unperturbed_cu_graph(xi_cu, t0);
    leg.value_gap = (full.h - star.h).norm();

    // D_{xi_cu} gaps and |D_{xi_y} h_s| by central differences of the graphs
    const double d = cfg.probe_delta;
    const Mat Bcu = hcat(split.basis_c, split.basis_u);
    double dcu = 0.0;
    for (int j = 0; j < Bcu.cols(); ++j) {
        const Vec e = Bcu.col(j);
        const Vec hp_full = solver.solve_cu_graph(Vec(xi_cu + d * e), Vec::Zero(ny), t0).h;
        const Vec hm_full = solver.solve_cu_graph(Vec(xi_cu - d * e), Vec::Zero(ny), t0).h;
        const Vec hp_star = solver.unperturbed_cu_graph(Vec(xi_cu + d * e), t0).h;
        const Vec hm_star = solver.unperturbed_cu_graph(Vec(xi_cu - d * e), t0).h;
        dcu = std::max(dcu, ((hp_full - hm_full) - (hp_star - hm_star)).norm() / (2 * d));
    }
    leg.dcu_gap = dcu;
    double dy = 0.0;
    for (int j = 0; j < ny; ++j) {
        Vec ep = Vec::Zero(ny), em = Vec::Zero(ny);
        ep[j] = d;
        em[j] = -d;
        const Vec hp = solver.solve_cu_graph(xi_cu, ep, t0).h;
        const Vec hm = solver.solve_cu_graph(xi_cu, em, t0).h;
        dy = std::max(dy, (hp - hm).norm() / (2 * d));
    }
    leg.dy_norm = dy;
    return leg;
}

}  // namespace

GapStudyResult manifold_gap_study(const SlowFastSystem& sys, const DichotomySplit& split,
                                  const Vec& xi_cu, double t0,
                                  const std::vector<double>& eps_list, const LPConfig& cfg,
                                  int jobs) {
    GapStudyResult out;
    out.value_gap.norm = "|h_s(xi_cu,0) - h_s*(xi_cu)|";
    out.dxi_cu_gap.norm = "|D_xi_cu h_s - D_xi_cu h_s*|";
    out.dxi_y_norm.norm = "|D_xi_y h_s|";
    std::vector<GapLeg> legs(eps_list.size());
    if (jobs > 1) {
        std::vector<std::future<GapLeg>> futs;
        for (double e : eps_list)
            futs.push_back(std::async(std::launch::async, gap_leg, std::cref(sys),
                                      std::cref(split), std::cref(xi_cu), t0, e, std::cref(cfg)));
        for (size_t i = 0; i < futs.size(); ++i) legs[i] = futs[i].get();
    } else {
        for (size_t i = 0; i < eps_list.size(); ++i)
            legs[i] = gap_leg(sys, split, xi_cu, t0, eps_list[i], cfg);
    }
    for (size_t i = 0; i < eps_list.size(); ++i) {
        out.value_gap.eps.push_back(eps_list[i]);
        out.value_gap.error.push_back(legs[i].value_gap);
        out.dxi_cu_gap.eps.push_back(eps_list[i]);
        out.dxi_cu_gap.error.push_back(legs[i].dcu_gap);
        out.dxi_y_norm.eps.push_back(eps_list[i]);
        out.dxi_y_norm.error.push_back(legs[i].dy_norm);
    }
    const double floor = 10.0 * cfg.picard_tol;
    out.value_gap.fit = fit_loglog_slope(out.value_gap.eps, out.value_gap.error, floor);
    out.dxi_cu_gap.fit = fit_loglog_slope(out.dxi_cu_gap.eps, out.dxi_cu_gap.error,
                                          floor / cfg.probe_delta);
    out.dxi_y_norm.fit = fit_loglog_slope(out.dxi_y_norm.eps, out.dxi_y_norm.error,
                                          floor / cfg.probe_delta);
    return out;
}

slowlimit::SweepResult t0_sensitivity(const SlowFastSystem& sys, const DichotomySplit& split,
                                      const Vec& xi_cu, const Vec& xi_y, double t0,
                                      const std::vector<double>& eps_list, const LPConfig& cfg,
                                      int jobs) {
    slowlimit::SweepResult out;
    out.norm = "|d/dt0 h_s| (central difference, step 1e-3)";
    auto leg = [&sys, &split, &xi_cu, &xi_y, t0, &cfg](double eps) {
        LPSolver solver(sys, split, eps, cfg);
        const double dt = 1e-3;
        const Vec hp = solver.solve_cu_graph(xi_cu, xi_y, t0 + dt).h;
        const Vec hm = solver.solve_cu_graph(xi_cu, xi_y, t0 - dt).h;
        return (hp - hm).norm() / (2 * dt);
    };
    std::vector<double> vals(eps_list.size());
    if (jobs > 1) {
        std::vector<std::future<double>> futs;
        for (double e : eps_list) futs.push_back(std::async(std::launch::async, leg, e));
        for (size_t i = 0; i < futs.size(); ++i) vals[i] = futs[i].get();
    } else {
        for (size_t i = 0; i < eps_list.size(); ++i) vals[i] = leg(eps_list[i]);
    }
    for (size_t i = 0; i < eps_list.size(); ++i) {
        out.eps.push_back(eps_list[i]);
        out.error.push_back(vals[i]);
    }
    out.floor_estimate = 2.0 * cfg.picard_tol / 1e-3;
    out.fit = fit_loglog_slope(out.eps, out.error, 10.0 * out.floor_estimate);
    return out;
}

slowlimit::SweepResult fiber_gap_study(const SlowFastSystem& sys, const DichotomySplit& split,
                                       const Vec& xi_s, const Vec& xi_c, double t0,
                                       const std::vector<double>& eps_list, const LPConfig& cfg,
                                       int jobs) {
    slowlimit::SweepResult out;
    out.norm = "|sigma_cu(xi_s, xi_c) - sigma_cu*(xi_s, xi_c)| at xi_y = 0";
    auto leg = [&sys, &split, &xi_s, &xi_c, t0, &cfg](double eps) {
        LPSolver solver(sys, split, eps, cfg);
        const Vec zero_y = Vec::Zero(sys.n_y);
        const LPPoint full = solver.solve_fiber(xi_s, xi_c, zero_y, t0, false);
        const LPPoint star = solver.solve_fiber(xi_s, xi_c, zero_y, t0, true);
        return (full.point - star.point).norm();
    };
    std::vector<double> vals(eps_list.size());
    if (jobs > 1) {
        std::vector<std::future<double>> futs;
        for (double e : eps_list) futs.push_back(std::async(std::launch::async, leg, e));
        for (size_t i = 0; i < futs.size(); ++i) vals[i] = futs[i].get();
    } else {
        for (size_t i = 0; i < eps_list.size(); ++i) vals[i] = leg(eps_list[i]);
    }
    for (size_t i = 0; i < eps_list.size(); ++i) {
        out.eps.push_back(eps_list[i]);
        out.error.push_back(vals[i]);
    }
    out.fit = fit_loglog_slope(out.eps, out.error, 10.0 * cfg.picard_tol);
    return out;
}

}  // namespace nesp::manifold
