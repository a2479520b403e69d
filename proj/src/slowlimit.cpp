#include "nesp/slowlimit.hpp"

#include <future>
#include <sstream>

namespace nesp::slowlimit {

std::string SweepResult::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "eps, error\n";
    for (size_t i = 0; i < eps.size(); ++i) os << eps[i] << ", " << error[i] << "\n";
    return os.str();
}

std::string SweepResult::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"slope\": " << fit.slope << ", \"intercept\": " << fit.intercept
       << ", \"points_used\": " << fit.points_used
       << ", \"floor\": " << floor_estimate
       << ", \"floor_flag\": " << (fit.floor_detected ? "true" : "false")
       << ", \"norm\": \"" << norm << "\""
       << ", \"window\": [" << t0 << ", " << t0 + T << "]}";
    return os.str();
}

// ---------------------------------------------------------------------------
// TransformChain
// ---------------------------------------------------------------------------

TransformChain::TransformChain(const SlowFastSystem& sys) {
    require(std::abs(sys.J.determinant()) > 1e-14, ErrorKind::Model,
            "TransformChain: J must be invertible");
    systems_.push_back(sys);
    Jinv_ = sys.J.inverse();
}

bool TransformChain::push() {
    const SlowFastSystem prev = systems_.back();
    const Mat Jinv = Jinv_;
    const int ny = prev.n_y;
    const Mat A = prev.A;

    // shift(x, t, eps) = eps J^{-1} g_prev(x, 0, t, eps); the step map is
    // y_new = y + shift, the identity at eps = 0.
    auto g_star = [prev, ny](const Vec& x, double t, double eps) -> Vec {
        return prev.g(x, Vec::Zero(ny), t, eps);
    };
    auto shift = [g_star, Jinv](const Vec& x, double t, double eps) -> Vec {
        return eps * (Jinv * g_star(x, t, eps));
    };

    SlowFastSystem next = prev;
    next.jac = nullptr;  // derivatives of the wrapped oracles via finite differences
    next.name = prev.name + "+push";

    // f_new(x, y_new) = f(x, y_new - shift)
    next.f = [prev, shift](const Vec& x, const Vec& yn, double t, double eps) -> Vec {
        return prev.f(x, Vec(yn - shift(x, t, eps)), t, eps);
    };
    // y_new' = (J/eps) y_new + g_new with
    // g_new = g(x, y) - g(x, 0) + eps J^{-1} (D_x g(x,0) (Ax + f(x,y)) + d/dt g(x,0)),
    // all arguments exact compositions (no truncation).
    next.g = [prev, shift, g_star, Jinv, A, ny](const Vec& x, const Vec& yn, double t,
                                                double eps) -> Vec {
        const Vec y = yn - shift(x, t, eps);
        const Vec gs = g_star(x, t, eps);
        // D_x g(x, 0, t, eps) and d/dt g(x, 0, t, eps) by central differences
        Mat Dxg(ny, x.size());
        Vec xp = x, xm = x;
        for (int j = 0; j < x.size(); ++j) {
            const double h = fd_step(x[j]);
            xp[j] = x[j] + h;
            xm[j] = x[j] - h;
            Dxg.col(j) = (g_star(xp, t, eps) - g_star(xm, t, eps)) / (2.0 * h);
            xp[j] = x[j];
            xm[j] = x[j];
        }
        const double ht = fd_step(t);
        const Vec dtg = (g_star(x, t + ht, eps) - g_star(x, t - ht, eps)) / (2.0 * ht);
        const Vec xdot = A * x + prev.f(x, y, t, eps);
        return prev.g(x, y, t, eps) - gs + eps * (Jinv * (Dxg * xdot + dtg));
    };

    systems_.push_back(std::move(next));
    return order() <= 3;
}

Vec TransformChain::forward(const Vec& x, const Vec& y, double t, double eps) const {
    Vec yk = y;
    for (size_t k = 0; k + 1 < systems_.size(); ++k) {
        const auto& s = systems_[k];
        yk = yk + eps * (Jinv_ * s.g(x, Vec::Zero(s.n_y), t, eps));
    }
    return yk;
}

Vec TransformChain::inverse(const Vec& x, const Vec& yk, double t, double eps) const {
    Vec y = yk;
    for (size_t k = systems_.size() - 1; k-- > 0;) {
        const auto& s = systems_[k];
        y = y - eps * (Jinv_ * s.g(x, Vec::Zero(s.n_y), t, eps));
    }
    return y;
}

// ---------------------------------------------------------------------------
// residual_norm
// ---------------------------------------------------------------------------

double residual_norm(const SlowFastSystem& sys, const ProbeBox& box,
                     const std::vector<double>& t_grid, double eps) {
    require(box.center.size() == sys.n_x, ErrorKind::Model, "residual_norm: box dimension");
    const int m = std::max(2, box.samples_per_axis);
    const Vec zero_y = Vec::Zero(sys.n_y);
    double sup = 0.0;
    std::vector<int> idx(sys.n_x, 0);
    const long total = static_cast<long>(std::pow(m, sys.n_x));
    Vec x(sys.n_x);
    for (long flat = 0; flat < total; ++flat) {
        long rem = flat;
        for (int d = 0; d < sys.n_x; ++d) {
            const int i = rem % m;
            rem /= m;
            x[d] = box.center[d] - box.radius + 2.0 * box.radius * i / (m - 1);
        }
        for (double t : t_grid) {
            sup = std::max(sup, sys.g(x, zero_y, t, eps).cwiseAbs().maxCoeff());
        }
    }
    return sup;
}

SweepResult chain_residual_sweep(const TransformChain& chain, int level, const ProbeBox& box,
                                 const std::vector<double>& t_grid,
                                 const std::vector<double>& eps_list) {
    SweepResult out;
    out.norm = "sup |g_k(x,0,t,eps)| over probe box";
    for (double e : eps_list) {
        out.eps.push_back(e);
        out.error.push_back(residual_norm(chain.system(level), box, t_grid, e));
    }
    out.fit = fit_loglog_slope(out.eps, out.error, 1e-14);
    return out;
}

// ---------------------------------------------------------------------------
// convergence_study
// ---------------------------------------------------------------------------

namespace {

struct LegResult {
    double error = 0.0;
    bool ok = false;
};

LegResult study_leg(const SlowFastSystem& sys, StudyKind kind, const StudyConfig& cfg,
                    double eps, const integrate::IntegratorOptions& opts) {
    LegResult out;
    try {
        const int nx = sys.n_x, ny = sys.n_y;
        const Vec y0 = Vec::Zero(ny);
        switch (kind) {
            case StudyKind::Thm31:
            case StudyKind::PrincipalFT: {
                const double eps_ref = kind == StudyKind::Thm31 ? 0.0 : eps;
                auto full = integrate::integrate_full(sys, cfg.x0, y0, cfg.t0, cfg.t0 + cfg.T,
                                                      eps, opts);
                auto limit = integrate::integrate_limit(sys, cfg.x0, cfg.t0, cfg.t0 + cfg.T,
                                                        eps_ref, opts);
                double sup = 0.0;
                for (int i = 0; i <= cfg.sample_count; ++i) {
                    const double t = cfg.t0 + cfg.T * i / cfg.sample_count;
                    const Vec zf = full.eval(t);
                    const Vec xl = limit.eval(t);
                    const double ex = (zf.head(nx) - xl).norm();
                    const double ey = zf.tail(ny).norm();
                    sup = std::max(sup, ex + ey);
                }
                out.error = sup;
                break;
            }
            case StudyKind::Thm32: {
                auto base_full = integrate::integrate_full(sys, cfg.x0, y0, cfg.t0,
                                                           cfg.t0 + cfg.T, eps, opts);
                auto base_limit = integrate::integrate_limit(sys, cfg.x0, cfg.t0, cfg.t0 + cfg.T,
                                                             0.0, opts);
                auto var_full = integrate::variational_full(sys, base_full, cfg.dx0, cfg.dy0,
                                                            cfg.t0, cfg.t0 + cfg.T, eps, opts);
                auto var_limit = integrate::variational_limit(sys, base_limit, cfg.dx0, cfg.dy0,
                                                              cfg.t0, cfg.t0 + cfg.T, eps, opts);
                double sup = 0.0;
                for (int i = 0; i <= cfg.sample_count; ++i) {
                    const double t = cfg.t0 + cfg.T * i / cfg.sample_count;
                    const Vec a = var_full.eval(t);
                    const Vec b = var_limit.eval(t);
                    // dx-error in the plain (X) norm per Remark rem3.4
                    sup = std::max(sup, (a.head(nx) - b.head(nx)).norm() +
                                            (a.tail(ny) - b.tail(ny)).norm());
                }
                out.error = sup;
                break;
            }
        }
        out.ok = std::isfinite(out.error);
    } catch (const Error&) {
        out.ok = false;
    }
    return out;
}

}  // namespace

SweepResult convergence_study(const SlowFastSystem& sys, StudyKind kind, const StudyConfig& cfg) {
    require(!cfg.eps_list.empty(), ErrorKind::Parameter, "convergence_study: empty eps list");
    SweepResult out;
    out.t0 = cfg.t0;
    out.T = cfg.T;
    out.norm = kind == StudyKind::Thm32 ? "sup |dx-dx0|_X + |dy-dy0|" : "sup |x-x0| + |y|";

    std::vector<LegResult> legs(cfg.eps_list.size());
    if (cfg.jobs > 1) {
        std::vector<std::future<LegResult>> futs;
        for (double e : cfg.eps_list)
            futs.push_back(std::async(std::launch::async, study_leg, std::cref(sys), kind,
                                      std::cref(cfg), e, cfg.opts));
        for (size_t i = 0; i < futs.size(); ++i) legs[i] = futs[i].get();
    } else {
        for (size_t i = 0; i < cfg.eps_list.size(); ++i)
            legs[i] = study_leg(sys, kind, cfg, cfg.eps_list[i], cfg.opts);
    }

    bool gap = false;
    for (size_t i = 0; i < legs.size(); ++i) {
        if (!legs[i].ok) {
            gap = true;
            continue;
        }
        out.eps.push_back(cfg.eps_list[i]);
        out.error.push_back(legs[i].error);
    }
    require(!out.eps.empty(), ErrorKind::Numerical, "convergence_study: every leg failed");
    if (gap) out.norm += " (partial: some eps legs failed)";

    // Tolerance-floor estimate: rerun the smallest-eps leg at 10x tighter
    // tolerance; the change bounds the integration error there.
    const size_t ismall = out.eps.size() - 1;
    integrate::IntegratorOptions tight = cfg.opts;
    tight.rtol *= 0.1;
    tight.atol *= 0.1;
    const LegResult control = study_leg(sys, kind, cfg, out.eps[ismall], tight);
    if (control.ok) {
        out.floor_estimate = std::abs(control.error - out.error[ismall]);
    }
    out.fit = fit_loglog_slope(out.eps, out.error, 10.0 * out.floor_estimate);
    return out;
}

}  // namespace nesp::slowlimit
