#include "nesp/model.hpp"

#include "nesp/linalg.hpp"

#include <sstream>

namespace nesp::model {

void eval_rhs(const SlowFastSystem& sys, const Vec& x, const Vec& y, double t, double eps,
              Vec& dx, Vec& dy) {
    require(x.size() == sys.n_x && y.size() == sys.n_y, ErrorKind::Model,
            "eval_rhs: dimension mismatch");
    require(eps > 0.0, ErrorKind::Parameter, "eval_rhs: eps must be positive");
    dx = sys.A * x + sys.f(x, y, t, eps);
    dy = (1.0 / eps) * (sys.J * y) + sys.g(x, y, t, eps);
}

Vec eval_f0(const SlowFastSystem& sys, const Vec& x, double t, double eps) {
    return sys.f(x, Vec::Zero(sys.n_y), t, eps);
}

Vec eval_g0(const SlowFastSystem& sys, const Vec& x, double t, double eps) {
    return sys.g(x, Vec::Zero(sys.n_y), t, eps);
}

namespace {

Mat fd_jac_x(const FieldFn& field, const Vec& x, const Vec& y, double t, double eps, int rows) {
    Mat Jm(rows, x.size());
    Vec xp = x, xm = x;
    for (int j = 0; j < x.size(); ++j) {
        const double h = fd_step(x[j]);
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        Jm.col(j) = (field(xp, y, t, eps) - field(xm, y, t, eps)) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return Jm;
}

Mat fd_jac_y(const FieldFn& field, const Vec& x, const Vec& y, double t, double eps, int rows) {
    Mat Jm(rows, y.size());
    Vec yp = y, ym = y;
    for (int j = 0; j < y.size(); ++j) {
        const double h = fd_step(y[j]);
        yp[j] = y[j] + h;
        ym[j] = y[j] - h;
        Jm.col(j) = (field(x, yp, t, eps) - field(x, ym, t, eps)) / (2.0 * h);
        yp[j] = y[j];
        ym[j] = y[j];
    }
    return Jm;
}

Vec fd_scalar(const FieldFn& field, const Vec& x, const Vec& y, double t, double eps,
              bool in_time) {
    const double s = in_time ? t : eps;
    const double h = fd_step(s);
    if (in_time) return (field(x, y, t + h, eps) - field(x, y, t - h, eps)) / (2.0 * h);
    return (field(x, y, t, eps + h) - field(x, y, t, eps - h)) / (2.0 * h);
}

}  // namespace

JacobianBlocks jacobian_blocks(const SlowFastSystem& sys, const Vec& x, const Vec& y, double t,
                               double eps) {
    require(x.size() == sys.n_x && y.size() == sys.n_y, ErrorKind::Model,
            "jacobian_blocks: dimension mismatch");
    JacobianBlocks b;
    if (sys.jac) {
        b = sys.jac(x, y, t, eps);
    } else {
        b.fx = fd_jac_x(sys.f, x, y, t, eps, sys.n_x);
        b.fy = fd_jac_y(sys.f, x, y, t, eps, sys.n_x);
        b.gx = fd_jac_x(sys.g, x, y, t, eps, sys.n_y);
        b.gy = fd_jac_y(sys.g, x, y, t, eps, sys.n_y);
        b.fe = fd_scalar(sys.f, x, y, t, eps, false);
        b.ge = fd_scalar(sys.g, x, y, t, eps, false);
        b.ft = fd_scalar(sys.f, x, y, t, eps, true);
        b.gt = fd_scalar(sys.g, x, y, t, eps, true);
    }
    const bool finite = b.fx.allFinite() && b.fy.allFinite() && b.gx.allFinite() &&
                        b.gy.allFinite() && b.fe.allFinite() && b.ge.allFinite() &&
                        b.ft.allFinite() && b.gt.allFinite();
    require(finite, ErrorKind::Evaluation, "jacobian_blocks: non-finite entries");
    return b;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << (c.pass ? "[pass] " : "[FAIL] ") << c.name << "  defect=" << c.defect << "\n";
    }
    return os.str();
}

ValidationReport validate(const SlowFastSystem& sys) {
    ValidationReport rep;
    auto add = [&](const std::string& name, bool pass, double defect) {
        rep.checks.push_back({name, pass, defect});
    };

    // (A2): J antisymmetric, invertible, n_y even. The reported defect is the
    // distance to the antisymmetric part, max|J + J^T|/2.
    const double anti = (sys.J + sys.J.transpose()).cwiseAbs().maxCoeff();
    add("J antisymmetry", anti <= 1e-12, 0.5 * anti);
    add("n_y even", sys.n_y % 2 == 0, sys.n_y % 2);
    const double det = sys.J.determinant();
    add("det(J) != 0", std::abs(det) > 1e-14, std::abs(det));
    if (std::abs(det) > 1e-14) {
        const double jinv = linalg::opnorm(sys.J.inverse());
        add("|J^-1| finite", std::isfinite(jinv), jinv);
    }

    ProbeRng rng(42);
    // (B2): fixed point at the origin over a t, eps probe grid.
    if (sys.origin_fixed_point) {
        double worst = 0.0;
        const Vec x0 = Vec::Zero(sys.n_x), y0 = Vec::Zero(sys.n_y);
        for (double t : {0.0, 0.7, 3.1, -2.4}) {
            for (double eps : {1e-1, 1e-2, 1e-3}) {
                worst = std::max(worst, sys.f(x0, y0, t, eps).cwiseAbs().maxCoeff() +
                                            sys.g(x0, y0, t, eps).cwiseAbs().maxCoeff());
            }
        }
        add("(B2) origin fixed point", worst <= 1e-12, worst);
    }

    // (B1): autonomy at eps = 0.
    if (sys.autonomous_at_zero) {
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            const Vec x = rng.vector(sys.n_x, 0.3);
            const Vec y = rng.vector(sys.n_y, 0.3);
            const double t = rng.uniform(-3.0, 3.0);
            const double h = 0.37;
            worst = std::max(worst,
                             (sys.f(x, y, t + h, 0.0) - sys.f(x, y, t, 0.0)).cwiseAbs().maxCoeff() +
                                 (sys.g(x, y, t + h, 0.0) - sys.g(x, y, t, 0.0)).cwiseAbs().maxCoeff());
        }
        add("(B1) autonomous at eps=0", worst <= 1e-12, worst);
    }

    // Supplied Jacobian oracle vs central finite differences on random probes.
    if (sys.jac) {
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            const Vec x = rng.vector(sys.n_x, 0.4);
            const Vec y = rng.vector(sys.n_y, 0.4);
            const double t = rng.uniform(-2.0, 2.0);
            const double eps = rng.uniform(1e-3, 1e-1);
            const JacobianBlocks sup = sys.jac(x, y, t, eps);
            SlowFastSystem fdsys = sys;
            fdsys.jac = nullptr;
            const JacobianBlocks fd = jacobian_blocks(fdsys, x, y, t, eps);
            auto rel = [](const Mat& a, const Mat& b) {
                const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
                return (a - b).cwiseAbs().maxCoeff() / scale;
            };
            worst = std::max({worst, rel(sup.fx, fd.fx), rel(sup.fy, fd.fy), rel(sup.gx, fd.gx),
                              rel(sup.gy, fd.gy)});
        }
        add("jacobian oracle vs finite differences", worst <= 1e-5, worst);
    }

    // (D8) expansion defects on probes.
    if (sys.inv && sys.inv->expansion) {
        const auto& e = *sys.inv->expansion;
        double worst0 = std::abs(e.H0(Vec::Zero(sys.n_x), 1e-2));
        double worst1 = e.H1(Vec::Zero(sys.n_x), 1e-2).cwiseAbs().maxCoeff();
        double worst3 = 0.0, worstD3 = 0.0;
        for (int k = 0; k < 8; ++k) {
            const Vec x = rng.vector(sys.n_x, 0.2);
            const double eps = rng.uniform(1e-3, 1e-1);
            worst0 = std::max(worst0, std::abs(e.H0(Vec::Zero(sys.n_x), eps)));
            worst1 = std::max(worst1, e.H1(Vec::Zero(sys.n_x), eps).cwiseAbs().maxCoeff());
            worst3 = std::max(worst3, std::abs(e.H3(x, Vec::Zero(sys.n_y), eps)));
            // D_u H3(x, 0) via central differences
            for (int j = 0; j < sys.n_y; ++j) {
                Vec up = Vec::Zero(sys.n_y), um = Vec::Zero(sys.n_y);
                const double h = 1e-6;
                up[j] = h;
                um[j] = -h;
                worstD3 = std::max(worstD3,
                                   std::abs(e.H3(x, up, eps) - e.H3(x, um, eps)) / (2.0 * h));
            }
        }
        add("(D8) H0(0,eps) = 0", worst0 <= 1e-10, worst0);
        add("(D8) H1(0,eps) = 0", worst1 <= 1e-10, worst1);
        add("(D8) H3(x,0,eps) = 0", worst3 <= 1e-10, worst3);
        add("(D8) D_u H3(x,0,eps) = 0", worstD3 <= 1e-6, worstD3);
        add("(D8) a_bar = c0 c2 - c1^2 > 0", e.a_bar() > 0.0, e.a_bar());
    }

    // Declared dormant fast block really is dormant.
    if (sys.fast_dormant) {
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            const Vec x = rng.vector(sys.n_x, 0.4);
            const Vec y = rng.vector(sys.n_y, 0.4);
            worst = std::max(worst, sys.g(x, y, 0.3, 1e-2).cwiseAbs().maxCoeff());
            worst = std::max(worst, (sys.f(x, y, 0.3, 1e-2) - sys.f(x, Vec::Zero(sys.n_y), 0.3, 1e-2))
                                        .cwiseAbs()
                                        .maxCoeff());
        }
        add("fast block dormant (g = 0, f y-independent)", worst <= 1e-12, worst);
    }

    return rep;
}

}  // namespace nesp::model
