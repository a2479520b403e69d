#include "nesp/integrate.hpp"

#include <algorithm>
#include <sstream>

namespace nesp::integrate {

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

void Trajectory::push_node(double t, const Vec& z, const Vec& dz) {
    ts_.push_back(t);
    zs_.push_back(z);
    dzs_.push_back(dz);
}

void Trajectory::finalize() {
    require(!ts_.empty(), ErrorKind::Numerical, "Trajectory: empty");
    forward_ = ts_.back() >= ts_.front();
}

bool Trajectory::covers(double t) const {
    const double lo = std::min(ts_.front(), ts_.back());
    const double hi = std::max(ts_.front(), ts_.back());
    return t >= lo - 1e-12 && t <= hi + 1e-12;
}

size_t Trajectory::locate(double t) const {
    // Index i with t between ts_[i] and ts_[i+1] in the stored direction.
    const auto cmp_fwd = [](double a, double b) { return a < b; };
    size_t lo = 0, hi = ts_.size() - 1;
    if (ts_.size() == 1) return 0;
    while (hi - lo > 1) {
        const size_t mid = (lo + hi) / 2;
        const bool left = forward_ ? cmp_fwd(t, ts_[mid]) : cmp_fwd(ts_[mid], t);
        if (left)
            hi = mid;
        else
            lo = mid;
    }
    return lo;
}

Vec Trajectory::eval_stored(double t) const {
    require(!ts_.empty(), ErrorKind::Numerical, "Trajectory: empty");
    require(covers(t), ErrorKind::Numerical, "Trajectory: t outside covered interval");
    if (ts_.size() == 1) return zs_[0];
    const size_t i = locate(t);
    const double t0 = ts_[i], t1 = ts_[i + 1];
    const double h = t1 - t0;
    if (h == 0.0) return zs_[i];
    const double s = (t - t0) / h;
    // cubic Hermite on (z_i, dz_i), (z_{i+1}, dz_{i+1})
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * zs_[i] + (h10 * h) * dzs_[i] + h01 * zs_[i + 1] + (h11 * h) * dzs_[i + 1];
}

Vec Trajectory::eval(double t) const {
    Vec z = eval_stored(t);
    if (to_physical_) return to_physical_(t, z);
    return z;
}

void Trajectory::eval_xy(double t, int n_x, Vec& x, Vec& y) const {
    const Vec z = eval(t);
    require(z.size() >= n_x, ErrorKind::Model, "Trajectory: state smaller than n_x");
    x = z.head(n_x);
    y = z.tail(z.size() - n_x);
}

std::string Trajectory::to_csv(int n_x) const {
    std::ostringstream os;
    os.precision(17);
    const int n = state_dim();
    os << "t";
    for (int i = 0; i < n_x; ++i) os << ", x" << i + 1;
    for (int i = 0; i < n - n_x; ++i) os << ", y" << i + 1;
    os << "\n";
    for (size_t k = 0; k < ts_.size(); ++k) {
        const Vec z = to_physical_ ? to_physical_(ts_[k], zs_[k]) : zs_[k];
        os << ts_[k];
        for (int i = 0; i < z.size(); ++i) os << ", " << z[i];
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)
// ---------------------------------------------------------------------------

namespace dp {
// Butcher tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// embedded 4th order
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

Trajectory integrate_ode(const RhsFn& rhs, const Vec& z0, double t0, double t1,
                         const IntegratorOptions& opts) {
    Trajectory traj;
    traj.opts = opts;
    const int n = static_cast<int>(z0.size());
    const double dir = t1 >= t0 ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const double hmax = opts.h_max > 0 ? opts.h_max : std::max(span, 1e-12);

    Vec z = z0;
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ztmp(n), z5(n), errv(n);
    double t = t0;
    rhs(t, z, k1);
    require(k1.allFinite(), ErrorKind::Evaluation, "integrate: non-finite rhs at initial state");
    traj.push_node(t, z, k1);

    if (span == 0.0) {
        traj.finalize();
        return traj;
    }

    // initial step size guess
    double h = opts.h_init;
    if (h <= 0.0) {
        const double d0 = z.cwiseAbs().maxCoeff() + 1.0;
        const double d1 = k1.cwiseAbs().maxCoeff() + 1e-12;
        h = std::min(hmax, std::max(1e-8, 0.01 * d0 / d1));
        h = std::min(h, span);
    }

    long naccept = 0, nreject = 0;
    while (dir * (t1 - t) > 0) {
        require(naccept + nreject < opts.max_steps, ErrorKind::Numerical,
                "integrate: max step count exceeded");
        h = std::min(h, std::abs(t1 - t));
        require(h >= opts.h_min, ErrorKind::Numerical, "integrate: step underflow");
        const double hd = dir * h;

        ztmp = z + hd * dp::a21 * k1;
        rhs(t + dp::c2 * hd, ztmp, k2);
        ztmp = z + hd * (dp::a31 * k1 + dp::a32 * k2);
        rhs(t + dp::c3 * hd, ztmp, k3);
        ztmp = z + hd * (dp::a41 * k1 + dp::a42 * k2 + dp::a43 * k3);
        rhs(t + dp::c4 * hd, ztmp, k4);
        ztmp = z + hd * (dp::a51 * k1 + dp::a52 * k2 + dp::a53 * k3 + dp::a54 * k4);
        rhs(t + dp::c5 * hd, ztmp, k5);
        ztmp = z + hd * (dp::a61 * k1 + dp::a62 * k2 + dp::a63 * k3 + dp::a64 * k4 + dp::a65 * k5);
        rhs(t + hd, ztmp, k6);
        z5 = z + hd * (dp::b1 * k1 + dp::b3 * k3 + dp::b4 * k4 + dp::b5 * k5 + dp::b6 * k6);
        rhs(t + hd, z5, k7);  // FSAL

        errv = hd * (dp::e1 * k1 + dp::e3 * k3 + dp::e4 * k4 + dp::e5 * k5 + dp::e6 * k6 +
                     dp::e7 * k7);
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const double sc = opts.atol + opts.rtol * std::max(std::abs(z[i]), std::abs(z5[i]));
            err = std::max(err, std::abs(errv[i]) / sc);
        }
        require(std::isfinite(err) && z5.allFinite(), ErrorKind::Evaluation,
                "integrate: non-finite state");

        if (err <= 1.0) {
            t += hd;
            z = z5;
            k1 = k7;
            traj.push_node(t, z, k1);
            ++naccept;
            traj.stats.h_min_used = std::min(traj.stats.h_min_used, h);
            traj.stats.h_max_used = std::max(traj.stats.h_max_used, h);
        } else {
            ++nreject;
        }
        const double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        h = std::min(hmax, h * std::clamp(fac, 0.2, 5.0));
    }
    traj.stats.accepted = naccept;
    traj.stats.rejected = nreject;
    traj.finalize();
    return traj;
}

// ---------------------------------------------------------------------------
// FastRotor
// ---------------------------------------------------------------------------

FastRotor::FastRotor(const Mat& J, double eps) : prop_(J), eps_(eps) {
    require(linalg::is_antisymmetric(J), ErrorKind::Model, "FastRotor: J must be antisymmetric");
    require(eps > 0.0, ErrorKind::Parameter, "FastRotor: eps must be positive");
}

Vec FastRotor::apply(double s, const Vec& y) const { return prop_.apply(s / eps_, y); }

// ---------------------------------------------------------------------------
// Flows
// ---------------------------------------------------------------------------

Trajectory integrate_full(const SlowFastSystem& sys, const Vec& x0, const Vec& y0, double t0,
                          double t1, double eps, const IntegratorOptions& opts) {
    require(eps > 0.0, ErrorKind::Parameter, "integrate_full: eps must be positive");
    require(x0.size() == sys.n_x && y0.size() == sys.n_y, ErrorKind::Model,
            "integrate_full: dimension mismatch");
    auto rotor = std::make_shared<FastRotor>(sys.J, eps);
    const int nx = sys.n_x, ny = sys.n_y;

    // state z = (x, w), y = e^{(t-t0) J/eps} w
    RhsFn rhs = [&sys, rotor, nx, ny, t0, eps](double t, const Vec& z, Vec& dz) {
        const Vec x = z.head(nx);
        const Vec w = z.tail(ny);
        const Vec y = rotor->apply(t - t0, w);
        dz.resize(nx + ny);
        dz.head(nx) = sys.A * x + sys.f(x, y, t, eps);
        dz.tail(ny) = rotor->apply_inv(t - t0, sys.g(x, y, t, eps));
    };

    Vec z0(nx + ny);
    z0.head(nx) = x0;
    z0.tail(ny) = y0;  // w(t0) = y(t0)
    Trajectory traj = integrate_ode(rhs, z0, t0, t1, opts);
    traj.eps = eps;
    traj.flow = "full";
    traj.set_physical_map([rotor, nx, ny, t0](double t, const Vec& z) {
        Vec out(z.size());
        out.head(nx) = z.head(nx);
        out.tail(ny) = rotor->apply(t - t0, z.tail(ny));
        return out;
    });
    return traj;
}

Trajectory integrate_limit(const SlowFastSystem& sys, const Vec& x0, double t0, double t1,
                           double eps, const IntegratorOptions& opts) {
    require(x0.size() == sys.n_x, ErrorKind::Model, "integrate_limit: dimension mismatch");
    const Vec y0 = Vec::Zero(sys.n_y);
    RhsFn rhs = [&sys, &y0, eps](double t, const Vec& x, Vec& dx) {
        dx = sys.A * x + sys.f(x, y0, t, eps);
    };
    Trajectory traj = integrate_ode(rhs, x0, t0, t1, opts);
    traj.eps = eps;
    traj.flow = eps == 0.0 ? "limit" : "principal";
    return traj;
}

Trajectory variational_full(const SlowFastSystem& sys, const Trajectory& base, const Vec& dx0,
                            const Vec& dy0, double t0, double t1, double eps,
                            const IntegratorOptions& opts) {
    require(base.covers(t0) && base.covers(t1), ErrorKind::Model,
            "variational_full: base trajectory does not cover the interval");
    auto rotor = std::make_shared<FastRotor>(sys.J, eps);
    const int nx = sys.n_x, ny = sys.n_y;

    RhsFn rhs = [&sys, &base, rotor, nx, ny, t0, eps](double t, const Vec& z, Vec& dz) {
        Vec xb, yb;
        base.eval_xy(t, nx, xb, yb);
        const JacobianBlocks b = model::jacobian_blocks(sys, xb, yb, t, eps);
        const Vec dx = z.head(nx);
        const Vec dy = rotor->apply(t - t0, z.tail(ny));
        dz.resize(nx + ny);
        dz.head(nx) = sys.A * dx + b.fx * dx + b.fy * dy;
        dz.tail(ny) = rotor->apply_inv(t - t0, Vec(b.gx * dx + b.gy * dy));
    };

    Vec z0(nx + ny);
    z0.head(nx) = dx0;
    z0.tail(ny) = dy0;
    Trajectory traj = integrate_ode(rhs, z0, t0, t1, opts);
    traj.eps = eps;
    traj.flow = "variational";
    traj.set_physical_map([rotor, nx, ny, t0](double t, const Vec& z) {
        Vec out(z.size());
        out.head(nx) = z.head(nx);
        out.tail(ny) = rotor->apply(t - t0, z.tail(ny));
        return out;
    });
    return traj;
}

Trajectory variational_limit(const SlowFastSystem& sys, const Trajectory& base_x, const Vec& dx0,
                             const Vec& dy0, double t0, double t1, double eps,
                             const IntegratorOptions& opts) {
    require(base_x.covers(t0) && base_x.covers(t1), ErrorKind::Model,
            "variational_limit: base trajectory does not cover the interval");
    const int nx = sys.n_x, ny = sys.n_y;
    const double eps_rot = eps > 0 ? eps : 1.0;  // eps = 0: dy frozen rotation irrelevant
    auto rotor = std::make_shared<FastRotor>(sys.J, eps_rot);
    const Vec zero_y = Vec::Zero(ny);

    RhsFn rhs = [&sys, &base_x, rotor, nx, ny, t0, eps, &zero_y](double t, const Vec& z, Vec& dz) {
        const Vec xb = base_x.eval(t).head(nx);
        const JacobianBlocks b = model::jacobian_blocks(sys, xb, zero_y, t, eps);
        const Vec dx = z.head(nx);
        const Vec dy = rotor->apply(t - t0, z.tail(ny));
        dz.resize(nx + ny);
        dz.head(nx) = sys.A * dx + b.fx * dx;
        dz.tail(ny) = rotor->apply_inv(t - t0, Vec(b.gy * dy));
    };

    Vec z0(nx + ny);
    z0.head(nx) = dx0;
    z0.tail(ny) = dy0;
    Trajectory traj = integrate_ode(rhs, z0, t0, t1, opts);
    traj.eps = eps;
    traj.flow = "variational_limit";
    traj.set_physical_map([rotor, nx, ny, t0](double t, const Vec& z) {
        Vec out(z.size());
        out.head(nx) = z.head(nx);
        out.tail(ny) = rotor->apply(t - t0, z.tail(ny));
        return out;
    });
    return traj;
}

Mat fast_evolution(const SlowFastSystem& sys, const Trajectory& x_traj, double t0, double t1,
                   double eps, const IntegratorOptions& opts) {
    require(x_traj.covers(t0) && x_traj.covers(t1), ErrorKind::Model,
            "fast_evolution: x trajectory does not cover the interval");
    const int ny = sys.n_y;
    Mat E(ny, ny);
    for (int j = 0; j < ny; ++j) {
        Vec dy0 = Vec::Zero(ny);
        dy0[j] = 1.0;
        const Trajectory col = variational_limit(sys, x_traj, Vec::Zero(sys.n_x), dy0, t0, t1,
                                                 eps, opts);
        E.col(j) = col.eval(t1).tail(ny);
    }
    return E;
}

}  // namespace nesp::integrate
