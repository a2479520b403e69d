#include "nesp/diagonalize.hpp"

#include "nesp/integrate.hpp"
#include "nesp/systems.hpp"

#include <doctest.h>

using namespace nesp;
using namespace nesp::diagonalize;

namespace {

SlowFastSystem coupled_system() {
    SlowFastSystem sys;
    sys.n_x = 2;
    sys.n_y = 2;
    sys.A = (Mat(2, 2) << 0.3, 1.0, -0.4, -0.9).finished();
    sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    sys.f = [](const Vec& x, const Vec& y, double, double eps) {
        return (Vec(2) << 0.5 * y[0] + 0.2 * x[1] * x[1] + eps * 0.1 * x[0], -0.3 * y[1])
            .finished();
    };
    sys.g = [](const Vec& x, const Vec& y, double, double eps) {
        return (Vec(2) << 0.7 * x[0] + eps * y[1], -0.2 * x[1] + 0.4 * x[0] * x[0]).finished();
    };
    return sys;
}

systems::BuiltinSystem raw_pendulum(double eps) {
    systems::PendulumForcing forcing;
    forcing.F2 = [](double x, double, double, double) { return std::sin(x); };
    return systems::elastic_pendulum_dissipative(1.0, 0.1, forcing, eps, false);
}

linalg::DichotomySplit saddle_split() {
    return linalg::spectral_dichotomy((Mat(2, 2) << 0, 1, 1, 0).finished(),
                                      {-0.95, -0.05, 0.05, 0.95});
}

}  // namespace

TEST_CASE("eps = 0 gives (L1, L2) = (0, 0) exactly") {
    const auto blocks = linearization_at_origin(coupled_system(), 0.0);
    const auto r = solve_L_newton(blocks);
    CHECK(r.L1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.L2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.residual1 == 0.0);
}

TEST_CASE("Dxg = 0 and Dyf = 0 keep the zero fixed point") {
    SlowFastSystem sys = coupled_system();
    sys.f = [](const Vec& x, const Vec&, double, double) {
        return (Vec(2) << 0.2 * x[1] * x[1], 0.0).finished();
    };
    sys.g = [](const Vec& x, const Vec&, double, double) {
        return (Vec(2) << 0.0, 0.4 * x[0] * x[0]).finished();
    };
    const auto blocks = linearization_at_origin(sys, 1e-2);
    const auto rn = solve_L_newton(blocks);
    CHECK(rn.L1.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(rn.L2.cwiseAbs().maxCoeff() <= 1e-14);
    const auto split = linalg::spectral_dichotomy(Mat(blocks.A + blocks.Dxf),
                                                  linalg::auto_gaps(Mat(blocks.A + blocks.Dxf)));
    const auto rd = solve_L_dichotomy(split, blocks);
    CHECK(rd.L1.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(rd.L2.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("newton on a generic coupled system: residuals, off-diagonal, spectrum") {
    const auto sys = coupled_system();
    const double eps = 1e-3;
    const auto blocks = linearization_at_origin(sys, eps);
    const auto r = solve_L_newton(blocks);
    const double scale = linalg::opnorm(blocks.J);
    CHECK(r.residual1 <= 1e-12 * std::max(scale, 1.0));
    CHECK(r.residual2 <= 1e-12 * std::max(scale, 1.0));
    CHECK(r.offdiag_norm <= 1e-10);

    // eigenvalues preserved under the similarity
    Mat Aeps(4, 4);
    Aeps.topLeftCorner(2, 2) = blocks.A + blocks.Dxf;
    Aeps.topRightCorner(2, 2) = blocks.Dyf;
    Aeps.bottomLeftCorner(2, 2) = blocks.Dxg;
    Aeps.bottomRightCorner(2, 2) = blocks.J / eps + blocks.Dyg;
    auto [conj, off] = apply_similarity(blocks, r.L1, r.L2);
    CHECK(off <= 1e-10);
    Eigen::VectorXcd l1 = Eigen::EigenSolver<Mat>(Aeps).eigenvalues();
    Eigen::VectorXcd l2 = Eigen::EigenSolver<Mat>(conj).eigenvalues();
    // match by nearest (order is not canonical)
    for (int i = 0; i < 4; ++i) {
        double best = 1e300;
        for (int j = 0; j < 4; ++j) best = std::min(best, std::abs(l1[i] - l2[j]));
        CHECK(best <= 1e-9 * std::max(1.0, std::abs(l1[i])));
    }
}

TEST_CASE("L1 = L2 = 0 leaves the matrix unchanged") {
    const auto blocks = linearization_at_origin(coupled_system(), 1e-2);
    auto [conj, off] = apply_similarity(blocks, Mat::Zero(2, 2), Mat::Zero(2, 2));
    Mat Aeps(4, 4);
    Aeps.topLeftCorner(2, 2) = blocks.A + blocks.Dxf;
    Aeps.topRightCorner(2, 2) = blocks.Dyf;
    Aeps.bottomLeftCorner(2, 2) = blocks.Dxg;
    Aeps.bottomRightCorner(2, 2) = blocks.J / 1e-2 + blocks.Dyg;
    CHECK((conj - Aeps).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(off == doctest::Approx(linalg::opnorm(blocks.Dxg)).epsilon(1e-6));
}

TEST_CASE("pendulum instance: |L1| = O(eps^2) and method agreement") {
    std::vector<double> eps_list = {3e-2, 1e-2, 3e-3, 1e-3}, l1norm;
    for (double eps : eps_list) {
        const auto b = raw_pendulum(eps);
        const auto blocks = linearization_at_origin(b.sys, eps);
        const auto rn = solve_L_newton(blocks);
        l1norm.push_back(linalg::opnorm(rn.L1));
        const auto rd = solve_L_dichotomy(saddle_split(), blocks);
        const double agree = linalg::opnorm(Mat(rn.L1 - rd.L1)) +
                             linalg::opnorm(Mat(rn.L2 - rd.L2));
        CHECK(agree <= 1e-10);
        CHECK(rd.margin > 0.0);
        CHECK(rd.residual1 <= 1e-12);
    }
    const auto fit = fit_loglog_slope(eps_list, l1norm);
    CHECK(fit.slope >= 1.8);
}

TEST_CASE("generic O(1) fast-slow coupling gives |L1| = O(eps)") {
    std::vector<double> eps_list = {1e-2, 3e-3, 1e-3, 3e-4}, l1norm;
    for (double eps : eps_list) {
        const auto blocks = linearization_at_origin(coupled_system(), eps);
        const auto r = solve_L_newton(blocks);
        l1norm.push_back(linalg::opnorm(r.L1));
    }
    const auto fit = fit_loglog_slope(eps_list, l1norm);
    CHECK(fit.slope >= 0.9);
    CHECK(fit.slope <= 1.1);
}

TEST_CASE("dichotomy fixed-point equals the direct oscillatory quadrature") {
    // G^u as an improper integral vs its Sylvester solution on a 2+2 example
    const double eps = 0.05;
    Mat J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    Mat Au = (Mat(1, 1) << 0.9).finished();  // 1-D unstable restriction
    Mat M = (Mat(2, 1) << 0.3, -0.8).finished();
    // S solves J S - S (eps Au) = M
    const Mat S = linalg::solve_sylvester(J, Mat(eps * Au), M);
    // direct quadrature of int_{+inf}^0 e^{tJ} M e^{-eps t Au} dt
    Mat I = Mat::Zero(2, 1);
    const double T = 400.0, h = 0.005;
    for (double t = T; t > h / 2; t -= h) {
        auto term = [&](double tt) {
            return Mat(linalg::expm(J, tt) * M * std::exp(-eps * tt * Au(0, 0)));
        };
        I -= h / 6.0 * (term(t) + 4.0 * term(t - h / 2) + term(t - h));  // [+inf -> 0]
    }
    CHECK((I - S).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("eq 7.6 violation raises the no-contraction error with the quantities") {
    // make the hyperbolic rates tiny so 1/|w_s| + 1/|w_u| explodes
    SlowFastSystem sys = coupled_system();
    sys.A = (Mat(2, 2) << -0.05, 0, 0, 0.05).finished();
    sys.f = [](const Vec&, const Vec& y, double, double) {
        return (Vec(2) << 0.5 * y[0], 0.2 * y[1]).finished();
    };
    const auto blocks = linearization_at_origin(sys, 1e-2);
    const auto split = linalg::spectral_dichotomy(Mat(blocks.A + blocks.Dxf),
                                                  {-0.045, -0.01, 0.01, 0.045});
    try {
        solve_L_dichotomy(split, blocks);
        FAIL("expected the no-contraction error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numerical);
        CHECK(std::string(e.what()).find("eq 7.6") != std::string::npos);
    }
}

TEST_CASE("transformed system wraps the nonlinear oracles (eq 7.2)") {
    const auto sys = coupled_system();
    const double eps = 1e-2;
    const auto blocks = linearization_at_origin(sys, eps);
    const auto r = solve_L_newton(blocks);
    const SlowFastSystem tsys = transform_system(sys, r.L1, r.L2, eps);
    // the transformed linearization has off-diagonal blocks at the 1e-10 level
    const auto tb = linearization_at_origin(tsys, eps);
    CHECK(tb.Dxg.cwiseAbs().maxCoeff() <= 1e-6);  // finite-difference floor
    CHECK(tb.Dyf.cwiseAbs().maxCoeff() <= 1e-6);
    // and the flows agree through the change of variables on a short run
    Vec x0(2), y0(2);
    x0 << 0.05, -0.02;
    y0 << 0.03, 0.01;
    Mat T(4, 4);
    T.topLeftCorner(2, 2) = Mat::Identity(2, 2);
    T.topRightCorner(2, 2) = r.L2;
    T.bottomLeftCorner(2, 2) = r.L1;
    T.bottomRightCorner(2, 2) = Mat::Identity(2, 2);
    Vec z(4);
    z << x0, y0;
    const Vec zh = T.fullPivLu().solve(z);
    const auto t1 = integrate::integrate_full(sys, x0, y0, 0.0, 5e-1, eps, {1e-11, 1e-13});
    const auto t2 = integrate::integrate_full(tsys, zh.head(2), zh.tail(2), 0.0, 5e-1, eps,
                                              {1e-11, 1e-13});
    const Vec end1 = t1.eval(0.5);
    const Vec end2 = T * t2.eval(0.5);
    CHECK((end1 - end2).norm() <= 1e-8);
}
