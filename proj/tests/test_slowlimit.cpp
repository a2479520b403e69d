#include "nesp/slowlimit.hpp"

#include "nesp/systems.hpp"

#include <doctest.h>

using namespace nesp;
using namespace nesp::slowlimit;

namespace {

// linear-in-y system with constant fast driving: one push has a closed form
SlowFastSystem linear_driving_system(const Mat& B, const Vec& c) {
    SlowFastSystem sys;
    sys.n_x = 2;
    sys.n_y = 2;
    sys.A = (Mat(2, 2) << -0.5, 0.2, 0.0, -1.0).finished();
    sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    sys.f = [](const Vec& x, const Vec&, double, double) {
        return (Vec(2) << 0.1 * x[0] * x[0], 0.0).finished();
    };
    sys.g = [B, c](const Vec&, const Vec& y, double, double) { return (c + B * y).eval(); };
    sys.autonomous_at_zero = true;
    return sys;
}

}  // namespace

TEST_CASE("push on g = 0 is the identity with zero residual") {
    SlowFastSystem sys;
    sys.n_x = 1;
    sys.n_y = 2;
    sys.A = (Mat(1, 1) << -1).finished();
    sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    sys.f = [](const Vec& x, const Vec&, double, double) {
        return (Vec(1) << 0.2 * x[0] * x[0]).finished();
    };
    sys.g = [](const Vec&, const Vec&, double, double) { return Vec::Zero(2).eval(); };
    TransformChain chain(sys);
    chain.push();
    ProbeBox box;
    box.center = Vec::Zero(1);
    box.radius = 0.4;
    CHECK(residual_norm(chain.system(1), box, {0.0, 1.0}, 1e-2) <= 1e-13);
    // step map is the identity
    Vec y(2);
    y << 0.3, -0.1;
    CHECK((chain.forward(Vec::Zero(1), y, 0.0, 1e-2) - y).norm() <= 1e-13);
}

TEST_CASE("one push on the linear-driving system matches the hand-composed formula") {
    // g(x, y) = c + B y, f independent of y, D_x g = 0, d/dt g = 0:
    //   y1 = y + eps J^{-1} c, so
    //   g_new(x, y1) = c + B(y1 - eps J^{-1} c) - c = B y1 - eps B J^{-1} c
    Mat B(2, 2);
    B << 0.2, -0.1, 0.05, 0.3;
    Vec c(2);
    c << 1.0, -0.5;
    const auto sys = linear_driving_system(B, c);
    TransformChain chain(sys);
    chain.push();
    const Mat Jinv = sys.J.inverse();
    ProbeRng rng(4);
    for (int k = 0; k < 6; ++k) {
        const Vec x = rng.vector(2, 0.5);
        const Vec y1 = rng.vector(2, 0.5);
        const double eps = rng.uniform(1e-3, 1e-1);
        const Vec got = chain.system(1).g(x, y1, 0.3, eps);
        const Vec want = B * y1 - eps * (B * (Jinv * c));
        CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-11);
    }
}

TEST_CASE("forward/inverse transform round trip") {
    const auto b = systems::elastic_pendulum_conservative(1.0, nullptr, 1e-2);
    TransformChain chain(b.sys);
    chain.push();
    chain.push();
    ProbeRng rng(6);
    for (int k = 0; k < 5; ++k) {
        const Vec x = rng.vector(2, 0.2);
        const Vec y = rng.vector(2, 0.2);
        const double eps = rng.uniform(1e-3, 3e-2);
        const Vec yk = chain.forward(x, y, 0.1, eps);
        const Vec back = chain.inverse(x, yk, 0.1, eps);
        CHECK((back - y).norm() <= 1e-10);
    }
}

TEST_CASE("chain residual slopes on the conservative pendulum are 1, 2 after 0, 1 pushes") {
    const auto b = systems::elastic_pendulum_conservative(1.0, nullptr, 1e-2);
    TransformChain chain(b.sys);
    chain.push();
    ProbeBox box;
    box.center = Vec::Zero(2);
    box.radius = 0.15;
    box.samples_per_axis = 5;
    const std::vector<double> eps_list = {1e-1, 3e-2, 1e-2, 3e-3};
    const auto s0 = chain_residual_sweep(chain, 0, box, {0.0}, eps_list);
    const auto s1 = chain_residual_sweep(chain, 1, box, {0.0}, eps_list);
    CHECK(s0.fit.slope == doctest::Approx(1.0).epsilon(0.25));
    CHECK(s1.fit.slope == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("smoothness-budget warning past order 3") {
    const auto b = systems::elastic_pendulum_conservative(1.0, nullptr, 1e-2);
    TransformChain chain(b.sys);
    CHECK(chain.push());
    CHECK(chain.push());
    CHECK(chain.push());
    CHECK(!chain.push());  // warning, not an error
    CHECK(chain.order() == 4);
}

TEST_CASE("convergence study on an exactly-decoupled linear system flags the floor") {
    SlowFastSystem sys;
    sys.n_x = 1;
    sys.n_y = 2;
    sys.A = (Mat(1, 1) << -0.3).finished();
    sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    sys.f = [](const Vec&, const Vec&, double, double) { return Vec::Zero(1).eval(); };
    sys.g = [](const Vec&, const Vec&, double, double) { return Vec::Zero(2).eval(); };
    StudyConfig cfg;
    cfg.x0 = (Vec(1) << 0.7).finished();
    cfg.T = 3.0;
    cfg.eps_list = {1e-1, 1e-2, 1e-3};
    const auto sweep = convergence_study(sys, StudyKind::Thm31, cfg);
    CHECK(sweep.fit.floor_detected);
}

TEST_CASE("Thm 3.1 sweep on the elastic pendulum has slope near 1") {
    const auto b = systems::elastic_pendulum_dissipative(1.0, 0.1);
    StudyConfig cfg;
    cfg.x0 = (Vec(2) << 0.8, 0.0).finished();
    cfg.T = 5.0;
    cfg.eps_list = {1e-1, 3e-2, 1e-2};
    cfg.jobs = 3;
    const auto sweep = convergence_study(b.sys, StudyKind::Thm31, cfg);
    CHECK(sweep.fit.slope == doctest::Approx(1.0).epsilon(0.3));
    // monotone decrease of the measured errors
    for (size_t i = 0; i + 1 < sweep.error.size(); ++i) CHECK(sweep.error[i] > sweep.error[i + 1]);
}
