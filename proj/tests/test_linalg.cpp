#include "nesp/linalg.hpp"

#include <doctest.h>

using namespace nesp;
using namespace nesp::linalg;

namespace {
Mat rot90() { return (Mat(2, 2) << 0, 1, -1, 0).finished(); }
}  // namespace

TEST_CASE("expm at t = 0 is the identity") {
    Mat M(3, 3);
    M << 1, 2, 0, -1, 0.5, 3, 0, 0, -2;
    CHECK((expm(M, 0.0) - Mat::Identity(3, 3)).norm() < 1e-14);
}

TEST_CASE("expm of the standard rotation by pi/2") {
    const Mat R = expm(rot90(), M_PI / 2);
    Mat want(2, 2);
    want << 0, 1, -1, 0;
    CHECK((R - want).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("antisymmetric exponentials are orthogonal to 1e-12") {
    ProbeRng rng(3);
    for (int k = 0; k < 10; ++k) {
        Mat S = Mat::Zero(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                S(i, j) = rng.uniform(-2, 2);
                S(j, i) = -S(i, j);
            }
        const double t = rng.uniform(-20, 20);
        const Mat R = expm(S, t);
        CHECK((R.transpose() * R - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
        const Vec y = rng.vector(4, 1.0);
        CHECK(std::abs((R * y).norm() - y.norm()) < 1e-12);
    }
}

TEST_CASE("semigroup property on random matrices") {
    ProbeRng rng(5);
    for (int k = 0; k < 6; ++k) {
        Mat M(3, 3);
        for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = rng.uniform(-1, 1);
        const double s = rng.uniform(-1.5, 1.5), t = rng.uniform(-1.5, 1.5);
        CHECK((expm(M, s) * expm(M, t) - expm(M, s + t)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("Propagator matches expm along the way") {
    Mat M(2, 2);
    M << -0.3, 1.2, 0.4, 0.1;
    Propagator p(M);
    ProbeRng rng(8);
    for (int k = 0; k < 8; ++k) {
        const double t = rng.uniform(-3, 3);
        const Vec v = rng.vector(2, 1.0);
        CHECK((p.apply(t, v) - expm(M, t) * v).norm() < 1e-10);
    }
}

TEST_CASE("spectral dichotomy of a diagonal model gives coordinate projections") {
    Mat A = Mat::Zero(3, 3);
    A(0, 0) = -1;
    A(1, 1) = 0;
    A(2, 2) = 2;
    const auto split = spectral_dichotomy(A, {-0.5, -0.25, 0.25, 0.5});
    CHECK(split.dim_s == 1);
    CHECK(split.dim_c == 1);
    CHECK(split.dim_u == 1);
    CHECK(std::abs(split.P_s(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(split.P_c(1, 1) - 1.0) < 1e-12);
    CHECK(std::abs(split.P_u(2, 2) - 1.0) < 1e-12);
    CHECK(split.K >= 1.0);
    CHECK(split.K < 1.0 + 1e-9);
}

TEST_CASE("projection algebra and invariance for a coupled matrix") {
    // pendulum-limit block at the saddle: eigenvalues +-1
    Mat A(2, 2);
    A << 0, 1, 1, 0;
    const auto split = spectral_dichotomy(A, {-0.95, -0.05, 0.05, 0.95});
    CHECK(split.dim_s == 1);
    CHECK(split.dim_c == 0);
    CHECK(split.dim_u == 1);
    const Mat sum = split.P_s + split.P_c + split.P_u;
    CHECK((sum - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    for (const Mat& P : {split.P_s, split.P_c, split.P_u}) {
        CHECK((P * P - P).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((A * P - P * A).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK((split.P_s * split.P_u).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("defective block confined to the center band") {
    Mat A(2, 2);
    A << 0, 1, 0, 0;
    const auto split = spectral_dichotomy(A, {-0.5, -0.25, 0.25, 0.5});
    CHECK(split.dim_c == 2);
    CHECK((split.P_c - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(split.K > 1.0);  // polynomial growth folded into K
}

TEST_CASE("eigenvalue on a band boundary raises the degenerate-splitting error") {
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = -0.4;  // inside (a1, a2) = (-0.5, -0.25)
    A(1, 1) = 1.0;
    CHECK_THROWS_AS(spectral_dichotomy(A, DichotomyGaps{-0.5, -0.25, 0.25, 0.5}), Error);
}

TEST_CASE("auto gaps bracket the spectrum") {
    Mat A(2, 2);
    A << 0, 1, 1, 0;
    const auto g = auto_gaps(A);
    CHECK(g.a1 == doctest::Approx(-0.95));
    CHECK(g.a2_prime == doctest::Approx(0.95));
    CHECK(g.a2 < 0);
    CHECK(g.a1_prime > 0);
    const auto split = spectral_dichotomy(A, g);
    CHECK(split.dim_s == 1);
}

TEST_CASE("sylvester: scalar and zero cases") {
    Mat P(1, 1), Q(1, 1), C(1, 1);
    P << 2;
    Q << 1;
    C << 3;
    CHECK(solve_sylvester(P, Q, C)(0, 0) == doctest::Approx(3.0));
    C << 0;
    CHECK(solve_sylvester(P, Q, C)(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("sylvester: random 4x4 / 2x2 with separated spectra") {
    ProbeRng rng(13);
    for (int k = 0; k < 5; ++k) {
        Mat P(4, 4), Q(2, 2), C(4, 2);
        for (int i = 0; i < 16; ++i) P(i / 4, i % 4) = rng.uniform(-1, 1);
        P += 5.0 * Mat::Identity(4, 4);  // push spectra apart
        for (int i = 0; i < 4; ++i) Q(i / 2, i % 2) = rng.uniform(-1, 1);
        for (int i = 0; i < 8; ++i) C(i / 2, i % 2) = rng.uniform(-1, 1);
        const Mat L = solve_sylvester(P, Q, C);
        CHECK(opnorm(P * L - L * Q - C) <= 1e-10);
    }
}

TEST_CASE("sylvester: overlapping spectra raise the singular-equation error") {
    Mat P(1, 1), Q(1, 1), C(1, 1);
    P << 1;
    Q << 1;
    C << 1;
    CHECK_THROWS_AS(solve_sylvester(P, Q, C), Error);
}
