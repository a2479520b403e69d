// Acceptance suite: runs each numbered criterion at its stated tolerance and
// prints one pass/fail line. Usage: acceptance [N] (default: all).

#include "nesp/diagonalize.hpp"
#include "nesp/integrate.hpp"
#include "nesp/manifold.hpp"
#include "nesp/melnikov.hpp"
#include "nesp/slowlimit.hpp"
#include "nesp/sysdsl.hpp"
#include "nesp/systems.hpp"

#include <cstdio>
#include <functional>
#include <random>

using namespace nesp;

namespace {

int g_failures = 0;

void report(int crit, bool pass, const std::string& what) {
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", crit, what.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

linalg::DichotomySplit saddle_split() {
    return linalg::spectral_dichotomy((Mat(2, 2) << 0, 1, 1, 0).finished(),
                                      {-0.95, -0.05, 0.05, 0.95});
}

manifold::LPConfig lp_cfg() {
    manifold::LPConfig cfg;
    cfg.cutoff_radius = 0.45;
    cfg.picard_tol = 1e-10;
    cfg.ode = {1e-10, 1e-12};
    return cfg;
}

// 1. Singular-limit convergence (Theorem 3.1)
void criterion_1() {
    const auto b = systems::elastic_pendulum_dissipative(1.0, 0.1);
    slowlimit::StudyConfig cfg;
    cfg.x0 = (Vec(2) << 0.8, 0.0).finished();
    cfg.T = 5.0;
    cfg.eps_list = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
    cfg.jobs = 5;
    const auto sweep = slowlimit::convergence_study(b.sys, slowlimit::StudyKind::Thm31, cfg);
    const bool pass = sweep.fit.slope >= 0.85 && sweep.fit.slope <= 1.3;
    report(1, pass, fmt("Theorem 3.1 sup-error slope %.3f in [0.85, 1.3]", sweep.fit.slope));
}

// 2. Linearized convergence (Theorem 3.2, dx-error in the plain norm)
void criterion_2() {
    const auto b = systems::elastic_pendulum_dissipative(1.0, 0.1);
    slowlimit::StudyConfig cfg;
    cfg.x0 = (Vec(2) << 0.8, 0.0).finished();
    cfg.dx0 = (Vec(2) << 1.0, 0.0).finished();
    cfg.dy0 = (Vec(2) << 0.0, 1.0).finished();
    cfg.T = 5.0;
    cfg.eps_list = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
    cfg.jobs = 5;
    const auto sweep = slowlimit::convergence_study(b.sys, slowlimit::StudyKind::Thm32, cfg);
    const bool pass = sweep.fit.slope >= 0.8 && sweep.fit.slope <= 1.3;
    report(2, pass, fmt("Theorem 3.2 linearized slope %.3f in [0.8, 1.3]", sweep.fit.slope));
}

// 3. Transformation chain residual slopes (eq E:y_1)
void criterion_3() {
    const auto b = systems::elastic_pendulum_conservative(1.0, nullptr, 1e-2);
    slowlimit::TransformChain chain(b.sys);
    chain.push();
    chain.push();
    slowlimit::ProbeBox box;
    box.center = Vec::Zero(2);
    box.radius = 0.15;
    box.samples_per_axis = 5;
    const std::vector<double> eps_list = {1e-1, 3e-2, 1e-2, 3e-3};
    bool pass = true;
    std::string detail;
    for (int k = 0; k <= 2; ++k) {
        const auto sweep = slowlimit::chain_residual_sweep(chain, k, box, {0.0}, eps_list);
        const bool ok = sweep.fit.slope >= k + 0.75 && sweep.fit.slope <= k + 1.3;
        pass = pass && ok;
        detail += fmt("k=%d slope %.2f%s ", k, sweep.fit.slope, ok ? "" : "(!)");
    }
    report(3, pass, "chain residual slopes in [k+0.75, k+1.3]: " + detail);
}

// 4. Lyapunov-Perron exactness on linear and quadratic systems
void criterion_4() {
    manifold::LPConfig cfg = lp_cfg();
    cfg.cutoff_radius = 1.2;
    bool pass = true;
    std::string detail;

    SlowFastSystem lin;
    lin.n_x = 2;
    lin.n_y = 2;
    lin.A = (Mat(2, 2) << 1, 0, 0, -1).finished();
    lin.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
    lin.f = [](const Vec&, const Vec&, double, double) { return Vec::Zero(2).eval(); };
    lin.g = [](const Vec&, const Vec&, double, double) { return Vec::Zero(2).eval(); };
    const auto split_l = linalg::spectral_dichotomy(lin.A, {-0.95, -0.5, 0.5, 0.95});
    manifold::LPSolver sl(lin, split_l, 1e-2, cfg);
    Vec xi = Vec::Zero(2);
    xi[0] = 0.3;
    const double hl = sl.solve_cu_graph(xi, (Vec(2) << 0.2, -0.1).finished(), 0.0).h.norm();
    pass = pass && hl <= 1e-10;
    detail += fmt("linear |h|=%.1e ", hl);

    const auto bu = systems::test_quadratic(systems::QuadraticKind::UnstableGraph);
    const auto su = linalg::spectral_dichotomy(bu.sys.A, {-0.95, -0.5, 0.5, 0.95});
    manifold::LPSolver solver_u(bu.sys, su, 1e-2, cfg);
    Vec xiu = Vec::Zero(2);
    xiu[0] = 0.1;
    const double cu = solver_u.solve_cu_graph(xiu, Vec::Zero(2), 0.0).h[1] / 0.01;
    pass = pass && std::abs(cu - 1.0 / 3.0) <= 1e-6;
    detail += fmt("unstable coeff %.8f (want 1/3) ", cu);

    const auto bs = systems::test_quadratic(systems::QuadraticKind::StableGraph);
    const auto ss = linalg::spectral_dichotomy(bs.sys.A, {-0.95, -0.5, 0.5, 1.9});
    manifold::LPSolver solver_s(bs.sys, ss, 1e-2, cfg);
    Vec xis = Vec::Zero(2);
    xis[0] = 0.1;
    const double cs = solver_s.solve_s_graph(xis, 0.0).h[1] / 0.01;
    pass = pass && std::abs(cs + 0.25) <= 1e-6;
    detail += fmt("stable coeff %.8f (want -1/4)", cs);
    report(4, pass, detail);
}

// 5. Manifold asymptotics (Prop P:appro)
void criterion_5() {
    const auto b = systems::elastic_pendulum_conservative(1.0, nullptr, 1e-2);
    const auto split = saddle_split();
    const Vec xi_cu = split.basis_u.col(0) * 0.1;
    const auto gap = manifold::manifold_gap_study(b.sys, split, xi_cu, 0.0,
                                                  {3e-2, 1e-2, 3e-3, 1e-3}, lp_cfg(), 4);
    const bool pass = gap.value_gap.fit.slope >= 0.8 && gap.dxi_y_norm.fit.slope >= 0.8;
    report(5, pass,
           fmt("|h_s - h_s*| slope %.2f, |D_xi_y h_s| slope %.2f (both >= 0.8)",
               gap.value_gap.fit.slope, gap.dxi_y_norm.fit.slope));
}

// 6. t0-sensitivity (Prop thm4.26)
void criterion_6() {
    systems::PendulumForcing forcing;
    forcing.F1 = [](double x, double, double t, double) {
        return std::sin(x - M_PI) * std::sin(t);
    };
    const auto b = systems::elastic_pendulum_dissipative(1.0, 0.1, forcing, 1e-2, true);
    const auto split = saddle_split();
    const Vec xi_cu = split.basis_u.col(0) * 0.1;
    const auto sweep = manifold::t0_sensitivity(b.sys, split, xi_cu, Vec::Zero(2), 0.4,
                                                {3e-2, 1e-2, 3e-3, 1e-3}, lp_cfg(), 4);
    const auto b0 = systems::elastic_pendulum_dissipative(1.0, 0.1);
    manifold::LPSolver autonomous(b0.sys, split, 1e-2, lp_cfg());
    const Vec hp = autonomous.solve_cu_graph(xi_cu, Vec::Zero(2), 0.4 + 1e-3).h;
    const Vec hm = autonomous.solve_cu_graph(xi_cu, Vec::Zero(2), 0.4 - 1e-3).h;
    const double auton = (hp - hm).norm() / 2e-3;
    const bool pass = sweep.fit.slope >= 0.75 && auton <= 1e-6;
    report(6, pass,
           fmt("|d h_s/d t0| slope %.3f (>= 0.75); autonomous %.1e (floor)", sweep.fit.slope,
               auton));
}

// 7. Fiber consistency (Theorem 5.2 i / Theorem 5.5)
void criterion_7() {
    const auto b = systems::elastic_pendulum_conservative(1.0, nullptr, 1e-2);
    const auto split = saddle_split();
    manifold::LPSolver solver(b.sys, split, 1e-2, lp_cfg());
    Vec xi_y(2);
    xi_y << 0.03, 0.0;
    const auto base = solver.solve_center_graph(Vec::Zero(2), xi_y, 0.0);
    const auto fib0 = solver.solve_fiber(Vec::Zero(2), Vec::Zero(2), xi_y, 0.0);
    const double base_gap = (fib0.point - base.point).norm();

    const Vec xi_s = split.basis_s.col(0) * 0.08;
    const auto sweep = manifold::fiber_gap_study(b.sys, split, xi_s, Vec::Zero(2), 0.0,
                                                 {1e-2, 3e-3, 1e-3}, lp_cfg(), 3);
    const bool pass = base_gap <= 1e-10 && sweep.fit.slope >= 0.75;
    report(7, pass,
           fmt("xi_s=0 fiber-base gap %.1e (<= 1e-10); fiber-gap slope %.2f (>= 0.75)",
               base_gap, sweep.fit.slope));
}

// 8. Melnikov correctness
void criterion_8() {
    bool pass = true;
    std::string detail;
    // conservative perturbation respecting H
    {
        systems::PotentialFn G = [](double x, double y, double) {
            return 0.4 * (1.0 - std::cos(x)) * (1.0 + y);
        };
        const auto b = systems::elastic_pendulum_conservative(1.0, G, 1e-2);
        const auto orbit =
            melnikov::HomoclinicOrbit::closed_form(b.sys, saddle_split(), *b.ref.homoclinic);
        melnikov::QuadratureConfig quad;
        const auto prof = melnikov::melnikov_profile(b.sys, orbit, {0.0, 1.3, 2.9}, quad);
        double mx = 0;
        for (double m : prof.M) mx = std::max(mx, std::abs(m));
        pass = pass && mx <= 10 * quad.tol;
        detail += fmt("conservative max|M|=%.1e; ", mx);
    }
    // rigid-limit damped-forced profile against the quadrature oracle
    {
        systems::PendulumForcing forcing;
        forcing.F1 = [](double, double, double t, double) { return std::sin(t); };
        const auto b = systems::elastic_pendulum_dissipative(1.0, 0.1, forcing, 1e-2, true);
        const auto orbit =
            melnikov::HomoclinicOrbit::closed_form(b.sys, saddle_split(), *b.ref.homoclinic);
        std::vector<double> grid;
        for (int i = 0; i < 20; ++i) grid.push_back(2 * M_PI * i / 19.0);
        const auto prof = melnikov::melnikov_profile(b.sys, orbit, grid, {});
        // oracle: integral of xdot_h^2 dt = 8; integral of 2 sech(t) sin(t+t0) dt
        // = 2 pi sech(pi/2) sin(t0)
        const double amp = 2.0 * M_PI / std::cosh(M_PI / 2);
        double worst = 0;
        for (size_t i = 0; i < grid.size(); ++i)
            worst = std::max(worst, std::abs(prof.M[i] - (-1.6 + amp * std::sin(grid[i]))));
        pass = pass && worst <= 1e-4;
        detail += fmt("profile max err %.1e (<= 1e-4); ", worst);
        const bool root_ok =
            !prof.roots.empty() && std::abs(prof.roots.front().t0 - 0.694) <= 1e-3;
        pass = pass && root_ok;
        detail += fmt("root t0=%.5f (0.694 +- 1e-3)",
                      prof.roots.empty() ? -1.0 : prof.roots.front().t0);
    }
    report(8, pass, detail);
}

// 9. Splitting vs Melnikov (eq 6.38)
void criterion_9() {
    systems::PendulumForcing forcing;
    forcing.F1 = [](double x, double, double t, double) {
        return std::sin(x - M_PI) * std::sin(t);
    };
    const double t0 = 0.5;
    const std::vector<double> eps_list = {1e-2, 3e-3, 1e-3};
    melnikov::SplittingConfig cfg;
    cfg.lp = lp_cfg();
    bool pass = true;
    double Cmax = 0.0;
    std::vector<double> devs;
    std::string detail;
    for (double eps : eps_list) {
        const auto b = systems::elastic_pendulum_dissipative(1.0, 0.1, forcing, eps, true);
        const auto split = saddle_split();
        const auto orbit =
            melnikov::HomoclinicOrbit::closed_form(b.sys, split, *b.ref.homoclinic);
        const auto prof = melnikov::melnikov_profile(b.sys, orbit, {t0}, {});
        const auto res = melnikov::splitting_distance(b.sys, split, orbit, t0, eps, cfg);
        const double ratio = res.H_diff / (eps * prof.M[0]);
        Cmax = std::max(Cmax, std::abs(ratio - 1.0) / std::sqrt(eps));
        devs.push_back(std::abs(res.H_diff - eps * prof.M[0]));
        pass = pass && std::abs(ratio - 1.0) <= 0.5 * std::sqrt(eps);  // C well below 1/2
        detail += fmt("eps=%g ratio=%.5f; ", eps, ratio);
    }
    const auto fit = fit_loglog_slope(eps_list, devs);
    pass = pass && fit.slope >= 1.4;
    detail += fmt("deviation exponent %.2f (>= 1.4), fitted C=%.3f", fit.slope, Cmax);
    report(9, pass, detail);
}

// 10. Conservative connection (Theorem 6.8)
void criterion_10() {
    const double eps = 1e-2;
    systems::PotentialFn G = [](double x, double y, double) {
        return 0.3 * std::sin(x) * std::exp(2.0 * y);
    };
    const auto b = systems::elastic_pendulum_conservative(1.0, G, eps);
    const auto split = saddle_split();
    const auto orbit = melnikov::HomoclinicOrbit::shooting(b.sys, split);
    melnikov::ConnectionConfig cfg;
    cfg.lp = lp_cfg();
    const auto res = melnikov::conservative_connection(b.sys, split, orbit, eps, cfg);
    const bool root_ok = std::abs(res.h_at_tau0) < 1e-10;
    const bool near_ok = res.dist_to_x0 <= 10 * eps;  // C' epsilon certificate
    const bool tube_ok = res.tube_ratio <= 2.0;
    report(10, root_ok && near_ok && tube_ok,
           fmt("tau0=%.3f |h|=%.1e (<1e-10)%s; |P - x0|=%.1e (<= C' eps); tube ratio %.2f "
               "(<= 2)",
               res.tau0, std::abs(res.h_at_tau0),
               res.degenerate_bracket ? " [degenerate: h vanishes along the homotopy]" : "",
               res.dist_to_x0, res.tube_ratio));
}

// 11. Block diagonalization (Appendix)
void criterion_11() {
    bool pass = true;
    std::string detail;
    // generic coupled system: O(eps) slope, residuals, off-diagonal
    {
        SlowFastSystem sys;
        sys.n_x = 2;
        sys.n_y = 2;
        sys.A = (Mat(2, 2) << 0.3, 1.0, -0.4, -0.9).finished();
        sys.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
        sys.f = [](const Vec& x, const Vec& y, double, double) {
            return (Vec(2) << 0.5 * y[0] + 0.2 * x[1] * x[1], -0.3 * y[1]).finished();
        };
        sys.g = [](const Vec& x, const Vec& y, double, double eps) {
            return (Vec(2) << 0.7 * x[0] + eps * y[1], -0.2 * x[1]).finished();
        };
        std::vector<double> eps_list = {1e-2, 3e-3, 1e-3}, norms;
        for (double eps : eps_list) {
            const auto blocks = diagonalize::linearization_at_origin(sys, eps);
            const auto r = diagonalize::solve_L_newton(blocks);
            pass = pass && r.residual1 <= 1e-12 && r.residual2 <= 1e-12 &&
                   r.offdiag_norm <= 1e-10;
            norms.push_back(linalg::opnorm(r.L1));
        }
        const auto fit = fit_loglog_slope(eps_list, norms);
        pass = pass && fit.slope >= 0.9;
        detail += fmt("generic |L1| slope %.2f (>= 0.9); ", fit.slope);
    }
    // pendulum instance: O(eps^2) and cross-method agreement
    {
        systems::PendulumForcing forcing;
        forcing.F2 = [](double x, double, double, double) { return std::sin(x); };
        std::vector<double> eps_list = {3e-2, 1e-2, 3e-3, 1e-3}, norms;
        double agree = 0.0;
        for (double eps : eps_list) {
            const auto b = systems::elastic_pendulum_dissipative(1.0, 0.1, forcing, eps, false);
            const auto blocks = diagonalize::linearization_at_origin(b.sys, eps);
            const auto rn = diagonalize::solve_L_newton(blocks);
            const auto rd = diagonalize::solve_L_dichotomy(saddle_split(), blocks);
            agree = std::max(agree, linalg::opnorm(Mat(rn.L1 - rd.L1)) +
                                        linalg::opnorm(Mat(rn.L2 - rd.L2)));
            norms.push_back(linalg::opnorm(rn.L1));
            pass = pass && rn.residual1 <= 1e-12 && rn.offdiag_norm <= 1e-10;
        }
        const auto fit = fit_loglog_slope(eps_list, norms);
        pass = pass && fit.slope >= 1.8 && agree <= 1e-10;
        detail += fmt("pendulum |L1| slope %.2f (>= 1.8), methods agree %.1e (<= 1e-10)",
                      fit.slope, agree);
    }
    report(11, pass, detail);
}

// 12. Parser robustness
void criterion_12() {
    using namespace sysdsl;
    bool pass = true;
    std::string detail;
    const std::vector<std::pair<std::string, std::string>> fixtures = {
        {"1+2", "1 + 2"}, {"1+2+3", "1 + 2 + 3"}, {"1-2-3", "1 - 2 - 3"},
        {"1-(2-3)", "1 - (2 - 3)"}, {"2*3+4", "2*3 + 4"}, {"2*(3+4)", "2*(3 + 4)"},
        {"2+3*4", "2 + 3*4"}, {"a*b*c", "a*b*c"}, {"a/b/c", "a/b/c"},
        {"a/(b/c)", "a/(b/c)"}, {"a/b*c", "a/b*c"}, {"2^3", "2^3"}, {"2^3^4", "2^3^4"},
        {"(2^3)^4", "(2^3)^4"}, {"-x", "-x"}, {"--x", "-(-x)"}, {"-x^2", "-x^2"},
        {"(-x)^2", "(-x)^2"}, {"-x*y", "-x*y"}, {"-(x*y)", "-(x*y)"}, {"x--y", "x - -y"},
        {"sin(x)", "sin(x)"}, {"sin(x)^2", "sin(x)^2"}, {"pow(x, y+1)", "pow(x, y + 1)"},
        {"sqrt(abs(x))", "sqrt(abs(x))"}, {"exp(-t/2)", "exp(-t/2)"},
        {"1e-3*eps", "0.001*eps"}, {"2.5E2", "250"},
        {"cos(x1)*sin(y1) - tan(t)", "cos(x1)*sin(y1) - tan(t)"},
        {"1/(1+eps*y1)^2", "1/(1 + eps*y1)^2"},
    };
    int golden_ok = 0;
    for (const auto& [input, want] : fixtures) {
        try {
            const auto ast = parse_expr(input);
            if (pretty_print(ast) == want && structurally_equal(ast, parse_expr(pretty_print(ast))))
                ++golden_ok;
        } catch (const Error&) {
        }
    }
    pass = pass && golden_ok == 30;
    detail += fmt("%d/30 golden fixtures with round trip; ", golden_ok);

    std::mt19937 gen(987654);
    std::uniform_int_distribution<int> len(0, 48);
    const std::string alphabet = "0123456789.+-*/^()abcxyz_,eE \t\nsinco$#@\"'\\{}[]%!=";
    std::uniform_int_distribution<size_t> pick(0, alphabet.size() - 1);
    long crashes = 0;
    for (long i = 0; i < 100000; ++i) {
        std::string input;
        const int n = len(gen);
        for (int j = 0; j < n; ++j) input += alphabet[pick(gen)];
        try {
            const auto e = parse_expr(input);
            eval_expr(e, {{"x", 1.0}, {"y", 2.0}});
        } catch (const Error&) {
        } catch (...) {
            ++crashes;
        }
    }
    pass = pass && crashes == 0;
    detail += fmt("fuzz 1e5 inputs, %ld unstructured failures", crashes);
    report(12, pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
    const int which = argc > 1 ? std::atoi(argv[1]) : 0;
    const std::function<void()> criteria[] = {
        criterion_1, criterion_2, criterion_3, criterion_4,  criterion_5,  criterion_6,
        criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12};
    if (which >= 1 && which <= 12) {
        criteria[which - 1]();
    } else {
        for (const auto& c : criteria) c();
    }
    return g_failures == 0 ? 0 : 1;
}
