#include "nesp/cli.hpp"

#include "nesp/diagonalize.hpp"
#include "nesp/integrate.hpp"
#include "nesp/manifold.hpp"
#include "nesp/melnikov.hpp"
#include "nesp/model.hpp"
#include "nesp/slowlimit.hpp"
#include "nesp/sysdsl.hpp"
#include "nesp/systems.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace nesp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "nesp 0.1.0";

struct RunContext {
    std::string out_dir;
    int jobs = 1;
    bool dry_run = false;
    json manifest;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void note_input(const std::string& path, const std::string& content) {
        manifest["inputs"][path] = fnv1a64(content);
    }

    std::string write(const std::string& name, const std::string& content) {
        fs::create_directories(out_dir);
        const std::string path = (fs::path(out_dir) / name).string();
        std::ofstream os(path);
        os << content;
        manifest["outputs"].push_back(name);
        return path;
    }

    void finish(const std::string& subcommand) {
        manifest["subcommand"] = subcommand;
        manifest["version"] = kVersion;
        manifest["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write("manifest.json", manifest.dump(2) + "\n");
    }
};

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

Vec parse_vec(const std::string& s, int expect = -1) {
    const auto items = parse_list(s);
    require(expect < 0 || static_cast<int>(items.size()) == expect, ErrorKind::Parameter,
            "vector '" + s + "' has wrong length");
    Vec v(static_cast<int>(items.size()));
    for (size_t i = 0; i < items.size(); ++i) v[static_cast<int>(i)] = items[i];
    return v;
}

std::vector<double> parse_grid(const std::string& s) {
    // "lo:hi:n" or comma list
    if (s.find(':') == std::string::npos) return parse_list(s);
    std::stringstream ss(s);
    std::string a, b, c;
    std::getline(ss, a, ':');
    std::getline(ss, b, ':');
    std::getline(ss, c, ':');
    const double lo = std::stod(a), hi = std::stod(b);
    const int n = std::stoi(c);
    require(n >= 2, ErrorKind::Parameter, "grid needs at least 2 points");
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
    return out;
}

systems::ForcingFn make_forcing(const std::string& expr) {
    if (expr.empty()) return nullptr;
    const sysdsl::ExprPtr ast = sysdsl::parse_expr(expr);
    return [ast](double x, double y, double t, double eps) {
        sysdsl::Env env{{"x1", x}, {"y1", y}, {"t", t}, {"eps", eps},
                        {"pi", 3.14159265358979323846}};
        return sysdsl::eval_expr(ast, env);
    };
}

struct SystemChoice {
    std::string spec = "builtin:elastic_pendulum";
    double gravity = 1.0;
    double gamma = 0.1;
    std::string forcing1, forcing2, potential;
    double eps_build = 1e-2;

    systems::BuiltinSystem resolve(RunContext& ctx) const {
        if (spec.rfind("builtin:", 0) == 0) {
            const std::string name = spec.substr(8);
            ctx.manifest["config"]["system"] = spec;
            if (name == "elastic_pendulum" || name == "elastic_pendulum_raw") {
                systems::PendulumForcing forcing;
                forcing.F1 = make_forcing(forcing1);
                forcing.F2 = make_forcing(forcing2);
                return systems::elastic_pendulum_dissipative(
                    gravity, gamma, forcing, eps_build, name == "elastic_pendulum");
            }
            if (name == "elastic_pendulum_conservative") {
                systems::PotentialFn G;
                if (!potential.empty()) {
                    const sysdsl::ExprPtr ast = sysdsl::parse_expr(potential);
                    G = [ast](double x, double y, double eps) {
                        sysdsl::Env env{{"x1", x}, {"y1", y}, {"eps", eps},
                                        {"pi", 3.14159265358979323846}};
                        return sysdsl::eval_expr(ast, env);
                    };
                }
                return systems::elastic_pendulum_conservative(gravity, G, eps_build);
            }
            return systems::make_builtin(name, {{"gravity", gravity}, {"gamma", gamma}});
        }
        std::ifstream in(spec);
        require(in.good(), ErrorKind::Parameter, "cannot open system file '" + spec + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        ctx.note_input(spec, ss.str());
        ctx.manifest["config"]["system"] = spec;
        systems::BuiltinSystem b;
        b.sys = sysdsl::parse_system(ss.str());
        return b;
    }
};

linalg::DichotomySplit make_split(const SlowFastSystem& sys, const std::string& gaps_str) {
    const Vec x0 = Vec::Zero(sys.n_x), y0 = Vec::Zero(sys.n_y);
    const JacobianBlocks jb = model::jacobian_blocks(sys, x0, y0, 0.0, 0.0);
    const Mat A_f = sys.A + jb.fx;
    linalg::DichotomyGaps gaps;
    if (!gaps_str.empty()) {
        const Vec g = parse_vec(gaps_str, 4);
        gaps = {g[0], g[1], g[2], g[3]};
    } else {
        gaps = linalg::auto_gaps(A_f);
    }
    return linalg::spectral_dichotomy(A_f, gaps);
}

json sweep_json(const slowlimit::SweepResult& r) {
    json j;
    j["slope"] = r.fit.slope;
    j["intercept"] = r.fit.intercept;
    j["points_used"] = r.fit.points_used;
    j["floor_flag"] = r.fit.floor_detected;
    j["floor_estimate"] = r.floor_estimate;
    j["norm"] = r.norm;
    return j;
}

int dispatch(CLI::App& app, RunContext& ctx, const std::function<int()>& body) {
    if (ctx.dry_run) {
        std::cout << "dry-run plan:\n" << ctx.manifest.dump(2) << "\n";
        return 0;
    }
    (void)app;
    return body();
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"normally elliptic singular perturbation toolkit"};
    app.require_subcommand(1);

    RunContext ctx;
    const char* env_out = std::getenv("NESP_OUT");
    ctx.out_dir = env_out ? env_out : "out";
    app.add_option("--out", ctx.out_dir, "output directory");
    app.add_option("--jobs", ctx.jobs, "parallel sweep legs");
    app.add_flag("--dry-run", ctx.dry_run, "validate config and print the plan only");

    SystemChoice sys_choice;
    auto add_system_opts = [&](CLI::App* sub) {
        sub->add_option("--system", sys_choice.spec, "builtin:<name> or a .sys document path");
        sub->add_option("--gravity", sys_choice.gravity, "pendulum gravity");
        sub->add_option("--gamma", sys_choice.gamma, "pendulum damping");
        sub->add_option("--forcing", sys_choice.forcing1, "F1 expression in x1,y1,t,eps");
        sub->add_option("--forcing2", sys_choice.forcing2, "F2 expression");
        sub->add_option("--potential", sys_choice.potential, "conservative G expression");
        sub->add_option("--eps-build", sys_choice.eps_build, "fixed-point build eps");
    };

    // --- validate
    auto* c_validate = app.add_subcommand("validate", "run the structural checks");
    std::string validate_path;
    c_validate->add_option("document", validate_path, "system document (.sys)");
    add_system_opts(c_validate);

    // --- simulate / limit
    auto* c_sim = app.add_subcommand("simulate", "integrate the full flow");
    auto* c_limit = app.add_subcommand("limit", "integrate the limit/principal flow");
    double opt_eps = 1e-2, opt_t0 = 0.0, opt_T = 5.0, opt_rtol = 1e-9, opt_atol = 1e-11;
    std::string opt_x0 = "0.5,0", opt_y0;
    for (auto* sub : {c_sim, c_limit}) {
        add_system_opts(sub);
        sub->add_option("--eps", opt_eps, "singular parameter");
        sub->add_option("--t0", opt_t0, "initial time");
        sub->add_option("--T", opt_T, "integration horizon");
        sub->add_option("--x0", opt_x0, "slow initial state, comma list");
        sub->add_option("--rtol", opt_rtol, "relative tolerance");
        sub->add_option("--atol", opt_atol, "absolute tolerance");
    }
    c_sim->add_option("--y0", opt_y0, "fast initial state, comma list");

    // --- converge
    auto* c_conv = app.add_subcommand("converge", "singular-limit convergence study");
    std::string opt_thm = "3.1", opt_eps_list = "1e-1,3e-2,1e-2,3e-3,1e-3";
    add_system_opts(c_conv);
    c_conv->add_option("--thm", opt_thm, "3.1 | 3.2 | lft");
    c_conv->add_option("--eps", opt_eps_list, "eps list");
    c_conv->add_option("--x0", opt_x0, "slow initial state");
    c_conv->add_option("--T", opt_T, "window length");
    c_conv->add_option("--t0", opt_t0, "window start");

    // --- chain
    auto* c_chain = app.add_subcommand("chain", "almost-invariant slow-manifold transformations");
    int opt_pushes = 2;
    double opt_box = 0.15;
    add_system_opts(c_chain);
    c_chain->add_option("--pushes", opt_pushes, "number of transformation steps");
    c_chain->add_option("--eps", opt_eps_list, "eps list for the residual sweep");
    c_chain->add_option("--box-radius", opt_box, "probe box radius");

    // --- manifold / fiber
    auto* c_mani = app.add_subcommand("manifold", "Lyapunov-Perron graph solve");
    std::string opt_kind = "cu", opt_xi = "0.05", opt_xiy = "", opt_gaps = "";
    double opt_radius = 0.5;
    add_system_opts(c_mani);
    c_mani->add_option("--kind", opt_kind, "s | u | cs | cu | c");
    c_mani->add_option("--eps", opt_eps, "singular parameter");
    c_mani->add_option("--t0", opt_t0, "integral-manifold time");
    c_mani->add_option("--xi", opt_xi, "base coordinates in the subspace basis");
    c_mani->add_option("--xi-y", opt_xiy, "fast coordinates");
    c_mani->add_option("--gaps", opt_gaps, "a1,a2,a1p,a2p (default: automatic)");
    c_mani->add_option("--radius", opt_radius, "cutoff radius r");

    auto* c_fiber = app.add_subcommand("fiber", "stable fiber point");
    std::string opt_xis = "0.05", opt_xic = "";
    add_system_opts(c_fiber);
    c_fiber->add_option("--eps", opt_eps, "singular parameter");
    c_fiber->add_option("--xi-s", opt_xis, "stable-coordinate offset");
    c_fiber->add_option("--xi-c", opt_xic, "center coordinates");
    c_fiber->add_option("--xi-y", opt_xiy, "fast coordinates");
    c_fiber->add_option("--gaps", opt_gaps, "band placement");
    c_fiber->add_option("--radius", opt_radius, "cutoff radius r");
    c_fiber->add_option("--t0", opt_t0, "integral-manifold time");

    // --- melnikov
    auto* c_mel = app.add_subcommand("melnikov", "Melnikov profile and roots");
    std::string opt_t0grid = "0:6.283185307179586:33";
    double opt_qtol = 1e-10;
    add_system_opts(c_mel);
    c_mel->add_option("--t0-grid", opt_t0grid, "lo:hi:n or comma list");
    c_mel->add_option("--quad-tol", opt_qtol, "quadrature tolerance");

    // --- splitting
    auto* c_split = app.add_subcommand("splitting", "H(P^u) - H(P^cs) vs eps M(t0)");
    std::string opt_eps_split = "1e-2,3e-3,1e-3";
    double opt_t0_split = 2.2;
    add_system_opts(c_split);
    c_split->add_option("--eps", opt_eps_split, "eps list");
    c_split->add_option("--t0", opt_t0_split, "section time");
    c_split->add_option("--gaps", opt_gaps, "band placement");
    c_split->add_option("--radius", opt_radius, "cutoff radius r");

    // --- connect
    auto* c_conn = app.add_subcommand("connect", "conservative homoclinic-tube connection");
    add_system_opts(c_conn);
    c_conn->add_option("--eps", opt_eps, "singular parameter");
    c_conn->add_option("--gaps", opt_gaps, "band placement");
    c_conn->add_option("--radius", opt_radius, "cutoff radius r");

    // --- diagonalize
    auto* c_diag = app.add_subcommand("diagonalize", "block-diagonalize the linearization");
    std::string opt_method = "both";
    add_system_opts(c_diag);
    c_diag->add_option("--eps", opt_eps, "singular parameter");
    c_diag->add_option("--method", opt_method, "newton | dichotomy | both");
    c_diag->add_option("--gaps", opt_gaps, "band placement");

    // --- catalog
    auto* c_cat = app.add_subcommand("catalog", "list built-in systems");
    std::string opt_export;
    c_cat->add_option("--export", opt_export, "print the named entry as a document");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto resolved = [&](std::initializer_list<std::pair<const char*, json>> kv) {
        for (const auto& [k, v] : kv) ctx.manifest["config"][k] = v;
    };

    try {
        if (*c_cat) {
            if (!opt_export.empty()) {
                std::cout << systems::export_document(opt_export);
                return 0;
            }
            for (const auto& e : systems::catalog()) {
                std::cout << e.name << "  -  " << e.description << "\n";
            }
            return 0;
        }

        if (*c_validate) {
            if (!validate_path.empty()) sys_choice.spec = validate_path;
            resolved({{"system", sys_choice.spec}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                const auto rep = model::validate(b.sys);
                std::cout << rep.to_string();
                ctx.finish("validate");
                return rep.all_pass() ? 0 : 4;
            });
        }

        if (*c_sim || *c_limit) {
            const bool full = static_cast<bool>(*c_sim);
            resolved({{"eps", opt_eps}, {"t0", opt_t0}, {"T", opt_T}, {"x0", opt_x0},
                      {"y0", opt_y0}, {"rtol", opt_rtol}, {"atol", opt_atol}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                integrate::IntegratorOptions opts;
                opts.rtol = opt_rtol;
                opts.atol = opt_atol;
                const Vec x0 = parse_vec(opt_x0, b.sys.n_x);
                integrate::Trajectory traj;
                if (full) {
                    const Vec y0 = opt_y0.empty() ? Vec(Vec::Zero(b.sys.n_y))
                                                  : parse_vec(opt_y0, b.sys.n_y);
                    traj = integrate::integrate_full(b.sys, x0, y0, opt_t0, opt_t0 + opt_T,
                                                     opt_eps, opts);
                } else {
                    traj = integrate::integrate_limit(b.sys, x0, opt_t0, opt_t0 + opt_T, opt_eps,
                                                      opts);
                }
                ctx.write("trajectory.csv", traj.to_csv(b.sys.n_x));
                json j;
                j["steps_accepted"] = traj.stats.accepted;
                j["steps_rejected"] = traj.stats.rejected;
                j["flow"] = traj.flow;
                ctx.write("summary.json", j.dump(2) + "\n");
                ctx.finish(full ? "simulate" : "limit");
                return 0;
            });
        }

        if (*c_conv) {
            resolved({{"thm", opt_thm}, {"eps", opt_eps_list}, {"x0", opt_x0}, {"T", opt_T},
                      {"t0", opt_t0}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                slowlimit::StudyConfig cfg;
                cfg.x0 = parse_vec(opt_x0, b.sys.n_x);
                cfg.dx0 = Vec::Ones(b.sys.n_x).normalized();
                cfg.dy0 = Vec::Ones(b.sys.n_y).normalized();
                cfg.t0 = opt_t0;
                cfg.T = opt_T;
                cfg.eps_list = parse_list(opt_eps_list);
                cfg.jobs = ctx.jobs;
                const auto kind = opt_thm == "3.2"
                                      ? slowlimit::StudyKind::Thm32
                                      : (opt_thm == "lft" ? slowlimit::StudyKind::PrincipalFT
                                                          : slowlimit::StudyKind::Thm31);
                const auto sweep = slowlimit::convergence_study(b.sys, kind, cfg);
                ctx.write("sweep.csv", sweep.to_csv());
                ctx.write("summary.json", sweep_json(sweep).dump(2) + "\n");
                std::cout << "slope " << sweep.fit.slope << "\n";
                ctx.finish("converge");
                return 0;
            });
        }

        if (*c_chain) {
            resolved({{"pushes", opt_pushes}, {"eps", opt_eps_list}, {"box", opt_box}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                slowlimit::TransformChain chain(b.sys);
                for (int k = 0; k < opt_pushes; ++k) chain.push();
                slowlimit::ProbeBox box;
                box.center = Vec::Zero(b.sys.n_x);
                box.radius = opt_box;
                const std::vector<double> ts = {0.0};
                const auto eps_list = parse_list(opt_eps_list);
                json j;
                for (int k = 0; k <= chain.order(); ++k) {
                    const auto sweep = slowlimit::chain_residual_sweep(chain, k, box, ts, eps_list);
                    ctx.write("residual_k" + std::to_string(k) + ".csv", sweep.to_csv());
                    j["slopes"].push_back(sweep.fit.slope);
                }
                ctx.write("summary.json", j.dump(2) + "\n");
                std::cout << j.dump() << "\n";
                ctx.finish("chain");
                return 0;
            });
        }

        if (*c_mani) {
            resolved({{"kind", opt_kind}, {"eps", opt_eps}, {"t0", opt_t0}, {"xi", opt_xi},
                      {"xi_y", opt_xiy}, {"radius", opt_radius}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                const auto split = make_split(b.sys, opt_gaps);
                manifold::LPConfig cfg;
                cfg.cutoff_radius = opt_radius;
                manifold::LPSolver solver(b.sys, split, opt_eps, cfg);
                const Vec xiy = opt_xiy.empty() ? Vec(Vec::Zero(b.sys.n_y))
                                                : parse_vec(opt_xiy, b.sys.n_y);
                manifold::LPPoint p;
                const auto coords = parse_vec(opt_xi);
                if (opt_kind == "cu") {
                    Mat Bx(split.n(), split.dim_c + split.dim_u);
                    if (split.dim_c) Bx.leftCols(split.dim_c) = split.basis_c;
                    if (split.dim_u) Bx.rightCols(split.dim_u) = split.basis_u;
                    p = solver.solve_cu_graph(Vec(Bx * coords), xiy, opt_t0);
                } else if (opt_kind == "cs") {
                    Mat Bx(split.n(), split.dim_c + split.dim_s);
                    if (split.dim_c) Bx.leftCols(split.dim_c) = split.basis_c;
                    if (split.dim_s) Bx.rightCols(split.dim_s) = split.basis_s;
                    p = solver.solve_cs_graph(Vec(Bx * coords), xiy, opt_t0);
                } else if (opt_kind == "s") {
                    p = solver.solve_s_graph(Vec(split.basis_s * coords), opt_t0);
                } else if (opt_kind == "u") {
                    p = solver.solve_u_graph(Vec(split.basis_u * coords), opt_t0);
                } else if (opt_kind == "c") {
                    p = solver.solve_center_graph(Vec(split.basis_c * coords), xiy, opt_t0);
                } else {
                    throw Error(ErrorKind::Parameter, "unknown manifold kind " + opt_kind);
                }
                json j;
                for (int i = 0; i < p.h.size(); ++i) j["h"].push_back(p.h[i]);
                for (int i = 0; i < p.point.size(); ++i) j["point"].push_back(p.point[i]);
                j["report"] = json::parse(p.report.to_json());
                ctx.write("graph_point.json", j.dump(2) + "\n");
                std::cout << j["report"].dump() << "\n";
                ctx.finish("manifold");
                return 0;
            });
        }

        if (*c_fiber) {
            resolved({{"eps", opt_eps}, {"xi_s", opt_xis}, {"xi_c", opt_xic}, {"xi_y", opt_xiy}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                const auto split = make_split(b.sys, opt_gaps);
                manifold::LPConfig cfg;
                cfg.cutoff_radius = opt_radius;
                manifold::LPSolver solver(b.sys, split, opt_eps, cfg);
                const Vec xis = split.basis_s * parse_vec(opt_xis, split.dim_s);
                const Vec xic = opt_xic.empty()
                                    ? Vec(Vec::Zero(b.sys.n_x))
                                    : Vec(split.basis_c * parse_vec(opt_xic, split.dim_c));
                const Vec xiy = opt_xiy.empty() ? Vec(Vec::Zero(b.sys.n_y))
                                                : parse_vec(opt_xiy, b.sys.n_y);
                const auto p = solver.solve_fiber(xis, xic, xiy, opt_t0);
                json j;
                for (int i = 0; i < p.point.size(); ++i) j["sigma_cu"].push_back(p.point[i]);
                j["report"] = json::parse(p.report.to_json());
                ctx.write("fiber.json", j.dump(2) + "\n");
                ctx.finish("fiber");
                return 0;
            });
        }

        if (*c_mel) {
            resolved({{"t0_grid", opt_t0grid}, {"quad_tol", opt_qtol}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                require(b.ref.homoclinic.has_value(), ErrorKind::Parameter,
                        "melnikov: system has no homoclinic reference orbit");
                const auto split = make_split(b.sys, opt_gaps);
                const auto orbit =
                    melnikov::HomoclinicOrbit::closed_form(b.sys, split, *b.ref.homoclinic);
                melnikov::QuadratureConfig quad;
                quad.tol = opt_qtol;
                const auto prof = melnikov::melnikov_profile(b.sys, orbit, parse_grid(opt_t0grid),
                                                             quad);
                ctx.write("profile.csv", prof.to_csv());
                json j;
                for (const auto& r : prof.roots) {
                    json jr;
                    jr["t0"] = r.t0;
                    jr["M_prime"] = r.M_prime;
                    j["roots"].push_back(jr);
                }
                j["T_tail"] = prof.T_tail;
                ctx.write("roots.json", j.dump(2) + "\n");
                std::cout << j.dump() << "\n";
                ctx.finish("melnikov");
                return 0;
            });
        }

        if (*c_split) {
            resolved({{"eps", opt_eps_split}, {"t0", opt_t0_split}, {"radius", opt_radius}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                require(b.ref.homoclinic.has_value(), ErrorKind::Parameter,
                        "splitting: system has no homoclinic reference orbit");
                const auto split = make_split(b.sys, opt_gaps);
                const auto orbit =
                    melnikov::HomoclinicOrbit::closed_form(b.sys, split, *b.ref.homoclinic);
                melnikov::QuadratureConfig quad;
                const auto prof =
                    melnikov::melnikov_profile(b.sys, orbit, {opt_t0_split}, quad);
                const double M = prof.M[0];
                melnikov::SplittingConfig scfg;
                scfg.lp.cutoff_radius = opt_radius;
                std::ostringstream csv;
                csv.precision(17);
                csv << "eps, t0, H_diff, eps_times_M, ratio\n";
                for (double e : parse_list(opt_eps_split)) {
                    const auto res =
                        melnikov::splitting_distance(b.sys, split, orbit, opt_t0_split, e, scfg);
                    csv << e << ", " << opt_t0_split << ", " << res.H_diff << ", " << e * M
                        << ", " << res.H_diff / (e * M) << "\n";
                }
                ctx.write("splitting.csv", csv.str());
                ctx.finish("splitting");
                return 0;
            });
        }

        if (*c_conn) {
            resolved({{"eps", opt_eps}, {"radius", opt_radius}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                require(b.ref.homoclinic.has_value(), ErrorKind::Parameter,
                        "connect: system has no homoclinic reference orbit");
                const auto split = make_split(b.sys, opt_gaps);
                const auto orbit =
                    melnikov::HomoclinicOrbit::closed_form(b.sys, split, *b.ref.homoclinic);
                melnikov::ConnectionConfig ccfg;
                ccfg.lp.cutoff_radius = opt_radius;
                const auto res = melnikov::conservative_connection(b.sys, split, orbit, opt_eps,
                                                                   ccfg);
                json j;
                j["tau0"] = res.tau0;
                j["h_at_tau0"] = res.h_at_tau0;
                j["h_at_0"] = res.h_at_0;
                j["h_at_1"] = res.h_at_1;
                j["degenerate_bracket"] = res.degenerate_bracket;
                j["dist_to_x0"] = res.dist_to_x0;
                j["tube_ratio"] = res.tube_ratio;
                for (int i = 0; i < res.point.size(); ++i) j["point"].push_back(res.point[i]);
                ctx.write("connection.json", j.dump(2) + "\n");
                std::cout << j.dump() << "\n";
                ctx.finish("connect");
                return 0;
            });
        }

        if (*c_diag) {
            resolved({{"eps", opt_eps}, {"method", opt_method}});
            return dispatch(app, ctx, [&] {
                const auto b = sys_choice.resolve(ctx);
                const auto blocks = diagonalize::linearization_at_origin(b.sys, opt_eps);
                json j;
                if (opt_method == "newton" || opt_method == "both") {
                    const auto r = diagonalize::solve_L_newton(blocks);
                    j["newton"] = json::parse(r.to_json());
                }
                if (opt_method == "dichotomy" || opt_method == "both") {
                    const auto split = make_split(b.sys, opt_gaps);
                    const auto r = diagonalize::solve_L_dichotomy(split, blocks);
                    j["dichotomy"] = json::parse(r.to_json());
                }
                ctx.write("diagonalize.json", j.dump(2) + "\n");
                std::cout << j.dump() << "\n";
                ctx.finish("diagonalize");
                return 0;
            });
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::Parameter:
            case ErrorKind::Parse:
            case ErrorKind::Model: return 3;
            default: return 4;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}

}  // namespace nesp::cli
