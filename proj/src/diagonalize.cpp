#include "nesp/diagonalize.hpp"

#include <sstream>

namespace nesp::diagonalize {

using linalg::opnorm;

std::string BlockDiagResult::to_json() const {
    std::ostringstream os;
    os.precision(17);
    auto mat = [&](const Mat& M) {
        os << "[";
        for (int i = 0; i < M.rows(); ++i) {
            os << (i ? ", [" : "[");
            for (int j = 0; j < M.cols(); ++j) os << (j ? ", " : "") << M(i, j);
            os << "]";
        }
        os << "]";
    };
    os << "{\"L1\": ";
    mat(L1);
    os << ", \"L2\": ";
    mat(L2);
    os << ", \"residual1\": " << residual1 << ", \"residual2\": " << residual2
       << ", \"offdiag\": " << offdiag_norm << ", \"margin\": " << margin << ", \"method\": \""
       << method << "\", \"iterations\": " << iterations << "}";
    return os.str();
}

LinearizationBlocks linearization_at_origin(const SlowFastSystem& sys, double eps) {
    LinearizationBlocks b;
    const Vec x0 = Vec::Zero(sys.n_x), y0 = Vec::Zero(sys.n_y);
    const JacobianBlocks jb = model::jacobian_blocks(sys, x0, y0, 0.0, eps);
    b.A = sys.A;
    b.J = sys.J;
    b.Dxf = jb.fx;
    b.Dyf = jb.fy;
    b.Dxg = jb.gx;
    b.Dyg = jb.gy;
    b.eps = eps;
    return b;
}

namespace {

Mat residual_1(const LinearizationBlocks& b, const Mat& L1) {
    const double e = b.eps;
    return (b.J + e * b.Dyg) * L1 - e * L1 * (b.A + b.Dxf + b.Dyf * L1) + e * b.Dxg;
}

Mat residual_2(const LinearizationBlocks& b, const Mat& L2) {
    const double e = b.eps;
    return L2 * (e * b.Dxg * L2 + b.J + e * b.Dyg) - e * (b.A + b.Dxf) * L2 - e * b.Dyf;
}

Mat kron(const Mat& A, const Mat& B) {
    Mat K(A.rows() * B.rows(), A.cols() * B.cols());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

Vec vec_of(const Mat& M) {
    Vec v(M.size());
    int k = 0;
    for (int j = 0; j < M.cols(); ++j)
        for (int i = 0; i < M.rows(); ++i) v[k++] = M(i, j);
    return v;
}

Mat mat_of(const Vec& v, int rows, int cols) {
    Mat M(rows, cols);
    int k = 0;
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) M(i, j) = v[k++];
    return M;
}

double scale_of(const LinearizationBlocks& b) {
    return std::max({opnorm(b.J), b.eps * opnorm(b.A + b.Dxf), b.eps * opnorm(b.Dxg),
                     b.eps * opnorm(b.Dyf), 1.0});
}

}  // namespace

BlockDiagResult solve_L_newton(const LinearizationBlocks& b) {
    const int nx = static_cast<int>(b.A.rows());
    const int ny = static_cast<int>(b.J.rows());
    const double e = b.eps;
    const Mat Ax = b.A + b.Dxf;
    const Mat Jg = b.J + e * b.Dyg;
    const Mat Ix = Mat::Identity(nx, nx);
    const Mat Iy = Mat::Identity(ny, ny);

    Mat L1 = Mat::Zero(ny, nx);
    Mat L2 = Mat::Zero(nx, ny);
    std::vector<double> history;
    const double tol = 1e-13 * scale_of(b);
    int iters = 0;
    for (int it = 0; it < 40; ++it) {
        ++iters;
        const Mat r1 = residual_1(b, L1);
        const Mat r2 = residual_2(b, L2);
        const double rn = std::max(opnorm(r1), opnorm(r2));
        history.push_back(rn);
        if (rn <= tol) break;
        // Frechet derivative of the first line:
        //   (J + e Dyg) d - e d (A + Dxf) - e d Dyf L1 - e L1 Dyf d
        Mat Df1 = kron(Ix, Jg) - e * kron(Ax.transpose(), Iy) -
                  e * kron((b.Dyf * L1).transpose(), Iy) - e * kron(Ix, Mat(L1 * b.Dyf));
        const Vec d1 = Df1.fullPivLu().solve(vec_of(r1));
        L1 -= mat_of(d1, ny, nx);
        // second line: d (e Dxg L2 + J + e Dyg) + e L2 Dxg d - e (A + Dxf) d
        Mat M2 = e * b.Dxg * L2 + b.J + e * b.Dyg;
        Mat Df2 = kron(M2.transpose(), Ix) + e * kron(Iy, Mat(L2 * b.Dxg)) -
                  e * kron(Iy, Ax);
        const Vec d2 = Df2.fullPivLu().solve(vec_of(r2));
        L2 -= mat_of(d2, nx, ny);
        require(L1.allFinite() && L2.allFinite(), ErrorKind::Numerical,
                "solve_L_newton: diverged (non-finite iterate); try solve_L_dichotomy or a "
                "smaller eps");
    }
    const double r1f = opnorm(residual_1(b, L1));
    const double r2f = opnorm(residual_2(b, L2));
    require(std::max(r1f, r2f) <= 10 * tol, ErrorKind::Numerical,
            "solve_L_newton: did not converge; try solve_L_dichotomy or a smaller eps");

    // quadratic-convergence certificate: residual halving order >= 1.8 over
    // the meaningful range (above the roundoff floor, below the initial scale)
    std::vector<double> meaningful;
    for (double r : history)
        if (r > 100 * tol && r < 1e-2 * scale_of(b)) meaningful.push_back(r);
    if (meaningful.size() >= 3) {
        const size_t m = meaningful.size();
        const double ord = std::log(meaningful[m - 2] / meaningful[m - 1]) /
                           std::log(meaningful[m - 3] / meaningful[m - 2]);
        require(ord >= 1.8, ErrorKind::Numerical,
                "solve_L_newton: convergence order " + std::to_string(ord) +
                    " below quadratic; try solve_L_dichotomy");
    }

    BlockDiagResult out;
    out.L1 = L1;
    out.L2 = L2;
    out.residual1 = r1f;
    out.residual2 = r2f;
    out.method = "newton";
    out.iterations = iters;
    if (b.eps > 0.0) {
        auto [T, off] = apply_similarity(b, L1, L2);
        (void)T;
        out.offdiag_norm = off;
    }
    return out;
}

double contraction_margin(const linalg::DichotomySplit& split, const LinearizationBlocks& b) {
    const double w_s = split.gaps.a1;        // |e^{tA^s}| <= K e^{w_s t}
    const double w_u = split.gaps.a2_prime;  // |e^{tA^u}| <= K e^{w_u t}, t <= 0
    double C0 = std::max({opnorm(b.Dyf), opnorm(b.Dxg), opnorm(b.Dyg)});
    if (split.dim_c > 0) {
        const Mat Ac = split.basis_c.transpose() * (b.A + b.Dxf) * split.basis_c;
        C0 = std::max(C0, opnorm(Ac));
    }
    const double lhs = 1.0 / std::abs(w_s) + 1.0 / std::abs(w_u) +
                       2.0 * b.eps * opnorm(b.J.inverse());
    if (C0 <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (5.0 * split.K * C0) - lhs;
}

BlockDiagResult solve_L_dichotomy(const linalg::DichotomySplit& split_in,
                                  const LinearizationBlocks& b) {
    const int nx = static_cast<int>(b.A.rows());
    const int ny = static_cast<int>(b.J.rows());
    const double e = b.eps;
    // assumption (F) requires the subspaces invariant under A + D_xf(0, eps)
    // at the given eps; re-split on the actual blocks with the caller's bands
    const linalg::DichotomySplit split =
        linalg::spectral_dichotomy(Mat(b.A + b.Dxf), split_in.gaps);
    const double margin = contraction_margin(split, b);
    if (margin <= 0.0) {
        std::ostringstream os;
        os << "solve_L_dichotomy: contraction condition (eq 7.6) violated: 1/|w_s| + 1/|w_u| + "
              "2 eps |J^-1| = "
           << (1.0 / std::abs(split.gaps.a1) + 1.0 / std::abs(split.gaps.a2_prime) +
               2.0 * e * opnorm(b.J.inverse()))
           << " with K = " << split.K << " (margin " << margin << ")";
        throw Error(ErrorKind::Numerical, os.str());
    }

    struct Sub {
        Mat B, C, A_sub;
        int d;
    };
    auto make_sub = [&](const Mat& basis, const Mat& P) {
        Sub s;
        s.d = static_cast<int>(basis.cols());
        s.B = basis;
        if (s.d > 0) {
            s.C = basis.transpose() * P;
            s.A_sub = s.C * (b.A + b.Dxf) * s.B;
        }
        return s;
    };
    const Sub su = make_sub(split.basis_u, split.P_u);
    const Sub sc = make_sub(split.basis_c, split.P_c);
    const Sub ss = make_sub(split.basis_s, split.P_s);

    // L1 loop: Gbar(L) with the u/s integrals as Sylvester solutions
    Mat L1 = Mat::Zero(ny, nx);
    int iters = 0;
    for (int it = 0; it < 500; ++it) {
        ++iters;
        Mat next = Mat::Zero(ny, nx);
        const Mat bracket = e * (L1 * b.Dyf * L1) - e * b.Dxg - e * (b.Dyg * L1);
        if (su.d > 0) {
            const Mat S = linalg::solve_sylvester(b.J, Mat(e * su.A_sub), Mat(bracket * su.B));
            next += S * su.C;
        }
        if (ss.d > 0) {
            const Mat S = linalg::solve_sylvester(b.J, Mat(e * ss.A_sub), Mat(bracket * ss.B));
            next += S * ss.C;
        }
        if (sc.d > 0) {
            const Mat M = (L1 * b.Dyf * L1 - b.Dxg) * sc.B + L1 * sc.B * sc.A_sub;
            next += e * (b.J + e * b.Dyg).fullPivLu().solve(M) * sc.C;
        }
        const double step = opnorm(Mat(next - L1));
        L1 = next;
        if (step < 1e-13) break;
    }
    // L2 loop (Lemma 7.3): mirrored integrals
    Mat L2 = Mat::Zero(nx, ny);
    for (int it = 0; it < 500; ++it) {
        ++iters;
        Mat next = Mat::Zero(nx, ny);
        const Mat bracket = b.Dyf - L2 * b.Dxg * L2 - L2 * b.Dyg;
        // P^u-part: e int_{+inf}^0 e^{-e t A^u} (...) e^{tJ} dt equals the
        // solution of (e A^u) S - S J = -e C_u (...), rows in X^u
        if (su.d > 0) {
            const Mat S = linalg::solve_sylvester(Mat(e * su.A_sub), b.J,
                                                  Mat(-e * su.C * bracket));
            next += su.B * S;
        }
        if (ss.d > 0) {
            const Mat S = linalg::solve_sylvester(Mat(e * ss.A_sub), b.J,
                                                  Mat(-e * ss.C * bracket));
            next += ss.B * S;
        }
        if (sc.d > 0) {
            const Mat M = sc.C * b.Dyf - sc.C * (L2 * b.Dxg * L2) + sc.A_sub * (sc.C * L2);
            next += e * sc.B * M * (b.J + e * b.Dyg).inverse();
        }
        const double step = opnorm(Mat(next - L2));
        L2 = next;
        if (step < 1e-13) break;
    }

    BlockDiagResult out;
    out.L1 = L1;
    out.L2 = L2;
    out.residual1 = opnorm(residual_1(b, L1));
    out.residual2 = opnorm(residual_2(b, L2));
    out.method = "dichotomy";
    out.iterations = iters;
    out.margin = margin;
    if (b.eps > 0.0) {
        auto [T, off] = apply_similarity(b, L1, L2);
        (void)T;
        out.offdiag_norm = off;
    }
    return out;
}

std::pair<Mat, double> apply_similarity(const LinearizationBlocks& b, const Mat& L1,
                                        const Mat& L2) {
    const int nx = static_cast<int>(b.A.rows());
    const int ny = static_cast<int>(b.J.rows());
    require(opnorm(L1) * opnorm(L2) < 1.0, ErrorKind::Numerical,
            "apply_similarity: |L1||L2| >= 1, coupling factor near-singular");
    require(b.eps > 0.0, ErrorKind::Parameter, "apply_similarity: eps must be positive");
    Mat Aeps(nx + ny, nx + ny);
    Aeps.topLeftCorner(nx, nx) = b.A + b.Dxf;
    Aeps.topRightCorner(nx, ny) = b.Dyf;
    Aeps.bottomLeftCorner(ny, nx) = b.Dxg;
    Aeps.bottomRightCorner(ny, ny) = b.J / b.eps + b.Dyg;
    Mat T(nx + ny, nx + ny);
    T.topLeftCorner(nx, nx) = Mat::Identity(nx, nx);
    T.topRightCorner(nx, ny) = L2;
    T.bottomLeftCorner(ny, nx) = L1;
    T.bottomRightCorner(ny, ny) = Mat::Identity(ny, ny);
    const Mat conj = T.fullPivLu().solve(Aeps * T);
    const double off = std::max(opnorm(Mat(conj.topRightCorner(nx, ny))),
                                opnorm(Mat(conj.bottomLeftCorner(ny, nx))));
    return {conj, off};
}

SlowFastSystem transform_system(const SlowFastSystem& sys, const Mat& L1, const Mat& L2,
                                double eps) {
    require(eps > 0.0, ErrorKind::Parameter, "transform_system: eps must be positive");
    SlowFastSystem out = sys;
    out.jac = nullptr;
    out.name = sys.name + "(diag)";
    const int nx = sys.n_x, ny = sys.n_y;
    Mat T(nx + ny, nx + ny);
    T.topLeftCorner(nx, nx) = Mat::Identity(nx, nx);
    T.topRightCorner(nx, ny) = L2;
    T.bottomLeftCorner(ny, nx) = L1;
    T.bottomRightCorner(ny, ny) = Mat::Identity(ny, ny);
    const Mat Tinv = T.inverse();
    auto base = std::make_shared<SlowFastSystem>(sys);
    auto rhs_hat = [base, T, Tinv, nx, ny](const Vec& xh, const Vec& yh, double t,
                                           double eps_) -> Vec {
        Vec zh(nx + ny);
        zh.head(nx) = xh;
        zh.tail(ny) = yh;
        const Vec z = T * zh;
        Vec dx, dy;
        model::eval_rhs(*base, Vec(z.head(nx)), Vec(z.tail(ny)), t, eps_, dx, dy);
        Vec dz(nx + ny);
        dz.head(nx) = dx;
        dz.tail(ny) = dy;
        return Tinv * dz;
    };
    const Mat A = sys.A;
    const Mat J = sys.J;
    out.f = [rhs_hat, A, nx](const Vec& xh, const Vec& yh, double t, double eps_) -> Vec {
        return rhs_hat(xh, yh, t, eps_).head(nx) - A * xh;
    };
    out.g = [rhs_hat, J, nx, ny](const Vec& xh, const Vec& yh, double t, double eps_) -> Vec {
        return rhs_hat(xh, yh, t, eps_).tail(ny) - (1.0 / eps_) * (J * yh);
    };
    return out;
}

}  // namespace nesp::diagonalize
