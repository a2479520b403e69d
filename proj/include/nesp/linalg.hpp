#pragma once

#include "nesp/common.hpp"

#include <memory>

namespace nesp::linalg {

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

/// e^{tM}. Antisymmetric M takes the rotation-block path (result orthogonal
/// to 1e-12); everything else goes through scaling-and-squaring Pade.
Mat expm(const Mat& M, double t = 1.0);

bool is_antisymmetric(const Mat& M, double tol = 1e-12);

/// Precomputed propagator for a constant matrix, cheap to apply at many times.
/// For antisymmetric J it uses the real Schur rotation blocks (exactly
/// orthogonal application); for general M a complex eigendecomposition, with a
/// Pade fallback when the eigenbasis is ill-conditioned.
class Propagator {
public:
    explicit Propagator(const Mat& M);

    /// e^{tM} v
    Vec apply(double t, const Vec& v) const;
    /// e^{tM}
    Mat matrix(double t) const;
    int dim() const { return n_; }

private:
    int n_ = 0;
    bool rotor_ = false;              // antisymmetric path
    Mat Q_;                           // Schur basis (rotor path)
    std::vector<double> omega_;       // rotation frequencies, one per 2x2 block
    std::vector<int> block_start_;    // start index of each 2x2 block / 1x1 zero
    std::vector<bool> block_is_pair_;
    bool eig_ok_ = false;             // eigendecomposition path
    Eigen::MatrixXcd V_, Vinv_;
    Eigen::VectorXcd lam_;
    Mat M_;                           // fallback
};

// ---------------------------------------------------------------------------
// Spectral dichotomy / trichotomy of A_f = A + f_x(0)
// ---------------------------------------------------------------------------

struct DichotomyGaps {
    double a1;        // stable band:  Re <= a1 < min{a2, 0}
    double a2;        // center band:  Re in [a2, a1']
    double a1_prime;
    double a2_prime;  // unstable band: Re >= a2' > max{0, a1'}
};

struct DichotomySplit {
    Mat A_f;
    Mat P_s, P_c, P_u;    // spectral projections, P_s + P_c + P_u = I
    Mat basis_s, basis_c, basis_u;  // columns span the invariant subspaces
    DichotomyGaps gaps{};
    double K = 1.0;       // measured dichotomy constant (>= 1)
    int dim_s = 0, dim_c = 0, dim_u = 0;

    Mat P_cu() const { return P_c + P_u; }
    Mat P_cs() const { return P_s + P_c; }
    int n() const { return static_cast<int>(A_f.rows()); }
};

/// Groups the spectrum of A_f by real part into the three bands and builds
/// the spectral projections. An eigenvalue whose real part falls outside all
/// bands (margin 1e-8) is a degenerate splitting -> Numerical error.
/// K is measured as the sup over a t-grid of the dichotomy quotients.
DichotomySplit spectral_dichotomy(const Mat& A_f, const DichotomyGaps& gaps);

/// Default band placement from the spectrum of A_f: eigenvalues with
/// |Re| <= 1e-6 are center, the rest split by sign; bands are placed at 95%
/// of the nearest nonzero real parts.
DichotomyGaps auto_gaps(const Mat& A_f);

// ---------------------------------------------------------------------------
// Sylvester equation  P L - L Q = C
// ---------------------------------------------------------------------------

/// Solves P L - L Q = C by the Kronecker linearization (exact at these sizes).
/// Pre: spec(P) and spec(Q) separated by >= 1e-8, else a singular-equation
/// error is raised. Post: residual <= 1e-10 (|P|+|Q|)|L| + 1e-12.
Mat solve_sylvester(const Mat& P, const Mat& Q, const Mat& C);

/// Smallest |lambda_i(P) - mu_j(Q)| over all eigenvalue pairs.
double spectral_separation(const Mat& P, const Mat& Q);

/// Operator 2-norm (largest singular value).
double opnorm(const Mat& M);

}  // namespace nesp::linalg
