#pragma once

#include "nesp/common.hpp"
#include "nesp/linalg.hpp"
#include "nesp/model.hpp"

namespace nesp::diagonalize {

/// Coupling maps block-diagonalizing the linearization
///   A_eps = [[A + D_xf, D_yf], [D_xg, J/eps + D_yg]]
/// through the triangular similarity with rows (I, L2; L1, I).
struct BlockDiagResult {
    Mat L1;  // n_y x n_x
    Mat L2;  // n_x x n_y
    double residual1 = 0;     // first line of eq 7.1
    double residual2 = 0;     // second line
    double offdiag_norm = 0;  // off-diagonal blocks after conjugation
    double margin = 0;        // 1/(5 K C0) - (1/|w_s| + 1/|w_u| + 2 eps |J^-1|)
    std::string method;       // "newton" | "dichotomy"
    int iterations = 0;
    std::string to_json() const;
};

/// Blocks of the linearization at the steady state for a given eps.
struct LinearizationBlocks {
    Mat A, J, Dxf, Dyf, Dxg, Dyg;
    double eps = 0;
};

LinearizationBlocks linearization_at_origin(const SlowFastSystem& sys, double eps);

/// Newton on the two quadratic matrix equations of eq 7.1, seeded at (0, 0);
/// quadratic convergence is certified by a residual halving order >= 1.8,
/// otherwise a Numerical error suggests the dichotomy method.
BlockDiagResult solve_L_newton(const LinearizationBlocks& blocks);

/// Fixed point of G-bar = G^u P_u + G^c P_c + G^s P_s with the improper
/// integrals of eqs 7.3/7.5 evaluated as Sylvester solves, and the analogous
/// loop for L2. The split is taken on A_f = A + D_xf.
BlockDiagResult solve_L_dichotomy(const linalg::DichotomySplit& split,
                                  const LinearizationBlocks& blocks);

/// Conjugates A_eps by the coupling factor; returns the transformed matrix
/// and its off-diagonal norm. Requires |L1||L2| < 1.
std::pair<Mat, double> apply_similarity(const LinearizationBlocks& blocks, const Mat& L1,
                                        const Mat& L2);

/// Wraps the nonlinear system into the transformed oracles (eq 7.2 variables).
SlowFastSystem transform_system(const SlowFastSystem& sys, const Mat& L1, const Mat& L2,
                                double eps);

/// Measures the eq 7.6 contraction quantities for reporting.
double contraction_margin(const linalg::DichotomySplit& split, const LinearizationBlocks& b);

}  // namespace nesp::diagonalize
