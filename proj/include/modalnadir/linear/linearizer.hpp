#pragma once

// Jacobian blocks of a DAE and Kron elimination of its algebraic variables.
//
// Any type exposing `n()`, `l()`, `f(x, y)` and `g(x, y)` (returning Vec) is
// a valid system here; DynamicModel is the production one.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "modalnadir/dynamics/model.hpp"

namespace modalnadir {

template <class Sys>
concept DaeSystem = requires(const Sys& s, const Vec& v) {
    { s.n() } -> std::convertible_to<Eigen::Index>;
    { s.l() } -> std::convertible_to<Eigen::Index>;
    { s.f(v, v) } -> std::convertible_to<Vec>;
    { s.g(v, v) } -> std::convertible_to<Vec>;
};

struct JacobianBlocks {
    Mat j1;  ///< df/dx, n x n
    Mat j2;  ///< df/dy, n x l
    Mat j3;  ///< dg/dx, l x n
    Mat j4;  ///< dg/dy, l x l
};

[[nodiscard]] inline double fd_step(double v) { return std::max(1e-6, 1e-6 * std::abs(v)); }

/// Central finite-difference Jacobians at (x, y) with step
/// h = max(1e-6, 1e-6 |v|) per variable.
template <DaeSystem Sys>
JacobianBlocks jacobians(const Sys& sys, const Vec& x, const Vec& y) {
    const Eigen::Index n = sys.n(), l = sys.l();
    JacobianBlocks J{Mat(n, n), Mat(n, l), Mat(l, n), Mat(l, l)};
    Vec xp = x;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = fd_step(x(j));
        xp(j) = x(j) + h;
        const Vec fp = sys.f(xp, y), gp = sys.g(xp, y);
        xp(j) = x(j) - h;
        const Vec fm = sys.f(xp, y), gm = sys.g(xp, y);
        xp(j) = x(j);
        J.j1.col(j) = (fp - fm) / (2 * h);
        J.j3.col(j) = (gp - gm) / (2 * h);
    }
    Vec yp = y;
    for (Eigen::Index j = 0; j < l; ++j) {
        const double h = fd_step(y(j));
        yp(j) = y(j) + h;
        const Vec fp = sys.f(x, yp), gp = sys.g(x, yp);
        yp(j) = y(j) - h;
        const Vec fm = sys.f(x, yp), gm = sys.g(x, yp);
        yp(j) = y(j);
        J.j2.col(j) = (fp - fm) / (2 * h);
        J.j4.col(j) = (gp - gm) / (2 * h);
    }
    return J;
}

/// Only dg/dy, for algebraic re-solves.
template <DaeSystem Sys>
Mat algebraic_jacobian(const Sys& sys, const Vec& x, const Vec& y) {
    const Eigen::Index l = sys.l();
    Mat j4(l, l);
    Vec yp = y;
    for (Eigen::Index j = 0; j < l; ++j) {
        const double h = fd_step(y(j));
        yp(j) = y(j) + h;
        const Vec gp = sys.g(x, yp);
        yp(j) = y(j) - h;
        const Vec gm = sys.g(x, yp);
        yp(j) = y(j);
        j4.col(j) = (gp - gm) / (2 * h);
    }
    return j4;
}

/// Reciprocal condition estimate of a factorized matrix. Eigen's estimator
/// can report a healthy value when a pivot is exactly zero, so the ratio of
/// smallest to largest pivot caps it.
[[nodiscard]] inline double lu_rcond(const Eigen::PartialPivLU<Mat>& lu) {
    if (lu.rows() == 0) return 1.0;
    const Vec piv = lu.matrixLU().diagonal().cwiseAbs();
    const double ratio = piv.minCoeff() / piv.maxCoeff();
    const double rc = lu.rcond();
    if (!std::isfinite(rc) || !std::isfinite(ratio)) return 0.0;
    return std::min(rc, ratio);
}

/// Reciprocal condition estimate of a square matrix in the 1-norm.
[[nodiscard]] inline double rcond_estimate(const Mat& m) {
    if (m.size() == 0) return 1.0;
    return lu_rcond(Eigen::PartialPivLU<Mat>(m));
}

inline constexpr double kSingularRcond = 1e-14;

/// A_s = J1 - J2 J4^{-1} J3 through an LU factorization of J4.
/// `equation_names` (optional, size l) is used to name the worst-conditioned
/// algebraic equation when J4 is singular.
[[nodiscard]] inline Mat kron_reduce(const Mat& j1, const Mat& j2, const Mat& j3, const Mat& j4,
                                     const std::vector<std::string>& equation_names = {}) {
    if (j4.rows() == 0) return j1;
    Eigen::PartialPivLU<Mat> lu(j4);
    const double rc = lu_rcond(lu);
    if (!(rc > kSingularRcond)) {
        Eigen::FullPivLU<Mat> full(j4);
        // the smallest pivot sits last; its row permutation names the equation
        const Eigen::Index row = full.permutationP().indices()(j4.rows() - 1);
        std::ostringstream msg;
        msg << "J4 is singular (rcond " << rc << "); worst-conditioned algebraic equation: ";
        if (static_cast<std::size_t>(row) < equation_names.size()) msg << equation_names[static_cast<std::size_t>(row)];
        else msg << "#" << row;
        throw NumericalError(msg.str());
    }
    return j1 - j2 * lu.solve(j3);
}

/// Linearized model at an equilibrium.
struct LinearModel {
    Mat a_s;
    JacobianBlocks blocks;
    SystemState equilibrium;
    StateLayout layout;
    double j4_rcond = 0.0;
};

template <DaeSystem Sys>
LinearModel linearize(const Sys& sys, const SystemState& eq, const StateLayout& layout) {
    LinearModel lm;
    lm.blocks = jacobians(sys, eq.x, eq.y);
    lm.j4_rcond = rcond_estimate(lm.blocks.j4);
    lm.a_s = kron_reduce(lm.blocks.j1, lm.blocks.j2, lm.blocks.j3, lm.blocks.j4, layout.y_names());
    lm.equilibrium = eq;
    lm.layout = layout;
    return lm;
}

inline LinearModel linearize(const DynamicModel& model, const SystemState& eq) {
    return linearize(model, eq, model.layout());
}

struct NewtonOptions {
    int max_iterations = 50;
    double tolerance = 1e-10;
};

/// Solves g(x, y) = 0 for y at fixed x.
template <DaeSystem Sys>
Vec solve_algebraic(const Sys& sys, const Vec& x, Vec y, const NewtonOptions& opt = {}) {
    Vec r = sys.g(x, y);
    for (int it = 0; it < opt.max_iterations && max_abs(r) > opt.tolerance; ++it) {
        Eigen::PartialPivLU<Mat> lu(algebraic_jacobian(sys, x, y));
        if (!(lu_rcond(lu) > kSingularRcond)) throw NumericalError("algebraic Jacobian is singular");
        const Vec dy = lu.solve(r);
        // backtrack while the residual grows
        double step = 1.0;
        Vec trial = y - dy;
        Vec rt = sys.g(x, trial);
        while (!(max_abs(rt) < max_abs(r)) && step > 1.0 / 64) {
            step /= 2;
            trial = y - step * dy;
            rt = sys.g(x, trial);
        }
        y = trial;
        r = rt;
    }
    if (!(max_abs(r) <= opt.tolerance)) {
        std::ostringstream msg;
        msg << "algebraic solve did not converge (|g| = " << max_abs(r) << ")";
        throw NumericalError(msg.str());
    }
    return y;
}

/// Newton solve of [f; g] = 0 from `guess`. Returns the equilibrium and the
/// number of iterations taken.
template <DaeSystem Sys>
std::pair<SystemState, int> equilibrate_counted(const Sys& sys, const SystemState& guess, const NewtonOptions& opt = {}) {
    const Eigen::Index n = sys.n(), l = sys.l();
    if (guess.x.size() != n || guess.y.size() != l) throw InputError("equilibrium guess has wrong dimensions");
    SystemState s = guess;
    auto residual = [&] {
        Vec r(n + l);
        r << sys.f(s.x, s.y), sys.g(s.x, s.y);
        return r;
    };
    Vec r = residual();
    int it = 0;
    while (max_abs(r) > opt.tolerance) {
        if (it == opt.max_iterations || !std::isfinite(max_abs(r))) {
            std::ostringstream msg;
            msg << "equilibrium Newton did not converge after " << it << " iterations (residual " << max_abs(r) << ")";
            throw NumericalError(msg.str());
        }
        const JacobianBlocks J = jacobians(sys, s.x, s.y);
        Mat full(n + l, n + l);
        full << J.j1, J.j2, J.j3, J.j4;
        Eigen::PartialPivLU<Mat> lu(full);
        if (!(lu_rcond(lu) > 1e-13)) throw NumericalError("combined Jacobian [f; g] is singular: no isolated equilibrium");
        const Vec dz = lu.solve(r);
        s.x -= dz.head(n);
        s.y -= dz.tail(l);
        r = residual();
        ++it;
    }
    return {s, it};
}

template <DaeSystem Sys>
SystemState equilibrate(const Sys& sys, const SystemState& guess, const NewtonOptions& opt = {}) {
    return equilibrate_counted(sys, guess, opt).first;
}

/// Writes a dense matrix row by row in scientific notation.
inline void write_matrix(std::ostream& out, const Mat& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    out.precision(17);
    out << std::scientific;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
        out << '\n';
    }
}

}  // namespace modalnadir
