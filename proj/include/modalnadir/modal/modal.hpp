#pragma once

// Modal analysis of the reduced state matrix: eigenvalues, right and left
// eigenvectors scaled so that W^T V = I, participation factors, selection of
// the slow frequency-response modes, and truncated modal reconstruction.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "modalnadir/dynamics/layout.hpp"

namespace modalnadir {

struct ModalBasis {
    CVec lambda;  ///< eigenvalues, 1/s
    CMat v;       ///< right eigenvectors (columns), unit 2-norm
    CMat w;       ///< left eigenvectors (columns), w_i^T v_i = 1
    /// |w_i^T v_i| for the unit-norm left vector before rescaling; small values
    /// flag ill-conditioned (near-defective) eigenvalues.
    Vec scaling;
    /// Index of each mode's complex-conjugate partner (itself for real modes).
    std::vector<Eigen::Index> partner;

    [[nodiscard]] Eigen::Index size() const { return lambda.size(); }
    [[nodiscard]] bool is_real(Eigen::Index i) const { return partner[static_cast<std::size_t>(i)] == i; }
};

struct EigenOptions {
    double min_scaling = 1e-12;
    /// Relative distance under which eigenvalues are treated as one
    /// repeated eigenvalue.
    double cluster_tolerance = 1e-9;
    /// Singular values of A - lambda I below this (relative to the norm of A)
    /// count as null directions of a repeated eigenvalue.
    double null_tolerance = 1e-10;
};

namespace detail {

/// Orthonormal basis (m columns) of the null space of A - lambda I, or an
/// error when A - lambda I does not have m small singular values.
template <class M>
M null_space(const Mat& a, typename M::Scalar lambda, std::size_t m, double tol) {
    M shifted = a.cast<typename M::Scalar>();
    shifted.diagonal().array() -= lambda;
    Eigen::JacobiSVD<M> svd(shifted, Eigen::ComputeFullV);
    const auto n = a.rows();
    const double limit = tol * std::max(1.0, a.cwiseAbs().rowwise().sum().maxCoeff());
    const auto mm = static_cast<Eigen::Index>(m);
    if (svd.singularValues()(n - mm) > limit) {
        std::ostringstream msg;
        msg << "eigenvalue " << lambda << " has multiplicity " << m << " but fewer independent eigenvectors: A_s is defective";
        throw NumericalError(msg.str());
    }
    return svd.matrixV().rightCols(mm);
}

}  // namespace detail

/// Full eigendecomposition of a real square matrix.
///
/// Eigenvalues closer than `cluster_tolerance` (relative) are treated as one
/// repeated eigenvalue. A repeated eigenvalue can come back from the QR
/// iteration with nearly parallel eigenvectors even when it is semisimple
/// (identical decoupled lags on several machines, say), so the vectors of
/// every such cluster are rebuilt from the null space of A - lambda I.
/// Clusters within the tolerance of the real axis are made exactly real.
inline ModalBasis eigendecompose(const Mat& a, const EigenOptions& opt = {}) {
    if (a.rows() != a.cols()) throw InputError("eigendecompose needs a square matrix");
    const Eigen::Index n = a.rows();
    Eigen::EigenSolver<Mat> es(a, true);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed to converge");

    ModalBasis b;
    b.lambda = es.eigenvalues();
    b.v = es.eigenvectors();
    b.partner.assign(static_cast<std::size_t>(n), -1);

    const auto close = [&](Complex x, Complex y) {
        return std::abs(x - y) <= opt.cluster_tolerance * std::max(1.0, std::abs(x));
    };
    std::vector<bool> done(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (done[static_cast<std::size_t>(i)]) continue;
        std::vector<Eigen::Index> cl;
        Complex mean{};
        for (Eigen::Index k = i; k < n; ++k)
            if (!done[static_cast<std::size_t>(k)] && close(b.lambda(i), b.lambda(k))) cl.push_back(k);
        for (auto k : cl) mean += b.lambda(k);
        mean /= static_cast<double>(cl.size());
        const bool real = std::abs(mean.imag()) <= opt.cluster_tolerance * std::max(1.0, std::abs(mean));

        if (real) {
            // a conjugate pair that straddles the real axis joins the cluster
            for (Eigen::Index k = i + 1; k < n; ++k)
                if (!done[static_cast<std::size_t>(k)] && std::find(cl.begin(), cl.end(), k) == cl.end() &&
                    close(std::conj(b.lambda(i)), b.lambda(k)))
                    cl.push_back(k);
            const double lam = mean.real();
            if (cl.size() == 1) {
                Eigen::Index k;
                b.v.col(i).cwiseAbs().maxCoeff(&k);
                const Complex ph = b.v(k, i) / std::abs(b.v(k, i));
                b.v.col(i) = (b.v.col(i) / ph).real().cast<Complex>();
            } else {
                const Mat ns = detail::null_space<Mat>(a, lam, cl.size(), opt.null_tolerance);
                for (std::size_t j = 0; j < cl.size(); ++j) b.v.col(cl[j]) = ns.col(static_cast<Eigen::Index>(j)).cast<Complex>();
            }
            for (auto k : cl) {
                b.lambda(k) = lam;
                b.partner[static_cast<std::size_t>(k)] = k;
                done[static_cast<std::size_t>(k)] = true;
            }
            continue;
        }

        // complex cluster: pair it with the conjugate cluster
        std::vector<Eigen::Index> conj_cl;
        for (Eigen::Index k = 0; k < n; ++k)
            if (!done[static_cast<std::size_t>(k)] && close(std::conj(mean), b.lambda(k))) conj_cl.push_back(k);
        if (conj_cl.size() != cl.size()) throw NumericalError("complex eigenvalues without matching conjugates");
        const Complex lam = mean.imag() > 0 ? mean : std::conj(mean);
        auto& up = mean.imag() > 0 ? cl : conj_cl;
        auto& down = mean.imag() > 0 ? conj_cl : cl;
        if (cl.size() > 1) {
            const CMat ns = detail::null_space<CMat>(a, lam, up.size(), opt.null_tolerance);
            for (std::size_t j = 0; j < up.size(); ++j) b.v.col(up[j]) = ns.col(static_cast<Eigen::Index>(j));
        }
        for (std::size_t j = 0; j < up.size(); ++j) {
            b.lambda(up[j]) = lam;
            b.lambda(down[j]) = std::conj(lam);
            b.v.col(down[j]) = b.v.col(up[j]).conjugate();
            b.partner[static_cast<std::size_t>(up[j])] = down[j];
            b.partner[static_cast<std::size_t>(down[j])] = up[j];
            done[static_cast<std::size_t>(up[j])] = done[static_cast<std::size_t>(down[j])] = true;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) b.v.col(i).normalize();

    Eigen::PartialPivLU<CMat> lu(b.v);
    // rows of V^{-1} are the left eigenvectors scaled for biorthonormality
    b.w = lu.inverse().transpose();
    if (!b.w.allFinite()) throw NumericalError("eigenvector matrix is singular: A_s is defective");
    b.scaling.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        b.scaling(i) = 1.0 / b.w.col(i).norm();
        if (b.scaling(i) < opt.min_scaling) {
            std::ostringstream msg;
            msg << "mode " << i << " (lambda = " << b.lambda(i) << ") is near-defective: |w^T v| = " << b.scaling(i);
            throw NumericalError(msg.str());
        }
    }
    return b;
}

/// p(i, k) = |v_{k,i} w_{k,i}| normalized so every mode's row sums to one.
inline Mat participation_factors(const ModalBasis& b) {
    const Eigen::Index n = b.size();
    Mat p(n, b.v.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < b.v.rows(); ++k) p(i, k) = std::abs(b.v(k, i) * b.w(k, i));
        const double s = p.row(i).sum();
        if (s > 0) p.row(i) /= s;
    }
    return p;
}

struct ModeSet {
    std::vector<Eigen::Index> modes;          ///< closed under conjugation, ascending
    std::vector<double> max_governor_pf;      ///< per retained mode, over speed/governor states
    std::vector<double> coi_share;            ///< per retained mode, when COI screening ran

    [[nodiscard]] std::size_t size() const { return modes.size(); }
};

struct ModeSelectionOptions {
    double pf_threshold = 1e-3;
    double slow_cutoff = 10.0;  ///< rad/s; |lambda| above this is not a slow mode
};

/// Optional screening by each mode's share of the COI response to a
/// reference initial deviation: share_m = |gamma_m| / sum_i |gamma_i|.
struct CoiScreen {
    CVec gamma;  ///< per-mode COI residues for the reference deviation
};

/// Modes whose participation on any rotor-speed or governor state reaches
/// the threshold, restricted to slow modes. With a COI screen, modes must
/// also carry at least `pf_threshold` of the COI response.
inline ModeSet select_modes(const ModalBasis& b, const Mat& pf, const StateLayout& layout, const ModeSelectionOptions& opt = {},
                            const std::optional<CoiScreen>& screen = std::nullopt) {
    if (!(opt.pf_threshold > 0 && opt.pf_threshold < 1)) throw InputError("participation threshold must lie in (0, 1)");
    const Eigen::Index n = b.size();
    double gamma_total = 0.0;
    if (screen) {
        if (screen->gamma.size() != n) throw InputError("COI screen size does not match the basis");
        gamma_total = screen->gamma.cwiseAbs().sum();
    }
    ModeSet set;
    std::vector<bool> keep(static_cast<std::size_t>(n), false);
    std::vector<double> best(static_cast<std::size_t>(n), 0.0), share(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double m = 0.0;
        for (Eigen::Index k = 0; k < pf.cols(); ++k) {
            const auto kind = layout.kind(k);
            if (kind == StateKind::Speed || kind == StateKind::Governor) m = std::max(m, pf(i, k));
        }
        best[static_cast<std::size_t>(i)] = m;
        bool ok = m >= opt.pf_threshold && std::abs(b.lambda(i)) <= opt.slow_cutoff;
        if (screen) {
            share[static_cast<std::size_t>(i)] = gamma_total > 0 ? std::abs(screen->gamma(i)) / gamma_total : 0.0;
            ok = ok && share[static_cast<std::size_t>(i)] >= opt.pf_threshold;
        }
        keep[static_cast<std::size_t>(i)] = ok;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = b.partner[static_cast<std::size_t>(i)];
        if (keep[static_cast<std::size_t>(i)] || keep[static_cast<std::size_t>(p)]) {
            set.modes.push_back(i);
            set.max_governor_pf.push_back(best[static_cast<std::size_t>(i)]);
            if (screen) set.coi_share.push_back(share[static_cast<std::size_t>(i)]);
        }
    }
    if (set.modes.empty()) {
        std::ostringstream msg;
        msg << "no mode passes the selection (participation threshold " << opt.pf_threshold << ", slow cutoff "
            << opt.slow_cutoff << " rad/s); lower the threshold or raise the cutoff";
        throw NumericalError(msg.str());
    }
    return set;
}

inline ModeSet all_modes(const ModalBasis& b) {
    ModeSet s;
    for (Eigen::Index i = 0; i < b.size(); ++i) s.modes.push_back(i);
    s.max_governor_pf.assign(s.modes.size(), 0.0);
    return s;
}

/// Truncated modal solution dx(t) = sum_m e^{lambda_m t} <w_m, dx0> v_m,
/// one column per time.
inline Mat modal_response(const ModalBasis& b, const Vec& dx0, const ModeSet& modes, const std::vector<double>& times,
                          double imag_tolerance = 1e-10) {
    if (dx0.size() != b.v.rows()) throw InputError("initial deviation size does not match the basis");
    const Eigen::Index n = dx0.size();
    CVec q0(static_cast<Eigen::Index>(modes.size()));
    for (std::size_t j = 0; j < modes.size(); ++j) {
        const auto m = modes.modes[j];
        if (m < 0 || m >= b.size()) throw InputError("mode index outside the spectrum");
        q0(static_cast<Eigen::Index>(j)) = b.w.col(m).transpose() * dx0.cast<Complex>();
    }
    Mat out(n, static_cast<Eigen::Index>(times.size()));
    for (std::size_t c = 0; c < times.size(); ++c) {
        CVec acc = CVec::Zero(n);
        for (std::size_t j = 0; j < modes.size(); ++j) {
            const auto m = modes.modes[j];
            acc += std::exp(b.lambda(m) * times[c]) * q0(static_cast<Eigen::Index>(j)) * b.v.col(m);
        }
        const double scale = std::max(1.0, acc.cwiseAbs().maxCoeff());
        if (acc.imag().cwiseAbs().maxCoeff() > imag_tolerance * scale)
            throw NumericalError("modal response has an imaginary residue; mode set is not closed under conjugation");
        out.col(static_cast<Eigen::Index>(c)) = acc.real();
    }
    return out;
}

struct ModeReportRow {
    Eigen::Index index = 0;
    Complex lambda;
    double damping = 0.0;
    double freq_hz = 0.0;
    std::vector<std::pair<std::string, double>> top_states;
    bool selected = false;
};

inline std::vector<ModeReportRow> mode_report(const ModalBasis& b, const Mat& pf, const StateLayout& layout, const ModeSet& sel,
                                              std::size_t top = 3) {
    std::vector<ModeReportRow> rows;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        ModeReportRow r;
        r.index = i;
        r.lambda = b.lambda(i);
        const double mag = std::abs(r.lambda);
        r.damping = mag > 0 ? -r.lambda.real() / mag : 1.0;
        r.freq_hz = std::abs(r.lambda.imag()) / (2 * kPi);
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(pf.cols()));
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<Eigen::Index>(k);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto c) { return pf(i, a) > pf(i, c); });
        for (std::size_t k = 0; k < std::min(top, idx.size()); ++k)
            r.top_states.emplace_back(layout.x_names()[static_cast<std::size_t>(idx[k])], pf(i, idx[k]));
        r.selected = std::find(sel.modes.begin(), sel.modes.end(), i) != sel.modes.end();
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace modalnadir
