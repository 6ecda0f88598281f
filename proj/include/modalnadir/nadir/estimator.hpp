#pragma once

// Analytic frequency-nadir estimate from a truncated modal expansion of the
// center-of-inertia speed.
//
//   dw_coi(t) ~ sum_pairs 2 e^{a t} r_c cos(b t + theta) + sum_real g_r e^{l_r t}
//
// The nadir time is the root of the derivative, which is replaced by its
// second-order Taylor polynomial around tau and solved as a quadratic; tau is
// then moved to the root until it settles.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "modalnadir/dynamics/coi.hpp"
#include "modalnadir/grid/power_flow.hpp"
#include "modalnadir/grid/scenario.hpp"
#include "modalnadir/modal/modal.hpp"

namespace modalnadir {

/// How the imbalance fed to the droop estimate is measured.
///   Nominal: the load added (fraction * P_d) or the tripped unit's
///            pre-disturbance electrical output.
///   Settled: the generation increase at the settled post-disturbance
///            operating point, which also covers the change in network losses.
enum class ImbalanceModel { Nominal, Settled };

/// Power imbalance that drives the event; positive means a generation deficit.
struct DisturbanceSpec {
    double dp = 0.0;          ///< pu on system base, per `model`
    double dp_nominal = 0.0;  ///< pu, the nominal measure whatever `model` is
    ImbalanceModel model = ImbalanceModel::Settled;
    Scenario::Kind kind = Scenario::Kind::None;
    Scenario source;
};

/// Extra generation needed once the system settles: a power flow of the
/// disturbed case with every unit held at its pre-disturbance output and the
/// shortfall shared in proportion to governor gain. Loads keep the voltage
/// dependence of the dynamic load model around the pre-disturbance voltages.
inline double settled_imbalance(const GridCase& pre, const PowerFlowSolution& pf, const Scenario& sc) {
    GridCase c = pre;
    for (std::size_t k = 0; k < c.generators.size(); ++k) c.generators[k].pg = pf.gen_p(static_cast<Eigen::Index>(k));
    const GridCase post = apply_scenario(std::move(c), sc);
    Vec gain(static_cast<Eigen::Index>(post.generators.size()));
    for (std::size_t k = 0; k < post.generators.size(); ++k) gain(static_cast<Eigen::Index>(k)) = post.generators[k].governor.gain();
    if (!(gain.sum() > 0)) throw InputError("no machine provides droop response");
    PowerFlowOptions opt;
    opt.participation = gain;
    opt.load_reference = pf.vm;
    const LoadExponents e = load_exponents(pre.load_model);
    opt.p_exponent = e.p;
    opt.q_exponent = e.q;
    return solve_power_flow(post, opt).distributed;
}

inline DisturbanceSpec disturbance_spec(const GridCase& pre, const PowerFlowSolution& pf, const Scenario& sc,
                                        ImbalanceModel model = ImbalanceModel::Settled) {
    DisturbanceSpec d;
    d.kind = sc.kind;
    d.source = sc;
    d.model = model;
    switch (sc.kind) {
        case Scenario::Kind::None: throw InputError("the no-disturbance scenario has no power imbalance to estimate from");
        case Scenario::Kind::LoadStep: d.dp_nominal = sc.fraction * pre.buses[pre.bus_index(sc.target)].pd; break;
        case Scenario::Kind::GenTrip: {
            const auto k = pre.find_generator(sc.target);
            if (!k) throw InputError("unknown generator id " + std::to_string(sc.target));
            d.dp_nominal = pf.gen_p(static_cast<Eigen::Index>(*k));
            break;
        }
    }
    if (d.dp_nominal == 0.0) throw InputError("scenario " + sc.id() + " produces no power imbalance");
    d.dp = model == ImbalanceModel::Nominal ? d.dp_nominal : settled_imbalance(pre, pf, sc);
    return d;
}

struct PostFaultFrequency {
    double dw = 0.0;  ///< steady-state speed change, pu (negative for a deficit)
    double fe = 0.0;  ///< Hz
};

/// dw = -dP / sum(1/R); machines with R = inf contribute no gain.
inline PostFaultFrequency post_fault_frequency(double dp, const Vec& droops, double f0, double f_nom) {
    if (droops.size() == 0) throw InputError("post-fault frequency needs at least one droop");
    if (dp == 0.0) throw InputError("power imbalance must be nonzero");
    double gain = 0.0;
    for (double r : droops) {
        if (!(r > 0)) throw InputError("droops must be positive");
        if (std::isfinite(r)) gain += 1.0 / r;
    }
    if (!(gain > 0)) throw InputError("no machine provides droop response");
    PostFaultFrequency out;
    out.dw = -dp / gain;
    out.fe = f0 + out.dw * f_nom;
    return out;
}

/// System-base droops of the in-service machines, in generator order.
inline Vec system_droops(const GridCase& c) {
    Vec r(static_cast<Eigen::Index>(c.generators.size()));
    for (std::size_t k = 0; k < c.generators.size(); ++k) r(static_cast<Eigen::Index>(k)) = c.generators[k].governor.r_sys;
    return r;
}

struct InitialDeviation {
    Vec dx0;
    double fe = 0.0;
    double f0 = 0.0;
    double dw = 0.0;
};

/// dx0 = x0 - x_e where x_e differs from x0 only in speeds (1 + dw) and the
/// governor states y1 = y3 = -dw/R, T_m = P_C - dw/R.
inline InitialDeviation build_delta_x0(const StateLayout& layout, const Vec& x0, double dw, const Vec& droops, const Vec& pc,
                                       double f0, double f_nom) {
    const auto& ms = layout.machines();
    if (x0.size() != layout.n()) throw InputError("x0 does not match the layout");
    if (droops.size() != static_cast<Eigen::Index>(ms.size()) || pc.size() != droops.size())
        throw InputError("one droop and one P_C per machine are required");
    InitialDeviation d;
    d.dx0 = Vec::Zero(layout.n());
    d.dw = dw;
    d.f0 = f0;
    d.fe = f0 + dw * f_nom;
    for (std::size_t k = 0; k < ms.size(); ++k) {
        const auto& b = ms[k];
        const auto kk = static_cast<Eigen::Index>(k);
        const double r = droops(kk);
        const double shift = std::isfinite(r) ? -dw / r : 0.0;
        d.dx0(b.omega) = x0(b.omega) - (1.0 + dw);
        d.dx0(b.y1) = x0(b.y1) - shift;
        d.dx0(b.y3) = x0(b.y3) - shift;
        d.dx0(b.tm) = x0(b.tm) - (pc(kk) + shift);
    }
    return d;
}

/// Deviation shape used to screen modes by their share of the COI response:
/// the dx0 of a unit speed drop (dw = -1) from an exact equilibrium.
inline Vec reference_deviation(const StateLayout& layout, const Vec& droops) {
    Vec d = Vec::Zero(layout.n());
    const auto& ms = layout.machines();
    for (std::size_t k = 0; k < ms.size(); ++k) {
        const double r = droops(static_cast<Eigen::Index>(k));
        const double gain = std::isfinite(r) ? 1.0 / r : 0.0;
        d(ms[k].omega) = 1.0;
        d(ms[k].y1) = -gain;
        d(ms[k].y3) = -gain;
        d(ms[k].tm) = -gain;
    }
    return d;
}

/// gamma_m = <w_m, dx0> sum_z C_z v_{m, speed(z)} for every mode in `modes`.
inline CVec coi_residues(const ModalBasis& b, const std::vector<Eigen::Index>& modes, const Vec& dx0, const StateLayout& layout,
                         const CoiWeights& w) {
    const auto z = layout.speed_indices();
    if (static_cast<Eigen::Index>(z.size()) != w.c.size()) throw InputError("COI weights do not match the layout's machines");
    if (dx0.size() != b.v.rows()) throw InputError("initial deviation size does not match the basis");
    const CVec dxc = dx0.cast<Complex>();
    CVec g(static_cast<Eigen::Index>(modes.size()));
    for (std::size_t j = 0; j < modes.size(); ++j) {
        const auto m = modes[j];
        const Complex q = (b.w.col(m).transpose() * dxc)(0);
        Complex s{};
        for (std::size_t k = 0; k < z.size(); ++k) s += w.c(static_cast<Eigen::Index>(k)) * b.v(z[k], m);
        g(static_cast<Eigen::Index>(j)) = q * s;
    }
    return g;
}

/// COI screen over the whole spectrum for `select_modes`.
inline CoiScreen coi_screen(const ModalBasis& b, const Vec& deviation, const StateLayout& layout, const CoiWeights& w) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(b.size()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
    return {coi_residues(b, all, deviation, layout, w)};
}

struct ConjugatePair {
    Eigen::Index mode = 0;  ///< member with positive imaginary part
    double alpha = 0.0, beta = 0.0;
    double e = 0.0, f = 0.0;  ///< gamma = E + jF
    double rc = 0.0, theta = 0.0;
};

struct RealMode {
    Eigen::Index mode = 0;
    double lambda = 0.0;
    double gamma = 0.0;
};

struct ModalCoefficients {
    std::vector<Eigen::Index> modes;
    CVec gamma;  ///< per entry of `modes`
    std::vector<ConjugatePair> pairs;
    std::vector<RealMode> reals;
};

inline ModalCoefficients modal_coefficients(const ModalBasis& b, const ModeSet& set, const Vec& dx0, const StateLayout& layout,
                                            const CoiWeights& w, double pair_tolerance = 1e-9) {
    ModalCoefficients c;
    c.modes = set.modes;
    c.gamma = coi_residues(b, set.modes, dx0, layout, w);
    const double scale = std::max(c.gamma.size() ? c.gamma.cwiseAbs().maxCoeff() : 0.0, 1e-300);
    for (std::size_t j = 0; j < set.modes.size(); ++j) {
        const auto m = set.modes[j];
        const Complex g = c.gamma(static_cast<Eigen::Index>(j));
        if (b.is_real(m)) {
            if (std::abs(g.imag()) > pair_tolerance * scale) throw NumericalError("real mode has a complex COI residue");
            c.reals.push_back({m, b.lambda(m).real(), g.real()});
            continue;
        }
        const auto p = b.partner[static_cast<std::size_t>(m)];
        const auto it = std::find(set.modes.begin(), set.modes.end(), p);
        if (it == set.modes.end()) throw NumericalError("mode set is not closed under conjugation");
        if (b.lambda(m).imag() < 0) continue;
        const Complex gp = c.gamma(static_cast<Eigen::Index>(it - set.modes.begin()));
        if (std::abs(gp - std::conj(g)) > pair_tolerance * scale) throw NumericalError("conjugate modes have non-conjugate residues");
        ConjugatePair cp;
        cp.mode = m;
        cp.alpha = b.lambda(m).real();
        cp.beta = b.lambda(m).imag();
        cp.e = g.real();
        cp.f = g.imag();
        cp.rc = std::abs(g);
        cp.theta = std::atan2(cp.f, cp.e);
        c.pairs.push_back(cp);
    }
    return c;
}

/// COI speed deviation (pu, relative to the post-fault value) in cosine form.
inline double coi_response(const ModalCoefficients& c, double t) {
    double v = 0.0;
    for (const auto& p : c.pairs) v += 2.0 * std::exp(p.alpha * t) * p.rc * std::cos(p.beta * t + p.theta);
    for (const auto& r : c.reals) v += std::exp(r.lambda * t) * r.gamma;
    return v;
}

inline std::vector<double> coi_response(const ModalCoefficients& c, const std::vector<double>& times) {
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(coi_response(c, t));
    return out;
}

/// The same response as a complex exponential sum over every retained mode.
inline double coi_response_exponential(const ModalCoefficients& c, const ModalBasis& b, double t) {
    Complex v{};
    for (std::size_t j = 0; j < c.modes.size(); ++j) v += c.gamma(static_cast<Eigen::Index>(j)) * std::exp(b.lambda(c.modes[j]) * t);
    return v.real();
}

inline double coi_derivative(const ModalCoefficients& c, double t) {
    double v = 0.0;
    for (const auto& p : c.pairs) {
        const double k2 = std::hypot(p.alpha, p.beta);
        const double phi = std::atan2(p.beta, p.alpha);
        v += 2.0 * p.rc * k2 * std::exp(p.alpha * t) * std::cos(p.beta * t + p.theta + phi);
    }
    for (const auto& r : c.reals) v += r.lambda * r.gamma * std::exp(r.lambda * t);
    return v;
}

struct PairExpansion {
    double psi = 0.0, phi = 0.0, r = 0.0, k1 = 0.0, k2 = 0.0;
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;
};

struct NadirExpansion {
    double tau = 0.0;
    std::vector<PairExpansion> pairs;
    /// Quadratic a t^2 + b t + c approximating the derivative near tau:
    /// a = a1 + a4, b = a2 + a5, c = a3 + a6 summed over all retained modes.
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;
    double a4 = 0.0, a5 = 0.0, a6 = 0.0;

    [[nodiscard]] double quad_a() const { return a1 + a4; }
    [[nodiscard]] double quad_b() const { return a2 + a5; }
    [[nodiscard]] double quad_c() const { return a3 + a6; }
    [[nodiscard]] double eval(double t) const { return quad_a() * t * t + quad_b() * t + quad_c(); }
};

struct ExpansionOptions {
    /// Evaluate the exponential in the curvature term of each real mode at
    /// t = 0 instead of at tau. Off by default; the expansion is only a
    /// Taylor polynomial of the derivative when it is evaluated at tau.
    bool a4_at_zero = false;
};

inline NadirExpansion taylor_coefficients(const ModalCoefficients& c, double tau, const ExpansionOptions& opt = {}) {
    if (!(tau >= 0)) throw InputError("expansion point must be non-negative");
    NadirExpansion x;
    x.tau = tau;
    for (const auto& p : c.pairs) {
        if (p.alpha == 0.0 && p.beta == 0.0) throw InputError("conjugate pair with zero eigenvalue");
        PairExpansion e;
        e.phi = std::atan2(p.beta, p.alpha);
        e.psi = p.beta * tau + p.theta + e.phi;
        e.k2 = std::hypot(p.alpha, p.beta);
        e.r = 2.0 * p.rc * e.k2;
        e.k1 = e.r * std::exp(p.alpha * tau);
        const double ab = p.alpha * p.alpha - p.beta * p.beta;
        const double curv = ab / 2.0 * std::cos(e.psi) - p.alpha * p.beta * std::sin(e.psi);
        const double slope = e.k2 * std::cos(e.psi + e.phi);
        e.a1 = e.k1 * curv;
        e.a2 = e.k1 * (slope - (ab * std::cos(e.psi) - 2.0 * p.alpha * p.beta * std::sin(e.psi)) * tau);
        e.a3 = e.k1 * (std::cos(e.psi) - slope * tau + curv * tau * tau);
        x.a1 += e.a1;
        x.a2 += e.a2;
        x.a3 += e.a3;
        x.pairs.push_back(e);
    }
    for (const auto& r : c.reals) {
        const double l = r.lambda, g = r.gamma;
        const double el = std::exp(l * tau);
        x.a4 += l * l * l * (opt.a4_at_zero ? 1.0 : el) * g / 2.0;
        x.a5 += l * l * el * (1.0 - l * tau) * g;
        x.a6 += l * el * (1.0 - l * tau + l * l * tau * tau / 2.0) * g;
    }
    return x;
}

struct NadirPrediction {
    double t_nadir = 0.0;  ///< s
    double f_nadir = 0.0;  ///< Hz
    double fe = 0.0;       ///< Hz
    double dw_nadir = 0.0; ///< pu COI deviation from the post-fault value at t_nadir
    std::vector<Eigen::Index> modes;
    int iterations = 0;
    bool fallback = false;
    double tau0 = 0.0;
};

struct NadirOptions {
    double tolerance = 1e-4;  ///< s, change in tau between iterations
    int max_iterations = 50;
    double search_horizon = 60.0;
    double search_step = 1e-3;
    ExpansionOptions expansion;
};

/// First minimum of the dominant oscillatory term: the derivative's phase
/// beta t + theta + phi crosses 3 pi / 2, wrapped into (0, 2 pi / beta].
inline double initial_tau(const ModalCoefficients& c) {
    if (c.pairs.empty()) return 1.0;
    const auto* dom = &c.pairs.front();
    for (const auto& p : c.pairs)
        if (p.rc > dom->rc) dom = &p;
    const double phi = std::atan2(dom->beta, dom->alpha);
    const double period = 2.0 * kPi / dom->beta;
    double t = std::fmod((1.5 * kPi - dom->theta - phi) / dom->beta, period);
    if (t <= 0) t += period;
    return t;
}

namespace detail {

/// Positive root of a t^2 + b t + c: the "+" root, else the "-" root.
inline std::optional<double> quadratic_root(double a, double b, double c) {
    if (a == 0.0) {
        if (b == 0.0) return std::nullopt;
        const double t = -c / b;
        return t > 0 ? std::optional<double>(t) : std::nullopt;
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0) return std::nullopt;
    const double plus = (-b + std::sqrt(disc)) / (2.0 * a);
    if (plus > 0) return plus;
    const double minus = (-b - std::sqrt(disc)) / (2.0 * a);
    if (minus > 0) return minus;
    return std::nullopt;
}

}  // namespace detail

/// Dense-grid minimum of the modal response over [0, horizon], refined by a
/// parabola through the best sample and its neighbours.
inline std::optional<double> dense_nadir_time(const ModalCoefficients& c, double horizon, double step) {
    const auto n = static_cast<long>(std::llround(horizon / step));
    long best = 0;
    double vbest = coi_response(c, 0.0);
    for (long i = 1; i <= n; ++i) {
        const double v = coi_response(c, static_cast<double>(i) * step);
        if (v < vbest) {
            vbest = v;
            best = i;
        }
    }
    if (best == 0 || best == n) return std::nullopt;
    const double t1 = static_cast<double>(best) * step;
    const double v0 = coi_response(c, t1 - step), v2 = coi_response(c, t1 + step);
    const double den = v0 - 2.0 * vbest + v2;
    if (!(den > 0)) return t1;
    return t1 + 0.5 * step * (v0 - v2) / den;
}

inline NadirPrediction predict_nadir(const ModalCoefficients& c, double fe, double f_nom, const NadirOptions& opt = {},
                                     std::optional<double> tau0 = std::nullopt) {
    if (c.pairs.empty() && c.reals.empty()) throw InputError("no modes to predict from");
    NadirPrediction p;
    p.fe = fe;
    p.modes = c.modes;
    p.tau0 = tau0.value_or(initial_tau(c));
    if (!(p.tau0 > 0)) throw InputError("initial expansion point must be positive");

    double tau = p.tau0;
    bool ok = false;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        const NadirExpansion x = taylor_coefficients(c, tau, opt.expansion);
        const auto root = detail::quadratic_root(x.quad_a(), x.quad_b(), x.quad_c());
        p.iterations = it;
        if (!root || !std::isfinite(*root)) break;
        const double change = std::abs(*root - tau);
        tau = *root;
        if (change < opt.tolerance) {
            ok = true;
            break;
        }
    }
    if (ok) {
        // only accept a stationary point that is a minimum of the response
        const double h = 1e-3;
        ok = coi_derivative(c, tau + h) > coi_derivative(c, tau - h);
    }
    if (!ok) {
        const auto t = dense_nadir_time(c, opt.search_horizon, opt.search_step);
        if (!t) throw NumericalError("no interior minimum of the modal COI response: analytic and dense searches both failed");
        tau = *t;
        p.fallback = true;
    }
    p.t_nadir = tau;
    p.dw_nadir = coi_response(c, tau);
    p.f_nadir = fe + p.dw_nadir * f_nom;
    return p;
}

}  // namespace modalnadir
