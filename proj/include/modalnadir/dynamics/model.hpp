#pragma once

// Differential-algebraic model  x' = f(x, y),  0 = g(x, y)  of a multi-machine
// grid: two-axis synchronous machines, IEEE Type-1 exciters and IEESGO
// turbine/governors. Loads follow the case's load_model: constant impedance,
// constant power, or constant-power / constant-current P with a constant
// susceptance for Q. The equations are listed in docs/device_equations.md; residuals are templates on the scalar
// type so that tests can differentiate them with complex steps.

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "modalnadir/dynamics/layout.hpp"
#include "modalnadir/grid/power_flow.hpp"
#include "modalnadir/grid/scenario.hpp"

namespace modalnadir {

/// Quantities fixed by initialization and held constant during a study.
struct Setpoints {
    Vec vref;          ///< exciter voltage reference, per machine
    Vec pc;            ///< governor power reference P_C, per machine
    CVec load_y;       ///< constant-impedance load admittance, per bus
    CVec load_s;       ///< constant-power load P + jQ, per bus
    Vec load_v0;       ///< |V| at which load_s is drawn, per bus
    double delta_ref = 0.0;  ///< rotor angle of the reference machine
};

namespace detail {

inline double real_part(double v) { return v; }
inline double real_part(const std::complex<double>& v) { return v.real(); }

template <class S>
S clamp_scalar(const S& v, double lo, double hi) {
    if (real_part(v) > hi) return S(hi);
    if (real_part(v) < lo) return S(lo);
    return v;
}

}  // namespace detail

class DynamicModel {
public:
    template <class S>
    using VecS = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    DynamicModel() = default;
    DynamicModel(GridCase c, StateLayout layout, Setpoints sp)
        : case_(std::move(c)), layout_(std::move(layout)), sp_(std::move(sp)) {
        rebuild_network();
    }

    [[nodiscard]] Eigen::Index n() const { return layout_.n(); }
    [[nodiscard]] Eigen::Index l() const { return layout_.l(); }
    [[nodiscard]] const GridCase& grid() const { return case_; }
    [[nodiscard]] const StateLayout& layout() const { return layout_; }
    [[nodiscard]] const Setpoints& setpoints() const { return sp_; }
    [[nodiscard]] double omega_base() const { return 2.0 * kPi * case_.f_nom; }

    /// Scales the load at one bus by `factor`.
    void scale_load(int bus_id, double factor) {
        const auto i = static_cast<Eigen::Index>(case_.bus_index(bus_id));
        sp_.load_y(i) *= factor;
        sp_.load_s(i) *= factor;
        rebuild_network();
    }

    /// Differential right-hand side f(x, y).
    template <class S>
    VecS<S> f(const VecS<S>& x, const VecS<S>& y) const {
        check_dims(x.size(), y.size());
        VecS<S> dx(n());
        const auto& ms = layout_.machines();
        const S omega_ref = x(ms[layout_.reference()].omega);
        const double wb = omega_base();
        for (std::size_t k = 0; k < ms.size(); ++k) {
            const auto& b = ms[k];
            const auto& gen = case_.generators[k];
            const auto& m = gen.machine;
            const auto& e = gen.exciter;
            const auto& gv = gen.governor;
            const auto ki = static_cast<Eigen::Index>(k);

            const S omega = x(b.omega), eqp = x(b.eqp), edp = x(b.edp);
            const S id = y(b.id), iq = y(b.iq);
            const auto bus = static_cast<Eigen::Index>(case_.bus_index(gen.bus));
            const S vre = y(StateLayout::vre(bus)), vim = y(StateLayout::vim(bus));

            // machine
            if (b.delta) dx(*b.delta) = wb * (omega - omega_ref);
            const S te = edp * id + eqp * iq + (m.xqp - m.xdp) * id * iq;
            dx(b.omega) = (x(b.tm) - te - m.d * (omega - 1.0)) / (2.0 * gen.h);
            dx(b.eqp) = (-eqp - (m.xd - m.xdp) * id + x(b.efd)) / m.td0p;
            dx(b.edp) = (-edp + (m.xq - m.xqp) * iq) / m.tq0p;

            // exciter
            using std::sqrt;
            const S vt = sqrt(vre * vre + vim * vim);
            dx(b.vm) = (vt - x(b.vm)) / e.tr;
            dx(b.efd) = (-e.ke * x(b.efd) + x(b.vr)) / e.te;
            S dvr = (-x(b.vr) + e.ka * x(b.rf) - e.ka * e.kf / e.tf * x(b.efd) + e.ka * (sp_.vref(ki) - x(b.vm))) / e.ta;
            if (e.limits) {
                const double vr = detail::real_part(x(b.vr));
                if ((vr >= e.vrmax && detail::real_part(dvr) > 0) || (vr <= e.vrmin && detail::real_part(dvr) < 0)) dvr = S(0.0);
            }
            dx(b.vr) = dvr;
            dx(b.rf) = (-x(b.rf) + e.kf / e.tf * x(b.efd)) / e.tf;

            // governor: y1 lag, y2 lead-lag deviation, y3 servo, y4/y5 reheat
            // and crossover deviations from the valve signal, Tm output lag
            const S dy1 = (gv.gain() * (1.0 - omega) - x(b.y1)) / gv.t1;
            const S dy2 = -x(b.y2) / gv.t3 - dy1;
            const S lead = x(b.y1) + (1.0 - gv.t2 / gv.t3) * x(b.y2);
            const S dy3 = (lead - x(b.y3)) / gv.t4;
            S pv = sp_.pc(ki) + x(b.y3);
            S dpv = dy3;
            if (gv.limits) {
                const double raw = detail::real_part(pv);
                if (raw > gv.pmax || raw < gv.pmin) dpv = S(0.0);
                pv = detail::clamp_scalar(pv, gv.pmin, gv.pmax);
            }
            const S p5 = pv + x(b.y4);
            const S p6 = pv + x(b.y5);
            const S dy4 = -x(b.y4) / gv.t5 - dpv;
            const S dy5 = (x(b.y4) - x(b.y5)) / gv.t6 - dpv;
            const S pt = (1.0 - gv.k2) * pv + gv.k2 * (1.0 - gv.k3) * p5 + gv.k2 * gv.k3 * p6;
            dx(b.y1) = dy1;
            dx(b.y2) = dy2;
            dx(b.y3) = dy3;
            dx(b.y4) = dy4;
            dx(b.y5) = dy5;
            dx(b.tm) = (pt - x(b.tm)) / gv.t7;
        }
        return dx;
    }

    /// Algebraic residual g(x, y): complex current balance at every bus
    /// (real, imaginary) followed by the two stator equations per machine.
    template <class S>
    VecS<S> g(const VecS<S>& x, const VecS<S>& y) const {
        check_dims(x.size(), y.size());
        VecS<S> r(l());
        const Eigen::Index nb = layout_.n_bus();
        for (Eigen::Index i = 0; i < nb; ++i) {
            S ire(0.0), iim(0.0);
            for (Eigen::Index k = 0; k < nb; ++k) {
                const double gik = gmat_(i, k), bik = bmat_(i, k);
                if (gik == 0.0 && bik == 0.0) continue;
                const S vr = y(StateLayout::vre(k)), vi = y(StateLayout::vim(k));
                ire += gik * vr - bik * vi;
                iim += gik * vi + bik * vr;
            }
            r(2 * i) = -ire;
            r(2 * i + 1) = -iim;
            Complex sl = sp_.load_s(i);
            if (case_.load_model == LoadModel::Mixed || case_.load_model == LoadModel::ConstantCurrent)
                sl = Complex(sl.real(), 0.0);
            if (case_.load_model != LoadModel::ConstantImpedance && sl != Complex(0.0)) {
                // I_L = conj(S / V), with S scaled by |V| / |V0| for constant current
                using std::sqrt;
                const S vr = y(StateLayout::vre(i)), vi = y(StateLayout::vim(i));
                S v2 = vr * vr + vi * vi;
                if (case_.load_model == LoadModel::ConstantCurrent) v2 = sqrt(v2) * sp_.load_v0(i);
                r(2 * i) -= (sl.real() * vr + sl.imag() * vi) / v2;
                r(2 * i + 1) -= (sl.real() * vi - sl.imag() * vr) / v2;
            }
        }
        const auto& ms = layout_.machines();
        for (std::size_t k = 0; k < ms.size(); ++k) {
            const auto& b = ms[k];
            const auto& gen = case_.generators[k];
            const auto& m = gen.machine;
            const auto bus = static_cast<Eigen::Index>(case_.bus_index(gen.bus));
            const S delta = angle(x, b);
            using std::cos;
            using std::sin;
            const S sd = sin(delta), cd = cos(delta);
            const S id = y(b.id), iq = y(b.iq);
            const S vr = y(StateLayout::vre(bus)), vi = y(StateLayout::vim(bus));
            r(2 * bus) += id * sd + iq * cd;
            r(2 * bus + 1) += iq * sd - id * cd;
            const S vd = vr * sd - vi * cd;
            const S vq = vr * cd + vi * sd;
            r(b.id) = x(b.edp) - vd - m.ra * id + m.xqp * iq;
            r(b.iq) = x(b.eqp) - vq - m.ra * iq - m.xdp * id;
        }
        return r;
    }

    [[nodiscard]] Vec f(const Vec& x, const Vec& y) const { return f<double>(x, y); }
    [[nodiscard]] Vec g(const Vec& x, const Vec& y) const { return g<double>(x, y); }

    /// Rotor angle of machine block `b` in the network frame.
    template <class S>
    S angle(const VecS<S>& x, const MachineBlock& b) const {
        return b.delta ? x(*b.delta) : S(sp_.delta_ref);
    }

    /// Electrical power of every machine at (x, y).
    [[nodiscard]] Vec electrical_power(const Vec& x, const Vec& y) const {
        const auto& ms = layout_.machines();
        Vec pe(static_cast<Eigen::Index>(ms.size()));
        for (std::size_t k = 0; k < ms.size(); ++k) {
            const auto& b = ms[k];
            const auto& m = case_.generators[k].machine;
            const double id = y(b.id), iq = y(b.iq);
            pe(static_cast<Eigen::Index>(k)) = x(b.edp) * id + x(b.eqp) * iq + (m.xqp - m.xdp) * id * iq;
        }
        return pe;
    }

    /// Admittance matrix used by g: network plus the impedance part of the loads.
    [[nodiscard]] CMat network_admittance() const {
        CMat y = build_ybus(case_);
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            if (case_.load_model == LoadModel::ConstantImpedance) y(i, i) += sp_.load_y(i);
            else if (case_.load_model != LoadModel::ConstantPower) y(i, i) += Complex(0.0, sp_.load_y(i).imag());
        }
        return y;
    }

private:
    void rebuild_network() {
        const CMat y = network_admittance();
        gmat_ = y.real();
        bmat_ = y.imag();
    }

    void check_dims(Eigen::Index nx, Eigen::Index ny) const {
        if (nx != n() || ny != l()) {
            std::ostringstream msg;
            msg << "state dimension mismatch: got x=" << nx << ", y=" << ny << ", layout expects x=" << n() << ", y=" << l();
            throw InputError(msg.str());
        }
    }

    GridCase case_;
    StateLayout layout_;
    Setpoints sp_;
    Mat gmat_, bmat_;
};

[[nodiscard]] inline Vec residual_f(const DynamicModel& model, const SystemState& s) { return model.f(s.x, s.y); }
[[nodiscard]] inline Vec residual_g(const DynamicModel& model, const SystemState& s) { return model.g(s.x, s.y); }

struct InitTolerances {
    double f = 1e-8;
    double g = 1e-10;
};

/// Builds the dynamic model and the steady state consistent with a power-flow
/// solution: all speeds 1 pu, governor references equal to the electrical
/// output and exciter references matching the terminal voltage.
inline std::pair<DynamicModel, SystemState> init_dynamic_state(const GridCase& c, const PowerFlowSolution& pf,
                                                               std::optional<int> reference_gen = std::nullopt,
                                                               const InitTolerances& tol = {}) {
    StateLayout layout(c, reference_gen);
    const auto nb = static_cast<Eigen::Index>(c.buses.size());
    const auto ng = static_cast<Eigen::Index>(c.generators.size());
    const CVec v = pf.voltages();

    Setpoints sp;
    sp.vref = Vec::Zero(ng);
    sp.pc = Vec::Zero(ng);
    sp.load_y = CVec::Zero(nb);
    sp.load_s = CVec::Zero(nb);
    sp.load_v0 = Vec::Ones(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        const double vm2 = std::norm(v(i));
        sp.load_y(i) = Complex(c.buses[i].pd, -c.buses[i].qd) / vm2;
        sp.load_s(i) = Complex(c.buses[i].pd, c.buses[i].qd);
        sp.load_v0(i) = std::sqrt(vm2);
    }

    SystemState s;
    s.x = Vec::Zero(layout.n());
    s.y = Vec::Zero(layout.l());
    for (Eigen::Index i = 0; i < nb; ++i) {
        s.y(StateLayout::vre(i)) = v(i).real();
        s.y(StateLayout::vim(i)) = v(i).imag();
    }
    const auto& ms = layout.machines();
    for (Eigen::Index k = 0; k < ng; ++k) {
        const auto& gen = c.generators[static_cast<std::size_t>(k)];
        const auto& m = gen.machine;
        const auto& e = gen.exciter;
        const auto& b = ms[static_cast<std::size_t>(k)];
        const Complex vt = v(static_cast<Eigen::Index>(c.bus_index(gen.bus)));
        const Complex ig = std::conj(Complex(pf.gen_p(k), pf.gen_q(k)) / vt);
        const Complex eq_int = vt + Complex(m.ra, m.xq) * ig;
        const double delta = std::arg(eq_int);
        const Complex rot = std::polar(1.0, -(delta - kPi / 2.0));
        const Complex idq = ig * rot;
        const Complex vdq = vt * rot;
        const double id = idq.real(), iq = idq.imag();
        const double vd = vdq.real(), vq = vdq.imag();
        const double edp = vd + m.ra * id - m.xqp * iq;
        const double eqp = vq + m.ra * iq + m.xdp * id;
        const double efd = eqp + (m.xd - m.xdp) * id;
        const double tm = edp * id + eqp * iq + (m.xqp - m.xdp) * id * iq;

        if (b.delta) s.x(*b.delta) = delta;
        else sp.delta_ref = delta;
        s.x(b.omega) = 1.0;
        s.x(b.eqp) = eqp;
        s.x(b.edp) = edp;
        s.x(b.vm) = std::abs(vt);
        s.x(b.efd) = efd;
        s.x(b.vr) = e.ke * efd;
        s.x(b.rf) = e.kf / e.tf * efd;
        s.x(b.tm) = tm;
        s.y(b.id) = id;
        s.y(b.iq) = iq;
        sp.vref(k) = std::abs(vt) + e.ke * efd / e.ka;
        sp.pc(k) = tm;
    }

    DynamicModel model(c, std::move(layout), std::move(sp));
    const double rf = max_abs(model.f(s.x, s.y));
    const double rg = max_abs(model.g(s.x, s.y));
    if (rf > tol.f || rg > tol.g) {
        std::ostringstream msg;
        msg << "initialization residual above tolerance (|f|=" << rf << ", |g|=" << rg << "); check machine parameters";
        throw NumericalError(msg.str());
    }
    return {std::move(model), std::move(s)};
}

}  // namespace modalnadir
