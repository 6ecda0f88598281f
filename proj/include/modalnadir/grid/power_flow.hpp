#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/LU>

#include "modalnadir/grid/ybus.hpp"

namespace modalnadir {

struct PowerFlowSolution {
    Vec vm;              ///< bus voltage magnitude, pu (case bus order)
    Vec va;              ///< bus voltage angle, rad
    Vec gen_p;           ///< per-generator injected active power, pu
    Vec gen_q;           ///< per-generator injected reactive power, pu
    double mismatch = 0.0;
    int iterations = 0;
    /// Generation added on top of the schedules when the slack is distributed.
    double distributed = 0.0;

    [[nodiscard]] CVec voltages() const {
        CVec v(vm.size());
        for (Eigen::Index i = 0; i < vm.size(); ++i) v(i) = std::polar(vm(i), va(i));
        return v;
    }
};

struct PowerFlowOptions {
    int max_iterations = 30;
    double tolerance = 1e-10;
    /// Per-generator shares of any generation imbalance. When set, every
    /// generator (slack included) runs at pg + share * s and s is solved for;
    /// the slack bus only fixes the angle reference.
    std::optional<Vec> participation;
    /// Per-bus magnitudes at which loads draw exactly pd + j qd. When set, a
    /// load scales as (V / V_ref)^exponent; otherwise loads are constant power.
    std::optional<Vec> load_reference;
    double p_exponent = 0.0;
    double q_exponent = 0.0;
};

struct LoadExponents {
    double p = 0.0;
    double q = 0.0;
};

/// Voltage exponents of the dynamic load models.
[[nodiscard]] inline LoadExponents load_exponents(LoadModel m) {
    switch (m) {
        case LoadModel::ConstantImpedance: return {2.0, 2.0};
        case LoadModel::ConstantPower: return {0.0, 0.0};
        case LoadModel::Mixed: return {0.0, 2.0};
        case LoadModel::ConstantCurrent: return {1.0, 2.0};
    }
    return {};
}

/// Complex power injected into the network at each bus, S = V conj(Y V).
[[nodiscard]] inline CVec bus_injections(const CMat& ybus, const CVec& v) {
    const CVec i = ybus * v;
    return v.cwiseProduct(i.conjugate());
}

/// Newton-Raphson AC power flow in polar coordinates from a flat start.
/// Generator buses hold their voltage setpoints.
inline PowerFlowSolution solve_power_flow(const GridCase& c, const PowerFlowOptions& opt = {}) {
    const auto nb = static_cast<Eigen::Index>(c.buses.size());
    const CMat ybus = build_ybus(c);

    Vec p_spec = Vec::Zero(nb);
    for (const auto& g : c.generators) p_spec(c.bus_index(g.bus)) += g.pg;

    Vec vref = Vec::Ones(nb);
    double ep = 0.0, eq = 0.0;
    if (opt.load_reference) {
        if (opt.load_reference->size() != nb) throw InputError("one load reference voltage per bus is required");
        if (!(opt.load_reference->minCoeff() > 0)) throw InputError("load reference voltages must be positive");
        vref = *opt.load_reference;
        ep = opt.p_exponent;
        eq = opt.q_exponent;
    }
    // load at bus i for magnitude vm, and its derivative with respect to vm
    auto load = [&](Eigen::Index i, double vm) {
        const double r = vm / vref(i);
        return Complex(c.buses[i].pd * std::pow(r, ep), c.buses[i].qd * std::pow(r, eq));
    };
    auto load_dvm = [&](Eigen::Index i, double vm) {
        const double r = vm / vref(i);
        auto d = [&](double e) { return e == 0.0 ? 0.0 : e * std::pow(r, e - 1.0) / vref(i); };
        return Complex(c.buses[i].pd * d(ep), c.buses[i].qd * d(eq));
    };

    std::vector<Eigen::Index> pvpq, pq, prow;
    for (Eigen::Index i = 0; i < nb; ++i) {
        if (c.buses[i].type != BusType::Slack) pvpq.push_back(i);
        if (c.buses[i].type == BusType::PQ) pq.push_back(i);
    }
    const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
    const auto npq = static_cast<Eigen::Index>(pq.size());

    // distributed slack: one more unknown (s) and the slack bus P equation
    const bool dist = opt.participation.has_value();
    Vec share = Vec::Zero(nb);
    prow = pvpq;
    if (dist) {
        const Vec& part = *opt.participation;
        if (part.size() != static_cast<Eigen::Index>(c.generators.size())) throw InputError("one participation factor per generator is required");
        if (!(part.minCoeff() >= 0) || !(part.sum() > 0)) throw InputError("participation factors must be non-negative with a positive sum");
        for (std::size_t k = 0; k < c.generators.size(); ++k)
            share(static_cast<Eigen::Index>(c.bus_index(c.generators[k].bus))) += part(static_cast<Eigen::Index>(k)) / part.sum();
        prow.push_back(static_cast<Eigen::Index>(c.slack_index()));
    }
    const auto np = static_cast<Eigen::Index>(prow.size());
    const Eigen::Index nx = npvpq + npq + (dist ? 1 : 0);
    double extra = 0.0;

    Vec vm = Vec::Ones(nb), va = Vec::Zero(nb);
    for (Eigen::Index i = 0; i < nb; ++i)
        if (c.buses[i].type != BusType::PQ) vm(i) = c.buses[i].vset;

    auto voltages = [&] {
        CVec v(nb);
        for (Eigen::Index i = 0; i < nb; ++i) v(i) = std::polar(vm(i), va(i));
        return v;
    };
    auto mismatch_vector = [&](const CVec& s) {
        Vec f(np + npq);
        for (Eigen::Index k = 0; k < np; ++k) {
            const auto i = prow[k];
            f(k) = s(i).real() + load(i, vm(i)).real() - p_spec(i) - share(i) * extra;
        }
        for (Eigen::Index k = 0; k < npq; ++k) f(np + k) = s(pq[k]).imag() + load(pq[k], vm(pq[k])).imag();
        return f;
    };

    PowerFlowSolution sol;
    CVec v = voltages();
    Vec f = mismatch_vector(bus_injections(ybus, v));
    double norm = max_abs(f);
    int it = 0;
    while (norm > opt.tolerance && it < opt.max_iterations) {
        ++it;
        const CVec ibus = ybus * v;
        CVec vnorm(nb);
        for (Eigen::Index i = 0; i < nb; ++i) vnorm(i) = v(i) / std::abs(v(i));
        const CMat ds_dvm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate() +
                            CMat(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();
        const CMat ds_dva = Complex(0, 1) * v.asDiagonal() *
                            (CMat(ibus.asDiagonal()) - ybus * v.asDiagonal()).conjugate();
        Mat jac = Mat::Zero(np + npq, nx);
        for (Eigen::Index r = 0; r < np; ++r) {
            for (Eigen::Index k = 0; k < npvpq; ++k) jac(r, k) = ds_dva(prow[r], pvpq[k]).real();
            for (Eigen::Index k = 0; k < npq; ++k) {
                jac(r, npvpq + k) = ds_dvm(prow[r], pq[k]).real();
                if (prow[r] == pq[k]) jac(r, npvpq + k) += load_dvm(pq[k], vm(pq[k])).real();
            }
            if (dist) jac(r, nx - 1) = -share(prow[r]);
        }
        for (Eigen::Index r = 0; r < npq; ++r) {
            for (Eigen::Index k = 0; k < npvpq; ++k) jac(np + r, k) = ds_dva(pq[r], pvpq[k]).imag();
            for (Eigen::Index k = 0; k < npq; ++k) jac(np + r, npvpq + k) = ds_dvm(pq[r], pq[k]).imag();
            jac(np + r, npvpq + r) += load_dvm(pq[r], vm(pq[r])).imag();
        }
        const Vec dx = jac.partialPivLu().solve(-f);
        for (Eigen::Index k = 0; k < npvpq; ++k) va(pvpq[k]) += dx(k);
        for (Eigen::Index k = 0; k < npq; ++k) vm(pq[k]) += dx(npvpq + k);
        if (dist) extra += dx(nx - 1);
        v = voltages();
        f = mismatch_vector(bus_injections(ybus, v));
        norm = max_abs(f);
        if (!std::isfinite(norm)) break;
    }
    if (!(norm <= opt.tolerance)) {
        std::ostringstream msg;
        msg << "power flow did not converge after " << it << " iterations (max mismatch " << norm << " pu)";
        throw NumericalError(msg.str());
    }

    sol.vm = vm;
    sol.va = va;
    sol.mismatch = norm;
    sol.iterations = it;
    sol.distributed = extra;
    const CVec s = bus_injections(ybus, v);
    const auto ng = static_cast<Eigen::Index>(c.generators.size());
    sol.gen_p.resize(ng);
    sol.gen_q.resize(ng);
    for (Eigen::Index k = 0; k < ng; ++k) {
        const auto b = c.bus_index(c.generators[k].bus);
        sol.gen_p(k) = s(b).real() + load(b, vm(b)).real();
        sol.gen_q(k) = s(b).imag() + load(b, vm(b)).imag();
    }
    return sol;
}

/// Series and shunt losses implied by a solution (sum of bus injections).
[[nodiscard]] inline double network_losses(const GridCase& c, const PowerFlowSolution& pf) {
    return bus_injections(build_ybus(c), pf.voltages()).real().sum();
}

}  // namespace modalnadir
