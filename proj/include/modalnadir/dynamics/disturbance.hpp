#pragma once

#include <map>

#include "modalnadir/linear/linearizer.hpp"

namespace modalnadir {

struct DisturbedSystem {
    DynamicModel model;
    SystemState state;  ///< pre-fault x projected onto the post-fault layout; y not yet re-solved
};

/// Applies a scenario to a running model at t = 0+.
///
/// A load step scales the bus's load. A generator trip
/// rebuilds case and layout without the unit and carries every remaining
/// state over by name; if the angle-reference machine is tripped, the first
/// remaining machine becomes the reference and keeps its current angle.
inline DisturbedSystem apply_disturbance(const DynamicModel& pre, const SystemState& s, const Scenario& sc) {
    switch (sc.kind) {
        case Scenario::Kind::None: return {pre, s};
        case Scenario::Kind::LoadStep: {
            DynamicModel m = pre;
            m.scale_load(sc.target, 1.0 + sc.fraction);
            return {std::move(m), s};
        }
        case Scenario::Kind::GenTrip: break;
    }
    const auto& old_layout = pre.layout();
    const auto trip_k = old_layout.machine_of(sc.target);
    if (!trip_k) throw InputError("unknown generator id " + std::to_string(sc.target));
    const GridCase post_case = apply_scenario(pre.grid(), sc);

    const auto& ms = old_layout.machines();
    int ref_id = ms[old_layout.reference()].gen_id;
    double delta_ref = pre.setpoints().delta_ref;
    if (ref_id == sc.target) {
        const auto& next = post_case.generators.front();
        ref_id = next.id;
        delta_ref = pre.angle(s.x, ms[*old_layout.machine_of(ref_id)]);
    }
    StateLayout layout(post_case, ref_id);

    Setpoints sp;
    const auto ng = static_cast<Eigen::Index>(post_case.generators.size());
    sp.vref.resize(ng);
    sp.pc.resize(ng);
    sp.load_y = pre.setpoints().load_y;
    sp.load_s = pre.setpoints().load_s;
    sp.load_v0 = pre.setpoints().load_v0;
    sp.delta_ref = delta_ref;
    for (Eigen::Index k = 0; k < ng; ++k) {
        const auto old_k = static_cast<Eigen::Index>(*old_layout.machine_of(post_case.generators[static_cast<std::size_t>(k)].id));
        sp.vref(k) = pre.setpoints().vref(old_k);
        sp.pc(k) = pre.setpoints().pc(old_k);
    }

    std::map<std::string, Eigen::Index> old_x, old_y;
    for (Eigen::Index i = 0; i < old_layout.n(); ++i) old_x[old_layout.x_names()[static_cast<std::size_t>(i)]] = i;
    for (Eigen::Index i = 0; i < old_layout.l(); ++i) old_y[old_layout.y_names()[static_cast<std::size_t>(i)]] = i;

    SystemState out;
    out.t = s.t;
    out.x.resize(layout.n());
    out.y.resize(layout.l());
    for (Eigen::Index i = 0; i < layout.n(); ++i) out.x(i) = s.x(old_x.at(layout.x_names()[static_cast<std::size_t>(i)]));
    for (Eigen::Index i = 0; i < layout.l(); ++i) out.y(i) = s.y(old_y.at(layout.y_names()[static_cast<std::size_t>(i)]));
    return {DynamicModel(post_case, std::move(layout), std::move(sp)), std::move(out)};
}

}  // namespace modalnadir
