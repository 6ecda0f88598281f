#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modalnadir/grid/case.hpp"

namespace modalnadir {

/// Kind of each differential state; used for participation-factor screening.
enum class StateKind { Angle, Speed, Flux, Exciter, Governor };

/// Indices of one machine's differential states. Governor states are the
/// IEESGO chain y1..y5 and the mechanical torque Tm.
struct MachineBlock {
    int gen_id = 0;
    std::optional<Eigen::Index> delta;  ///< absent on the angle-reference machine
    Eigen::Index omega = 0, eqp = 0, edp = 0;
    Eigen::Index vm = 0, efd = 0, vr = 0, rf = 0;
    Eigen::Index y1 = 0, y2 = 0, y3 = 0, y4 = 0, y5 = 0, tm = 0;
    Eigen::Index id = 0, iq = 0;  ///< algebraic stator currents
};

/// Canonical ordering of the differential (x) and algebraic (y) variables.
///
/// Rotor angles are measured relative to the reference machine, whose own
/// angle is a constant and not a state. Every other machine contributes
/// 14 states, so the 10-machine system has 10 * 14 - 1 = 139 states.
/// Algebraic variables are the rectangular bus voltages followed by the
/// d/q stator currents of each machine.
class StateLayout {
public:
    StateLayout() = default;

    /// `reference_gen` selects the angle-reference machine; by default the
    /// generator at the slack bus.
    explicit StateLayout(const GridCase& c, std::optional<int> reference_gen = std::nullopt) {
        if (c.generators.empty()) throw InputError("at least one in-service generator is required");
        int ref = 0;
        if (reference_gen) {
            if (!c.find_generator(*reference_gen)) throw InputError("reference generator not in case");
            ref = *reference_gen;
        } else {
            const int slack_bus = c.buses[c.slack_index()].id;
            ref = c.generators.front().id;
            for (const auto& g : c.generators)
                if (g.bus == slack_bus) ref = g.id;
        }
        Eigen::Index nx = 0;
        auto add_x = [&](const std::string& name, StateKind kind) {
            x_names_.push_back(name);
            x_kinds_.push_back(kind);
            return nx++;
        };
        for (std::size_t k = 0; k < c.generators.size(); ++k) {
            const auto& g = c.generators[k];
            const std::string p = "G" + std::to_string(g.id) + ".";
            MachineBlock b;
            b.gen_id = g.id;
            if (g.id == ref) reference_ = k;
            else b.delta = add_x(p + "delta", StateKind::Angle);
            b.omega = add_x(p + "omega", StateKind::Speed);
            b.eqp = add_x(p + "eqp", StateKind::Flux);
            b.edp = add_x(p + "edp", StateKind::Flux);
            b.vm = add_x(p + "vm", StateKind::Exciter);
            b.efd = add_x(p + "efd", StateKind::Exciter);
            b.vr = add_x(p + "vr", StateKind::Exciter);
            b.rf = add_x(p + "rf", StateKind::Exciter);
            b.y1 = add_x(p + "y1", StateKind::Governor);
            b.y2 = add_x(p + "y2", StateKind::Governor);
            b.y3 = add_x(p + "y3", StateKind::Governor);
            b.y4 = add_x(p + "y4", StateKind::Governor);
            b.y5 = add_x(p + "y5", StateKind::Governor);
            b.tm = add_x(p + "tm", StateKind::Governor);
            machines_.push_back(b);
        }
        for (const auto& bus : c.buses) {
            y_names_.push_back("B" + std::to_string(bus.id) + ".vre");
            y_names_.push_back("B" + std::to_string(bus.id) + ".vim");
        }
        Eigen::Index ny = static_cast<Eigen::Index>(y_names_.size());
        for (auto& b : machines_) {
            const std::string p = "G" + std::to_string(b.gen_id) + ".";
            b.id = ny++;
            y_names_.push_back(p + "id");
            b.iq = ny++;
            y_names_.push_back(p + "iq");
        }
        nbus_ = static_cast<Eigen::Index>(c.buses.size());
    }

    [[nodiscard]] Eigen::Index n() const { return static_cast<Eigen::Index>(x_names_.size()); }
    [[nodiscard]] Eigen::Index l() const { return static_cast<Eigen::Index>(y_names_.size()); }
    [[nodiscard]] Eigen::Index n_bus() const { return nbus_; }
    [[nodiscard]] const std::vector<MachineBlock>& machines() const { return machines_; }
    [[nodiscard]] std::size_t reference() const { return reference_; }
    [[nodiscard]] const std::vector<std::string>& x_names() const { return x_names_; }
    [[nodiscard]] const std::vector<std::string>& y_names() const { return y_names_; }
    [[nodiscard]] StateKind kind(Eigen::Index i) const { return x_kinds_[static_cast<std::size_t>(i)]; }

    [[nodiscard]] static Eigen::Index vre(Eigen::Index bus) { return 2 * bus; }
    [[nodiscard]] static Eigen::Index vim(Eigen::Index bus) { return 2 * bus + 1; }

    /// The index set Z of rotor-speed states, in generator order.
    [[nodiscard]] std::vector<Eigen::Index> speed_indices() const {
        std::vector<Eigen::Index> z;
        for (const auto& b : machines_) z.push_back(b.omega);
        return z;
    }

    [[nodiscard]] std::optional<std::size_t> machine_of(int gen_id) const {
        for (std::size_t k = 0; k < machines_.size(); ++k)
            if (machines_[k].gen_id == gen_id) return k;
        return std::nullopt;
    }

private:
    std::vector<MachineBlock> machines_;
    std::vector<std::string> x_names_;
    std::vector<StateKind> x_kinds_;
    std::vector<std::string> y_names_;
    std::size_t reference_ = 0;
    Eigen::Index nbus_ = 0;
};

/// A point of the DAE: differential states, algebraic variables and time.
struct SystemState {
    Vec x;
    Vec y;
    double t = 0.0;
};

}  // namespace modalnadir
