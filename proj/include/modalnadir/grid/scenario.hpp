#pragma once

#include <charconv>
#include <cmath>
#include <sstream>
#include <string>

#include "modalnadir/grid/case.hpp"

namespace modalnadir {

/// A disturbance applied at t = 0+.
struct Scenario {
    enum class Kind { None, LoadStep, GenTrip };

    Kind kind = Kind::None;
    int target = 0;          ///< bus id (load step) or generator id (trip)
    double fraction = 0.0;   ///< relative load change for a load step (0.2 = +20 %)

    static Scenario none() { return {}; }
    static Scenario load_step(int bus, double fraction) { return {Kind::LoadStep, bus, fraction}; }
    static Scenario gen_trip(int gen) { return {Kind::GenTrip, gen, 0.0}; }

    /// `none`, `load-step:BUS:PCT` or `gen-trip:GEN`.
    static Scenario parse(const std::string& text) {
        auto bad = [&] { return InputError("bad scenario '" + text + "' (expected load-step:BUS:PCT, gen-trip:GEN or none)"); };
        auto to_number = [&](const std::string& s) {
            double v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size()) throw bad();
            return v;
        };
        auto to_int = [&](const std::string& s) {
            const double v = to_number(s);
            if (v != std::floor(v)) throw bad();
            return static_cast<int>(v);
        };
        if (text == "none") return none();
        std::istringstream in(text);
        std::string head, a, b;
        std::getline(in, head, ':');
        std::getline(in, a, ':');
        std::getline(in, b, ':');
        std::string rest;
        if (std::getline(in, rest)) throw bad();
        if (head == "load-step" && !a.empty() && !b.empty()) return load_step(to_int(a), to_number(b) / 100.0);
        if (head == "gen-trip" && !a.empty() && b.empty()) return gen_trip(to_int(a));
        throw bad();
    }

    [[nodiscard]] std::string id() const {
        std::ostringstream out;
        switch (kind) {
            case Kind::None: return "none";
            case Kind::LoadStep: out << "load-step:" << target << ':' << fraction * 100.0; break;
            case Kind::GenTrip: out << "gen-trip:" << target; break;
        }
        return out.str();
    }
};

/// Returns the post-disturbance static case. The input is not modified.
[[nodiscard]] inline GridCase apply_scenario(GridCase c, const Scenario& s) {
    switch (s.kind) {
        case Scenario::Kind::None: break;
        case Scenario::Kind::LoadStep: {
            auto& bus = c.buses[c.bus_index(s.target)];
            bus.pd *= 1.0 + s.fraction;
            bus.qd *= 1.0 + s.fraction;
            break;
        }
        case Scenario::Kind::GenTrip: {
            const auto gi = c.find_generator(s.target);
            if (!gi) throw InputError("unknown generator id " + std::to_string(s.target));
            if (c.generators.size() == 1) throw InputError("cannot trip the only generator");
            const auto bi = c.bus_index(c.generators[*gi].bus);
            const bool was_slack = c.buses[bi].type == BusType::Slack;
            c.buses[bi].type = BusType::PQ;
            c.generators.erase(c.generators.begin() + static_cast<std::ptrdiff_t>(*gi));
            if (was_slack) c.buses[c.bus_index(c.generators.front().bus)].type = BusType::Slack;
            break;
        }
    }
    return c;
}

/// Scales every load and every scheduled generation by `k`.
[[nodiscard]] inline GridCase scale_operating_point(GridCase c, double k) {
    for (auto& b : c.buses) {
        b.pd *= k;
        b.qd *= k;
    }
    for (auto& g : c.generators) g.pg *= k;
    return c;
}

}  // namespace modalnadir
