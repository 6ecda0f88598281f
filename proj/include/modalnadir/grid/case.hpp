#pragma once

// Grid case data model and the `.case` text format.
//
// The format is line oriented. `#` starts a comment. Sections are introduced
// by `[system]`, `[buses]`, `[branches]`, `[generators]`, `[exciters]` and
// `[governors]`. The `[system]` section holds `key = value` lines; every other
// section holds one record per line written as whitespace separated
// `key=value` pairs. Unknown sections or keys are rejected. See
// docs/case_format.md for the field reference.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "modalnadir/common.hpp"

namespace modalnadir {

enum class BusType { Slack, PV, PQ };

struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double vset = 1.0;  ///< voltage magnitude setpoint (slack / PV), pu
    double pd = 0.0;    ///< constant-power load, pu on system base
    double qd = 0.0;
    double gs = 0.0;  ///< shunt conductance, pu
    double bs = 0.0;  ///< shunt susceptance, pu
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;    ///< total line charging
    double tap = 1.0;  ///< off-nominal ratio on the `from` side
};

/// Two-axis machine constants, pu on system base.
struct MachineParams {
    double ra = 0.0;
    double xd = 0.0;
    double xdp = 0.0;
    double xq = 0.0;
    double xqp = 0.0;
    double td0p = 0.0;
    double tq0p = 0.0;
    double d = 0.0;  ///< speed damping, pu torque per pu speed
};

/// IEEE Type-1 exciter with voltage transducer; saturation is not modeled.
struct ExciterParams {
    double tr = 0.01;
    double ka = 0.0;
    double ta = 0.0;
    double ke = 1.0;
    double te = 0.0;
    double kf = 0.0;
    double tf = 1.0;
    double vrmax = 10.0;
    double vrmin = -10.0;
    bool limits = false;
};

/// IEESGO turbine/governor. `r` is the droop on machine base as read from the
/// file; `r_sys` is the same droop converted to the system base at load time.
struct GovernorParams {
    double r = 0.05;
    double r_sys = 0.05;
    double t1 = 0.2;
    double t2 = 0.0;
    double t3 = 0.1;
    double t4 = 0.05;
    double t5 = 10.0;
    double t6 = 0.5;
    double t7 = 0.05;
    double k2 = 0.7;
    double k3 = 0.0;
    double pmax = 100.0;
    double pmin = 0.0;
    bool limits = false;

    /// Steady-state governor gain on system base; zero for an isochronous-free
    /// (infinite droop) unit.
    [[nodiscard]] double gain() const { return std::isinf(r_sys) ? 0.0 : 1.0 / r_sys; }
};

struct Generator {
    int id = 0;
    int bus = 0;
    double mbase = 100.0;  ///< MVA
    double pg = 0.0;       ///< scheduled output (PV buses), pu on system base
    double h = 0.0;        ///< inertia constant, s on system base
    MachineParams machine;
    ExciterParams exciter;
    GovernorParams governor;
};

/// How loads behave once the dynamic simulation starts. The power flow
/// always treats them as constant power. Mixed keeps P constant and turns Q
/// into a constant susceptance; ConstantCurrent makes P proportional to |V|
/// with the same susceptance Q.
enum class LoadModel { ConstantImpedance, ConstantPower, Mixed, ConstantCurrent };

struct GridCase {
    std::string name = "case";
    std::string provenance;
    double base_mva = 100.0;
    double f_nom = 60.0;
    LoadModel load_model = LoadModel::ConstantImpedance;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;

    [[nodiscard]] std::optional<std::size_t> find_bus(int id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == id) return i;
        return std::nullopt;
    }
    [[nodiscard]] std::size_t bus_index(int id) const {
        auto i = find_bus(id);
        if (!i) throw InputError("unknown bus id " + std::to_string(id));
        return *i;
    }
    [[nodiscard]] std::optional<std::size_t> find_generator(int id) const {
        for (std::size_t i = 0; i < generators.size(); ++i)
            if (generators[i].id == id) return i;
        return std::nullopt;
    }
    [[nodiscard]] std::size_t slack_index() const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].type == BusType::Slack) return i;
        throw InputError("case has no slack bus");
    }
    [[nodiscard]] double total_load() const {
        double s = 0.0;
        for (const auto& b : buses) s += b.pd;
        return s;
    }
    [[nodiscard]] double total_inertia() const {
        double s = 0.0;
        for (const auto& g : generators) s += g.h;
        return s;
    }
};

/// Converts each governor droop from machine base to system base.
inline void convert_droops_to_system_base(GridCase& c) {
    for (auto& g : c.generators) g.governor.r_sys = g.governor.r * c.base_mva / g.mbase;
}

/// Throws InputError naming the first violated invariant.
inline void validate_case(const GridCase& c) {
    auto fail = [&](const std::string& what) { throw InputError("invalid case '" + c.name + "': " + what); };
    if (c.base_mva <= 0) fail("base_mva must be positive");
    if (c.f_nom <= 0) fail("f_nom must be positive");
    if (c.buses.empty()) fail("no buses");
    std::set<int> ids;
    int slack = 0;
    for (const auto& b : c.buses) {
        if (!ids.insert(b.id).second) fail("duplicate bus id " + std::to_string(b.id));
        if (b.type == BusType::Slack) ++slack;
        if (b.type != BusType::PQ && !(b.vset > 0)) fail("bus " + std::to_string(b.id) + " needs vset > 0");
    }
    if (slack != 1) fail("exactly one slack bus required, found " + std::to_string(slack));
    for (const auto& br : c.branches) {
        if (!ids.count(br.from) || !ids.count(br.to))
            fail("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + " references unknown bus");
        if (br.from == br.to) fail("branch connects bus " + std::to_string(br.from) + " to itself");
        if (br.x == 0.0) fail("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + " has X = 0");
        if (!(br.tap > 0)) fail("branch tap ratio must be positive");
    }
    std::set<int> gen_ids, gen_buses;
    for (const auto& g : c.generators) {
        const std::string tag = "generator " + std::to_string(g.id);
        if (!gen_ids.insert(g.id).second) fail("duplicate " + tag);
        if (!ids.count(g.bus)) fail(tag + " references unknown bus " + std::to_string(g.bus));
        if (!gen_buses.insert(g.bus).second) fail("more than one generator at bus " + std::to_string(g.bus));
        if (c.buses[c.bus_index(g.bus)].type == BusType::PQ) fail(tag + " sits on a PQ bus");
        if (!(g.h > 0)) fail(tag + ": H must be positive");
        if (!(g.governor.r > 0)) fail(tag + ": droop R_D must be positive");
        if (!(g.mbase > 0)) fail(tag + ": mbase must be positive");
        const auto& m = g.machine;
        if (!(m.xdp > 0 && m.xqp > 0 && m.xd >= m.xdp && m.xq >= m.xqp)) fail(tag + ": inconsistent reactances");
        if (!(m.td0p > 0 && m.tq0p > 0)) fail(tag + ": open-circuit time constants must be positive");
        const auto& e = g.exciter;
        if (!(e.tr > 0 && e.ta > 0 && e.te > 0 && e.tf > 0 && e.ka > 0)) fail(tag + ": exciter time constants/gain must be positive");
        const auto& gv = g.governor;
        if (!(gv.t1 > 0 && gv.t3 > 0 && gv.t4 > 0 && gv.t5 > 0 && gv.t6 > 0 && gv.t7 > 0))
            fail(tag + ": governor lag time constants must be positive");
        if (gv.t2 < 0) fail(tag + ": governor lead T2 must be non-negative");
    }
    for (const auto& b : c.buses) {
        if (b.type != BusType::PQ && !gen_buses.count(b.id))
            fail("bus " + std::to_string(b.id) + " is slack/PV but has no generator");
    }
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

class FieldReader {
public:
    FieldReader(std::map<std::string, std::string> kv, int line) : kv_(std::move(kv)), line_(line) {}

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        auto it = kv_.find(key);
        if (it == kv_.end()) {
            if (fallback) return *fallback;
            throw InputError("line " + std::to_string(line_) + ": missing field '" + key + "'");
        }
        used_.insert(key);
        return parse_double(it->second, key);
    }
    int integer(const std::string& key) {
        const double v = number(key);
        if (v != std::floor(v)) throw InputError("line " + std::to_string(line_) + ": field '" + key + "' must be an integer");
        return static_cast<int>(v);
    }
    bool flag(const std::string& key, bool fallback) {
        if (!kv_.count(key)) return fallback;
        return number(key) != 0.0;
    }
    std::string text(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw InputError("line " + std::to_string(line_) + ": missing field '" + key + "'");
        used_.insert(key);
        return it->second;
    }
    void reject_unknown() const {
        for (const auto& [k, v] : kv_)
            if (!used_.count(k)) throw InputError("line " + std::to_string(line_) + ": unknown field '" + k + "'");
    }

private:
    double parse_double(const std::string& s, const std::string& key) const {
        if (s == "inf") return std::numeric_limits<double>::infinity();
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw InputError("line " + std::to_string(line_) + ": field '" + key + "' is not a number: '" + s + "'");
        return v;
    }

    std::map<std::string, std::string> kv_;
    std::set<std::string> used_;
    int line_;
};

inline std::map<std::string, std::string> split_record(const std::string& line, int lineno) {
    std::map<std::string, std::string> kv;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
            throw InputError("line " + std::to_string(lineno) + ": expected key=value, got '" + tok + "'");
        const auto key = tok.substr(0, eq);
        if (!kv.emplace(key, tok.substr(eq + 1)).second)
            throw InputError("line " + std::to_string(lineno) + ": repeated field '" + key + "'");
    }
    return kv;
}

inline BusType parse_bus_type(const std::string& s, int lineno) {
    if (s == "slack") return BusType::Slack;
    if (s == "pv") return BusType::PV;
    if (s == "pq") return BusType::PQ;
    throw InputError("line " + std::to_string(lineno) + ": bus type must be slack, pv or pq, got '" + s + "'");
}

}  // namespace detail

/// Parses case text. Field-level problems raise InputError with the line
/// number; the result is validated and droops are converted to system base.
inline GridCase parse_case(std::istream& in) {
    GridCase c;
    std::string section;
    std::map<int, ExciterParams> exciters;
    std::map<int, GovernorParams> governors;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw InputError("line " + std::to_string(lineno) + ": malformed section header");
            section = line.substr(1, line.size() - 2);
            static const std::set<std::string> known{"system", "buses", "branches", "generators", "exciters", "governors"};
            if (!known.count(section)) throw InputError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            continue;
        }
        if (section.empty()) throw InputError("line " + std::to_string(lineno) + ": data before first section");
        if (section == "system") {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw InputError("line " + std::to_string(lineno) + ": expected key = value");
            const auto key = detail::trim(line.substr(0, eq));
            const auto value = detail::trim(line.substr(eq + 1));
            detail::FieldReader r({{key, value}}, lineno);
            if (key == "name") c.name = r.text(key);
            else if (key == "provenance") c.provenance = r.text(key);
            else if (key == "base_mva") c.base_mva = r.number(key);
            else if (key == "f_nom") c.f_nom = r.number(key);
            else if (key == "load_model") {
                const auto m = r.text(key);
                if (m == "impedance") c.load_model = LoadModel::ConstantImpedance;
                else if (m == "power") c.load_model = LoadModel::ConstantPower;
                else if (m == "mixed") c.load_model = LoadModel::Mixed;
                else if (m == "current") c.load_model = LoadModel::ConstantCurrent;
                else throw InputError("line " + std::to_string(lineno) + ": load_model must be impedance, power, mixed or current");
            }
            r.reject_unknown();
            continue;
        }
        detail::FieldReader r(detail::split_record(line, lineno), lineno);
        if (section == "buses") {
            Bus b;
            b.id = r.integer("id");
            b.type = detail::parse_bus_type(r.text("type"), lineno);
            b.vset = r.number("vset", 1.0);
            b.pd = r.number("pd", 0.0);
            b.qd = r.number("qd", 0.0);
            b.gs = r.number("gs", 0.0);
            b.bs = r.number("bs", 0.0);
            c.buses.push_back(b);
        } else if (section == "branches") {
            Branch br;
            br.from = r.integer("from");
            br.to = r.integer("to");
            br.r = r.number("r", 0.0);
            br.x = r.number("x");
            br.b = r.number("b", 0.0);
            br.tap = r.number("tap", 1.0);
            c.branches.push_back(br);
        } else if (section == "generators") {
            Generator g;
            g.id = r.integer("id");
            g.bus = r.integer("bus");
            g.mbase = r.number("mbase", c.base_mva);
            g.pg = r.number("pg", 0.0);
            g.h = r.number("h");
            auto& m = g.machine;
            m.ra = r.number("ra", 0.0);
            m.xd = r.number("xd");
            m.xdp = r.number("xdp");
            m.xq = r.number("xq");
            m.xqp = r.number("xqp");
            m.td0p = r.number("td0p");
            m.tq0p = r.number("tq0p");
            m.d = r.number("d", 0.0);
            c.generators.push_back(g);
        } else if (section == "exciters") {
            const int gen = r.integer("gen");
            ExciterParams e;
            e.tr = r.number("tr", e.tr);
            e.ka = r.number("ka");
            e.ta = r.number("ta");
            e.ke = r.number("ke");
            e.te = r.number("te");
            e.kf = r.number("kf");
            e.tf = r.number("tf");
            e.vrmax = r.number("vrmax", e.vrmax);
            e.vrmin = r.number("vrmin", e.vrmin);
            e.limits = r.flag("limits", false);
            if (!exciters.emplace(gen, e).second) throw InputError("line " + std::to_string(lineno) + ": second exciter for generator " + std::to_string(gen));
        } else if (section == "governors") {
            const int gen = r.integer("gen");
            GovernorParams gv;
            gv.r = r.number("r");
            gv.t1 = r.number("t1");
            gv.t2 = r.number("t2", 0.0);
            gv.t3 = r.number("t3");
            gv.t4 = r.number("t4");
            gv.t5 = r.number("t5");
            gv.t6 = r.number("t6");
            gv.t7 = r.number("t7");
            gv.k2 = r.number("k2");
            gv.k3 = r.number("k3", 0.0);
            gv.pmax = r.number("pmax", gv.pmax);
            gv.pmin = r.number("pmin", gv.pmin);
            gv.limits = r.flag("limits", false);
            if (!governors.emplace(gen, gv).second) throw InputError("line " + std::to_string(lineno) + ": second governor for generator " + std::to_string(gen));
        }
        r.reject_unknown();
    }
    for (auto& g : c.generators) {
        auto e = exciters.find(g.id);
        auto gv = governors.find(g.id);
        if (e == exciters.end()) throw InputError("invalid case '" + c.name + "': generator " + std::to_string(g.id) + " has no exciter record");
        if (gv == governors.end()) throw InputError("invalid case '" + c.name + "': generator " + std::to_string(g.id) + " has no governor record");
        g.exciter = e->second;
        g.governor = gv->second;
        exciters.erase(e);
        governors.erase(gv);
    }
    if (!exciters.empty()) throw InputError("exciter record for unknown generator " + std::to_string(exciters.begin()->first));
    if (!governors.empty()) throw InputError("governor record for unknown generator " + std::to_string(governors.begin()->first));
    validate_case(c);
    convert_droops_to_system_base(c);
    return c;
}

inline GridCase parse_case_string(const std::string& text) {
    std::istringstream in(text);
    return parse_case(in);
}

inline GridCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open case file '" + path + "'");
    try {
        return parse_case(in);
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

/// Multiplies every inertia constant by `k` (the halved-inertia study uses 0.5).
[[nodiscard]] inline GridCase scale_inertia(GridCase c, double k) {
    if (!(k > 0)) throw InputError("inertia scale must be positive");
    for (auto& g : c.generators) g.h *= k;
    return c;
}

}  // namespace modalnadir
