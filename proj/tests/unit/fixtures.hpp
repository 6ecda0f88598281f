#pragma once

#include <string>

#include "modalnadir/study.hpp"

namespace fx {

inline std::string data_path(const std::string& name) { return std::string(MODALNADIR_DATA_DIR) + "/" + name; }

inline const modalnadir::GridCase& ieee39() {
    static const modalnadir::GridCase c = modalnadir::load_case(data_path("ieee39.case"));
    return c;
}

inline const char* kExciter = "ka=20 ta=0.2 ke=1.0 te=0.314 kf=0.063 tf=0.35 tr=0.02";
inline const char* kGovernor = "t1=0.3 t3=0.03 t4=0.07 t5=10 t6=0.15 t7=0.05 k2=0.53";

/// One machine behind a line to a slack machine with very large inertia.
inline std::string smib_text(double load = 0.0, double pg = 0.0, const std::string& droop = "0.05") {
    std::string s = "[system]\nname = smib\nbase_mva = 100\nf_nom = 60\nload_model = power\n[buses]\n";
    s += "id=1 type=slack vset=1.0\n";
    s += "id=2 type=pv vset=1.0";
    if (load != 0.0) s += " pd=" + std::to_string(load);
    s += "\n[branches]\nfrom=1 to=2 r=0 x=0.1\n[generators]\n";
    s += "id=1 bus=1 h=500 xd=0.02 xdp=0.006 xq=0.019 xqp=0.008 td0p=7 tq0p=0.7\n";
    s += "id=2 bus=2 pg=" + std::to_string(pg) + " h=4 xd=1.2 xdp=0.25 xq=1.1 xqp=0.4 td0p=6 tq0p=0.8\n";
    s += "[exciters]\ngen=1 " + std::string(kExciter) + "\ngen=2 " + kExciter + "\n";
    s += "[governors]\ngen=1 r=" + droop + " " + kGovernor + "\ngen=2 r=" + droop + " " + kGovernor + "\n";
    return s;
}

/// Three machines on a triangle with a load at each bus.
inline std::string three_machine_text(const std::string& load_model = "mixed") {
    std::string s = "[system]\nname = tri\nbase_mva = 100\nf_nom = 60\nload_model = " + load_model + "\n[buses]\n";
    s += "id=1 type=slack vset=1.04 pd=0.5 qd=0.1\n";
    s += "id=2 type=pv vset=1.02 pd=1.0 qd=0.3\n";
    s += "id=3 type=pv vset=1.01 pd=1.2 qd=0.35\n";
    s += "id=4 type=pq pd=0.9 qd=0.3\n";
    s += "[branches]\nfrom=1 to=2 r=0.01 x=0.08 b=0.1\nfrom=2 to=3 r=0.012 x=0.1 b=0.1\nfrom=1 to=4 r=0.01 x=0.09 b=0.08\n";
    s += "from=3 to=4 r=0.009 x=0.07 b=0.08 tap=1.02\n";
    s += "[generators]\n";
    s += "id=1 bus=1 mbase=300 h=6.5 xd=0.9 xdp=0.2 xq=0.85 xqp=0.3 td0p=8 tq0p=0.9\n";
    s += "id=2 bus=2 mbase=200 pg=1.3 h=4.2 xd=1.1 xdp=0.25 xq=1.0 xqp=0.35 td0p=6 tq0p=0.6\n";
    s += "id=3 bus=3 mbase=200 pg=1.0 h=3.3 xd=1.2 xdp=0.3 xq=1.1 xqp=0.4 td0p=5.5 tq0p=0.5\n";
    s += "[exciters]\n";
    for (int g = 1; g <= 3; ++g) s += "gen=" + std::to_string(g) + " " + kExciter + "\n";
    s += "[governors]\n";
    s += "gen=1 r=0.05 " + std::string(kGovernor) + "\n";
    s += "gen=2 r=0.06 " + std::string(kGovernor) + "\n";
    s += "gen=3 r=0.04 " + std::string(kGovernor) + "\n";
    return s;
}

inline modalnadir::GridCase three_machine(const std::string& load_model = "mixed") {
    return modalnadir::parse_case_string(three_machine_text(load_model));
}

inline modalnadir::StudyConfig case1_config() {
    modalnadir::StudyConfig c;
    c.scenario = modalnadir::Scenario::load_step(15, 0.2);
    return c;
}

inline modalnadir::StudyConfig case2_config() {
    modalnadir::StudyConfig c;
    c.scenario = modalnadir::Scenario::gen_trip(1);
    return c;
}

}  // namespace fx
