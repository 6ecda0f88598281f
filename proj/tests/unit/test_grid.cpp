#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace modalnadir;

namespace {

// Branch-matrix formulation: Y = Cf' (Yff Cf + Yft Ct) + Ct' (Ytf Cf + Ytt Ct) + Ysh.
CMat ybus_oracle(const GridCase& c) {
    const auto nb = static_cast<Eigen::Index>(c.buses.size());
    const auto nl = static_cast<Eigen::Index>(c.branches.size());
    CMat cf = CMat::Zero(nl, nb), ct = CMat::Zero(nl, nb);
    CVec yff(nl), yft(nl), ytf(nl), ytt(nl);
    for (Eigen::Index k = 0; k < nl; ++k) {
        const auto& br = c.branches[static_cast<std::size_t>(k)];
        cf(k, static_cast<Eigen::Index>(c.bus_index(br.from))) = 1.0;
        ct(k, static_cast<Eigen::Index>(c.bus_index(br.to))) = 1.0;
        const Complex ys = Complex(1.0, 0.0) / Complex(br.r, br.x);
        const Complex half(0.0, br.b / 2);
        ytt(k) = ys + half;
        yff(k) = ytt(k) / (br.tap * br.tap);
        yft(k) = -ys / br.tap;
        ytf(k) = -ys / br.tap;
    }
    CVec ysh(nb);
    for (Eigen::Index i = 0; i < nb; ++i) ysh(i) = Complex(c.buses[i].gs, c.buses[i].bs);
    const CMat yf = yff.asDiagonal() * cf + yft.asDiagonal() * ct;
    const CMat yt = ytf.asDiagonal() * cf + ytt.asDiagonal() * ct;
    CMat y = cf.transpose() * yf + ct.transpose() * yt;
    y.diagonal() += ysh;
    return y;
}

GridCase random_network(std::mt19937& rng, int nb) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GridCase c;
    for (int i = 1; i <= nb; ++i) {
        Bus b;
        b.id = 10 * i;
        b.type = i == 1 ? BusType::Slack : BusType::PQ;
        b.gs = u(rng) < 0.3 ? 0.05 * u(rng) : 0.0;
        b.bs = u(rng) < 0.3 ? 0.2 * u(rng) - 0.1 : 0.0;
        c.buses.push_back(b);
    }
    // spanning chain plus random extra branches
    for (int i = 1; i < nb; ++i) c.branches.push_back({10 * i, 10 * (i + 1), 0.02 * u(rng), 0.05 + 0.2 * u(rng), 0.1 * u(rng), 1.0});
    for (int k = 0; k < nb; ++k) {
        const int a = 1 + static_cast<int>(u(rng) * nb) % nb, b = 1 + static_cast<int>(u(rng) * nb) % nb;
        if (a == b) continue;
        c.branches.push_back({10 * a, 10 * b, 0.01 * u(rng), 0.03 + 0.3 * u(rng), 0.2 * u(rng), 0.95 + 0.1 * u(rng)});
    }
    return c;
}

}  // namespace

TEST(CaseFile, Loads39BusFixture) {
    const auto& c = fx::ieee39();
    EXPECT_EQ(c.buses.size(), 39u);
    EXPECT_EQ(c.generators.size(), 10u);
    EXPECT_EQ(c.branches.size(), 46u);
    EXPECT_EQ(c.load_model, LoadModel::Mixed);
    EXPECT_FALSE(c.provenance.empty());
}

TEST(CaseFile, SingleBusWithSlackGeneratorAndNoBranches) {
    std::string s = "[system]\nname = one\n[buses]\nid=1 type=slack vset=1.0 pd=0.5\n[branches]\n[generators]\n";
    s += "id=1 bus=1 pg=0.5 h=5 xd=1 xdp=0.3 xq=0.9 xqp=0.4 td0p=6 tq0p=0.5\n";
    s += "[exciters]\ngen=1 " + std::string(fx::kExciter) + "\n[governors]\ngen=1 r=0.05 " + fx::kGovernor + "\n";
    const GridCase c = parse_case_string(s);
    EXPECT_EQ(c.buses.size(), 1u);
    EXPECT_TRUE(c.branches.empty());
    EXPECT_EQ(c.generators.size(), 1u);
}

TEST(CaseFile, DuplicateBusIdIsRejected) {
    const std::string s = "[system]\nname = dup\n[buses]\nid=1 type=slack vset=1\nid=1 type=pq\n";
    try {
        (void)parse_case_string(s);
        FAIL() << "expected an InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("duplicate bus id 1"), std::string::npos) << e.what();
    }
}

TEST(CaseFile, UnknownFieldNamesLineAndField) {
    const std::string s = "[system]\nname = x\n[buses]\nid=1 type=slack vset=1 colour=blue\n";
    try {
        (void)parse_case_string(s);
        FAIL() << "expected an InputError";
    } catch (const InputError& e) {
        const std::string m = e.what();
        EXPECT_NE(m.find("line 4"), std::string::npos) << m;
        EXPECT_NE(m.find("colour"), std::string::npos) << m;
    }
}

TEST(CaseFile, LoadModelKeys) {
    for (auto [key, model] : {std::pair{"impedance", LoadModel::ConstantImpedance}, std::pair{"power", LoadModel::ConstantPower},
                              std::pair{"mixed", LoadModel::Mixed}, std::pair{"current", LoadModel::ConstantCurrent}}) {
        std::string s = fx::three_machine_text(key);
        EXPECT_EQ(parse_case_string(s).load_model, model) << key;
    }
    EXPECT_THROW((void)parse_case_string(fx::three_machine_text("zip")), InputError);
}

TEST(CaseFile, InvariantViolations) {
    auto with = [](const std::string& from, const std::string& to) {
        std::string s = fx::three_machine_text();
        s.replace(s.find(from), from.size(), to);
        return s;
    };
    EXPECT_THROW((void)parse_case_string(with("h=4.2", "h=0")), InputError);
    EXPECT_THROW((void)parse_case_string(with("gen=2 r=0.06", "gen=2 r=-0.06")), InputError);
    EXPECT_THROW((void)parse_case_string(with("x=0.08", "x=0")), InputError);
    EXPECT_THROW((void)parse_case_string(with("id=2 type=pv", "id=2 type=slack")), InputError);
    EXPECT_THROW((void)parse_case_string(with("id=3 bus=3", "id=3 bus=9")), InputError);
    EXPECT_THROW(load_case("/nonexistent/case.file"), InputError);
}

TEST(CaseFile, DroopsConvertedToSystemBase) {
    const GridCase c = fx::three_machine();
    EXPECT_DOUBLE_EQ(c.generators[0].governor.r_sys, 0.05 * 100.0 / 300.0);
    EXPECT_DOUBLE_EQ(c.generators[2].governor.r_sys, 0.04 * 100.0 / 200.0);
}

TEST(Ybus, SingleLineAnalytic) {
    GridCase c;
    c.buses = {{1, BusType::Slack, 1.0}, {2, BusType::PQ}};
    c.branches = {{1, 2, 0.0, 0.1, 0.0, 1.0}};
    const CMat y = build_ybus(c);
    EXPECT_NEAR(std::abs(y(0, 1) - Complex(0, 10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y(1, 0) - Complex(0, 10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y(0, 0) - Complex(0, -10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y(1, 1) - Complex(0, -10)), 0.0, 1e-12);
}

TEST(Ybus, NoBranchesGivesShuntDiagonal) {
    GridCase c;
    c.buses = {{1, BusType::Slack, 1.0, 0, 0, 0.1, 0.3}, {2, BusType::PQ, 1.0, 0, 0, 0.0, -0.2}};
    const CMat y = build_ybus(c);
    EXPECT_EQ(y(0, 1), Complex(0.0));
    EXPECT_EQ(y(0, 0), Complex(0.1, 0.3));
    EXPECT_EQ(y(1, 1), Complex(0.0, -0.2));
}

TEST(Ybus, RowSumsEqualShuntsWithUnityTaps) {
    GridCase c = fx::three_machine();
    for (auto& br : c.branches) br.tap = 1.0;
    const CMat y = build_ybus(c);
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        Complex shunt(c.buses[i].gs, c.buses[i].bs);
        for (const auto& br : c.branches)
            if (br.from == c.buses[i].id || br.to == c.buses[i].id) shunt += Complex(0, br.b / 2);
        EXPECT_NEAR(std::abs(y.row(static_cast<Eigen::Index>(i)).sum() - shunt), 0.0, 1e-10);
    }
}

TEST(Ybus, MatchesBranchMatrixOracleOnRandomNetworks) {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const GridCase c = random_network(rng, 2 + trial % 5);
        EXPECT_LT((build_ybus(c) - ybus_oracle(c)).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
    }
}

TEST(Ybus, FixtureSparsityMatchesBranchList) {
    const auto& c = fx::ieee39();
    const CMat y = build_ybus(c);
    EXPECT_LT((y - ybus_oracle(c)).cwiseAbs().maxCoeff(), 1e-9);
    std::set<std::pair<std::size_t, std::size_t>> linked;
    for (const auto& br : c.branches) {
        linked.insert({c.bus_index(br.from), c.bus_index(br.to)});
        linked.insert({c.bus_index(br.to), c.bus_index(br.from)});
    }
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < y.cols(); ++j)
            if (i != j)
                EXPECT_EQ(y(i, j) != Complex(0.0), linked.count({static_cast<std::size_t>(i), static_cast<std::size_t>(j)}) == 1);
}

TEST(PowerFlow, TwoBusNoLoadIsFlat) {
    const GridCase c = parse_case_string(fx::smib_text());
    const auto pf = solve_power_flow(c);
    EXPECT_NEAR(pf.va.cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR((pf.vm.array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(PowerFlow, FixtureConvergesAndBalances) {
    const auto& c = fx::ieee39();
    const auto pf = solve_power_flow(c);
    EXPECT_LT(pf.mismatch, 1e-8);
    // generation = load + losses, each summed directly
    const double losses = network_losses(c, pf);
    EXPECT_NEAR(pf.gen_p.sum() - c.total_load() - losses, 0.0, 1e-8);
    EXPECT_GT(losses, 0.0);
    for (std::size_t k = 0; k < c.generators.size(); ++k) {
        const auto b = c.bus_index(c.generators[k].bus);
        EXPECT_NEAR(pf.vm(static_cast<Eigen::Index>(b)), c.buses[b].vset, 1e-12);
        if (c.buses[b].type == BusType::PV) EXPECT_NEAR(pf.gen_p(static_cast<Eigen::Index>(k)), c.generators[k].pg, 1e-8);
    }
}

TEST(PowerFlow, InfeasibleLoadFailsWithDiagnostic) {
    GridCase c = fx::three_machine();
    c.buses[3].pd = 60.0;
    try {
        (void)solve_power_flow(c);
        FAIL() << "expected non-convergence";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("mismatch"), std::string::npos) << e.what();
    }
}

TEST(PowerFlow, DistributedSlackSharesTheImbalance) {
    GridCase c = fx::three_machine();
    const auto base = solve_power_flow(c);
    for (std::size_t k = 0; k < c.generators.size(); ++k) c.generators[k].pg = base.gen_p(static_cast<Eigen::Index>(k));
    c.buses[3].pd += 0.3;
    PowerFlowOptions opt;
    opt.participation = Vec::Constant(3, 1.0);
    opt.participation.value()(2) = 2.0;
    const auto pf = solve_power_flow(c, opt);
    const Vec dp = pf.gen_p - base.gen_p;
    EXPECT_NEAR(dp(0), pf.distributed * 0.25, 1e-8);
    EXPECT_NEAR(dp(1), pf.distributed * 0.25, 1e-8);
    EXPECT_NEAR(dp(2), pf.distributed * 0.5, 1e-8);
    // extra losses make the shortfall slightly larger than the step
    EXPECT_GT(pf.distributed, 0.3);
    EXPECT_LT(pf.distributed, 0.33);
}

TEST(PowerFlow, VoltageDependentLoadsAtReferenceVoltageMatchConstantPower) {
    const GridCase c = fx::three_machine();
    const auto pq = solve_power_flow(c);
    PowerFlowOptions opt;
    opt.load_reference = pq.vm;
    opt.p_exponent = 1.0;
    opt.q_exponent = 2.0;
    const auto pv = solve_power_flow(c, opt);
    EXPECT_LT((pv.vm - pq.vm).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((pv.gen_p - pq.gen_p).cwiseAbs().maxCoeff(), 1e-9);

    // a load step on an impedance load draws (V/V0)^2 times the stepped power
    GridCase stepped = c;
    stepped.buses[3].pd *= 1.2;
    stepped.buses[3].qd *= 1.2;
    opt.p_exponent = opt.q_exponent = 2.0;
    const auto z = solve_power_flow(stepped, opt);
    const double ratio = z.vm(3) / pq.vm(3);
    const CVec s = bus_injections(build_ybus(stepped), z.voltages());
    EXPECT_NEAR(-s(3).real(), stepped.buses[3].pd * ratio * ratio, 1e-9);
    EXPECT_LT(ratio, 1.0);
}

TEST(Scenario, LoadStepScalesBusLoad) {
    const auto& c = fx::ieee39();
    const auto i = c.bus_index(15);
    const GridCase post = apply_scenario(c, Scenario::load_step(15, 0.2));
    EXPECT_NEAR(post.buses[i].pd, 1.2 * c.buses[i].pd, 1e-12);
    EXPECT_NEAR(post.buses[i].qd, 1.2 * c.buses[i].qd, 1e-12);
    // 2.5 % of the total load
    EXPECT_NEAR(0.2 * c.buses[i].pd / c.total_load(), 0.025, 1e-9);
}

TEST(Scenario, ZeroStepIsIdentityAndInputIsUntouched) {
    const auto& c = fx::ieee39();
    const GridCase before = c;
    const GridCase same = apply_scenario(c, Scenario::load_step(15, 0.0));
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        EXPECT_EQ(same.buses[i].pd, c.buses[i].pd);
        EXPECT_EQ(same.buses[i].qd, c.buses[i].qd);
    }
    (void)apply_scenario(c, Scenario::gen_trip(1));
    EXPECT_EQ(c.generators.size(), before.generators.size());
    EXPECT_EQ(c.buses[c.bus_index(30)].type, before.buses[before.bus_index(30)].type);
}

TEST(Scenario, GeneratorTripLeavesNineUnits) {
    const auto& c = fx::ieee39();
    const GridCase post = apply_scenario(c, Scenario::gen_trip(1));
    EXPECT_EQ(post.generators.size(), 9u);
    EXPECT_EQ(post.buses[post.bus_index(30)].type, BusType::PQ);
    const auto pf = solve_power_flow(c);
    // about 4 % of total generation
    EXPECT_NEAR(pf.gen_p(0) / pf.gen_p.sum(), 0.04, 0.005);
}

TEST(Scenario, UnknownTargetsAndBadTextRejected) {
    const auto& c = fx::ieee39();
    EXPECT_THROW((void)apply_scenario(c, Scenario::load_step(99, 0.2)), InputError);
    EXPECT_THROW((void)apply_scenario(c, Scenario::gen_trip(42)), InputError);
    EXPECT_THROW(Scenario::parse("load-step:15"), InputError);
    EXPECT_THROW(Scenario::parse("gen-trip:1.5"), InputError);
    EXPECT_THROW(Scenario::parse("blackout"), InputError);
    const Scenario s = Scenario::parse("load-step:15:20");
    EXPECT_EQ(s.kind, Scenario::Kind::LoadStep);
    EXPECT_EQ(s.target, 15);
    EXPECT_DOUBLE_EQ(s.fraction, 0.2);
    EXPECT_EQ(Scenario::parse("gen-trip:3").id(), "gen-trip:3");
}
