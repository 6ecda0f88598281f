// modalnadir: simulate, modes, predict and scan subcommands over a case file.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "modalnadir/study.hpp"

namespace fs = std::filesystem;
using namespace modalnadir;

namespace {

struct Options {
    std::string case_path;
    std::string scenario = "load-step:15:20";
    double horizon = 30.0;
    double dt = 0.01;
    double pf_threshold = 1e-3;
    double slow_cutoff = 10.0;
    double inertia_scale = 0.5;
    std::string out = ".";
    bool skip_oracle = false;
    std::string imbalance = "settled";
    std::string linearize_at = "post";
    bool a4_at_zero = false;
    std::string factors = "0.5,0.6,0.7,0.8,0.9,1.0,1.1,1.2,1.3,1.4,1.5";
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::string dump_matrix;
};

StudyConfig make_config(const Options& o) {
    StudyConfig c;
    c.case_path = o.case_path;
    c.scenario = Scenario::parse(o.scenario);
    c.horizon = o.horizon;
    c.dt = o.dt;
    c.selection.pf_threshold = o.pf_threshold;
    c.selection.slow_cutoff = o.slow_cutoff;
    c.inertia_scale = o.inertia_scale;
    c.out_dir = o.out;
    c.skip_oracle = o.skip_oracle;
    c.imbalance = o.imbalance == "nominal" ? ImbalanceModel::Nominal : ImbalanceModel::Settled;
    c.linearize_at = o.linearize_at == "pre" ? LinearizationPoint::PreFault : LinearizationPoint::PostFault;
    c.nadir.expansion.a4_at_zero = o.a4_at_zero;
    c.validate();
    return c;
}

std::vector<double> parse_factors(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tok.size()) throw InputError("bad factor '" + tok + "' in --factors");
        out.push_back(v);
    }
    if (out.empty()) throw InputError("--factors needs at least one value");
    return out;
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    const fs::path p = fs::path(dir) / name;
    std::ofstream f(p);
    if (!f) throw InputError("cannot write " + p.string());
    return f;
}

std::string complex_text(Complex z) {
    char buf[96];
    if (z.imag() == 0.0) std::snprintf(buf, sizeof buf, "%.4f", z.real());
    else std::snprintf(buf, sizeof buf, "%.4f %c j%.4f", z.real(), z.imag() < 0 ? '-' : '+', std::abs(z.imag()));
    return buf;
}

int cmd_simulate(const Options& o) {
    const StudyConfig cfg = make_config(o);
    const GridCase raw = load_case(cfg.case_path);
    const OperatingPoint op = prepare_operating_point(raw, cfg.inertia_scale);
    const OracleResult r = run_oracle(op, cfg.scenario, cfg.horizon, cfg.dt);
    {
        auto f = open_output(cfg.out_dir, "trajectory.csv");
        write_trajectory_csv(f, r.sim.trajectory);
    }
    {
        auto f = open_output(cfg.out_dir, "coi.csv");
        write_coi_csv(f, r.coi);
    }
    std::printf("nadir %.2f Hz @ %.2f s\n", r.nadir.value, r.nadir.t);
    std::printf("final %.4f Hz at %.2f s\n", r.f_end, r.coi.t.back());
    return 0;
}

int cmd_modes(const Options& o) {
    const StudyConfig cfg = make_config(o);
    const GridCase raw = load_case(cfg.case_path);
    const OperatingPoint op = prepare_operating_point(raw, cfg.inertia_scale);
    const DisturbedSystem ds = disturbed_state(op, cfg.scenario);
    const ModalStudy m = scenario_modal_study(op, ds, cfg);
    const auto rows = mode_report(m.basis, m.pf, m.lin.layout, m.modes);

    double max_re = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) max_re = std::max(max_re, r.lambda.real());
    std::printf("states %ld  modes %zu  max real part %.6f\n", static_cast<long>(m.lin.layout.n()), rows.size(), max_re);
    std::printf("%5s  %-26s %9s %9s  %s\n", "mode", "eigenvalue", "damping", "freq_hz", "largest participation");
    for (const auto& r : rows) {
        std::string top;
        for (const auto& [name, v] : r.top_states) {
            char buf[64];
            std::snprintf(buf, sizeof buf, " %s %.3f", name.c_str(), v);
            top += buf;
        }
        std::printf("%c%4ld  %-26s %9.4f %9.4f %s\n", r.selected ? '*' : ' ', static_cast<long>(r.index),
                    complex_text(r.lambda).c_str(), r.damping, r.freq_hz, top.c_str());
    }
    std::printf("selected (pf >= %g, |lambda| <= %g rad/s):\n", cfg.selection.pf_threshold, cfg.selection.slow_cutoff);
    for (std::size_t k = 0; k < m.modes.size(); ++k) {
        const Complex lam = m.basis.lambda(m.modes.modes[k]);
        if (lam.imag() < 0) continue;
        std::printf("  %-26s %s  max governor pf %.4f", complex_text(lam).c_str(), lam.imag() == 0 ? "real" : "pair",
                    m.modes.max_governor_pf[k]);
        if (k < m.modes.coi_share.size()) std::printf("  coi share %.4f", m.modes.coi_share[k]);
        std::printf("\n");
    }

    if (!o.dump_matrix.empty()) {
        std::ofstream mf(o.dump_matrix);
        if (!mf) throw InputError("cannot write " + o.dump_matrix);
        write_matrix(mf, m.lin.a_s);
    }
    auto f = open_output(cfg.out_dir, "modes.csv");
    f << "mode,re,im,damping,freq_hz,selected\n" << std::setprecision(12);
    for (const auto& r : rows)
        f << r.index << ',' << r.lambda.real() << ',' << r.lambda.imag() << ',' << r.damping << ',' << r.freq_hz << ','
          << (r.selected ? 1 : 0) << '\n';
    return 0;
}

int cmd_predict(const Options& o) {
    const StudyConfig cfg = make_config(o);
    const GridCase raw = load_case(cfg.case_path);
    const CaseResult r = run_case(raw, cfg);
    const std::string text = std::string(prediction_csv_header()) + '\n' + prediction_csv_row(r) + '\n';
    auto f = open_output(cfg.out_dir, "prediction.csv");
    f << text;
    std::cout << text;
    return 0;
}

int cmd_scan(const Options& o) {
    const StudyConfig cfg = make_config(o);
    const std::vector<double> factors = parse_factors(o.factors);
    validate_factors(factors);
    const GridCase raw = load_case(cfg.case_path);
    const ScanResult r = sensitivity_scan(raw, cfg, factors, o.workers);
    std::string text = std::string(scan_csv_header()) + '\n';
    bool any = false;
    for (const auto& row : r.rows) {
        text += scan_csv_row(row) + '\n';
        any = any || row.ok;
        if (!row.ok) std::fprintf(stderr, "factor %.2f failed: %s\n", row.factor, row.error.c_str());
    }
    auto f = open_output(cfg.out_dir, "scan.csv");
    f << text;
    std::cout << text;
    return any ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-nadir prediction from modal analysis of a multi-machine grid"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* s) {
        s->add_option("--case", o.case_path, "case file")->required();
        s->add_option("--scenario", o.scenario, "load-step:BUS:PCT, gen-trip:GEN or none")->capture_default_str();
        s->add_option("--horizon", o.horizon, "simulated time, s")->capture_default_str();
        s->add_option("--dt", o.dt, "integration step, s")->capture_default_str();
        s->add_option("--pf-threshold", o.pf_threshold, "participation threshold for mode selection")->capture_default_str();
        s->add_option("--slow-cutoff", o.slow_cutoff, "largest |lambda| of a slow mode, rad/s")->capture_default_str();
        s->add_option("--inertia-scale", o.inertia_scale, "multiplier on every machine's H")->capture_default_str();
        s->add_option("--out", o.out, "output directory")->capture_default_str();
        s->add_option("--imbalance", o.imbalance, "settled or nominal power imbalance")
            ->check(CLI::IsMember({"settled", "nominal"}))
            ->capture_default_str();
        s->add_option("--linearize-at", o.linearize_at, "post or pre (fault)")
            ->check(CLI::IsMember({"post", "pre"}))
            ->capture_default_str();
        s->add_flag("--a4-at-zero", o.a4_at_zero, "evaluate the a4 expansion term at t = 0");
    };

    auto* sim = app.add_subcommand("simulate", "nonlinear simulation; writes trajectory.csv and coi.csv");
    common(sim);
    auto* modes = app.add_subcommand("modes", "eigenvalues, participation and the selected slow modes");
    common(modes);
    modes->add_option("--dump-matrix", o.dump_matrix, "write the reduced state matrix to this file");
    auto* pred = app.add_subcommand("predict", "modal nadir prediction against the simulation");
    common(pred);
    pred->add_flag("--skip-oracle", o.skip_oracle, "prediction only; no simulation");
    auto* scan = app.add_subcommand("scan", "prediction error across scaled operating points");
    common(scan);
    scan->add_option("--factors", o.factors, "comma-separated load/generation scale factors")->capture_default_str();
    scan->add_option("--workers", o.workers, "parallel simulations")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sim) return cmd_simulate(o);
        if (*modes) return cmd_modes(o);
        if (*pred) return cmd_predict(o);
        if (*scan) return cmd_scan(o);
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
