#pragma once

// End-to-end studies: prepare an operating point, linearize, pick modes,
// predict the nadir and compare against the nonlinear simulation.

#include <cstdio>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "modalnadir/nadir/estimator.hpp"
#include "modalnadir/sim/simulator.hpp"

namespace modalnadir {

enum class LinearizationPoint { PostFault, PreFault };

struct StudyConfig {
    std::string case_path;
    Scenario scenario = Scenario::load_step(15, 0.2);
    double horizon = 30.0;
    double dt = 0.01;
    double inertia_scale = 0.5;
    ModeSelectionOptions selection;
    NadirOptions nadir;
    LinearizationPoint linearize_at = LinearizationPoint::PostFault;
    ImbalanceModel imbalance = ImbalanceModel::Settled;
    bool skip_oracle = false;
    std::string out_dir = ".";

    void validate() const {
        if (!(horizon > 0)) throw InputError("horizon must be positive");
        if (!(dt > 0)) throw InputError("dt must be positive");
        if (!(dt <= horizon)) throw InputError("dt must not exceed the horizon");
        if (!(selection.pf_threshold > 0 && selection.pf_threshold < 1)) throw InputError("participation threshold must lie in (0, 1)");
        if (!(selection.slow_cutoff > 0)) throw InputError("slow-mode cutoff must be positive");
        if (!(inertia_scale > 0)) throw InputError("inertia scale must be positive");
    }
};

struct OperatingPoint {
    GridCase grid;
    PowerFlowSolution pf;
    DynamicModel model;
    SystemState state;
};

/// Power flow and dynamic initialization of `raw` with inertia and
/// load/generation scaled.
inline OperatingPoint prepare_operating_point(const GridCase& raw, double inertia_scale, double load_scale = 1.0) {
    GridCase c = scale_inertia(raw, inertia_scale);
    if (load_scale != 1.0) c = scale_operating_point(std::move(c), load_scale);
    PowerFlowSolution pf = solve_power_flow(c);
    auto [model, state] = init_dynamic_state(c, pf);
    return {std::move(c), std::move(pf), std::move(model), std::move(state)};
}

struct ModalStudy {
    LinearModel lin;
    ModalBasis basis;
    Mat pf;
    CoiWeights weights;
    Vec droops;
    CoiScreen screen;
    ModeSet modes;
};

/// Linearization at `eq`, eigenanalysis and mode selection.
inline ModalStudy modal_study(const DynamicModel& model, const SystemState& eq, const ModeSelectionOptions& sel) {
    ModalStudy s;
    s.lin = linearize(model, eq);
    s.basis = eigendecompose(s.lin.a_s);
    s.pf = participation_factors(s.basis);
    s.weights = coi_weights(model.grid());
    s.droops = system_droops(model.grid());
    s.screen = coi_screen(s.basis, reference_deviation(model.layout(), s.droops), model.layout(), s.weights);
    s.modes = select_modes(s.basis, s.pf, model.layout(), sel, s.screen);
    return s;
}

/// State right after the disturbance, algebraic variables re-solved.
inline DisturbedSystem disturbed_state(const OperatingPoint& op, const Scenario& sc) {
    DisturbedSystem ds = apply_disturbance(op.model, op.state, sc);
    ds.state.y = solve_algebraic(ds.model, ds.state.x, ds.state.y);
    return ds;
}

struct Estimate {
    DisturbanceSpec disturbance;
    InitialDeviation deviation;
    ModalCoefficients coefficients;
    NadirPrediction prediction;
};

/// Prediction from modal data that may come from another operating point
/// with the same state layout.
inline Estimate estimate_nadir(const OperatingPoint& op, const DisturbedSystem& ds, const ModalStudy& modal, const Scenario& sc,
                               const NadirOptions& opt, ImbalanceModel imbalance = ImbalanceModel::Settled) {
    const auto& layout = ds.model.layout();
    if (layout.x_names() != modal.lin.layout.x_names()) throw InputError("modal data was built for a different state layout");
    Estimate e;
    e.disturbance = disturbance_spec(op.grid, op.pf, sc, imbalance);
    const double f_nom = op.grid.f_nom;
    const Vec droops = system_droops(ds.model.grid());
    const auto pff = post_fault_frequency(e.disturbance.dp, droops, f_nom, f_nom);
    e.deviation = build_delta_x0(layout, ds.state.x, pff.dw, droops, ds.model.setpoints().pc, f_nom, f_nom);
    e.coefficients = modal_coefficients(modal.basis, modal.modes, e.deviation.dx0, layout, modal.weights);
    e.prediction = predict_nadir(e.coefficients, e.deviation.fe, f_nom, opt);
    return e;
}

/// Equilibrium of the post-disturbance system, started from the droop
/// estimate of the settled state.
inline SystemState post_fault_equilibrium(const DisturbedSystem& ds, const Vec& dx0) {
    SystemState guess = ds.state;
    guess.x -= dx0;
    return equilibrate(ds.model, guess);
}

struct OracleResult {
    NumericNadir nadir;  ///< Hz
    double f_end = 0.0;  ///< Hz, COI frequency at the horizon
    CoiSeries coi;
    SimulationResult sim;
};

inline OracleResult run_oracle(const OperatingPoint& op, const Scenario& sc, double horizon, double dt) {
    SimulationOptions so;
    so.horizon = horizon;
    so.dt = dt;
    OracleResult r{{}, 0.0, {}, simulate(op.model, op.state, sc, so)};
    r.coi = coi_frequency(r.sim.trajectory, coi_weights(r.sim.model.grid()), op.grid.f_nom);
    r.nadir = find_nadir_numeric(r.coi.t, r.coi.hz);
    r.f_end = r.coi.hz.back();
    return r;
}

[[nodiscard]] inline double ape(double predicted, double actual) { return 100.0 * std::abs(predicted - actual) / std::abs(actual); }

struct CaseResult {
    std::string scenario;
    Estimate estimate;
    ModalStudy modal;
    std::optional<OracleResult> oracle;

    [[nodiscard]] double ape_nadir() const { return ape(estimate.prediction.f_nadir, oracle->nadir.value); }
    [[nodiscard]] double ape_time() const { return ape(estimate.prediction.t_nadir, oracle->nadir.t); }
};

/// Modal data for a scenario at the configured linearization point.
inline ModalStudy scenario_modal_study(const OperatingPoint& op, const DisturbedSystem& ds, const StudyConfig& cfg) {
    if (cfg.linearize_at == LinearizationPoint::PreFault) {
        if (cfg.scenario.kind == Scenario::Kind::GenTrip)
            throw InputError("pre-fault linearization does not apply to a generator trip: the state layout changes");
        return modal_study(op.model, op.state, cfg.selection);
    }
    const bool undisturbed = cfg.scenario.kind == Scenario::Kind::None ||
                             (cfg.scenario.kind == Scenario::Kind::LoadStep && cfg.scenario.fraction == 0.0);
    if (undisturbed) return modal_study(op.model, op.state, cfg.selection);
    // the droop estimate of the settled state seeds the equilibrium solve
    const auto spec = disturbance_spec(op.grid, op.pf, cfg.scenario, ImbalanceModel::Nominal);
    const Vec droops = system_droops(ds.model.grid());
    const auto pff = post_fault_frequency(spec.dp, droops, op.grid.f_nom, op.grid.f_nom);
    const auto dev = build_delta_x0(ds.model.layout(), ds.state.x, pff.dw, droops, ds.model.setpoints().pc, op.grid.f_nom, op.grid.f_nom);
    return modal_study(ds.model, post_fault_equilibrium(ds, dev.dx0), cfg.selection);
}

inline CaseResult run_case(const GridCase& raw, const StudyConfig& cfg) {
    cfg.validate();
    const OperatingPoint op = prepare_operating_point(raw, cfg.inertia_scale);
    const DisturbedSystem ds = disturbed_state(op, cfg.scenario);
    CaseResult r;
    r.scenario = cfg.scenario.id();
    r.modal = scenario_modal_study(op, ds, cfg);
    r.estimate = estimate_nadir(op, ds, r.modal, cfg.scenario, cfg.nadir, cfg.imbalance);
    if (!cfg.skip_oracle) r.oracle = run_oracle(op, cfg.scenario, cfg.horizon, cfg.dt);
    return r;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace detail

inline const char* prediction_csv_header() {
    return "scenario,dp_pu,f_e_hz,t_nadir_pred_s,f_nadir_pred_hz,t_nadir_actual_s,f_nadir_actual_hz,ape_nadir_pct,ape_time_pct,fallback";
}

inline std::string prediction_csv_row(const CaseResult& r) {
    const auto& p = r.estimate.prediction;
    std::string s = r.scenario;
    s += ',' + detail::fmt("%.6f", r.estimate.disturbance.dp);
    s += ',' + detail::fmt("%.6f", p.fe);
    s += ',' + detail::fmt("%.4f", p.t_nadir);
    s += ',' + detail::fmt("%.6f", p.f_nadir);
    if (r.oracle) {
        s += ',' + detail::fmt("%.4f", r.oracle->nadir.t);
        s += ',' + detail::fmt("%.6f", r.oracle->nadir.value);
        s += ',' + detail::fmt("%.4f", r.ape_nadir());
        s += ',' + detail::fmt("%.4f", r.ape_time());
    } else {
        s += ",,,,";
    }
    s += p.fallback ? ",1" : ",0";
    return s;
}

struct ScanRow {
    double factor = 1.0;
    bool ok = false;       ///< prediction and oracle both available
    bool predicted = false;
    std::string error;
    double f_nadir_actual = 0.0, t_nadir_actual = 0.0;
    double f_nadir_pred = 0.0, t_nadir_pred = 0.0;
    double ape_nadir = 0.0, ape_time = 0.0;
    /// Largest relative distance from each base retained eigenvalue to the
    /// nearest eigenvalue at this operating point.
    double eig_drift = 0.0;
};

struct ScanResult {
    std::vector<ScanRow> rows;
    std::vector<Complex> base_modes;
};

inline void validate_factors(const std::vector<double>& factors) {
    if (factors.empty()) throw InputError("no scaling factors given");
    for (double f : factors)
        if (!(f >= 0.5 - 1e-12 && f <= 1.5 + 1e-12)) throw InputError("scaling factor " + detail::fmt("%g", f) + " is outside [0.5, 1.5]");
}

/// Scales load and generation by each factor and predicts with the modal
/// data of the unscaled case. Rows come back in factor order whatever the
/// completion order of the workers.
inline ScanResult sensitivity_scan(const GridCase& raw, const StudyConfig& cfg, const std::vector<double>& factors,
                                   unsigned workers = std::thread::hardware_concurrency()) {
    cfg.validate();
    validate_factors(factors);
    StudyConfig base_cfg = cfg;
    base_cfg.skip_oracle = true;
    const CaseResult base = run_case(raw, base_cfg);
    ScanResult out;
    for (auto m : base.modal.modes.modes) out.base_modes.push_back(base.modal.basis.lambda(m));

    auto one = [&](double factor) {
        ScanRow row;
        row.factor = factor;
        try {
            const OperatingPoint op = prepare_operating_point(raw, cfg.inertia_scale, factor);
            const DisturbedSystem ds = disturbed_state(op, cfg.scenario);
            const Estimate e = estimate_nadir(op, ds, base.modal, cfg.scenario, cfg.nadir, cfg.imbalance);
            row.f_nadir_pred = e.prediction.f_nadir;
            row.t_nadir_pred = e.prediction.t_nadir;
            // own modal data, only to measure drift of the retained modes
            const SystemState eq = post_fault_equilibrium(ds, e.deviation.dx0);
            const ModalBasis b = eigendecompose(linearize(ds.model, eq).a_s);
            for (const auto& lam : out.base_modes) {
                double best = std::numeric_limits<double>::infinity();
                for (Eigen::Index i = 0; i < b.size(); ++i) best = std::min(best, std::abs(b.lambda(i) - lam));
                row.eig_drift = std::max(row.eig_drift, best / std::abs(lam));
            }
            row.predicted = true;
            const OracleResult o = run_oracle(op, cfg.scenario, cfg.horizon, cfg.dt);
            row.f_nadir_actual = o.nadir.value;
            row.t_nadir_actual = o.nadir.t;
            row.ape_nadir = ape(row.f_nadir_pred, row.f_nadir_actual);
            row.ape_time = ape(row.t_nadir_pred, row.t_nadir_actual);
            row.ok = true;
        } catch (const Error& ex) {
            row.error = ex.what();
        }
        return row;
    };

    out.rows.resize(factors.size());
    const std::size_t w = std::max(1u, workers);
    for (std::size_t start = 0; start < factors.size(); start += w) {
        std::vector<std::future<ScanRow>> batch;
        for (std::size_t i = start; i < std::min(factors.size(), start + w); ++i)
            batch.push_back(std::async(w > 1 ? std::launch::async : std::launch::deferred, one, factors[i]));
        for (std::size_t i = 0; i < batch.size(); ++i) out.rows[start + i] = batch[i].get();
    }
    return out;
}

inline const char* scan_csv_header() {
    return "factor,status,f_nadir_actual_hz,f_nadir_pred_hz,ape_nadir_pct,t_nadir_actual_s,t_nadir_pred_s,ape_time_pct,eig_drift";
}

inline std::string scan_csv_row(const ScanRow& r) {
    std::string s = detail::fmt("%.2f", r.factor);
    if (!r.ok) {
        if (!r.predicted) return s + ",failed,,,,,,,";
        return s + ",failed,," + detail::fmt("%.6f", r.f_nadir_pred) + ",,," + detail::fmt("%.4f", r.t_nadir_pred) + ",," +
               detail::fmt("%.5f", r.eig_drift);
    }
    s += ",ok";
    s += ',' + detail::fmt("%.6f", r.f_nadir_actual);
    s += ',' + detail::fmt("%.6f", r.f_nadir_pred);
    s += ',' + detail::fmt("%.5f", r.ape_nadir);
    s += ',' + detail::fmt("%.4f", r.t_nadir_actual);
    s += ',' + detail::fmt("%.4f", r.t_nadir_pred);
    s += ',' + detail::fmt("%.4f", r.ape_time);
    s += ',' + detail::fmt("%.5f", r.eig_drift);
    return s;
}

}  // namespace modalnadir
