#pragma once

// Nonlinear time-domain simulation of the grid DAE with the implicit
// trapezoidal rule and a simultaneous Newton solve per step.

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "modalnadir/dynamics/coi.hpp"
#include "modalnadir/dynamics/disturbance.hpp"

namespace modalnadir {

struct SimulationOptions {
    double horizon = 30.0;
    double dt = 0.01;
    double newton_tolerance = 1e-8;
    int max_newton_iterations = 12;
    /// Iterations after which the cached step Jacobian is rebuilt.
    int refresh_after = 4;
    /// Keep every k-th step in the stored trajectory (1 keeps all).
    int store_every = 1;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> x;
    std::vector<Vec> y;
    StateLayout layout;
    std::string scenario;
    std::vector<int> gen_ids;  ///< in-service generators after the disturbance
};

struct SimulationResult {
    DynamicModel model;  ///< post-disturbance model
    Trajectory trajectory;
    int jacobian_refreshes = 0;
};

/// Number of `simulate` calls made by this process; tests use it to verify
/// that prediction-only paths never run the simulator.
inline std::atomic<long>& simulation_counter() {
    static std::atomic<long> count{0};
    return count;
}

namespace detail {

class TrapezoidStepper {
public:
    TrapezoidStepper(const DynamicModel& m, double dt) : m_(m), dt_(dt), n_(m.n()), l_(m.l()) {}

    void refresh(const Vec& x, const Vec& y) {
        const JacobianBlocks J = jacobians(m_, x, y);
        Mat a(n_ + l_, n_ + l_);
        a << Mat::Identity(n_, n_) - 0.5 * dt_ * J.j1, -0.5 * dt_ * J.j2, J.j3, J.j4;
        lu_.compute(a);
        if (!(lu_rcond(lu_) > kSingularRcond)) throw NumericalError("step Jacobian is singular");
        ++refreshes_;
    }

    /// Attempts one step; returns iterations used, or -1 on failure. With
    /// `full` the Jacobian is rebuilt at every iterate.
    int step(const Vec& x0, const Vec& f0, Vec& x, Vec& y, double tol, int max_it, double& final_res,
             bool full = false) {
        for (int it = 1; it <= max_it; ++it) {
            if (full && it > 1) refresh(x, y);
            Vec r(n_ + l_);
            r << x - x0 - 0.5 * dt_ * (m_.f(x, y) + f0), m_.g(x, y);
            final_res = max_abs(r);
            if (!std::isfinite(final_res)) return -1;
            const Vec dz = lu_.solve(r);
            x -= dz.head(n_);
            y -= dz.tail(l_);
            if (max_abs(dz) <= tol) {
                Vec r2(n_ + l_);
                r2 << x - x0 - 0.5 * dt_ * (m_.f(x, y) + f0), m_.g(x, y);
                final_res = max_abs(r2);
                if (final_res <= tol) return it;
            }
        }
        return -1;
    }

    [[nodiscard]] int refreshes() const { return refreshes_; }

private:
    const DynamicModel& m_;
    double dt_;
    Eigen::Index n_, l_;
    Eigen::PartialPivLU<Mat> lu_;
    int refreshes_ = 0;
};

}  // namespace detail

/// Integrates from `state0` (a consistent pre-fault state of `model`) with the
/// scenario applied at t = 0+. The stored first point is the post-disturbance
/// state at t = 0 with algebraic variables re-solved.
inline SimulationResult simulate(const DynamicModel& model, const SystemState& state0, const Scenario& scenario,
                                 const SimulationOptions& opt = {}) {
    if (!(opt.dt > 0)) throw InputError("dt must be positive");
    if (!(opt.horizon >= opt.dt)) throw InputError("horizon must be at least one step");
    ++simulation_counter();

    DisturbedSystem ds = apply_disturbance(model, state0, scenario);
    const DynamicModel& m = ds.model;
    Vec x = ds.state.x;
    Vec y = solve_algebraic(m, x, ds.state.y, {50, 1e-10});

    SimulationResult res{m, {}, 0};
    Trajectory& tr = res.trajectory;
    tr.layout = m.layout();
    tr.scenario = scenario.id();
    for (const auto& g : m.grid().generators) tr.gen_ids.push_back(g.id);

    const auto steps = static_cast<long>(std::llround(opt.horizon / opt.dt));
    tr.t.reserve(static_cast<std::size_t>(steps / opt.store_every + 2));
    auto store = [&](double t) {
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.y.push_back(y);
    };
    store(ds.state.t);

    detail::TrapezoidStepper stepper(m, opt.dt);
    stepper.refresh(x, y);
    for (long k = 1; k <= steps; ++k) {
        const double t = ds.state.t + static_cast<double>(k) * opt.dt;
        const Vec x0 = x, y0 = y;
        const Vec f0 = m.f(x0, y0);
        double res_norm = 0.0;
        int it = stepper.step(x0, f0, x, y, opt.newton_tolerance, opt.max_newton_iterations, res_norm);
        if (it < 0 || it > opt.refresh_after) {
            if (it < 0) {
                x = x0;
                y = y0;
            }
            stepper.refresh(x, y);
            if (it < 0) {
                it = stepper.step(x0, f0, x, y, opt.newton_tolerance, opt.max_newton_iterations, res_norm, true);
                if (it < 0) {
                    std::ostringstream msg;
                    msg << "Newton did not converge at t = " << t << " s (residual " << res_norm << ")";
                    throw NumericalError(msg.str());
                }
            }
        }
        if (k % opt.store_every == 0 || k == steps) store(t);
    }
    res.jacobian_refreshes = stepper.refreshes();
    return res;
}

/// COI speed (pu) and frequency (Hz) at every stored point.
struct CoiSeries {
    std::vector<double> t;
    std::vector<double> pu;
    std::vector<double> hz;
};

inline CoiSeries coi_frequency(const Trajectory& tr, const CoiWeights& w, double f_nom) {
    if (w.gen_ids != tr.gen_ids) throw InputError("COI weights do not match the trajectory's in-service machines");
    const auto z = tr.layout.speed_indices();
    CoiSeries s;
    s.t = tr.t;
    s.pu.reserve(tr.t.size());
    s.hz.reserve(tr.t.size());
    for (const auto& x : tr.x) {
        double v = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) v += w.c(static_cast<Eigen::Index>(k)) * x(z[k]);
        s.pu.push_back(v);
        s.hz.push_back(v * f_nom);
    }
    return s;
}

struct NumericNadir {
    double t = 0.0;
    double value = 0.0;
};

/// Global minimum of a sampled series, refined by the parabola through the
/// discrete minimum and its two neighbours.
inline NumericNadir find_nadir_numeric(const std::vector<double>& t, const std::vector<double>& v) {
    if (t.empty() || t.size() != v.size()) throw InputError("nadir search needs a non-empty series of matching length");
    std::size_t k = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[k]) k = i;
    if (k == 0 || k + 1 == v.size()) return {t[k], v[k]};
    const double t0 = t[k - 1], t1 = t[k], t2 = t[k + 1];
    const double v0 = v[k - 1], v1 = v[k], v2 = v[k + 1];
    // Newton divided differences of the interpolating parabola
    const double d01 = (v1 - v0) / (t1 - t0);
    const double d12 = (v2 - v1) / (t2 - t1);
    const double a = (d12 - d01) / (t2 - t0);
    if (!(a > 0)) return {t1, v1};
    const double b = d01 - a * (t0 + t1);
    const double tv = -b / (2 * a);
    const double vv = v0 + d01 * (tv - t0) + a * (tv - t0) * (tv - t1);
    return {tv, vv};
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
    out << 't';
    for (const auto& n : tr.layout.x_names()) out << ',' << n;
    out << '\n' << std::setprecision(12);
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        out << tr.t[i];
        for (Eigen::Index j = 0; j < tr.x[i].size(); ++j) out << ',' << tr.x[i](j);
        out << '\n';
    }
}

inline void write_coi_csv(std::ostream& out, const CoiSeries& s) {
    out << "t,f_coi_hz\n" << std::setprecision(12);
    for (std::size_t i = 0; i < s.t.size(); ++i) out << s.t[i] << ',' << s.hz[i] << '\n';
}

}  // namespace modalnadir
