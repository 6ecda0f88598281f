#pragma once

#include "modalnadir/grid/case.hpp"

namespace modalnadir {

/// Dense bus admittance matrix from branches and bus shunts. Loads are not
/// included; the dynamic model adds them as constant admittances.
[[nodiscard]] inline CMat build_ybus(const GridCase& c) {
    const auto nb = static_cast<Eigen::Index>(c.buses.size());
    CMat y = CMat::Zero(nb, nb);
    for (const auto& br : c.branches) {
        const auto f = static_cast<Eigen::Index>(c.bus_index(br.from));
        const auto t = static_cast<Eigen::Index>(c.bus_index(br.to));
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex ysh(0.0, br.b / 2.0);
        y(f, f) += (ys + ysh) / (br.tap * br.tap);
        y(t, t) += ys + ysh;
        y(f, t) -= ys / br.tap;
        y(t, f) -= ys / br.tap;
    }
    for (Eigen::Index i = 0; i < nb; ++i) y(i, i) += Complex(c.buses[i].gs, c.buses[i].bs);
    return y;
}

}  // namespace modalnadir
