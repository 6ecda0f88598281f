#pragma once

#include <vector>

#include "modalnadir/grid/case.hpp"

namespace modalnadir {

/// Center-of-inertia weights C_z = H_z / H_t over in-service generators,
/// in generator order.
struct CoiWeights {
    std::vector<int> gen_ids;
    Vec h;
    Vec c;
    double h_total = 0.0;
};

[[nodiscard]] inline CoiWeights coi_weights(const GridCase& gc) {
    if (gc.generators.empty()) throw InputError("COI weights need at least one generator");
    CoiWeights w;
    const auto ng = static_cast<Eigen::Index>(gc.generators.size());
    w.h.resize(ng);
    for (Eigen::Index k = 0; k < ng; ++k) {
        w.gen_ids.push_back(gc.generators[static_cast<std::size_t>(k)].id);
        w.h(k) = gc.generators[static_cast<std::size_t>(k)].h;
    }
    w.h_total = w.h.sum();
    if (!(w.h_total > 0)) throw InputError("total inertia is zero");
    w.c = w.h / w.h_total;
    return w;
}

}  // namespace modalnadir
