#pragma once

// Randomized but reproducible equilibrium sampling over the feasible density
// box, spanning both characteristic regimes.

#include <cmath>
#include <vector>

#include "support/fixtures.hpp"
#include "tcar/model.hpp"

namespace fixtures {

struct EquilibriumSample {
    std::array<double, 2> rho;
    tcar::EquilibriumState eq;
    tcar::Linearization lin;
};

inline std::vector<EquilibriumSample> random_equilibria(int count, unsigned seed) {
    const tcar::TwoClasses classes = reference_classes();
    const tcar::RoadParams road = reference_road();
    std::mt19937 rng(seed);
    // Alternate two draw styles so both regimes are well represented:
    // log-uniform over the density box reaches the dilute (free) corner,
    // occupancy-parametrized draws pin the dense (congested) corner.
    // Infeasible draws are rejected.
    std::uniform_real_distribution<double> u1(std::log(1e-4), std::log(0.30));
    std::uniform_real_distribution<double> u2(std::log(5e-5), std::log(0.15));
    std::uniform_real_distribution<double> uo(0.45, 0.84);
    std::uniform_real_distribution<double> uf(0.10, 0.90);
    std::vector<EquilibriumSample> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        double rho1, rho2;
        if (out.size() % 2 == 0) {
            rho1 = std::exp(u1(rng));
            rho2 = std::exp(u2(rng));
        } else {
            const double occupied = road.width * uo(rng);
            const double f = uf(rng);
            rho1 = f * occupied / classes[0].a;
            rho2 = (1.0 - f) * occupied / classes[1].a;
        }
        EquilibriumSample s;
        s.rho = {rho1, rho2};
        try {
            s.eq = tcar::compute_equilibrium(s.rho, road, classes);
        } catch (const tcar::Error&) {
            continue;
        }
        s.lin = tcar::linearize(s.eq, tcar::pressure_gradients(s.eq, road, classes), classes);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fixtures
