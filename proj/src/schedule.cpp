#include "rbdm/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace rbdm {

double Schedule::beta(int t) const {
    if (t < 0 || t > T) {
        throw std::out_of_range("Schedule::beta: t=" + std::to_string(t) +
                                " outside 0.." + std::to_string(T));
    }
    return betas[static_cast<size_t>(t)];
}

double Schedule::alpha(int t) const {
    if (t < 1 || t > T) {
        throw std::out_of_range("Schedule::alpha: t=" + std::to_string(t) +
                                " outside 1.." + std::to_string(T));
    }
    return betas[static_cast<size_t>(t)] - betas[static_cast<size_t>(t) - 1];
}

Schedule build_schedule(int T, double kappa, double gamma) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    if (!(kappa > 0.0)) throw std::invalid_argument("build_schedule: kappa must be > 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("build_schedule: gamma must be > 0");

    Schedule s;
    s.T = T;
    s.kappa = kappa;
    s.gamma = gamma;
    s.betas.resize(static_cast<size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
        s.betas[static_cast<size_t>(t)] = std::pow(static_cast<double>(t) / T, gamma);
    }
    s.betas[0] = 0.0;
    s.betas[static_cast<size_t>(T)] = 1.0;

    for (int t = 1; t <= T; ++t) {
        if (!(s.betas[static_cast<size_t>(t)] > s.betas[static_cast<size_t>(t) - 1])) {
            throw std::invalid_argument("build_schedule: betas not strictly increasing");
        }
    }
    // beta_1 should be near 0 for a smooth start; T=1 is a legal degenerate
    // schedule, so a coarse first step is only worth a warning.
    if (T > 1 && s.betas[1] > 0.1) {
        std::fprintf(stderr, "warning: beta_1 = %.4f > 0.1; schedule is coarse (raise T or gamma)\n",
                     s.betas[1]);
    }
    return s;
}

}  // namespace rbdm
