#pragma once

#include <vector>

namespace rbdm {

// Diffusion schedule: monotone beta sequence with beta_0 = 0 and beta_T = 1,
// per-step increments alpha_t = beta_t - beta_{t-1}, and the noise scale
// kappa that multiplies every kernel's standard deviation.
struct Schedule {
    int T = 0;
    double kappa = 0.0;
    double gamma = 0.0;
    std::vector<double> betas;  // size T+1, betas[0] == 0, betas[T] == 1

    double beta(int t) const;   // t in 0..T
    double alpha(int t) const;  // t in 1..T, beta(t) - beta(t-1)
};

// Power schedule beta_t = (t/T)^gamma. Validates all Schedule invariants;
// rejects T < 1 and non-positive kappa or gamma.
Schedule build_schedule(int T, double kappa, double gamma);

}  // namespace rbdm
