#pragma once

#include <functional>

#include "rbdm/image.hpp"
#include "rbdm/rng.hpp"
#include "rbdm/schedule.hpp"

namespace rbdm {

// Perturbed pair (x at level t_x, y at level t_y). The two timesteps are
// independent; level 0 means the unperturbed observation.
struct DualState {
    Image x;
    Image y;
    int t_x = 0;
    int t_y = 0;
};

// Clean-pair prediction contract of the denoiser.
struct DenoiserEstimate {
    Image x0_hat;
    Image y0_hat;
};

// Gaussian posterior over the previous chain state: scalar variance, shared
// by every pixel.
struct PosteriorParams {
    Image mean;
    double variance = 0.0;
};

enum class Direction { dehaze, hazify };

using DenoiseFn = std::function<DenoiserEstimate(const DualState&)>;

// Single forward transition of the x-chain:
//   x_t = x_{t-1} + alpha_t (y0 - x0) + kappa sqrt(alpha_t) eps.
Image forward_step_x(const Image& x_prev, const Image& x0, const Image& y0,
                     const Schedule& s, int t, Rng& rng);

// Marginal of the x-chain at level t:
//   x_t = x0 + beta_t (y0 - x0) + kappa sqrt(beta_t) eps.
// t = 0 returns x0 bitwise without consuming the stream.
Image forward_marginal_x(const Image& x0, const Image& y0, const Schedule& s,
                         int t, Rng& rng);

// Mirrored y-chain, shifting the opposite residual x0 - y0.
Image forward_step_y(const Image& y_prev, const Image& y0, const Image& x0,
                     const Schedule& s, int t, Rng& rng);
Image forward_marginal_y(const Image& y0, const Image& x0, const Schedule& s,
                         int t, Rng& rng);

// Closed-form chain posteriors q(state_{t-1} | state_t, clean):
//   mean = (beta_{t-1}/beta_t) state_t + (alpha_t/beta_t) clean_estimate
//   var  = kappa^2 (beta_{t-1}/beta_t) alpha_t
PosteriorParams posterior_x(const Image& x_t, const Image& x0_est,
                            const Schedule& s, int t);
PosteriorParams posterior_y(const Image& y_t, const Image& y0_est,
                            const Schedule& s, int t);

// One reverse update of the active chain (x for dehaze, y for hazify) given
// the denoiser's clean-pair estimate. At t = 1 the posterior variance is 0,
// so the step is always noiseless there; `deterministic` suppresses the
// noise at every step.
Image reverse_step(const DualState& state, const DenoiserEstimate& estimate,
                   const Schedule& s, Direction direction, Rng& rng,
                   bool deterministic = false);

struct SampleOptions {
    bool deterministic = false;  // suppress reverse-step noise everywhere
};

// Per-run counters, filled when a non-null log is passed to a sampler.
struct SampleLog {
    int reverse_steps = 0;
    int denoise_rounds = 0;
};

// Shared reverse loop: initialize the active state at N(observation, kappa^2 I),
// iterate reverse_step for t = T..1 with the observation fixed at level 0,
// and clip the result to [-1, 1]. `estimate` is called once per step.
Image reverse_loop(const Image& observation, Direction direction,
                   const Schedule& s, const DenoiseFn& estimate, Rng& rng,
                   const SampleOptions& opts = {}, SampleLog* log = nullptr);

// Full samplers. Dehazing runs the x-chain conditioned on y0 at level 0;
// hazification runs the y-chain conditioned on x0 at level 0.
Image sample_dehaze(const Image& y0, const DenoiseFn& denoiser, const Schedule& s,
                    Rng& rng, const SampleOptions& opts = {}, SampleLog* log = nullptr);
Image sample_hazify(const Image& x0, const DenoiseFn& denoiser, const Schedule& s,
                    Rng& rng, const SampleOptions& opts = {}, SampleLog* log = nullptr);

}  // namespace rbdm
