#include "rbdm/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rbdm {

namespace {

// base + shift * (target - base) + noise_scale * eps, the single-step kernel
// of both chains.
Image residual_shift(const Image& base, const Image& from, const Image& to,
                     double shift, double noise_scale, Rng& rng) {
    Image out = base;
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] += shift * (to.data[i] - from.data[i]);
    }
    if (noise_scale > 0.0) {
        for (double& v : out.data) v += noise_scale * rng.normal();
    }
    return out;
}

// clean + beta * (target - clean) + kappa sqrt(beta) eps, evaluated as a
// convex combination so both endpoints (beta = 0, beta = 1) are bitwise exact.
Image chain_marginal(const Image& clean, const Image& target, double beta,
                     double kappa, Rng& rng) {
    Image out(clean.height, clean.width, clean.channels);
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = (1.0 - beta) * clean.data[i] + beta * target.data[i];
    }
    const double noise_scale = kappa * std::sqrt(beta);
    if (noise_scale > 0.0) {
        for (double& v : out.data) v += noise_scale * rng.normal();
    }
    return out;
}

PosteriorParams chain_posterior(const Image& state_t, const Image& clean_est,
                                const Schedule& s, int t, const char* where) {
    if (t < 1 || t > s.T) {
        throw std::out_of_range(std::string(where) + ": t=" + std::to_string(t) +
                                " outside 1.." + std::to_string(s.T));
    }
    require_same_shape(state_t, clean_est, where);
    const double bt = s.beta(t);
    const double bp = s.beta(t - 1);
    const double at = s.alpha(t);
    const double c_state = bp / bt;
    const double c_clean = at / bt;
    PosteriorParams p;
    p.mean = Image(state_t.height, state_t.width, state_t.channels);
    for (size_t i = 0; i < p.mean.data.size(); ++i) {
        p.mean.data[i] = c_state * state_t.data[i] + c_clean * clean_est.data[i];
    }
    p.variance = s.kappa * s.kappa * c_state * at;
    return p;
}

}  // namespace

Image forward_step_x(const Image& x_prev, const Image& x0, const Image& y0,
                     const Schedule& s, int t, Rng& rng) {
    require_same_shape(x_prev, x0, "forward_step_x");
    require_same_shape(x0, y0, "forward_step_x");
    const double at = s.alpha(t);  // validates t in 1..T
    return residual_shift(x_prev, x0, y0, at, s.kappa * std::sqrt(at), rng);
}

Image forward_marginal_x(const Image& x0, const Image& y0, const Schedule& s,
                         int t, Rng& rng) {
    require_same_shape(x0, y0, "forward_marginal_x");
    if (t == 0) return x0;
    return chain_marginal(x0, y0, s.beta(t), s.kappa, rng);
}

Image forward_step_y(const Image& y_prev, const Image& y0, const Image& x0,
                     const Schedule& s, int t, Rng& rng) {
    require_same_shape(y_prev, y0, "forward_step_y");
    require_same_shape(y0, x0, "forward_step_y");
    const double at = s.alpha(t);
    return residual_shift(y_prev, y0, x0, at, s.kappa * std::sqrt(at), rng);
}

Image forward_marginal_y(const Image& y0, const Image& x0, const Schedule& s,
                         int t, Rng& rng) {
    require_same_shape(y0, x0, "forward_marginal_y");
    if (t == 0) return y0;
    return chain_marginal(y0, x0, s.beta(t), s.kappa, rng);
}

PosteriorParams posterior_x(const Image& x_t, const Image& x0_est,
                            const Schedule& s, int t) {
    return chain_posterior(x_t, x0_est, s, t, "posterior_x");
}

PosteriorParams posterior_y(const Image& y_t, const Image& y0_est,
                            const Schedule& s, int t) {
    return chain_posterior(y_t, y0_est, s, t, "posterior_y");
}

Image reverse_step(const DualState& state, const DenoiserEstimate& estimate,
                   const Schedule& s, Direction direction, Rng& rng,
                   bool deterministic) {
    const bool dehaze = direction == Direction::dehaze;
    const Image& active = dehaze ? state.x : state.y;
    const Image& clean = dehaze ? estimate.x0_hat : estimate.y0_hat;
    const int t = dehaze ? state.t_x : state.t_y;

    PosteriorParams p = chain_posterior(active, clean, s, t, "reverse_step");
    if (t == 1 || deterministic || p.variance <= 0.0) return p.mean;
    const double sigma = s.kappa * std::sqrt((s.beta(t - 1) / s.beta(t)) * s.alpha(t));
    for (double& v : p.mean.data) v += sigma * rng.normal();
    return p.mean;
}

Image reverse_loop(const Image& observation, Direction direction,
                   const Schedule& s, const DenoiseFn& estimate, Rng& rng,
                   const SampleOptions& opts, SampleLog* log) {
    // Initial active state ~ N(observation, kappa^2 I).
    Image active = observation;
    if (!opts.deterministic) {
        for (double& v : active.data) v += s.kappa * rng.normal();
    }

    DualState state;
    if (direction == Direction::dehaze) {
        state.y = observation;
        state.t_y = 0;
    } else {
        state.x = observation;
        state.t_x = 0;
    }

    for (int t = s.T; t >= 1; --t) {
        if (direction == Direction::dehaze) {
            state.x = std::move(active);
            state.t_x = t;
        } else {
            state.y = std::move(active);
            state.t_y = t;
        }
        DenoiserEstimate est = estimate(state);
        if (log) ++log->denoise_rounds;
        active = reverse_step(state, est, s, direction, rng, opts.deterministic);
        if (log) ++log->reverse_steps;
    }
    return clip(active, -1.0, 1.0);
}

Image sample_dehaze(const Image& y0, const DenoiseFn& denoiser, const Schedule& s,
                    Rng& rng, const SampleOptions& opts, SampleLog* log) {
    return reverse_loop(y0, Direction::dehaze, s, denoiser, rng, opts, log);
}

Image sample_hazify(const Image& x0, const DenoiseFn& denoiser, const Schedule& s,
                    Rng& rng, const SampleOptions& opts, SampleLog* log) {
    return reverse_loop(x0, Direction::hazify, s, denoiser, rng, opts, log);
}

}  // namespace rbdm
