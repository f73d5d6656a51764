#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rbdm/denoiser.hpp"
#include "rbdm/diffusion.hpp"
#include "rbdm/image.hpp"
#include "rbdm/rng.hpp"
#include "rbdm/schedule.hpp"

namespace rbdm {

// Joint timestep sampling policy. The default draws (t_x, t_y) independently
// and uniformly over {0..T} and resamples (0, 0), so both conditioning
// regimes (t_y = 0 and t_x = 0) and all mixed states are covered.
enum class TimestepPolicy { independent_uniform };

struct TrainConfig {
    int patch_size = 64;
    int patches_per_image = 16;
    int images_per_batch = 16;
    double learning_rate = 5e-5;
    int iterations = 0;
    uint64_t seed = 0;
    TimestepPolicy timestep_policy = TimestepPolicy::independent_uniform;
    bool grad_clip = false;
    double grad_clip_norm = 1.0;
    int checkpoint_every = 0;  // 0: only the final checkpoint
    std::string out_dir;       // checkpoints + loss.csv land here
    int threads = 1;
};

// Aligned crop pair; origin is the shared top-left corner.
struct PatchPair {
    Image x_patch;
    Image y_patch;
    int row = 0;
    int col = 0;
};

// In-memory paired dataset. clear[i] and hazy[i] share names[i] and shape.
struct Dataset {
    std::vector<std::string> names;
    std::vector<Image> clear;  // signed range [-1, 1]
    std::vector<Image> hazy;
};

// Loads `clear/` and `hazy/` subdirectories of root, requiring identical
// filename sets and per-pair shapes. Throws with file-level diagnostics.
Dataset load_dataset(const std::string& root);

std::vector<PatchPair> sample_patch_pairs(const Image& x0, const Image& y0, int p,
                                          int n, Rng& rng);

std::pair<int, int> sample_timesteps(int T, Rng& rng,
                                     TimestepPolicy policy = TimestepPolicy::independent_uniform);

// Mean absolute error over both images of the pair (the training objective
// for a single example).
double l1_pair_loss(const DenoiserEstimate& est, const Image& x0, const Image& y0);

// Adam state; moments are stored in float32 like the weights, so a
// checkpoint round trip is exact and resumed runs replay bitwise.
struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(size_t n = 0) : m(n, 0.0f), v(n, 0.0f) {}
    void update(std::vector<float>& params, const std::vector<double>& grad, double lr);
};

// One optimizer step on a batch: perturb each pair at sampled timesteps via
// the forward marginals, accumulate the L1 loss gradient, update. Returns the
// batch loss. Throws on a non-finite loss.
double train_step(Denoiser& denoiser, AdamState& adam, const std::vector<PatchPair>& batch,
                  const Schedule& schedule, double learning_rate, Rng& rng,
                  TimestepPolicy policy = TimestepPolicy::independent_uniform,
                  bool grad_clip = false, double grad_clip_norm = 1.0, int threads = 1);

struct TrainResult {
    std::vector<double> losses;       // one entry per iteration
    std::string final_checkpoint;     // path, empty when out_dir is unset
    int iterations_run = 0;
};

// Full training loop. Starts from the given denoiser/adam/iteration state
// (supports resuming), draws per-iteration substreams from config.seed, and
// writes periodic checkpoints plus loss.csv when config.out_dir is set.
TrainResult train(const Dataset& data, const TrainConfig& config, const Schedule& schedule,
                  Denoiser& denoiser, AdamState& adam, int start_iteration = 0,
                  uint64_t master_seed_for_checkpoint = 0);

}  // namespace rbdm
