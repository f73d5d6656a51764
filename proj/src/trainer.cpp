#include "rbdm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "rbdm/checkpoint.hpp"
#include "rbdm/png_io.hpp"
#include "parallel.hpp"

namespace rbdm {

namespace fs = std::filesystem;

Dataset load_dataset(const std::string& root) {
    const std::string clear_dir = (fs::path(root) / "clear").string();
    const std::string hazy_dir = (fs::path(root) / "hazy").string();
    const std::vector<std::string> clear_names = list_pngs(clear_dir);
    const std::vector<std::string> hazy_names = list_pngs(hazy_dir);

    const std::set<std::string> cs(clear_names.begin(), clear_names.end());
    const std::set<std::string> hs(hazy_names.begin(), hazy_names.end());
    std::string complaints;
    for (const auto& n : clear_names) {
        if (!hs.count(n)) complaints += "  missing hazy/" + n + "\n";
    }
    for (const auto& n : hazy_names) {
        if (!cs.count(n)) complaints += "  missing clear/" + n + "\n";
    }
    if (!complaints.empty()) {
        throw std::runtime_error("dataset " + root + " is misaligned:\n" + complaints);
    }
    if (clear_names.empty()) {
        throw std::runtime_error("dataset " + root + " is empty (no .png pairs)");
    }

    Dataset data;
    for (const auto& n : clear_names) {
        Image c = read_image_signed((fs::path(clear_dir) / n).string());
        Image h = read_image_signed((fs::path(hazy_dir) / n).string());
        if (!c.same_shape(h)) {
            throw std::runtime_error("dataset pair " + n + " has mismatched shapes");
        }
        data.names.push_back(n);
        data.clear.push_back(std::move(c));
        data.hazy.push_back(std::move(h));
    }
    return data;
}

std::vector<PatchPair> sample_patch_pairs(const Image& x0, const Image& y0, int p,
                                          int n, Rng& rng) {
    require_same_shape(x0, y0, "sample_patch_pairs");
    if (p < 1 || p > x0.height || p > x0.width) {
        throw std::invalid_argument("sample_patch_pairs: patch size " + std::to_string(p) +
                                    " does not fit a " + std::to_string(x0.height) + "x" +
                                    std::to_string(x0.width) + " image");
    }
    std::vector<PatchPair> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int row = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(x0.height - p + 1)));
        const int col = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(x0.width - p + 1)));
        out.push_back({crop(x0, row, col, p, p), crop(y0, row, col, p, p), row, col});
    }
    return out;
}

std::pair<int, int> sample_timesteps(int T, Rng& rng, TimestepPolicy policy) {
    if (T < 1) throw std::invalid_argument("sample_timesteps: T must be >= 1");
    (void)policy;  // single policy for now
    int t_x = 0, t_y = 0;
    do {
        t_x = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(T) + 1));
        t_y = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(T) + 1));
    } while (t_x == 0 && t_y == 0);
    return {t_x, t_y};
}

double l1_pair_loss(const DenoiserEstimate& est, const Image& x0, const Image& y0) {
    require_same_shape(est.x0_hat, x0, "l1_pair_loss");
    require_same_shape(est.y0_hat, y0, "l1_pair_loss");
    double acc = 0.0;
    for (size_t i = 0; i < x0.data.size(); ++i) {
        acc += std::fabs(est.x0_hat.data[i] - x0.data[i]);
        acc += std::fabs(est.y0_hat.data[i] - y0.data[i]);
    }
    return acc / (2.0 * static_cast<double>(x0.data.size()));
}

void AdamState::update(std::vector<float>& params, const std::vector<double>& grad, double lr) {
    if (params.size() != m.size() || grad.size() != m.size()) {
        throw std::invalid_argument("AdamState::update: size mismatch");
    }
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
        const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        params[i] = static_cast<float>(static_cast<double>(params[i]) -
                                       lr * mhat / (std::sqrt(vhat) + eps));
    }
}

double train_step(Denoiser& denoiser, AdamState& adam, const std::vector<PatchPair>& batch,
                  const Schedule& schedule, double learning_rate, Rng& rng,
                  TimestepPolicy policy, bool grad_clip, double grad_clip_norm, int threads) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const int n = static_cast<int>(batch.size());
    const size_t np = denoiser.param_count();

    // Every item gets its own substream so the batch can be processed in
    // parallel without changing any draw.
    std::vector<uint64_t> item_seeds(static_cast<size_t>(n));
    for (auto& s : item_seeds) s = rng.next_u64();

    const int chunks = std::max(1, std::min(threads, n));
    std::vector<std::vector<float>> chunk_grads(static_cast<size_t>(chunks));
    std::vector<double> item_losses(static_cast<size_t>(n), 0.0);

    parallel_chunks(n, threads, [&](int b, int e, int ci) {
        auto& g = chunk_grads[static_cast<size_t>(ci)];
        g.assign(np, 0.0f);
        for (int k = b; k < e; ++k) {
            const PatchPair& pair = batch[static_cast<size_t>(k)];
            Rng item_rng(item_seeds[static_cast<size_t>(k)]);
            const auto [t_x, t_y] = sample_timesteps(schedule.T, item_rng, policy);
            DualState state;
            state.x = forward_marginal_x(pair.x_patch, pair.y_patch, schedule, t_x, item_rng);
            state.y = forward_marginal_y(pair.y_patch, pair.x_patch, schedule, t_y, item_rng);
            state.t_x = t_x;
            state.t_y = t_y;
            item_losses[static_cast<size_t>(k)] =
                denoiser.loss_and_grad(state, pair.x_patch, pair.y_patch, g);
        }
    });

    // Reduce gradients in chunk order, then average over the batch.
    std::vector<double> grad(np, 0.0);
    for (const auto& g : chunk_grads) {
        if (g.empty()) continue;
        for (size_t i = 0; i < np; ++i) grad[i] += static_cast<double>(g[i]);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv_n;

    // Sorted reduction makes the reported loss independent of batch order.
    std::vector<double> sorted = item_losses;
    std::sort(sorted.begin(), sorted.end());
    double loss = 0.0;
    for (double l : sorted) loss += l;
    loss *= inv_n;

    if (!std::isfinite(loss)) {
        throw std::runtime_error("train_step: non-finite loss " + std::to_string(loss) +
                                 " (diverged or invalid input)");
    }

    if (grad_clip) {
        double sq = 0.0;
        for (double g : grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > grad_clip_norm && norm > 0.0) {
            const double scale = grad_clip_norm / norm;
            for (double& g : grad) g *= scale;
        }
    }

    adam.update(denoiser.params(), grad, learning_rate);
    return loss;
}

TrainResult train(const Dataset& data, const TrainConfig& config, const Schedule& schedule,
                  Denoiser& denoiser, AdamState& adam, int start_iteration,
                  uint64_t master_seed_for_checkpoint) {
    if (data.clear.empty()) throw std::invalid_argument("train: empty dataset");
    if (config.iterations < start_iteration) {
        throw std::invalid_argument("train: iterations < start_iteration");
    }
    for (size_t i = 0; i < data.clear.size(); ++i) {
        if (config.patch_size > data.clear[i].height || config.patch_size > data.clear[i].width) {
            throw std::invalid_argument("train: patch size " + std::to_string(config.patch_size) +
                                        " does not fit image " + data.names[i]);
        }
    }
    const uint64_t ckpt_seed =
        master_seed_for_checkpoint ? master_seed_for_checkpoint : config.seed;

    const bool to_disk = !config.out_dir.empty();
    if (to_disk) fs::create_directories(config.out_dir);

    auto write_ckpt = [&](const std::string& name, int64_t iter) {
        Checkpoint c;
        c.T = schedule.T;
        c.kappa = schedule.kappa;
        c.gamma = schedule.gamma;
        c.denoiser = denoiser.config();
        c.iteration = iter;
        c.master_seed = ckpt_seed;
        c.params = denoiser.params();
        c.has_optimizer_state = true;
        c.adam_m = adam.m;
        c.adam_v = adam.v;
        const std::string path = (fs::path(config.out_dir) / name).string();
        save_checkpoint(path, c);
        return path;
    };

    TrainResult result;
    for (int it = start_iteration; it < config.iterations; ++it) {
        // Per-iteration stream derived from (seed, iteration index) alone, so
        // a resumed run replays the remaining iterations exactly.
        Rng iter_rng(Rng::mix(config.seed, 0x7261696eULL, static_cast<uint64_t>(it)));

        std::vector<PatchPair> batch;
        batch.reserve(static_cast<size_t>(config.images_per_batch) * config.patches_per_image);
        for (int i = 0; i < config.images_per_batch; ++i) {
            const size_t idx = iter_rng.uniform_int(data.clear.size());
            auto pairs = sample_patch_pairs(data.clear[idx], data.hazy[idx], config.patch_size,
                                            config.patches_per_image, iter_rng);
            for (auto& p : pairs) batch.push_back(std::move(p));
        }

        const double loss =
            train_step(denoiser, adam, batch, schedule, config.learning_rate, iter_rng,
                       config.timestep_policy, config.grad_clip, config.grad_clip_norm,
                       config.threads);
        result.losses.push_back(loss);
        ++result.iterations_run;

        if (to_disk && config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0 &&
            it + 1 < config.iterations) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_%06d.ckpt", it + 1);
            write_ckpt(name, it + 1);
        }
    }

    if (to_disk) {
        result.final_checkpoint = write_ckpt("checkpoint_final.ckpt", config.iterations);
        std::ofstream csv(fs::path(config.out_dir) / "loss.csv");
        csv << "iteration,loss\n";
        char buf[64];
        for (size_t i = 0; i < result.losses.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g\n",
                          static_cast<size_t>(start_iteration) + i + 1, result.losses[i]);
            csv << buf;
        }
    }
    return result;
}

}  // namespace rbdm
