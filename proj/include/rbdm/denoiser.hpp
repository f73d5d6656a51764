#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rbdm/diffusion.hpp"
#include "rbdm/image.hpp"

namespace rbdm {

// Encoder-decoder denoiser f(x_{t_x}, y_{t_y}, t_x, t_y) -> (x0_hat, y0_hat).
// The two states are channel-concatenated at the input; one head emits both
// clean estimates. One weight set serves dehazing and hazification.
struct DenoiserConfig {
    int image_channels = 3;
    int base_channels = 32;
    std::vector<int> channel_multipliers = {1, 2, 4};
    int res_blocks_per_scale = 1;
    int timestep_embed_dim = 64;

    int scales() const { return static_cast<int>(channel_multipliers.size()); }
    // Input sizes are padded internally to a multiple of this.
    int size_divisor() const { return 1 << (scales() - 1); }

    void validate() const;  // throws std::invalid_argument
    bool operator==(const DenoiserConfig&) const = default;
};

// Concatenated sinusoidal embeddings of the two raw timestep indices,
// dim/2 values each; swapping (t_x, t_y) swaps the two halves.
std::vector<double> embed_timesteps(int t_x, int t_y, int dim);

// Name, offset, and length of one parameter block inside the flat vector.
struct ParamBlockInfo {
    std::string name;
    size_t offset = 0;
    size_t count = 0;
};

template <class Scalar>
class DenoiserT {
public:
    explicit DenoiserT(DenoiserConfig cfg);
    ~DenoiserT();
    DenoiserT(const DenoiserT&);
    DenoiserT& operator=(const DenoiserT&);
    DenoiserT(DenoiserT&&) noexcept;
    DenoiserT& operator=(DenoiserT&&) noexcept;

    const DenoiserConfig& config() const { return cfg_; }
    size_t param_count() const;
    // Definition order of the blocks fixes the checkpoint payload order.
    std::vector<ParamBlockInfo> param_blocks() const;

    std::vector<Scalar>& params() { return params_; }
    const std::vector<Scalar>& params() const { return params_; }
    void set_params(const std::vector<Scalar>& p);

    // Seeded He-normal init; the output head starts at zero.
    void init_params(uint64_t seed);

    // Pure function of (state, params). Accepts any input size; smaller or
    // non-divisible sizes are replicate-padded internally and cropped back.
    DenoiserEstimate denoise(const DualState& state) const;

    // Mean absolute error of the predicted pair against the clean pair,
    // averaged over both outputs and all pixels. Accumulates d(loss)/d(params)
    // into `grad` (length param_count). Returns the loss.
    double loss_and_grad(const DualState& state, const Image& x0_target,
                         const Image& y0_target, std::vector<Scalar>& grad,
                         DenoiserEstimate* estimate_out = nullptr) const;

private:
    struct Impl;
    DenoiserConfig cfg_;
    std::vector<Scalar> params_;
    std::unique_ptr<Impl> impl_;
};

using Denoiser = DenoiserT<float>;

extern template class DenoiserT<float>;
extern template class DenoiserT<double>;

}  // namespace rbdm
