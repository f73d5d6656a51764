#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbdm/denoiser.hpp"

namespace rbdm {

// Self-describing weight snapshot: a length-prefixed JSON header carrying the
// schedule, architecture, iteration and master seed, followed by the flat
// float32 little-endian weight payload in parameter-block order. Training
// checkpoints append the two Adam moment vectors so runs can resume exactly.
struct Checkpoint {
    int format_version = 1;
    int T = 15;
    double kappa = 2.0;
    double gamma = 1.0;
    DenoiserConfig denoiser;
    int64_t iteration = 0;
    uint64_t master_seed = 0;
    std::vector<float> params;
    bool has_optimizer_state = false;
    std::vector<float> adam_m;
    std::vector<float> adam_v;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws std::runtime_error with a header diagnostic on any malformed input.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rbdm
