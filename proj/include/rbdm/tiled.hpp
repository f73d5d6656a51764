#pragma once

#include <utility>
#include <vector>

#include "rbdm/diffusion.hpp"
#include "rbdm/image.hpp"
#include "rbdm/rng.hpp"
#include "rbdm/schedule.hpp"

namespace rbdm {

// Overlapping window layout for size-agnostic inference: p x p windows at
// multiples of the stride r, with the last origin per axis clamped so the
// final window ends exactly on the image boundary.
struct PatchGrid {
    int p = 0;
    int r = 0;
    int height = 0;
    int width = 0;
    std::vector<std::pair<int, int>> offsets;  // (row, col), row-major, unique
};

PatchGrid build_grid(int height, int width, int p, int r);

// Per-pixel window membership count of a grid ("mask M"). Every entry is
// >= 1 for a valid grid.
std::vector<int> coverage_counts(const PatchGrid& grid);

// One fused denoiser evaluation: run the denoiser on every window crop of
// the dual state, accumulate the clean estimates into full-size sums, and
// divide by the coverage count. Window results merge in grid order, so the
// output does not depend on the thread count.
DenoiserEstimate fused_denoise(const DualState& state, const PatchGrid& grid,
                               const DenoiseFn& denoiser, int threads = 1);

// Reverse sampling where every denoiser evaluation is replaced by
// fused_denoise over the grid; the reverse update itself acts on the
// full-size image with one noise draw per step. A grid with a single
// window reproduces the untiled sampler bitwise.
Image tiled_sample(const Image& observation, Direction direction, const Schedule& s,
                   const DenoiseFn& denoiser, int p, int r, Rng& rng,
                   const SampleOptions& opts = {}, SampleLog* log = nullptr,
                   int threads = 1);

}  // namespace rbdm
