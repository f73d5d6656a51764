#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbdm {

// Dense H x W x C image, row-major with interleaved channels.
// Diffusion code works in the signed range [-1, 1]; the haze synthesizer and
// the metrics work in the unit range [0, 1]. Conversions happen at module
// boundaries (see unit_from_signed / signed_from_unit below).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {}

    size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    double& at(int r, int c, int ch) {
        return data[(static_cast<size_t>(r) * width + c) * channels + ch];
    }
    double at(int r, int c, int ch) const {
        return data[(static_cast<size_t>(r) * width + c) * channels + ch];
    }
};

// Throws std::invalid_argument when shapes differ.
void require_same_shape(const Image& a, const Image& b, const std::string& where);

// True when every element is finite.
bool all_finite(const Image& img);

// Elementwise clamp to [lo, hi].
Image clip(const Image& img, double lo, double hi);

// Range conversions between the unit domain [0,1] and the signed domain [-1,1].
Image signed_from_unit(const Image& img);
Image unit_from_signed(const Image& img);

// Aligned crop of a p_rows x p_cols window with top-left corner (row, col).
Image crop(const Image& img, int row, int col, int p_rows, int p_cols);

double max_abs_diff(const Image& a, const Image& b);

}  // namespace rbdm
