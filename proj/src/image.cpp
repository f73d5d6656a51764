#include "rbdm/image.hpp"

#include <algorithm>
#include <cmath>

namespace rbdm {

void require_same_shape(const Image& a, const Image& b, const std::string& where) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(
            where + ": shape mismatch (" + std::to_string(a.height) + "x" +
            std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
            std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
            std::to_string(b.channels) + ")");
    }
}

bool all_finite(const Image& img) {
    for (double v : img.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Image clip(const Image& img, double lo, double hi) {
    Image out = img;
    for (double& v : out.data) v = std::min(std::max(v, lo), hi);
    return out;
}

Image signed_from_unit(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = 2.0 * v - 1.0;
    return out;
}

Image unit_from_signed(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = (v + 1.0) * 0.5;
    return out;
}

Image crop(const Image& img, int row, int col, int p_rows, int p_cols) {
    if (row < 0 || col < 0 || row + p_rows > img.height || col + p_cols > img.width) {
        throw std::invalid_argument("crop: window out of bounds");
    }
    Image out(p_rows, p_cols, img.channels);
    for (int r = 0; r < p_rows; ++r) {
        const double* src = &img.data[(static_cast<size_t>(row + r) * img.width + col) * img.channels];
        double* dst = &out.data[static_cast<size_t>(r) * p_cols * img.channels];
        std::copy(src, src + static_cast<size_t>(p_cols) * img.channels, dst);
    }
    return out;
}

double max_abs_diff(const Image& a, const Image& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    }
    return m;
}

}  // namespace rbdm
