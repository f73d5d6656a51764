#include "rbdm/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace rbdm {

namespace {

Image unit_from_mat(const cv::Mat& m) {
    if (m.empty()) throw std::runtime_error("png: decode produced an empty image");
    if (m.depth() != CV_8U) throw std::runtime_error("png: only 8-bit images are supported");
    const int ch = m.channels();
    if (ch != 1 && ch != 3) throw std::runtime_error("png: expected 1 or 3 channels");
    Image img(m.rows, m.cols, ch);
    for (int r = 0; r < m.rows; ++r) {
        const unsigned char* row = m.ptr<unsigned char>(r);
        for (int c = 0; c < m.cols; ++c) {
            for (int k = 0; k < ch; ++k) {
                // OpenCV loads BGR; flip to RGB.
                const int src_k = ch == 3 ? 2 - k : k;
                img.at(r, c, k) = row[c * ch + src_k] / 255.0;
            }
        }
    }
    return img;
}

cv::Mat mat_from_unit(const Image& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw std::invalid_argument("png: expected 1 or 3 channels");
    }
    cv::Mat m(img.height, img.width, img.channels == 3 ? CV_8UC3 : CV_8UC1);
    for (int r = 0; r < img.height; ++r) {
        unsigned char* row = m.ptr<unsigned char>(r);
        for (int c = 0; c < img.width; ++c) {
            for (int k = 0; k < img.channels; ++k) {
                const int dst_k = img.channels == 3 ? 2 - k : k;
                const double v = std::min(std::max(img.at(r, c, k), 0.0), 1.0);
                row[c * img.channels + dst_k] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
    }
    return m;
}

}  // namespace

Image read_image_unit(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("png: cannot read " + path);
    if (m.channels() == 4) {
        // Drop alpha.
        cv::Mat rgb;
        const int from_to[] = {0, 0, 1, 1, 2, 2};
        rgb.create(m.rows, m.cols, CV_8UC3);
        cv::mixChannels(&m, 1, &rgb, 1, from_to, 3);
        m = rgb;
    }
    return unit_from_mat(m);
}

Image read_image_signed(const std::string& path) {
    return signed_from_unit(read_image_unit(path));
}

void write_image_unit(const std::string& path, const Image& img) {
    if (!cv::imwrite(path, mat_from_unit(img))) {
        throw std::runtime_error("png: cannot write " + path);
    }
}

void write_image_signed(const std::string& path, const Image& img) {
    write_image_unit(path, unit_from_signed(img));
}

std::vector<std::string> list_pngs(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") {
            names.push_back(e.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace rbdm
