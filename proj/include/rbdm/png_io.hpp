#pragma once

#include <string>
#include <vector>

#include "rbdm/image.hpp"

namespace rbdm {

// 8-bit PNG persistence. On disk: 1- or 3-channel, 8 bits per sample.
// In memory: unit range v/255 or signed range 2*(v/255) - 1.

Image read_image_unit(const std::string& path);    // values in [0, 1]
Image read_image_signed(const std::string& path);  // values in [-1, 1]

void write_image_unit(const std::string& path, const Image& img);
void write_image_signed(const std::string& path, const Image& img);

// Sorted list of *.png filenames (not paths) directly inside dir.
std::vector<std::string> list_pngs(const std::string& dir);

}  // namespace rbdm
