#pragma once

#include <string>

#include "fpd/image.hpp"

namespace fpd {

// Reads a raster image file (any format OpenCV decodes) into float RGB.
Image load_image(const std::string& path);

// Writes an image; the format follows the file extension (.png, .jpg, ...).
void save_image(const std::string& path, const Image& img);

}  // namespace fpd
