#pragma once

#include "edgetrace/vector.h"

#include <stdexcept>
#include <string>
#include <vector>

namespace edgetrace {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear RGB raster, row 0 at the top.
struct ImageBuffer {
    int width = 0, height = 0;
    std::vector<Rgb> pixels;

    ImageBuffer() = default;
    ImageBuffer(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h) {}

    Rgb &at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    const Rgb &at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    int size() const { return width * height; }
};

bool same_size(const ImageBuffer &a, const ImageBuffer &b);
bool all_finite(const ImageBuffer &img);
Rgb mean(const ImageBuffer &img);

// PFM: binary, little-endian, scanlines stored bottom-to-top.
void write_pfm(const std::string &path, const ImageBuffer &img);
ImageBuffer read_pfm(const std::string &path);

// 8-bit previews. Tone map is clamp + gamma 2.2.
void write_png(const std::string &path, const ImageBuffer &img);
// Signed preview of the first channel: red positive, blue negative, scaled by the max magnitude.
void write_signed_png(const std::string &path, const ImageBuffer &img);

} // namespace edgetrace
