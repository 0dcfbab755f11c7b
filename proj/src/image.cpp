#include "edgetrace/image.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace edgetrace {

bool same_size(const ImageBuffer &a, const ImageBuffer &b) { return a.width == b.width && a.height == b.height; }

bool all_finite(const ImageBuffer &img) {
    return std::all_of(img.pixels.begin(), img.pixels.end(), [](const Rgb &c) { return is_finite(c); });
}

Rgb mean(const ImageBuffer &img) {
    Rgb sum;
    for (const auto &c : img.pixels) {
        sum += c;
    }
    return img.size() > 0 ? sum / img.size() : sum;
}

namespace {

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return __builtin_bswap32(v);
    }
    return v;
}

} // namespace

void write_pfm(const std::string &path, const ImageBuffer &img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ImageError(path + ": cannot open for writing");
    }
    out << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    std::vector<std::uint32_t> row(3 * static_cast<std::size_t>(img.width));
    for (int y = img.height - 1; y >= 0; y--) {
        for (int x = 0; x < img.width; x++) {
            const auto &c = img.at(x, y);
            for (int k = 0; k < 3; k++) {
                auto f = static_cast<float>(c[k]);
                row[3 * x + k] = to_little(std::bit_cast<std::uint32_t>(f));
            }
        }
        out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
    if (!out) {
        throw ImageError(path + ": write failed");
    }
}

ImageBuffer read_pfm(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ImageError(path + ": cannot open image");
    }
    std::string magic;
    int w = 0, h = 0;
    double scale = 0;
    in >> magic >> w >> h >> scale;
    if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0) {
        throw ImageError(path + ": not a PFM file");
    }
    in.get(); // single whitespace byte before the raster
    auto channels = magic == "PF" ? 3 : 1;
    auto little = scale < 0;
    std::vector<std::uint32_t> raw(static_cast<std::size_t>(w) * h * channels);
    in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!in) {
        throw ImageError(path + ": truncated PFM raster");
    }
    auto swap = little != (std::endian::native == std::endian::little);
    ImageBuffer img(w, h);
    for (int row = 0; row < h; row++) {
        auto y = h - 1 - row;
        for (int x = 0; x < w; x++) {
            Rgb c;
            for (int k = 0; k < 3; k++) {
                auto bits = raw[(static_cast<std::size_t>(row) * w + x) * channels + (channels == 3 ? k : 0)];
                if (swap) {
                    bits = __builtin_bswap32(bits);
                }
                c[k] = std::bit_cast<float>(bits);
            }
            img.at(x, y) = c;
        }
    }
    return img;
}

namespace {

void write_rgb8(const std::string &path, int width, int height, const std::vector<std::uint8_t> &data) {
    std::unique_ptr<FILE, int (*)(FILE *)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) {
        throw ImageError(path + ": cannot open for writing");
    }
    auto png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    auto info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageError(path + ": libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError(path + ": PNG encode failed");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; y++) {
        png_write_row(png, const_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::uint8_t to_byte(Real v) {
    v = std::clamp<Real>(v, 0, 1);
    return static_cast<std::uint8_t>(std::lround(v * 255));
}

} // namespace

void write_png(const std::string &path, const ImageBuffer &img) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(img.size()) * 3);
    for (int i = 0; i < img.size(); i++) {
        for (int k = 0; k < 3; k++) {
            auto v = std::max<Real>(0, img.pixels[i][k]);
            data[3 * i + k] = to_byte(std::pow(v, 1 / 2.2));
        }
    }
    write_rgb8(path, img.width, img.height, data);
}

void write_signed_png(const std::string &path, const ImageBuffer &img) {
    Real scale = 0;
    for (const auto &c : img.pixels) {
        scale = std::max(scale, std::abs(c.x));
    }
    std::vector<std::uint8_t> data(static_cast<std::size_t>(img.size()) * 3);
    for (int i = 0; i < img.size(); i++) {
        auto v = scale > 0 ? img.pixels[i].x / scale : 0;
        data[3 * i] = to_byte(std::pow(std::max<Real>(0, v), 1 / 2.2));
        data[3 * i + 1] = 0;
        data[3 * i + 2] = to_byte(std::pow(std::max<Real>(0, -v), 1 / 2.2));
    }
    write_rgb8(path, img.width, img.height, data);
}

} // namespace edgetrace
