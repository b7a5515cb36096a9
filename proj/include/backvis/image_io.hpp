#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "backvis/rng.hpp"
#include "backvis/tensor.hpp"
#include "backvis/visualize.hpp"

namespace backvis {

/// Binary netpbm writer: P5 for one channel, P6 for three, maxval 255.
/// Values are min-max rescaled through normalize_for_display before
/// quantization, so maps of any range dump cleanly.
inline void write_image(const Tensor& map, const std::string& path) {
    if (map.rank() != 3 || (map.shape[2] != 1 && map.shape[2] != 3))
        throw std::invalid_argument("write_image: need [H,W,1] or [H,W,3], got " + shape_str(map.shape));
    const std::size_t h = map.shape[0], w = map.shape[1], c = map.shape[2];
    Tensor scaled = normalize_for_display(map);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_image: cannot open " + path);
    os << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    for (std::size_t i = 0; i < scaled.numel(); ++i) {
        const unsigned char b = static_cast<unsigned char>(std::lround(std::clamp(scaled.data[i], 0.0, 1.0) * 255.0));
        os.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!os) throw std::runtime_error("write_image: write failed for " + path);
}

namespace detail {

inline int pnm_next_int(std::istream& is, const std::string& path) {
    // skips whitespace and '#' comments per the netpbm spec
    for (;;) {
        int ch = is.peek();
        if (ch == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(ch)) {
            is.get();
        } else {
            break;
        }
    }
    int v = -1;
    is >> v;
    if (!is) throw std::runtime_error("read_image: malformed header in " + path);
    return v;
}

}  // namespace detail

/// Reads binary PGM (P5) or PPM (P6) with maxval 255; pixel values scale to
/// [0,1]. Returns [H,W,1] or [H,W,3].
inline Tensor read_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_image: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5" && magic != "P6")
        throw std::runtime_error("read_image: " + path + " is not binary PGM/PPM (magic '" + magic + "')");
    const std::size_t c = magic == "P5" ? 1 : 3;
    const int w = detail::pnm_next_int(is, path);
    const int h = detail::pnm_next_int(is, path);
    const int maxval = detail::pnm_next_int(is, path);
    if (w < 1 || h < 1) throw std::runtime_error("read_image: bad dimensions in " + path);
    if (maxval != 255)
        throw std::runtime_error("read_image: only maxval 255 is supported, " + path + " has " + std::to_string(maxval) +
                                 (maxval > 255 ? " (16-bit data)" : ""));
    is.get();  // single whitespace after maxval
    Tensor out({static_cast<std::size_t>(h), static_cast<std::size_t>(w), c});
    std::vector<unsigned char> buf(out.numel());
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("read_image: truncated pixel data in " + path);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = buf[i] / 255.0;
    return out;
}

/// Built-in photograph-like texture: smooth intensity blobs mixed with seeded
/// per-pixel grain. The grain decorrelates neighboring patches the way real
/// photographs do at patch scale.
inline Tensor texture_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53); };
    Tensor img({h, w, c});
    for (int blob = 0; blob < 12; ++blob) {
        const double cy = uni(0, h), cx = uni(0, w), s = uni(h / 8.0, h / 3.0);
        double amp[3] = {uni(0.3, 1.0), uni(0.3, 1.0), uni(0.3, 1.0)};
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double g = std::exp(-((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (2 * s * s));
                for (std::size_t ch = 0; ch < c; ++ch) img.data[(y * w + x) * c + ch] += amp[ch % 3] * g;
            }
    }
    Tensor smooth = rescale_unit(img);
    for (std::size_t i = 0; i < smooth.numel(); ++i) smooth.data[i] = 0.4 * smooth.data[i] + 0.6 * uni(0.0, 1.0);
    return smooth;
}

/// Vertical intensity step at the given column; handy for edge-filter tests.
inline Tensor step_image(std::size_t h, std::size_t w, std::size_t step_col, std::size_t c = 1) {
    Tensor img({h, w, c});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = step_col; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) img.data[(y * w + x) * c + ch] = 1.0;
    return img;
}

/// Linear vertical edge detector: each pixel minus its left neighbor
/// (channel-wise); leftmost column maps to 0.
inline Tensor left_difference(const Tensor& img) {
    if (img.rank() != 3) throw std::invalid_argument("left_difference: need [H,W,C], got " + shape_str(img.shape));
    const std::size_t h = img.shape[0], w = img.shape[1], c = img.shape[2];
    Tensor out(img.shape);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 1; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.data[(y * w + x) * c + ch] = img.data[(y * w + x) * c + ch] - img.data[(y * w + x - 1) * c + ch];
    return out;
}

}  // namespace backvis
