#include "dxann/heatmap.hpp"

#include <cmath>
#include <stdexcept>

namespace dxann {

namespace {
std::uint8_t round_half_up(double v) {
    return std::uint8_t(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}
}  // namespace

std::array<std::uint8_t, 3> heat_color(double score) {
    if (!(score >= 0.0 && score <= 1.0))
        throw std::invalid_argument("heat_color: score must be in [0,1]");
    return {round_half_up(128.0 + 127.0 * score),
            round_half_up(255.0 * score), 0};
}

RgbImage render_heatmap(const Tensor& normalized, std::size_t h, std::size_t w) {
    if (normalized.size() != h * w)
        throw std::invalid_argument("render_heatmap: score length " +
                                    std::to_string(normalized.size()) +
                                    " != " + std::to_string(h) + "x" + std::to_string(w));
    RgbImage img{h, w, {}};
    img.pixels.resize(3 * h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
        auto c = heat_color(normalized[i]);
        img.pixels[3 * i] = c[0];
        img.pixels[3 * i + 1] = c[1];
        img.pixels[3 * i + 2] = c[2];
    }
    return img;
}

RgbImage render_overlay(const Tensor& normalized, const GrayImage& source,
                        double alpha) {
    if (normalized.size() != source.height * source.width)
        throw std::invalid_argument("render_overlay: score/image size mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("render_overlay: alpha must be in [0,1]");
    RgbImage img{source.height, source.width, {}};
    img.pixels.resize(3 * normalized.size());
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        auto heat = heat_color(normalized[i]);
        double gray = double(source.pixels[i]);
        for (std::size_t ch = 0; ch < 3; ++ch)
            img.pixels[3 * i + ch] =
                round_half_up(alpha * double(heat[ch]) + (1.0 - alpha) * gray);
    }
    return img;
}

}  // namespace dxann
