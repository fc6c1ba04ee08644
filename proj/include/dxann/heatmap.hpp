#ifndef DXANN_HEATMAP_HPP
#define DXANN_HEATMAP_HPP

#include <array>

#include "dxann/netpbm.hpp"
#include "dxann/tensor.hpp"

namespace dxann {

// Dark-red to bright-yellow ramp: 0 -> (128,0,0), 1 -> (255,255,0),
// linear interpolation with round-half-up. Monotone in R and G.
std::array<std::uint8_t, 3> heat_color(double score);

RgbImage render_heatmap(const Tensor& normalized, std::size_t h, std::size_t w);

// out = round(alpha*heat + (1-alpha)*gray), per channel.
RgbImage render_overlay(const Tensor& normalized, const GrayImage& source,
                        double alpha = 0.5);

}  // namespace dxann

#endif
