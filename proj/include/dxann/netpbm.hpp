#ifndef DXANN_NETPBM_HPP
#define DXANN_NETPBM_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace dxann {

// 8-bit grayscale image, row-major.
struct GrayImage {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> pixels;
};

// 8-bit RGB image, row-major interleaved.
struct RgbImage {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> pixels;  // 3 * height * width
};

// Binary PGM (P5) and PPM (P6), maxval 255. Readers accept '#' comments
// in the header; writers emit a minimal header.
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);
void write_ppm(const std::string& path, const RgbImage& img);
RgbImage read_ppm(const std::string& path);

}  // namespace dxann

#endif
