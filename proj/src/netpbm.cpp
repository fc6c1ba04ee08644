#include "dxann/netpbm.hpp"

#include <fstream>
#include <stdexcept>

namespace dxann {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

// Next whitespace-delimited token, skipping '#' comments to end of line.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            tok.push_back(char(c));
            while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#')
                tok.push_back(char(in.get()));
            return tok;
        }
    }
    return tok;
}

void read_header(std::istream& in, const std::string& path, const char* magic,
                 std::size_t& w, std::size_t& h) {
    std::string m = next_token(in);
    if (m != magic) fail(path, "bad magic '" + m + "' (expected " + magic + ")");
    try {
        w = std::stoul(next_token(in));
        h = std::stoul(next_token(in));
        std::size_t maxval = std::stoul(next_token(in));
        if (maxval != 255) fail(path, "unsupported maxval " + std::to_string(maxval));
    } catch (const std::logic_error&) {
        fail(path, "malformed header");
    }
    // single whitespace byte separates header and raster
    in.get();
}

}  // namespace

void write_pgm(const std::string& path, const GrayImage& img) {
    if (img.pixels.size() != img.height * img.width)
        fail(path, "pixel count does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              std::streamsize(img.pixels.size()));
    if (!out) fail(path, "write failed");
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    GrayImage img;
    read_header(in, path, "P5", img.width, img.height);
    img.pixels.resize(img.height * img.width);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
    if (std::size_t(in.gcount()) != img.pixels.size()) fail(path, "truncated raster");
    return img;
}

void write_ppm(const std::string& path, const RgbImage& img) {
    if (img.pixels.size() != 3 * img.height * img.width)
        fail(path, "pixel count does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              std::streamsize(img.pixels.size()));
    if (!out) fail(path, "write failed");
}

RgbImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    RgbImage img;
    read_header(in, path, "P6", img.width, img.height);
    img.pixels.resize(3 * img.height * img.width);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
    if (std::size_t(in.gcount()) != img.pixels.size()) fail(path, "truncated raster");
    return img;
}

}  // namespace dxann
