#include "dxann/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dxann/netpbm.hpp"

namespace fs = std::filesystem;

namespace dxann {

namespace {

std::string sample_id(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
    return buf;
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void load_fail(const std::string& what) {
    throw std::runtime_error("load_dataset: " + what);
}

}  // namespace

Dataset gen_two_moons(std::size_t n, double noise_sigma, std::uint64_t seed) {
    if (n < 2)
        throw std::invalid_argument("gen_two_moons: need n >= 2");
    if (noise_sigma < 0.0)
        throw std::invalid_argument("gen_two_moons: noise sigma must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> theta(0.0, std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);

    Dataset ds;
    ds.dim = 2;
    std::size_t n0 = n / 2 + n % 2;
    for (std::size_t i = 0; i < n; ++i) {
        double th = theta(rng);
        int label = i < n0 ? 0 : 1;
        double x, y;
        if (label == 0) {
            x = std::cos(th);
            y = std::sin(th);
        } else {
            x = 1.0 - std::cos(th);
            y = 0.5 - std::sin(th);
        }
        if (noise_sigma > 0.0) {
            x += noise_sigma * noise(rng);
            y += noise_sigma * noise(rng);
        }
        ds.samples.push_back({sample_id("m", i), Tensor::vector({x, y}), label, {}});
    }
    return ds;
}

Dataset gen_blob_images(std::size_t n, std::size_t h, std::size_t w, std::size_t r,
                        double amplitude, double noise_sigma, std::uint64_t seed) {
    if (h < 8 || w < 8)
        throw std::invalid_argument("gen_blob_images: images must be at least 8x8");
    if (r < 1 || r > std::min(h, w) / 4)
        throw std::invalid_argument("gen_blob_images: blob radius " + std::to_string(r) +
                                    " does not fit in " + std::to_string(h) + "x" +
                                    std::to_string(w));
    if (amplitude <= 0.0)
        throw std::invalid_argument("gen_blob_images: amplitude must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> bg(0.0, noise_sigma);
    std::uniform_int_distribution<std::size_t> ci(r, h - 1 - r), cj(r, w - 1 - r);

    Dataset ds;
    ds.dim = h * w;
    ds.spatial = {{h, w}};
    std::size_t n0 = n / 2 + n % 2;
    for (std::size_t s = 0; s < n; ++s) {
        int label = s < n0 ? 0 : 1;
        Tensor img({h * w});
        if (noise_sigma > 0.0)
            for (std::size_t i = 0; i < img.size(); ++i) img[i] = bg(rng);
        Tensor mask({h * w});
        if (label == 1) {
            std::size_t bi = ci(rng), bj = cj(rng);
            double two_sigma2 = 2.0 * double(r) * double(r);
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    double di = double(i) - double(bi), dj = double(j) - double(bj);
                    double d2 = di * di + dj * dj;
                    img[i * w + j] += amplitude * std::exp(-d2 / two_sigma2);
                    if (d2 <= 4.0 * double(r) * double(r)) mask[i * w + j] = 1.0;
                }
        }
        for (std::size_t i = 0; i < img.size(); ++i)
            img[i] = std::clamp(img[i], 0.0, 1.0);
        ds.samples.push_back({sample_id("b", s), std::move(img), label, std::move(mask)});
    }
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: train fraction must be in (0,1)");
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_train = std::size_t(std::floor(double(ds.size()) * train_fraction));

    Dataset train, test;
    train.dim = test.dim = ds.dim;
    train.spatial = test.spatial = ds.spatial;
    train.split_tag = "train";
    test.split_tag = "test";
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_train ? train : test).samples.push_back(ds.samples[idx[i]]);
    return {std::move(train), std::move(test)};
}

Dataset preprocess(const Dataset& ds, bool dequantize, std::uint64_t seed) {
    double hi = 0.0;
    for (const Sample& s : ds.samples)
        for (std::size_t i = 0; i < s.features.size(); ++i)
            hi = std::max(hi, s.features[i]);
    double scale = hi > 1.0 ? 1.0 / 255.0 : 1.0;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset out = ds;
    for (Sample& s : out.samples)
        for (std::size_t i = 0; i < s.features.size(); ++i) {
            double v = s.features[i] * scale;
            if (dequantize) v = v * (255.0 / 256.0) + u(rng) / 256.0;
            s.features[i] = v;
        }
    return out;
}

void save_dataset(const Dataset& ds, const std::string& directory) {
    fs::create_directories(directory);
    std::ofstream manifest(fs::path(directory) / "manifest.csv", std::ios::binary);
    if (!manifest)
        throw std::runtime_error("save_dataset: cannot write manifest in " + directory);

    bool any_mask = false;
    for (const Sample& s : ds.samples)
        if (s.truth_mask) any_mask = true;
    if (any_mask) fs::create_directories(fs::path(directory) / "masks");

    if (ds.spatial) {
        auto [h, w] = *ds.spatial;
        manifest << "id,label,path\n";
        for (const Sample& s : ds.samples) {
            std::string name = s.id + ".pgm";
            GrayImage img{h, w, {}};
            img.pixels.resize(h * w);
            for (std::size_t i = 0; i < h * w; ++i)
                img.pixels[i] = std::uint8_t(
                    std::clamp(std::lround(s.features[i] * 255.0), 0L, 255L));
            write_pgm((fs::path(directory) / name).string(), img);
            if (s.truth_mask) {
                GrayImage m{h, w, {}};
                m.pixels.resize(h * w);
                for (std::size_t i = 0; i < h * w; ++i)
                    m.pixels[i] = (*s.truth_mask)[i] != 0.0 ? 255 : 0;
                write_pgm((fs::path(directory) / "masks" / name).string(), m);
            }
            manifest << s.id << "," << s.label << "," << name << "\n";
        }
    } else {
        manifest << "id,label";
        for (std::size_t i = 0; i < ds.dim; ++i) manifest << ",f" << i;
        manifest << "\n";
        for (const Sample& s : ds.samples) {
            manifest << s.id << "," << s.label;
            for (std::size_t i = 0; i < ds.dim; ++i)
                manifest << "," << fmt_real(s.features[i]);
            manifest << "\n";
        }
    }
}

Dataset load_dataset(const std::string& directory) {
    fs::path dir(directory);
    std::ifstream manifest(dir / "manifest.csv", std::ios::binary);
    if (!manifest)
        load_fail("missing manifest.csv in " + directory);

    std::string header;
    if (!std::getline(manifest, header))
        load_fail("empty manifest in " + directory);
    if (!header.empty() && header.back() == '\r') header.pop_back();

    bool image_layout = header == "id,label,path";
    Dataset ds;
    if (!image_layout) {
        if (header.rfind("id,label,f0", 0) != 0)
            load_fail("unrecognized manifest header '" + header + "'");
        ds.dim = std::size_t(std::count(header.begin(), header.end(), ',')) - 1;
    }

    std::string line;
    std::size_t lineno = 1;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 3)
            load_fail("malformed row " + std::to_string(lineno));
        Sample s;
        s.id = cells[0];
        if (cells[1] == "0") s.label = 0;
        else if (cells[1] == "1") s.label = 1;
        else load_fail("sample '" + s.id + "': label '" + cells[1] +
                       "' is not a binary label");

        if (image_layout) {
            fs::path img_path = dir / cells[2];
            if (!fs::exists(img_path))
                load_fail("sample '" + s.id + "': missing image file " + cells[2]);
            GrayImage img = read_pgm(img_path.string());
            if (ds.spatial) {
                if (img.height != ds.spatial->first || img.width != ds.spatial->second)
                    load_fail("sample '" + s.id + "': image size " +
                              std::to_string(img.height) + "x" + std::to_string(img.width) +
                              " differs from dataset shape");
            } else {
                ds.spatial = {{img.height, img.width}};
                ds.dim = img.height * img.width;
            }
            s.features = Tensor({ds.dim});
            for (std::size_t i = 0; i < ds.dim; ++i)
                s.features[i] = double(img.pixels[i]) / 255.0;
            fs::path mask_path = dir / "masks" / cells[2];
            if (fs::exists(mask_path)) {
                GrayImage m = read_pgm(mask_path.string());
                if (m.height * m.width != ds.dim)
                    load_fail("sample '" + s.id + "': mask size mismatch");
                Tensor mask({ds.dim});
                for (std::size_t i = 0; i < ds.dim; ++i)
                    mask[i] = m.pixels[i] > 0 ? 1.0 : 0.0;
                s.truth_mask = std::move(mask);
            }
        } else {
            if (cells.size() != ds.dim + 2)
                load_fail("sample '" + s.id + "': expected " + std::to_string(ds.dim) +
                          " features, got " + std::to_string(cells.size() - 2));
            s.features = Tensor({ds.dim});
            for (std::size_t i = 0; i < ds.dim; ++i) {
                try {
                    s.features[i] = std::stod(cells[i + 2]);
                } catch (const std::logic_error&) {
                    load_fail("sample '" + s.id + "': bad value '" + cells[i + 2] + "'");
                }
            }
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace dxann
