#ifndef DXANN_DATA_HPP
#define DXANN_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dxann/tensor.hpp"

namespace dxann {

struct Sample {
    std::string id;
    Tensor features;                    // [D]
    int label = 0;                      // 0 or 1
    std::optional<Tensor> truth_mask;   // binary [D], planted ground truth
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t dim = 0;
    std::optional<std::pair<std::size_t, std::size_t>> spatial;  // (H, W)
    std::string split_tag;  // "train" | "test" | ""

    std::size_t size() const { return samples.size(); }
};

// Two interleaved half-circles in the plane, one per class, with isotropic
// Gaussian noise. Balanced up to one extra class-0 sample when n is odd.
Dataset gen_two_moons(std::size_t n, double noise_sigma, std::uint64_t seed);

// Grayscale images of uniform background noise in [0, sigma]; class-1
// images carry one Gaussian bump of amplitude a and scale r, centered at
// least r from every border. truth_mask marks pixels within 2r of the
// center. Pixels clipped to [0,1].
Dataset gen_blob_images(std::size_t n, std::size_t h, std::size_t w, std::size_t r,
                        double amplitude, double noise_sigma, std::uint64_t seed);

// Seeded shuffle, then prefix split. Exact partition.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  std::uint64_t seed);

// Rescale [0,255] features to [0,1]; optionally dequantize with uniform
// sub-step noise (training only).
Dataset preprocess(const Dataset& ds, bool dequantize, std::uint64_t seed);

// Directory layout: manifest.csv with header id,label,path (images, stored
// as P5 PGM) or id,label,f0..f{D-1} (flat vectors); optional masks/ of P5
// PGMs keyed by id.
void save_dataset(const Dataset& ds, const std::string& directory);
Dataset load_dataset(const std::string& directory);

}  // namespace dxann

#endif
