#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dxann/data.hpp"
#include "dxann/netpbm.hpp"

namespace fs = std::filesystem;
using namespace dxann;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("dxann_test_") + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("two moons: noiseless points lie on their circles") {
    Dataset ds = gen_two_moons(200, 0.0, 3);
    CHECK(ds.dim == 2);
    std::size_t n0 = 0, n1 = 0;
    for (const Sample& s : ds.samples) {
        double x = s.features[0], y = s.features[1];
        if (s.label == 0) {
            ++n0;
            CHECK(std::abs(x * x + y * y - 1.0) <= 1e-12);
        } else {
            ++n1;
            CHECK(std::abs((x - 1) * (x - 1) + (y - 0.5) * (y - 0.5) - 1.0) <= 1e-12);
        }
    }
    CHECK(n0 == 100);
    CHECK(n1 == 100);
}

TEST_CASE("two moons: determinism, odd counts, contract errors") {
    Dataset a = gen_two_moons(51, 0.2, 9);
    Dataset b = gen_two_moons(51, 0.2, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].features[0] == b.samples[i].features[0]);
        CHECK(a.samples[i].features[1] == b.samples[i].features[1]);
    }
    std::size_t n0 = 0;
    for (const Sample& s : a.samples) n0 += s.label == 0;
    CHECK(n0 == 26);  // extra sample goes to class 0
    CHECK_THROWS_AS(gen_two_moons(100, -0.1, 0), std::invalid_argument);
    CHECK_THROWS_AS(gen_two_moons(1, 0.1, 0), std::invalid_argument);
}

TEST_CASE("blob images: masks, brightest pixel, class means") {
    Dataset ds = gen_blob_images(200, 16, 16, 2, 0.8, 0.1, 7);
    CHECK(ds.dim == 256);
    REQUIRE(ds.spatial.has_value());
    double mean0 = 0, mean1 = 0;
    std::size_t n0 = 0, n1 = 0;
    for (const Sample& s : ds.samples) {
        REQUIRE(s.truth_mask.has_value());
        double sum = 0;
        for (std::size_t i = 0; i < s.features.size(); ++i) {
            CHECK(s.features[i] >= 0.0);
            CHECK(s.features[i] <= 1.0);
            sum += s.features[i];
        }
        if (s.label == 0) {
            ++n0;
            mean0 += sum / 256;
            for (std::size_t i = 0; i < 256; ++i) CHECK((*s.truth_mask)[i] == 0.0);
        } else {
            ++n1;
            mean1 += sum / 256;
        }
    }
    CHECK(n0 == 100);
    CHECK(n1 == 100);
    CHECK(mean1 / double(n1) > mean0 / double(n0));
}

TEST_CASE("blob images: sigma 0 puts the brightest pixel inside the mask") {
    Dataset ds = gen_blob_images(50, 16, 16, 2, 0.8, 0.0, 11);
    for (const Sample& s : ds.samples) {
        if (s.label != 1) continue;
        std::size_t best = 0;
        for (std::size_t i = 1; i < 256; ++i)
            if (s.features[i] > s.features[best]) best = i;
        CHECK((*s.truth_mask)[best] == 1.0);
    }
}

TEST_CASE("blob images: oversized radius is a configuration error") {
    CHECK_THROWS_AS(gen_blob_images(10, 16, 16, 5, 0.8, 0.1, 0), std::invalid_argument);
    CHECK_THROWS_AS(gen_blob_images(10, 4, 4, 1, 0.8, 0.1, 0), std::invalid_argument);
}

TEST_CASE("split: exact partition, 80/20 ratio, stability") {
    Dataset ds = gen_two_moons(10, 0.1, 1);
    auto [train, test] = split(ds, 0.8, 5);
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);
    CHECK(train.split_tag == "train");
    CHECK(test.split_tag == "test");

    std::multiset<std::string> ids, orig;
    for (const Sample& s : ds.samples) orig.insert(s.id);
    for (const Sample& s : train.samples) ids.insert(s.id);
    for (const Sample& s : test.samples) ids.insert(s.id);
    CHECK(ids == orig);

    auto [train2, test2] = split(ds, 0.8, 5);
    for (std::size_t i = 0; i < train.size(); ++i)
        CHECK(train.samples[i].id == train2.samples[i].id);

    CHECK_THROWS_AS(split(ds, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split(ds, 1.0, 1), std::invalid_argument);
}

TEST_CASE("preprocess") {
    Dataset ds = gen_blob_images(10, 16, 16, 2, 0.8, 0.1, 2);
    Dataset plain = preprocess(ds, false, 0);
    for (std::size_t s = 0; s < ds.size(); ++s)
        for (std::size_t i = 0; i < ds.dim; ++i)
            CHECK(plain.samples[s].features[i] == ds.samples[s].features[i]);

    Dataset dq1 = preprocess(ds, true, 42);
    Dataset dq2 = preprocess(ds, true, 42);
    for (std::size_t s = 0; s < ds.size(); ++s)
        for (std::size_t i = 0; i < ds.dim; ++i) {
            CHECK(std::abs(dq1.samples[s].features[i] - ds.samples[s].features[i])
                  < 1.0 / 256.0);
            CHECK(dq1.samples[s].features[i] == dq2.samples[s].features[i]);
            CHECK(dq1.samples[s].features[i] < 1.0);
        }

    // [0,255] inputs are rescaled
    Dataset raw;
    raw.dim = 2;
    raw.samples.push_back({"r0", Tensor::vector({0, 255}), 0, {}});
    raw.samples.push_back({"r1", Tensor::vector({51, 102}), 1, {}});
    Dataset scaled = preprocess(raw, false, 0);
    CHECK(scaled.samples[0].features[1] == doctest::Approx(1.0));
    CHECK(scaled.samples[1].features[0] == doctest::Approx(0.2));
}

TEST_CASE("vector dataset round trip is exact") {
    TempDir dir("vec");
    Dataset ds = gen_two_moons(20, 0.3, 17);
    save_dataset(ds, dir.path.string());
    Dataset back = load_dataset(dir.path.string());
    REQUIRE(back.size() == ds.size());
    CHECK(back.dim == 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.samples[i].id == ds.samples[i].id);
        CHECK(back.samples[i].label == ds.samples[i].label);
        CHECK(back.samples[i].features[0] == ds.samples[i].features[0]);
        CHECK(back.samples[i].features[1] == ds.samples[i].features[1]);
    }
}

TEST_CASE("image dataset round trip preserves stored precision and masks") {
    TempDir dir("img");
    Dataset ds = gen_blob_images(12, 16, 16, 2, 0.8, 0.1, 5);
    save_dataset(ds, dir.path.string());
    Dataset back = load_dataset(dir.path.string());
    REQUIRE(back.size() == ds.size());
    REQUIRE(back.spatial.has_value());
    for (std::size_t s = 0; s < ds.size(); ++s) {
        CHECK(back.samples[s].id == ds.samples[s].id);
        CHECK(back.samples[s].label == ds.samples[s].label);
        REQUIRE(back.samples[s].truth_mask.has_value());
        for (std::size_t i = 0; i < ds.dim; ++i) {
            // stored as 8-bit PGM: exact to half a quantization step
            CHECK(std::abs(back.samples[s].features[i] - ds.samples[s].features[i])
                  <= 0.5 / 255.0 + 1e-12);
            CHECK((*back.samples[s].truth_mask)[i] == (*ds.samples[s].truth_mask)[i]);
        }
    }
    // second generation is lossless
    TempDir dir2("img2");
    save_dataset(back, dir2.path.string());
    Dataset again = load_dataset(dir2.path.string());
    for (std::size_t s = 0; s < ds.size(); ++s)
        for (std::size_t i = 0; i < ds.dim; ++i)
            CHECK(again.samples[s].features[i] == back.samples[s].features[i]);
}

TEST_CASE("load errors name the offending entry") {
    TempDir dir("bad");
    {
        std::ofstream m(dir.path / "manifest.csv");
        m << "id,label,path\nimg0,0,missing.pgm\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir.path.string()),
                         doctest::Contains("missing.pgm"), std::runtime_error);
    {
        std::ofstream m(dir.path / "manifest.csv");
        m << "id,label,f0,f1\nv0,2,0.5,0.5\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir.path.string()),
                         doctest::Contains("v0"), std::runtime_error);
    CHECK_THROWS_AS(load_dataset((dir.path / "nope").string()), std::runtime_error);
}

TEST_CASE("netpbm rejects bad headers and truncation") {
    TempDir dir("pnm");
    auto p = (dir.path / "x.pgm").string();
    {
        std::ofstream f(p, std::ios::binary);
        f << "P4\n2 2\n255\n";
    }
    CHECK_THROWS_WITH_AS(read_pgm(p), doctest::Contains("magic"), std::runtime_error);
    {
        std::ofstream f(p, std::ios::binary);
        f << "P5\n4 4\n255\nab";
    }
    CHECK_THROWS_WITH_AS(read_pgm(p), doctest::Contains("truncated"), std::runtime_error);

    // round trip with a header comment
    GrayImage img{2, 3, {10, 20, 30, 40, 50, 60}};
    write_pgm(p, img);
    GrayImage back = read_pgm(p);
    CHECK(back.height == 2);
    CHECK(back.width == 3);
    CHECK(back.pixels == img.pixels);
    {
        std::ofstream f(p, std::ios::binary);
        f << "P5\n# a comment\n2 2\n255\nabcd";
    }
    CHECK(read_pgm(p).pixels == std::vector<std::uint8_t>{'a', 'b', 'c', 'd'});
}
