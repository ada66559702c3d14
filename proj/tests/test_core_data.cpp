#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "sfada/dataset_io.hpp"
#include "sfada/transforms.hpp"

using namespace sfada;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("sfada_core_test_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Pixels on the exact 16-bit grid k/65535 so disk round-trips are bit-exact.
Image grid_image(int h, int w, int salt) {
    Image img = make_image(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(y, x) = static_cast<double>((y * 131 + x * 37 + salt) % 65536) / 65535.0;
    return img;
}

Mask disc_mask(int h, int w, int r) {
    Mask m = make_mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.at(y, x) = ((y - h / 2) * (y - h / 2) + (x - w / 2) * (x - w / 2) < r * r) ? 1 : 0;
    return m;
}

Dataset three_samples() {
    Dataset ds;
    ds.name = "tiny";
    for (int i = 0; i < 3; ++i) {
        Sample s;
        s.id = "s" + std::to_string((i * 2) % 3);  // s0, s2, s1: order is not sorted
        s.domain = "domA";
        s.image = grid_image(16, 16, i);
        if (i != 1) s.truth = disc_mask(16, 16, 4);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("dataset round trip preserves order, pixels and masks") {
    TempDir dir;
    const Dataset ds = three_samples();
    write_dataset(ds, dir.path);
    const Dataset back = load_dataset(dir.path);

    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back.samples[i].id == ds.samples[i].id);
        CHECK(back.samples[i].domain == ds.samples[i].domain);
        CHECK(back.samples[i].image.pixels == ds.samples[i].image.pixels);
        REQUIRE(back.samples[i].truth.has_value() == ds.samples[i].truth.has_value());
        if (back.samples[i].truth)
            CHECK(back.samples[i].truth->labels == ds.samples[i].truth->labels);
    }
}

TEST_CASE("write-load-write produces byte-identical files") {
    TempDir a, b;
    write_dataset(three_samples(), a.path);
    write_dataset(load_dataset(a.path), b.path);
    for (const auto& entry : fs::directory_iterator(a.path)) {
        const fs::path other = b.path / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(file_bytes(entry.path()) == file_bytes(other));
    }
}

TEST_CASE("image pgm quantizes with clamping") {
    TempDir dir;
    Image img = grid_image(8, 8, 0);
    img.at(0, 0) = 1.5;   // clamps to 1
    img.at(0, 1) = -0.5;  // clamps to 0
    img.at(0, 2) = 1.0;
    write_image_pgm(img, dir.path / "x.pgm");
    const Image back = load_image_pgm(dir.path / "x.pgm");
    CHECK(back.at(0, 0) == 1.0);
    CHECK(back.at(0, 1) == 0.0);
    CHECK(back.at(0, 2) == 1.0);
    for (int x = 3; x < 8; ++x) CHECK(back.at(0, x) == img.at(0, x));
}

TEST_CASE("mask pgm rejects values other than 0 and 255") {
    TempDir dir;
    std::ofstream out(dir.path / "bad.pgm", std::ios::binary);
    out << "P5\n2 2\n255\n";
    const unsigned char raw[4] = {0, 255, 37, 0};
    out.write(reinterpret_cast<const char*>(raw), 4);
    out.close();
    CHECK_THROWS_AS(load_mask_pgm(dir.path / "bad.pgm"), DataError);
}

TEST_CASE("load_dataset rejects image/mask shape mismatch") {
    TempDir dir;
    write_image_pgm(grid_image(64, 64, 0), dir.path / "a.pgm");
    write_mask_pgm(disc_mask(32, 32, 8), dir.path / "a_mask.pgm");
    std::ofstream(dir.path / "manifest.json")
        << R"([{"id":"a","image_file":"a.pgm","mask_file":"a_mask.pgm","domain":"d"}])";
    CHECK_THROWS_AS(load_dataset(dir.path), DataError);
}

TEST_CASE("load_dataset rejects duplicate ids") {
    TempDir dir;
    write_image_pgm(grid_image(16, 16, 0), dir.path / "a.pgm");
    std::ofstream(dir.path / "manifest.json") << R"([{"id":"a","image_file":"a.pgm","domain":"d"},)"
                                              << R"({"id":"a","image_file":"a.pgm","domain":"d"}])";
    CHECK_THROWS_AS(load_dataset(dir.path), DataError);
}

TEST_CASE("load_dataset rejects a missing manifest") {
    TempDir dir;
    CHECK_THROWS_AS(load_dataset(dir.path), DataError);
}

namespace {

Dataset numbered_dataset(size_t n) {
    Dataset ds;
    ds.name = "n" + std::to_string(n);
    for (size_t i = 0; i < n; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        s.domain = "d";
        s.image = make_image(8, 8, static_cast<double>(i));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::set<std::string> ids_of(const Dataset& ds) {
    std::set<std::string> out;
    for (const Sample& s : ds.samples) out.insert(s.id);
    return out;
}

}  // namespace

TEST_CASE("split sizes follow the floor rule") {
    const SplitSpec spec{0.7, 0.1, 0.2, 1};
    {
        const SplitResult r = split_dataset(numbered_dataset(100), spec);
        CHECK(r.train.size() == 70);
        CHECK(r.valid.size() == 10);
        CHECK(r.test.size() == 20);
    }
    {
        const SplitResult r = split_dataset(numbered_dataset(10), spec);
        CHECK(r.train.size() == 7);
        CHECK(r.valid.size() == 1);
        CHECK(r.test.size() == 2);
    }
}

TEST_CASE("split is deterministic and partitions the dataset") {
    const Dataset ds = numbered_dataset(50);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const SplitSpec spec{0.7, 0.1, 0.2, seed};
        const SplitResult r1 = split_dataset(ds, spec);
        const SplitResult r2 = split_dataset(ds, spec);
        for (size_t i = 0; i < r1.train.size(); ++i)
            CHECK(r1.train.samples[i].id == r2.train.samples[i].id);
        for (size_t i = 0; i < r1.test.size(); ++i)
            CHECK(r1.test.samples[i].id == r2.test.samples[i].id);

        std::set<std::string> all = ids_of(r1.train);
        for (const std::string& id : ids_of(r1.valid)) CHECK(all.insert(id).second);
        for (const std::string& id : ids_of(r1.test)) CHECK(all.insert(id).second);
        CHECK(all == ids_of(ds));
    }
}

TEST_CASE("split rejects configurations with an empty part") {
    CHECK_THROWS_AS(split_dataset(numbered_dataset(9), SplitSpec{0.7, 0.1, 0.2, 0}), DataError);
    CHECK_THROWS_AS(split_dataset(numbered_dataset(10), SplitSpec{0.05, 0.05, 0.9, 0}), DataError);
}

TEST_CASE("normalize maps a balanced {0,2} image to {-1,+1}") {
    Image img = make_image(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img.at(y, x) = ((y + x) % 2) ? 2.0 : 0.0;
    const Image out = normalize_image(img);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(out.at(y, x) == doctest::Approx(((y + x) % 2) ? 1.0 : -1.0).epsilon(1e-12));
}

TEST_CASE("normalize maps constant images to zero") {
    const Image out = normalize_image(make_image(8, 8, 3.7));
    for (double v : out.pixels) CHECK(v == 0.0);
}

TEST_CASE("normalize hits zero mean / unit variance and is idempotent") {
    Rng rng(42);
    Image img = make_image(16, 16);
    for (double& v : img.pixels) v = rng.uniform(-3.0, 5.0);
    const Image once = normalize_image(img);

    double mean = 0.0;
    for (double v : once.pixels) mean += v;
    mean /= static_cast<double>(once.size());
    double var = 0.0;
    for (double v : once.pixels) var += (v - mean) * (v - mean);
    var /= static_cast<double>(once.size());
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);

    const Image twice = normalize_image(once);
    for (size_t i = 0; i < once.size(); ++i) CHECK(std::abs(twice.pixels[i] - once.pixels[i]) < 1e-6);
}

TEST_CASE("identity resize is bit-exact") {
    const Image img = grid_image(11, 9, 3);
    CHECK(resize_nearest(img, 11, 9).pixels == img.pixels);
    const Mask m = disc_mask(11, 9, 3);
    CHECK(resize_nearest(m, 11, 9).labels == m.labels);
}

TEST_CASE("2x2 mask upsampled to 4x4 forms 2x2 blocks") {
    Mask m = make_mask(2, 2);
    m.at(0, 0) = 1;
    const Mask out = resize_nearest(m, 4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(out.at(y, x) == ((y < 2 && x < 2) ? 1 : 0));
}

TEST_CASE("resized masks stay binary") {
    Rng rng(7);
    Mask m = make_mask(8, 8);
    for (uint8_t& v : m.labels) v = rng.below(2) ? 1 : 0;
    const Mask out = resize_nearest(m, 13, 7);
    for (uint8_t v : out.labels) CHECK((v == 0 || v == 1));
}

namespace {

Sample blob_sample() {
    Sample s;
    s.id = "aug";
    s.domain = "d";
    s.image = grid_image(16, 16, 5);
    s.truth = disc_mask(16, 16, 5);
    return s;
}

}  // namespace

TEST_CASE("identity augmentation draw leaves the sample unchanged") {
    const Sample s = blob_sample();
    Rng rng(0);
    const Sample out = apply_augment(s, AugmentDraw{false, 0.0, 0.0}, rng);
    CHECK(out.image.pixels == s.image.pixels);
    CHECK(out.truth->labels == s.truth->labels);
}

TEST_CASE("flip-only augmentation mirrors columns") {
    const Sample s = blob_sample();
    Rng rng(0);
    const Sample out = apply_augment(s, AugmentDraw{true, 0.0, 0.0}, rng);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK(out.image.at(y, x) == s.image.at(y, 15 - x));
            CHECK(out.truth->at(y, x) == s.truth->at(y, 15 - x));
        }
}

TEST_CASE("augmentation preserves shape and mask binarity over 100 draws") {
    const Sample s = blob_sample();
    Rng rng(123);
    for (int i = 0; i < 100; ++i) {
        const Sample out = augment(s, rng);
        REQUIRE(out.image.height == 16);
        REQUIRE(out.image.width == 16);
        REQUIRE(out.truth.has_value());
        for (uint8_t v : out.truth->labels) CHECK((v == 0 || v == 1));
        for (double v : out.image.pixels) CHECK(std::isfinite(v));
    }
}

TEST_CASE("augmentation requires a truth mask") {
    Sample s = blob_sample();
    s.truth.reset();
    Rng rng(0);
    CHECK_THROWS_AS(augment(s, rng), DataError);
}
