#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "entropia/entropia.hpp"
#include "test_util.hpp"

using namespace entropia;
using Catch::Approx;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void push_be32(std::vector<unsigned char>& b, std::uint32_t v) {
    b.push_back((v >> 24) & 0xff);
    b.push_back((v >> 16) & 0xff);
    b.push_back((v >> 8) & 0xff);
    b.push_back(v & 0xff);
}

// 3 images of 2x2 pixels plus matching labels
std::pair<std::string, std::string> write_tiny_idx(const std::vector<int>& labels,
                                                   std::uint32_t img_magic = 0x803,
                                                   std::uint32_t lab_magic = 0x801,
                                                   bool truncate_images = false,
                                                   const std::string& tag = "") {
    std::vector<unsigned char> img;
    push_be32(img, img_magic);
    push_be32(img, static_cast<std::uint32_t>(labels.size()));
    push_be32(img, 2);
    push_be32(img, 2);
    for (std::size_t i = 0; i < labels.size() * 4; ++i)
        img.push_back(static_cast<unsigned char>((i * 37) % 256));
    if (truncate_images) img.resize(img.size() - 3);

    std::vector<unsigned char> lab;
    push_be32(lab, lab_magic);
    push_be32(lab, static_cast<std::uint32_t>(labels.size()));
    for (int y : labels) lab.push_back(static_cast<unsigned char>(y));

    const std::string ip = tmp_path("entropia_test_images_idx" + tag);
    const std::string lp = tmp_path("entropia_test_labels_idx" + tag);
    write_bytes(ip, img);
    write_bytes(lp, lab);
    return {ip, lp};
}

}  // namespace

TEST_CASE("rng: streams replay and derived streams ignore parent consumption") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

    RngStream base1(7);
    RngStream d1 = base1.derive(3);
    base1.uniform();  // consume the parent
    RngStream d2 = RngStream(7).derive(3);
    for (int i = 0; i < 10; ++i) CHECK(d1.gaussian() == d2.gaussian());

    // different salts decorrelate
    RngStream d3 = RngStream(7).derive(4);
    CHECK(RngStream(7).derive(3).uniform() != d3.uniform());
}

TEST_CASE("rng: uniform range and moments") {
    RngStream rng(1);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 20000 == Approx(0.5).margin(0.01));
    CHECK(rng.counter() == 20000);
}

TEST_CASE("rng: gaussian moments") {
    RngStream rng(2);
    double s = 0.0, s2 = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        s += g;
        s2 += g * g;
    }
    const double mean = s / n;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(s2 / n - mean * mean == Approx(1.0).epsilon(0.03));
    CHECK(rng.counter() == static_cast<std::uint64_t>(n));
}

TEST_CASE("rng: bounded integers and shuffling") {
    RngStream rng(3);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.uniform_below(7);
        REQUIRE(v < 7);
        ++hits[static_cast<int>(v)];
    }
    for (int h : hits) CHECK(h > 700);  // each residue shows up

    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    RngStream r1(5), r2(5);
    auto v2 = v;
    r1.shuffle(v);
    r2.shuffle(v2);
    CHECK(v == v2);  // deterministic
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 10; ++i) CHECK(sorted[i] == i);  // a permutation
}

TEST_CASE("idx loader: round trip of a tiny file pair") {
    auto [ip, lp] = write_tiny_idx({0, 9, 5});
    auto ds = load_idx(ip, lp);
    CHECK(ds.m == 3);
    CHECK(ds.d == 4);
    CHECK(ds.num_classes == 10);
    CHECK(ds.y == std::vector<int>{0, 9, 5});
    CHECK(ds.x[0] == Approx(0.0).margin(1e-15));          // pixel 0
    CHECK(ds.x[1] == Approx(37.0 / 255.0).margin(1e-15));  // pixel 37
    ds.validate();
}

TEST_CASE("idx loader: standardization centers each feature") {
    auto [ip, lp] = write_tiny_idx({1, 2, 3});
    auto ds = load_idx(ip, lp, true);
    for (int j = 0; j < ds.d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < ds.m; ++i) mean += ds.x[std::size_t(i) * ds.d + j];
        CHECK(std::fabs(mean / ds.m) < 1e-12);
    }
}

TEST_CASE("idx loader: corrupted inputs fail with located errors") {
    SECTION("bad image magic, reported in hex") {
        auto [ip, lp] = write_tiny_idx({0, 1, 2}, 0x802);
        CHECK_THROWS_WITH(load_idx(ip, lp),
                          Catch::Matchers::ContainsSubstring("0x00000802") &&
                              Catch::Matchers::ContainsSubstring("expected 0x00000803"));
    }
    SECTION("bad label magic") {
        auto [ip, lp] = write_tiny_idx({0, 1, 2}, 0x803, 0x7ff);
        CHECK_THROWS_WITH(load_idx(ip, lp),
                          Catch::Matchers::ContainsSubstring("expected 0x00000801"));
    }
    SECTION("truncated image payload names the byte counts") {
        auto [ip, lp] = write_tiny_idx({0, 1, 2}, 0x803, 0x801, true);
        CHECK_THROWS_WITH(load_idx(ip, lp),
                          Catch::Matchers::ContainsSubstring("expected 28 bytes") &&
                              Catch::Matchers::ContainsSubstring("ends at byte 25"));
    }
    SECTION("image/label count mismatch") {
        auto [ip, lp] = write_tiny_idx({0, 1, 2});
        auto [ip2, lp2] = write_tiny_idx({0, 1}, 0x803, 0x801, false, "_short");
        (void)ip2;
        (void)lp;
        CHECK_THROWS_WITH(load_idx(ip, lp2),
                          Catch::Matchers::ContainsSubstring("count mismatch"));
    }
    SECTION("missing file") {
        CHECK_THROWS_WITH(load_idx(tmp_path("entropia_no_such_file"), tmp_path("x")),
                          Catch::Matchers::ContainsSubstring("cannot open"));
    }
}

TEST_CASE("label binarization: digits 0-4 vs 5-9") {
    auto [ip, lp] = write_tiny_idx({0, 4, 5});
    auto ds = load_idx(ip, lp);
    binarize_labels(ds);
    CHECK(ds.y == std::vector<int>{1, 1, 0});
    CHECK(ds.num_classes == 2);
    CHECK_THROWS_AS(binarize_labels(ds), std::invalid_argument);  // already binary
}

TEST_CASE("label randomization is seeded and roughly balanced") {
    auto ds = testutil::make_random_dataset(600, 2, 2, 1);
    auto ds2 = ds;
    randomize_labels(ds, 99);
    randomize_labels(ds2, 99);
    CHECK(ds.y == ds2.y);
    CHECK(ds.label_mode == LabelMode::random_labels);
    CHECK(ds.label_seed == 99);

    int ones = 0;
    for (int y : ds.y) {
        REQUIRE(y >= 0);
        REQUIRE(y < 2);
        ones += y;
    }
    CHECK(ones > 200);
    CHECK(ones < 400);

    randomize_labels(ds2, 100);
    CHECK(ds.y != ds2.y);
}

TEST_CASE("subset keeps the leading examples") {
    auto ds = testutil::make_random_dataset(50, 3, 2, 4);
    auto s = subset(ds, 20);
    CHECK(s.m == 20);
    CHECK(s.d == 3);
    CHECK(std::equal(s.x.begin(), s.x.end(), ds.x.begin()));
    CHECK(std::equal(s.y.begin(), s.y.end(), ds.y.begin()));
    CHECK_THROWS_AS(subset(ds, 0), std::invalid_argument);
    CHECK_THROWS_AS(subset(ds, 51), std::invalid_argument);
}

TEST_CASE("synthetic mixture: balance, separation, reproducibility") {
    auto [train, test] = synthetic_gaussians(1000, 5, 6.0, 11);
    train.validate();
    test.validate();
    CHECK(train.m == 1000);

    int ones = 0;
    for (int y : train.y) ones += y;
    CHECK(ones == 500);  // exactly balanced for even m

    // classes sit on opposite sides of the first axis; sep/2 = 3 sigma
    int correct = 0;
    for (int i = 0; i < train.m; ++i) {
        const bool right_side = train.x[std::size_t(i) * train.d] > 0.0;
        if (right_side == (train.y[i] == 1)) ++correct;
    }
    CHECK(correct > 990);

    // train and test are disjoint draws; the pair replays from the seed
    CHECK(train.x != test.x);
    auto [train2, test2] = synthetic_gaussians(1000, 5, 6.0, 11);
    CHECK(train.x == train2.x);
    CHECK(train.y == train2.y);
    CHECK(test.x == test2.x);

    CHECK_THROWS_AS(synthetic_gaussians(1, 5, 6.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(synthetic_gaussians(10, 0, 6.0, 1), std::invalid_argument);
}
