#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "entropia/nn.hpp"
#include "entropia/rng.hpp"

namespace entropia {

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                      std::istreambuf_iterator<char>());
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                               const std::string& path) {
    if (off + 4 > b.size())
        throw std::runtime_error("'" + path + "': truncated, needed 4 bytes at offset " +
                                 std::to_string(off) + " but file ends at byte " +
                                 std::to_string(b.size()));
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace detail

// Big-endian IDX image/label pair (magic 0x00000803 / 0x00000801). Pixels are
// scaled to [0,1] by 1/255; standardize additionally centers each feature and
// divides by its standard deviation (floored at 1e-8).
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                               bool standardize = false) {
    const auto img = detail::read_file_bytes(images_path);
    const auto lab = detail::read_file_bytes(labels_path);

    const std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
    if (img_magic != 0x00000803u)
        throw std::runtime_error("'" + images_path + "': bad magic 0x" +
                                 [&] { char s[16]; snprintf(s, 16, "%08x", img_magic); return std::string(s); }() +
                                 ", expected 0x00000803 at offset 0");
    const std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("'" + labels_path + "': bad magic 0x" +
                                 [&] { char s[16]; snprintf(s, 16, "%08x", lab_magic); return std::string(s); }() +
                                 ", expected 0x00000801 at offset 0");

    const std::uint32_t n_img = detail::read_be32(img, 4, images_path);
    const std::uint32_t rows = detail::read_be32(img, 8, images_path);
    const std::uint32_t cols = detail::read_be32(img, 12, images_path);
    const std::uint32_t n_lab = detail::read_be32(lab, 4, labels_path);
    if (n_img != n_lab)
        throw std::runtime_error("image/label count mismatch: " + std::to_string(n_img) +
                                 " images in '" + images_path + "' vs " + std::to_string(n_lab) +
                                 " labels in '" + labels_path + "'");
    const std::size_t want_img = 16 + std::size_t(n_img) * rows * cols;
    if (img.size() < want_img)
        throw std::runtime_error("'" + images_path + "': truncated, expected " +
                                 std::to_string(want_img) + " bytes but file ends at byte " +
                                 std::to_string(img.size()));
    const std::size_t want_lab = 8 + std::size_t(n_lab);
    if (lab.size() < want_lab)
        throw std::runtime_error("'" + labels_path + "': truncated, expected " +
                                 std::to_string(want_lab) + " bytes but file ends at byte " +
                                 std::to_string(lab.size()));

    LabeledDataset ds;
    ds.m = static_cast<int>(n_img);
    ds.d = static_cast<int>(rows * cols);
    ds.num_classes = 10;
    ds.x.resize(std::size_t(ds.m) * ds.d);
    ds.y.resize(ds.m);
    for (std::size_t i = 0; i < std::size_t(ds.m) * ds.d; ++i)
        ds.x[i] = static_cast<double>(img[16 + i]) / 255.0;
    for (int i = 0; i < ds.m; ++i) {
        const int y = lab[8 + std::size_t(i)];
        if (y < 0 || y > 9)
            throw std::runtime_error("'" + labels_path + "': label " + std::to_string(y) +
                                     " at index " + std::to_string(i) + " outside 0..9");
        ds.y[i] = y;
    }
    if (standardize) {
        for (int j = 0; j < ds.d; ++j) {
            double mean = 0.0;
            for (int i = 0; i < ds.m; ++i) mean += ds.x[std::size_t(i) * ds.d + j];
            mean /= ds.m;
            double var = 0.0;
            for (int i = 0; i < ds.m; ++i) {
                const double v = ds.x[std::size_t(i) * ds.d + j] - mean;
                var += v * v;
            }
            const double sd = std::max(std::sqrt(var / ds.m), 1e-8);
            for (int i = 0; i < ds.m; ++i) {
                double& v = ds.x[std::size_t(i) * ds.d + j];
                v = (v - mean) / sd;
            }
        }
    }
    ds.validate();
    return ds;
}

// Collapse ten digit classes to two: digits 0-4 become class 1, digits 5-9
// become class 0. Requires a genuine 10-class dataset.
inline void binarize_labels(LabeledDataset& ds) {
    if (ds.num_classes != 10)
        throw std::invalid_argument("binarize_labels: expected a 10-class dataset, got " +
                                    std::to_string(ds.num_classes) + " classes");
    for (int& y : ds.y) y = (y <= 4) ? 1 : 0;
    ds.num_classes = 2;
}

// Replace every label with an independent uniform draw over the classes.
inline void randomize_labels(LabeledDataset& ds, std::uint64_t seed) {
    RngStream rng(seed);
    for (int& y : ds.y) y = static_cast<int>(rng.uniform_below(ds.num_classes));
    ds.label_mode = LabelMode::random_labels;
    ds.label_seed = seed;
}

// First n examples (load order), for subsampled runs.
inline LabeledDataset subset(const LabeledDataset& ds, int n) {
    if (n < 1 || n > ds.m)
        throw std::invalid_argument("subset: n must lie in [1, m]");
    LabeledDataset out = ds;
    out.m = n;
    out.x.assign(ds.x.begin(), ds.x.begin() + std::size_t(n) * ds.d);
    out.y.assign(ds.y.begin(), ds.y.begin() + n);
    return out;
}

// Balanced two-class Gaussian mixture: class 1 at +separation/2 along the
// first axis, class 0 at -separation/2, unit isotropic noise. Returns
// (train, test) of m points each, drawn from disjoint substreams of `seed`;
// the Bayes error is Phi(-separation/2).
inline std::pair<LabeledDataset, LabeledDataset> synthetic_gaussians(int m, int d,
                                                                     double separation,
                                                                     std::uint64_t seed) {
    if (m < 2 || d < 1) throw std::invalid_argument("synthetic_gaussians: need m >= 2, d >= 1");
    if (!(separation >= 0.0)) throw std::invalid_argument("synthetic_gaussians: bad separation");
    auto make = [&](std::uint64_t salt) {
        RngStream rng = RngStream(seed).derive(salt);
        LabeledDataset ds;
        ds.m = m;
        ds.d = d;
        ds.num_classes = 2;
        ds.x.resize(std::size_t(m) * d);
        ds.y.resize(m);
        std::vector<int> order(m);
        for (int i = 0; i < m; ++i) order[i] = i;
        rng.shuffle(order);
        for (int i = 0; i < m; ++i) {
            const int cls = (order[i] < m / 2) ? 1 : 0;  // balanced up to rounding
            ds.y[i] = cls;
            double* row = ds.x.data() + std::size_t(i) * d;
            for (int j = 0; j < d; ++j) row[j] = rng.gaussian();
            row[0] += (cls == 1 ? 0.5 : -0.5) * separation;
        }
        return ds;
    };
    return {make(1), make(2)};
}

}  // namespace entropia
