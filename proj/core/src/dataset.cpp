#include "trait/dataset.hpp"

#include "trait/errors.hpp"
#include "trait/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace trait::data {

namespace {

float clamp01(double v) {
    if (v < 0.0) return 0.0f;
    if (v > 1.0) return 1.0f;
    return static_cast<float>(v);
}

void assign_splits(DatasetHandle& d, std::size_t train_n, std::size_t val_n, std::size_t test_n) {
    d.split_tags.clear();
    d.split_tags.reserve(train_n + val_n + test_n);
    for (std::size_t i = 0; i < train_n; ++i) d.split_tags.push_back(Split::Train);
    for (std::size_t i = 0; i < val_n; ++i) d.split_tags.push_back(Split::Val);
    for (std::size_t i = 0; i < test_n; ++i) d.split_tags.push_back(Split::Test);
}

DatasetHandle make_blobs(std::size_t k, std::uint64_t seed, const SynthConfig& cfg) {
    if (k < 2) throw ConfigError("blobs-k needs k >= 2");
    Rng rng(derive_seed(seed, "blobs"));
    DatasetHandle d;
    d.task = nn::TaskKind::Classification;
    d.num_classes = k;
    d.feature_shape = {cfg.dim};

    std::vector<std::vector<double>> centers(k, std::vector<double>(cfg.dim));
    for (auto& c : centers) {
        for (double& v : c) v = rng.uniform(0.2, 0.8);
    }

    std::size_t total = cfg.train_n + cfg.val_n + cfg.test_n;
    for (std::size_t i = 0; i < total; ++i) {
        int label = static_cast<int>(i % k);
        Tensor f({cfg.dim});
        for (std::size_t j = 0; j < cfg.dim; ++j) {
            f[j] = clamp01(centers[static_cast<std::size_t>(label)][j] + rng.normal(0.0, cfg.blob_std));
        }
        d.examples.push_back({std::move(f), label, Tensor()});
    }
    assign_splits(d, cfg.train_n, cfg.val_n, cfg.test_n);
    return d;
}

DatasetHandle make_moons(std::uint64_t seed, const SynthConfig& cfg) {
    Rng rng(derive_seed(seed, "moons"));
    DatasetHandle d;
    d.task = nn::TaskKind::Classification;
    d.num_classes = 2;
    d.feature_shape = {2};

    std::size_t total = cfg.train_n + cfg.val_n + cfg.test_n;
    for (std::size_t i = 0; i < total; ++i) {
        int label = static_cast<int>(i % 2);
        double t = rng.uniform(0.0, std::numbers::pi);
        double x, y;
        if (label == 0) {
            x = std::cos(t);
            y = std::sin(t);
        } else {
            x = 1.0 - std::cos(t);
            y = 0.5 - std::sin(t);
        }
        x += rng.normal(0.0, cfg.noise);
        y += rng.normal(0.0, cfg.noise);
        // moons live in [-1.2, 2.2] x [-0.7, 1.2]; fixed affine into [0,1]
        Tensor f({2});
        f[0] = clamp01((x + 1.2) / 3.4);
        f[1] = clamp01((y + 0.7) / 1.9);
        d.examples.push_back({std::move(f), label, Tensor()});
    }
    assign_splits(d, cfg.train_n, cfg.val_n, cfg.test_n);
    return d;
}

DatasetHandle make_rings(std::uint64_t seed, const SynthConfig& cfg) {
    Rng rng(derive_seed(seed, "rings"));
    DatasetHandle d;
    d.task = nn::TaskKind::Classification;
    d.num_classes = 2;
    d.feature_shape = {2};

    std::size_t total = cfg.train_n + cfg.val_n + cfg.test_n;
    for (std::size_t i = 0; i < total; ++i) {
        int label = static_cast<int>(i % 2);
        double r = (label == 0 ? 0.18 : 0.4) + rng.normal(0.0, cfg.noise * 0.5);
        double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        Tensor f({2});
        f[0] = clamp01(0.5 + r * std::cos(a));
        f[1] = clamp01(0.5 + r * std::sin(a));
        d.examples.push_back({std::move(f), label, Tensor()});
    }
    assign_splits(d, cfg.train_n, cfg.val_n, cfg.test_n);
    return d;
}

DatasetHandle make_sine_forecast(std::uint64_t seed, const SynthConfig& cfg) {
    Rng rng(derive_seed(seed, "sine"));
    DatasetHandle d;
    d.task = nn::TaskKind::Regression;
    d.feature_shape = {cfg.window, 1};

    std::size_t total = cfg.train_n + cfg.val_n + cfg.test_n;
    std::size_t series_len = total + cfg.window;
    std::vector<double> series(series_len);
    for (std::size_t t = 0; t < series_len; ++t) {
        double base = 0.5 + 0.35 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 40.0) +
                      0.08 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 7.0);
        series[t] = std::min(1.0, std::max(0.0, base + rng.normal(0.0, cfg.noise)));
    }
    for (std::size_t i = 0; i < total; ++i) {
        Tensor f({cfg.window, 1});
        for (std::size_t w = 0; w < cfg.window; ++w) f[w] = static_cast<float>(series[i + w]);
        Tensor target = Tensor::scalar(static_cast<float>(series[i + cfg.window]));
        d.examples.push_back({std::move(f), 0, std::move(target)});
    }
    assign_splits(d, cfg.train_n, cfg.val_n, cfg.test_n);
    return d;
}

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw TruncationError("idx file truncated: " + path);
    }
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

DatasetHandle load_idx(const std::string& prefix, std::uint64_t seed) {
    std::string images_path = prefix + "-images.idx";
    std::string labels_path = prefix + "-labels.idx";
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open " + labels_path);

    if (read_be_u32(img, images_path) != 0x00000803u) {
        throw BadMagicError("bad idx image magic in " + images_path);
    }
    if (read_be_u32(lab, labels_path) != 0x00000801u) {
        throw BadMagicError("bad idx label magic in " + labels_path);
    }
    std::uint32_t n = read_be_u32(img, images_path);
    std::uint32_t rows = read_be_u32(img, images_path);
    std::uint32_t cols = read_be_u32(img, images_path);
    std::uint32_t n_lab = read_be_u32(lab, labels_path);
    if (n != n_lab) {
        throw FormatError("idx image/label count mismatch: " + std::to_string(n) + " vs " +
                          std::to_string(n_lab));
    }

    DatasetHandle d;
    d.task = nn::TaskKind::Classification;
    d.feature_shape = {1, rows, cols};
    int max_label = 0;
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
            throw TruncationError("idx image data truncated: " + images_path);
        }
        char lb;
        if (!lab.read(&lb, 1)) throw TruncationError("idx label data truncated: " + labels_path);
        Tensor f({1, rows, cols});
        for (std::size_t j = 0; j < buf.size(); ++j) f[j] = static_cast<float>(buf[j]) / 255.0f;
        int label = static_cast<int>(static_cast<unsigned char>(lb));
        max_label = std::max(max_label, label);
        d.examples.push_back({std::move(f), label, Tensor()});
    }
    d.num_classes = static_cast<std::size_t>(max_label) + 1;

    // seeded 70/15/15 split
    Rng rng(derive_seed(seed, "idx-split"));
    std::vector<std::size_t> perm = rng.permutation(d.examples.size());
    d.split_tags.assign(d.examples.size(), Split::Train);
    std::size_t val_n = d.examples.size() * 15 / 100;
    std::size_t test_n = d.examples.size() * 15 / 100;
    for (std::size_t i = 0; i < val_n; ++i) d.split_tags[perm[i]] = Split::Val;
    for (std::size_t i = 0; i < test_n; ++i) d.split_tags[perm[val_n + i]] = Split::Test;
    return d;
}

DatasetHandle load_csv(const std::string& path, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    DatasetHandle d;
    std::string line;
    bool first = true;
    bool all_integral = true;
    std::vector<double> raw_labels;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            first = false;
            try {
                (void)std::stod(cells.at(0));
            } catch (...) {
                continue; // header row
            }
        }
        if (cells.size() < 2) throw FormatError("csv row with fewer than 2 columns in " + path);
        if (dim == 0) {
            dim = cells.size() - 1;
        } else if (cells.size() - 1 != dim) {
            throw FormatError("csv row width varies in " + path);
        }
        double label;
        Tensor f({dim});
        try {
            label = std::stod(cells[0]);
            for (std::size_t j = 0; j < dim; ++j) {
                f[j] = static_cast<float>(std::stod(cells[j + 1]));
            }
        } catch (...) {
            throw FormatError("csv numeric parse failure in " + path + ": '" + line + "'");
        }
        if (label != std::floor(label)) all_integral = false;
        raw_labels.push_back(label);
        d.examples.push_back({std::move(f), 0, Tensor()});
    }
    if (d.examples.empty()) throw FormatError("csv has no data rows: " + path);

    d.feature_shape = {dim};
    if (all_integral) {
        d.task = nn::TaskKind::Classification;
        int max_label = 0;
        for (std::size_t i = 0; i < d.examples.size(); ++i) {
            d.examples[i].label = static_cast<int>(raw_labels[i]);
            max_label = std::max(max_label, d.examples[i].label);
        }
        d.num_classes = static_cast<std::size_t>(max_label) + 1;
    } else {
        d.task = nn::TaskKind::Regression;
        for (std::size_t i = 0; i < d.examples.size(); ++i) {
            d.examples[i].target = Tensor::scalar(static_cast<float>(raw_labels[i]));
        }
    }

    Rng rng(derive_seed(seed, "csv-split"));
    std::vector<std::size_t> perm = rng.permutation(d.examples.size());
    d.split_tags.assign(d.examples.size(), Split::Train);
    std::size_t val_n = d.examples.size() * 15 / 100;
    std::size_t test_n = d.examples.size() * 15 / 100;
    for (std::size_t i = 0; i < val_n; ++i) d.split_tags[perm[i]] = Split::Val;
    for (std::size_t i = 0; i < test_n; ++i) d.split_tags[perm[val_n + i]] = Split::Test;
    return d;
}

} // namespace

std::vector<std::size_t> DatasetHandle::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split_tags.size(); ++i) {
        if (split_tags[i] == split) out.push_back(i);
    }
    return out;
}

DatasetHandle load_or_synthesize_dataset(const std::string& id, std::uint64_t seed,
                                         const SynthConfig& cfg) {
    DatasetHandle d;
    if (id.rfind("blobs-", 0) == 0) {
        std::size_t k;
        try {
            k = static_cast<std::size_t>(std::stoul(id.substr(6)));
        } catch (...) {
            throw ConfigError("bad dataset id '" + id + "'");
        }
        d = make_blobs(k, seed, cfg);
    } else if (id == "moons") {
        d = make_moons(seed, cfg);
    } else if (id == "rings") {
        d = make_rings(seed, cfg);
    } else if (id == "sine-forecast") {
        d = make_sine_forecast(seed, cfg);
    } else if (id.rfind("idx-file:", 0) == 0) {
        d = load_idx(id.substr(9), seed);
    } else if (id.rfind("csv-file:", 0) == 0) {
        d = load_csv(id.substr(9), seed);
    } else {
        throw ConfigError("unknown dataset id '" + id + "'");
    }
    d.id = id;
    return d;
}

Tensor stack_features(const DatasetHandle& data, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw ShapeError("stack_features: empty index set");
    std::vector<std::size_t> shape{idx.size()};
    shape.insert(shape.end(), data.feature_shape.begin(), data.feature_shape.end());
    Tensor out(shape);
    std::size_t stride = shape_product(data.feature_shape);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Tensor& f = data.examples[idx[i]].features;
        std::copy(f.values().begin(), f.values().end(), out.values().begin() + i * stride);
    }
    return out;
}

void write_example_csv(const std::string& path, const Example& ex, nn::TaskKind task) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "label";
    for (std::size_t j = 0; j < ex.features.size(); ++j) out << ",f" << (j + 1);
    out << "\n";
    char buf[32];
    if (task == nn::TaskKind::Classification) {
        out << ex.label;
    } else {
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(ex.target[0]));
        out << buf;
    }
    for (std::size_t j = 0; j < ex.features.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(ex.features[j]));
        out << "," << buf;
    }
    out << "\n";
    if (!out) throw IoError("write failure on " + path);
}

} // namespace trait::data
