#include "trait/checkpoint.hpp"

#include "trait/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace trait::train {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw TruncationError("truncated TRCK file: " + path);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& in, const std::string& path) {
    std::uint32_t bits = get_u32(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string get_string(std::istream& in, const std::string& path) {
    std::uint32_t len = get_u32(in, path);
    if (len > (1u << 20)) throw FormatError("unreasonable string length in TRCK file: " + path);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw TruncationError("truncated TRCK file: " + path);
    return s;
}

} // namespace

void save_trck(const std::string& path, const std::string& descriptor, std::uint32_t epoch,
               const nn::ParamSet& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);

    out.write("TRCK", 4);
    put_u32(out, kTrckVersion);
    put_u32(out, static_cast<std::uint32_t>(descriptor.size()));
    out.write(descriptor.data(), static_cast<std::streamsize>(descriptor.size()));
    put_u32(out, epoch);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& e : tensors.entries()) {
        put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
        for (std::size_t ext : e.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(ext));
        for (float v : e.tensor.values()) put_f32(out, v);
    }
    out.flush();
    if (!out) throw IoError("write failure on " + path);
}

std::pair<nn::ParamSet, TrckMeta> load_trck(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    char magic[4];
    if (!in.read(magic, 4)) throw TruncationError("truncated TRCK file: " + path);
    if (std::memcmp(magic, "TRCK", 4) != 0) throw BadMagicError("bad magic in " + path);

    std::uint32_t version = get_u32(in, path);
    if (version != kTrckVersion) {
        throw VersionError("unsupported TRCK version " + std::to_string(version) + " in " + path);
    }

    TrckMeta meta;
    meta.descriptor = get_string(in, path);
    meta.epoch = get_u32(in, path);

    std::uint32_t count = get_u32(in, path);
    nn::ParamSet tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        std::string name = get_string(in, path);
        std::uint32_t rank = get_u32(in, path);
        if (rank > 8) throw FormatError("unreasonable tensor rank in " + path);
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t r = 0; r < rank; ++r) shape[r] = get_u32(in, path);
        Tensor data(shape);
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_f32(in, path);
        tensors.add(std::move(name), std::move(data));
    }
    return {std::move(tensors), std::move(meta)};
}

const nn::ParamSet& CheckpointSet::at_epoch(std::size_t k) const {
    if (k < 1 || k > epochs.size()) {
        throw Error("checkpoint epoch " + std::to_string(k) + " out of range 1.." +
                    std::to_string(epochs.size()));
    }
    return epochs[k - 1];
}

void CheckpointSet::validate() const {
    if (epochs.size() < 2) throw ConfigError("checkpoint set needs K >= 2 epochs");
    if (resolved_target() < 1 || resolved_target() > epochs.size()) {
        throw ConfigError("target index " + std::to_string(target_index) + " outside 1..K");
    }
    for (const nn::ParamSet& p : epochs) nn::check_params(spec, p);
    if (train_loss.size() != epochs.size() || val_metric.size() != epochs.size()) {
        throw ConfigError("checkpoint metadata length mismatch");
    }
}

void save_checkpoint_set(const std::string& dir, const CheckpointSet& set) {
    set.validate();
    fs::create_directories(dir);
    std::string descriptor = set.spec.serialize();
    for (std::size_t k = 1; k <= set.K(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "ckpt_%04zu.trck", k);
        save_trck((fs::path(dir) / name).string(), descriptor, static_cast<std::uint32_t>(k),
                  set.at_epoch(k));
    }
    json manifest;
    manifest["schema"] = "trait-ckpt-v1";
    manifest["epochs"] = set.K();
    manifest["seed"] = set.seed;
    manifest["dataset"] = set.dataset_id;
    manifest["model_spec"] = descriptor;
    manifest["target_index"] = set.resolved_target();
    manifest["train_loss"] = set.train_loss;
    manifest["val_metric"] = set.val_metric;

    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw IoError("cannot write manifest.json in " + dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("write failure on manifest.json in " + dir);
}

CheckpointSet load_checkpoint_set(const std::string& dir) {
    std::ifstream min(fs::path(dir) / "manifest.json");
    if (!min) throw IoError("cannot open manifest.json in " + dir);
    json manifest;
    try {
        min >> manifest;
    } catch (const json::exception& e) {
        throw FormatError("bad manifest.json in " + dir + ": " + e.what());
    }

    CheckpointSet set;
    try {
        set.spec = nn::ModelSpec::parse(manifest.at("model_spec").get<std::string>());
        set.seed = manifest.at("seed").get<std::uint64_t>();
        set.dataset_id = manifest.at("dataset").get<std::string>();
        set.target_index = manifest.at("target_index").get<std::size_t>();
        set.train_loss = manifest.at("train_loss").get<std::vector<double>>();
        set.val_metric = manifest.at("val_metric").get<std::vector<double>>();
        std::size_t k_total = manifest.at("epochs").get<std::size_t>();

        for (std::size_t k = 1; k <= k_total; ++k) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_%04zu.trck", k);
            auto [params, meta] = load_trck((fs::path(dir) / name).string());
            if (meta.epoch != k) {
                throw FormatError("checkpoint " + std::string(name) + " carries epoch " +
                                  std::to_string(meta.epoch));
            }
            set.epochs.push_back(std::move(params));
        }
    } catch (const json::exception& e) {
        throw FormatError("bad manifest.json in " + dir + ": " + e.what());
    }
    set.validate();
    return set;
}

} // namespace trait::train
