#include "trait/model.hpp"

#include "trait/errors.hpp"

#include <cmath>
#include <sstream>

namespace trait::nn {

namespace {

std::string task_name(TaskKind t) {
    return t == TaskKind::Classification ? "classification" : "regression";
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

// Split on `sep` outside parentheses, so "dense(2,16),relu" -> {"dense(2,16)", "relu"}.
std::vector<std::string> split_top(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == sep && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::size_t parse_extent(const std::string& s, const std::string& ctx) {
    try {
        long long v = std::stoll(s);
        if (v <= 0) throw ConfigError("");
        return static_cast<std::size_t>(v);
    } catch (...) {
        throw ConfigError("model spec: bad extent '" + s + "' in " + ctx);
    }
}

} // namespace

std::string LayerDesc::to_string() const {
    std::ostringstream os;
    switch (kind) {
        case LayerKind::Dense: os << "dense(" << a << "," << b << ")"; break;
        case LayerKind::Conv2d: os << "conv2d(" << a << "," << b << "," << k << ")"; break;
        case LayerKind::Lstm: os << "lstm(" << a << "," << b << ")"; break;
        case LayerKind::Relu: os << "relu"; break;
        case LayerKind::Flatten: os << "flatten"; break;
    }
    return os.str();
}

std::vector<std::size_t> ModelSpec::validate() const {
    if (input_shape.empty()) throw ShapeError("model spec: empty input shape");
    if (layers.empty()) throw ShapeError("model spec: no layers");

    std::vector<std::size_t> shape = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerDesc& l = layers[i];
        std::string where = "layer " + std::to_string(i) + " (" + l.to_string() + ")";
        switch (l.kind) {
            case LayerKind::Dense: {
                if (shape.size() != 1 || shape[0] != l.a) {
                    throw ShapeError(where + ": expected input (" + std::to_string(l.a) +
                                     "), got " + shape_to_string(shape));
                }
                shape = {l.b};
                break;
            }
            case LayerKind::Conv2d: {
                if (shape.size() != 3 || shape[0] != l.a) {
                    throw ShapeError(where + ": expected input (channels=" + std::to_string(l.a) +
                                     ",H,W), got " + shape_to_string(shape));
                }
                if (shape[1] < l.k || shape[2] < l.k) {
                    throw ShapeError(where + ": kernel " + std::to_string(l.k) +
                                     " larger than input " + shape_to_string(shape));
                }
                shape = {l.b, shape[1] - l.k + 1, shape[2] - l.k + 1};
                break;
            }
            case LayerKind::Lstm: {
                if (shape.size() != 2 || shape[1] != l.a) {
                    throw ShapeError(where + ": expected input (T," + std::to_string(l.a) +
                                     "), got " + shape_to_string(shape));
                }
                shape = {l.b};
                break;
            }
            case LayerKind::Relu:
                break;
            case LayerKind::Flatten:
                shape = {shape_product(shape)};
                break;
        }
    }
    if (shape.size() != 1) {
        throw ShapeError("model spec: output shape " + shape_to_string(shape) +
                         " is not a vector; add a flatten/dense head");
    }
    return shape;
}

std::size_t ModelSpec::output_dim() const { return validate()[0]; }

std::string ModelSpec::serialize() const {
    std::ostringstream os;
    os << "spec-v1;task=" << task_name(task) << ";input=";
    for (std::size_t i = 0; i < input_shape.size(); ++i) {
        if (i) os << "x";
        os << input_shape[i];
    }
    os << ";layers=";
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i) os << ",";
        os << layers[i].to_string();
    }
    return os.str();
}

ModelSpec ModelSpec::parse(const std::string& text) {
    std::vector<std::string> parts = split(text, ';');
    if (parts.size() != 4 || parts[0] != "spec-v1") {
        throw ConfigError("model spec: expected 'spec-v1;task=..;input=..;layers=..', got '" + text + "'");
    }
    ModelSpec spec;

    if (parts[1] == "task=classification") {
        spec.task = TaskKind::Classification;
    } else if (parts[1] == "task=regression") {
        spec.task = TaskKind::Regression;
    } else {
        throw ConfigError("model spec: unknown task in '" + parts[1] + "'");
    }

    if (parts[2].rfind("input=", 0) != 0) throw ConfigError("model spec: missing input= field");
    for (const std::string& e : split(parts[2].substr(6), 'x')) {
        spec.input_shape.push_back(parse_extent(e, "input shape"));
    }

    if (parts[3].rfind("layers=", 0) != 0) throw ConfigError("model spec: missing layers= field");
    for (const std::string& ls : split_top(parts[3].substr(7), ',')) {
        if (ls == "relu") {
            spec.layers.push_back({LayerKind::Relu});
        } else if (ls == "flatten") {
            spec.layers.push_back({LayerKind::Flatten});
        } else {
            auto open = ls.find('(');
            auto close = ls.rfind(')');
            if (open == std::string::npos || close == std::string::npos || close < open) {
                throw ConfigError("model spec: bad layer '" + ls + "'");
            }
            std::string name = ls.substr(0, open);
            std::vector<std::string> args = split(ls.substr(open + 1, close - open - 1), ',');
            if (name == "dense" && args.size() == 2) {
                spec.layers.push_back({LayerKind::Dense, parse_extent(args[0], ls), parse_extent(args[1], ls)});
            } else if (name == "conv2d" && args.size() == 3) {
                spec.layers.push_back({LayerKind::Conv2d, parse_extent(args[0], ls), parse_extent(args[1], ls),
                                       parse_extent(args[2], ls)});
            } else if (name == "lstm" && args.size() == 2) {
                spec.layers.push_back({LayerKind::Lstm, parse_extent(args[0], ls), parse_extent(args[1], ls)});
            } else {
                throw ConfigError("model spec: bad layer '" + ls + "'");
            }
        }
    }
    spec.validate();
    return spec;
}

void ParamSet::add(std::string name, Tensor t) {
    if (has(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    entries_.push_back({std::move(name), std::move(t)});
}

bool ParamSet::has(const std::string& name) const {
    for (const Entry& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

Tensor& ParamSet::at(const std::string& name) {
    for (Entry& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ConfigError("unknown parameter '" + name + "'");
}

const Tensor& ParamSet::at(const std::string& name) const {
    for (const Entry& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ConfigError("unknown parameter '" + name + "'");
}

std::size_t ParamSet::total_elements() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.tensor.size();
    return n;
}

bool ParamSet::operator==(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name != other.entries_[i].name) return false;
        if (!(entries_[i].tensor == other.entries_[i].tensor)) return false;
    }
    return true;
}

namespace {

struct ParamShape {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t fan_in;
    std::size_t fan_out;
    bool is_bias;
};

std::vector<ParamShape> layer_param_shapes(const ModelSpec& spec) {
    std::vector<ParamShape> out;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& l = spec.layers[i];
        std::string base = "layer" + std::to_string(i);
        switch (l.kind) {
            case LayerKind::Dense:
                out.push_back({base + ".w", {l.a, l.b}, l.a, l.b, false});
                out.push_back({base + ".b", {l.b}, l.a, l.b, true});
                break;
            case LayerKind::Conv2d:
                out.push_back({base + ".w", {l.b, l.a, l.k, l.k}, l.a * l.k * l.k, l.b * l.k * l.k, false});
                out.push_back({base + ".b", {l.b}, l.a * l.k * l.k, l.b, true});
                break;
            case LayerKind::Lstm:
                // gate order along the 4h axis: input, forget, cell, output
                out.push_back({base + ".wx", {l.a, 4 * l.b}, l.a, 4 * l.b, false});
                out.push_back({base + ".wh", {l.b, 4 * l.b}, l.b, 4 * l.b, false});
                out.push_back({base + ".b", {4 * l.b}, l.a, 4 * l.b, true});
                break;
            case LayerKind::Relu:
            case LayerKind::Flatten:
                break;
        }
    }
    return out;
}

bool feeds_relu(const ModelSpec& spec, std::size_t layer_index) {
    for (std::size_t j = layer_index + 1; j < spec.layers.size(); ++j) {
        LayerKind k = spec.layers[j].kind;
        if (k == LayerKind::Flatten) continue;
        return k == LayerKind::Relu;
    }
    return false;
}

} // namespace

std::vector<std::string> param_names(const ModelSpec& spec) {
    std::vector<std::string> names;
    for (const ParamShape& p : layer_param_shapes(spec)) names.push_back(p.name);
    return names;
}

ParamSet init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ParamSet params;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& l = spec.layers[i];
        std::string base = "layer" + std::to_string(i);
        bool kaiming = feeds_relu(spec, i);
        auto weight = [&](const std::string& name, std::vector<std::size_t> shape,
                          std::size_t fan_in, std::size_t fan_out) {
            double bound = kaiming ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                   : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            Tensor t(std::move(shape));
            for (std::size_t j = 0; j < t.size(); ++j) {
                t[j] = static_cast<float>(rng.uniform(-bound, bound));
            }
            params.add(name, std::move(t));
        };
        switch (l.kind) {
            case LayerKind::Dense:
                weight(base + ".w", {l.a, l.b}, l.a, l.b);
                params.add(base + ".b", Tensor::zeros({l.b}));
                break;
            case LayerKind::Conv2d:
                weight(base + ".w", {l.b, l.a, l.k, l.k}, l.a * l.k * l.k, l.b * l.k * l.k);
                params.add(base + ".b", Tensor::zeros({l.b}));
                break;
            case LayerKind::Lstm:
                weight(base + ".wx", {l.a, 4 * l.b}, l.a, 4 * l.b);
                weight(base + ".wh", {l.b, 4 * l.b}, l.b, 4 * l.b);
                params.add(base + ".b", Tensor::zeros({4 * l.b}));
                break;
            case LayerKind::Relu:
            case LayerKind::Flatten:
                break;
        }
    }
    return params;
}

void check_params(const ModelSpec& spec, const ParamSet& params) {
    std::vector<ParamShape> want = layer_param_shapes(spec);
    if (want.size() != params.size()) {
        throw ShapeError("param set has " + std::to_string(params.size()) + " tensors, spec needs " +
                         std::to_string(want.size()));
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
        const ParamSet::Entry& got = params.entries()[i];
        if (got.name != want[i].name) {
            throw ShapeError("param " + std::to_string(i) + " named '" + got.name + "', expected '" +
                             want[i].name + "'");
        }
        if (got.tensor.shape() != want[i].shape) {
            throw ShapeError("param '" + got.name + "' has shape " + got.tensor.shape_str() +
                             ", expected " + shape_to_string(want[i].shape));
        }
    }
}

} // namespace trait::nn
