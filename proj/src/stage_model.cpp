#include "firmcascade/stage_model.hpp"

#include <cmath>

#include "firmcascade/errors.hpp"
#include "firmcascade/gating.hpp"
#include "firmcascade/rng.hpp"

namespace firmcascade {

std::string to_string(StageKind kind) {
    switch (kind) {
        case StageKind::LinearLogistic: return "linear-logistic";
        case StageKind::Feedforward: return "feedforward";
        case StageKind::Combiner: return "combiner";
    }
    return "unknown";
}

StageKind stage_kind_from_string(const std::string& s) {
    if (s == "linear-logistic") return StageKind::LinearLogistic;
    if (s == "feedforward") return StageKind::Feedforward;
    if (s == "combiner") return StageKind::Combiner;
    throw ConfigError("unknown stage kind '" + s + "'");
}

std::vector<std::pair<int, int>> StageSpec::layer_shapes() const {
    std::vector<std::pair<int, int>> shapes;
    if (kind == StageKind::Combiner) return shapes;
    int in = static_cast<int>(feature_mask.size());
    for (int h : hidden_sizes) {
        shapes.emplace_back(in, h);
        in = h;
    }
    shapes.emplace_back(in, 1);
    return shapes;
}

long StageSpec::mac_count() const {
    long macs = 0;
    for (const auto& [in, out] : layer_shapes()) {
        macs += static_cast<long>(in) * out + out;
    }
    return macs;
}

std::size_t StageParams::count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
}

void StageParams::fill(double value) {
    for (auto& l : layers) {
        std::fill(l.weights.begin(), l.weights.end(), value);
        std::fill(l.biases.begin(), l.biases.end(), value);
    }
}

StageParams init_stage(const StageSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    StageParams params;
    for (const auto& [in, out] : spec.layer_shapes()) {
        LayerParams layer;
        layer.fan_in = in;
        layer.fan_out = out;
        layer.weights.resize(static_cast<std::size_t>(in) * out);
        layer.biases.assign(out, 0.0);
        const double bound = std::sqrt(6.0 / (in + out));
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

void check_stage_shapes(const StageSpec& spec, const StageParams& params) {
    const auto shapes = spec.layer_shapes();
    if (params.layers.size() != shapes.size()) {
        throw StructuralError("stage has " + std::to_string(params.layers.size()) + " parameter layers, spec requires " +
                              std::to_string(shapes.size()));
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto& l = params.layers[i];
        const auto& [in, out] = shapes[i];
        if (l.fan_in != in || l.fan_out != out || l.weights.size() != static_cast<std::size_t>(in) * out ||
            l.biases.size() != static_cast<std::size_t>(out)) {
            throw StructuralError("layer " + std::to_string(i) + " shape mismatch");
        }
        for (double w : l.weights)
            if (!std::isfinite(w)) throw InputError("non-finite weight in layer " + std::to_string(i));
        for (double b : l.biases)
            if (!std::isfinite(b)) throw InputError("non-finite bias in layer " + std::to_string(i));
    }
}

namespace {

void apply_layer(const LayerParams& layer, std::span<const double> in, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(layer.fan_out));
    for (int r = 0; r < layer.fan_out; ++r) {
        double z = layer.biases[static_cast<std::size_t>(r)];
        const double* w = layer.weights.data() + static_cast<std::size_t>(r) * layer.fan_in;
        for (int c = 0; c < layer.fan_in; ++c) z += w[c] * in[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = stable_logistic(z);
    }
}

void gather_masked(const StageSpec& spec, std::span<const double> x, std::vector<double>& out) {
    out.resize(spec.feature_mask.size());
    for (std::size_t i = 0; i < spec.feature_mask.size(); ++i) {
        const int idx = spec.feature_mask[i];
        if (idx < 0 || static_cast<std::size_t>(idx) >= x.size()) {
            throw StructuralError("feature index " + std::to_string(idx) + " outside input of size " +
                                  std::to_string(x.size()));
        }
        const double v = x[static_cast<std::size_t>(idx)];
        if (!std::isfinite(v)) throw InputError("non-finite feature value at index " + std::to_string(idx));
        out[i] = v;
    }
}

}  // namespace

void stage_forward_cached(const StageSpec& spec, const StageParams& params, std::span<const double> x,
                          StageActivations& acts) {
    // shape/finiteness validation is the caller's job (done once per batch)
    acts.layer_out.resize(params.layers.size() + 1);
    gather_masked(spec, x, acts.layer_out[0]);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        apply_layer(params.layers[i], acts.layer_out[i], acts.layer_out[i + 1]);
    }
    acts.prob = acts.layer_out.back()[0];
}

double stage_forward(const StageSpec& spec, const StageParams& params, std::span<const double> x) {
    if (spec.kind == StageKind::Combiner) throw StructuralError("combiner stage has no forward model");
    check_stage_shapes(spec, params);
    StageActivations acts;
    stage_forward_cached(spec, params, x, acts);
    return acts.prob;
}

void stage_backward(const StageSpec& /*spec*/, const StageParams& params, const StageActivations& acts,
                    double dprob, StageParams& grad) {
    const std::size_t n_layers = params.layers.size();
    // delta = d objective / d z for the current layer, starting at the output.
    std::vector<double> delta(1);
    const double p = acts.prob;
    delta[0] = dprob * p * (1.0 - p);
    std::vector<double> next_delta;
    for (std::size_t li = n_layers; li-- > 0;) {
        const LayerParams& layer = params.layers[li];
        LayerParams& glayer = grad.layers[li];
        const std::vector<double>& in = acts.layer_out[li];
        for (int r = 0; r < layer.fan_out; ++r) {
            const double d = delta[static_cast<std::size_t>(r)];
            glayer.biases[static_cast<std::size_t>(r)] += d;
            double* gw = glayer.weights.data() + static_cast<std::size_t>(r) * layer.fan_in;
            for (int c = 0; c < layer.fan_in; ++c) gw[c] += d * in[static_cast<std::size_t>(c)];
        }
        if (li == 0) break;
        next_delta.assign(in.size(), 0.0);
        for (int r = 0; r < layer.fan_out; ++r) {
            const double d = delta[static_cast<std::size_t>(r)];
            const double* w = layer.weights.data() + static_cast<std::size_t>(r) * layer.fan_in;
            for (int c = 0; c < layer.fan_in; ++c) next_delta[static_cast<std::size_t>(c)] += d * w[c];
        }
        for (std::size_t c = 0; c < in.size(); ++c) {
            next_delta[c] *= in[c] * (1.0 - in[c]);  // logistic hidden units
        }
        delta.swap(next_delta);
    }
}

std::array<double, 5> basis_expand(std::span<const double> xy) {
    if (xy.size() != 2) {
        throw InputError("basis expansion expects exactly 2 features, got " + std::to_string(xy.size()));
    }
    const double x = xy[0];
    const double y = xy[1];
    return {x, y, x * x, y * y, x * y};
}

}  // namespace firmcascade
