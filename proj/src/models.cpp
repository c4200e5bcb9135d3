#include "leafnet/models.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace leafnet {

void ModelSpec::validate() const {
    if (num_classes < 2) throw std::invalid_argument("model: num_classes must be >= 2");
    if (width_multiplier <= 0.0 || width_multiplier > 1.0)
        throw std::invalid_argument("model: width_multiplier must be in (0,1]");
    if (name != "dmcnn" && name != "brassicanet" && name != "beannet" &&
        name != "micro_dsnet")
        throw std::invalid_argument("model: unknown name '" + name + "'");
}

std::vector<std::pair<size_t, size_t>> ModelSpec::scales_or_default() const {
    if (!input_scales.empty()) return input_scales;
    if (name == "dmcnn") return {{224, 224}, {256, 256}, {128, 128}};
    return {{128, 128}};
}

std::string input_name(size_t h, size_t w) {
    return "input_" + std::to_string(h) + "x" + std::to_string(w);
}

static size_t scaled(size_t channels, double wm) {
    const size_t c = static_cast<size_t>(std::lround(double(channels) * wm));
    return c < 1 ? 1 : c;
}

static LayerNode conv_node(std::string name, int input, size_t filters, size_t k,
                           Padding pad = Padding::same, size_t stride = 1) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = LayerKind::conv2d;
    n.inputs = {input};
    n.hyper.out_channels = filters;
    n.hyper.kernel_h = n.hyper.kernel_w = k;
    n.hyper.padding = pad;
    n.hyper.stride = stride;
    return n;
}

static LayerNode simple_node(std::string name, LayerKind kind, int input) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = kind;
    n.inputs = {input};
    return n;
}

static LayerNode pool_node(std::string name, int input, size_t window = 2, size_t stride = 2) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = LayerKind::maxpool2d;
    n.inputs = {input};
    n.hyper.pool_h = n.hyper.pool_w = window;
    n.hyper.pool_stride = stride;
    return n;
}

static LayerNode dense_node(std::string name, int input, size_t units) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = LayerKind::dense;
    n.inputs = {input};
    n.hyper.units = units;
    return n;
}

static LayerNode dropout_node(std::string name, int input, double rate) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = LayerKind::dropout;
    n.inputs = {input};
    n.hyper.dropout_rate = rate;
    return n;
}

static LayerNode input_node(std::string name, Shape shape) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = LayerKind::input;
    n.hyper.input_shape = std::move(shape);
    return n;
}

static LayerNode concat_node(std::string name, std::vector<int> inputs) {
    LayerNode n;
    n.name = std::move(name);
    n.kind = LayerKind::concat;
    n.inputs = std::move(inputs);
    n.hyper.concat_axis = 1;
    return n;
}

Graph build_dmcnn(const ModelSpec& spec) {
    spec.validate();
    const double wm = spec.width_multiplier;
    const double drop = spec.dropout < 0.0 ? 0.5 : spec.dropout;
    const size_t trunk_channels[4] = {scaled(32, wm), scaled(64, wm), scaled(128, wm),
                                      scaled(256, wm)};
    const size_t trunk_kernels[4] = {7, 5, 3, 3};

    Graph g;
    std::vector<int> scale_features;
    size_t si = 0;
    for (auto [h, w] : spec.scales_or_default()) {
        // 4 trunk pools plus one branch pool
        if (h < 32 || w < 32)
            throw std::invalid_argument("dmcnn: scale " + std::to_string(h) + "x" +
                                        std::to_string(w) + " is too small for 4 pool stages");
        const std::string p = "s" + std::to_string(si) + "_";
        int cur = g.add(input_node(input_name(h, w), {3, h, w}));
        std::vector<int> stage_out;
        for (int stage = 0; stage < 4; ++stage) {
            const std::string sp = p + "stage" + std::to_string(stage + 1) + "_";
            cur = g.add(conv_node(sp + "conv", cur, trunk_channels[stage],
                                  trunk_kernels[stage]));
            cur = g.add(simple_node(sp + "bn", LayerKind::batchnorm, cur));
            cur = g.add(simple_node(sp + "relu", LayerKind::relu, cur));
            cur = g.add(pool_node(sp + "pool", cur));
            stage_out.push_back(cur);
        }
        // branch 1: global average pooling then a dense layer and dropout
        int b1 = g.add(simple_node(p + "b1_gap", LayerKind::global_avg_pool, stage_out[0]));
        b1 = g.add(dense_node(p + "b1_dense", b1, scaled(64, wm)));
        b1 = g.add(dropout_node(p + "b1_drop", b1, drop));
        // branches 2-4: max pool then flatten
        std::vector<int> branches = {b1};
        for (int bidx = 1; bidx < 4; ++bidx) {
            const std::string bp = p + "b" + std::to_string(bidx + 1) + "_";
            int b = g.add(pool_node(bp + "pool", stage_out[bidx]));
            b = g.add(simple_node(bp + "flat", LayerKind::flatten, b));
            branches.push_back(b);
        }
        int cat = g.add(concat_node(p + "concat", branches));
        int d = g.add(dense_node(p + "fc1", cat, 256));
        d = g.add(simple_node(p + "fc1_bn", LayerKind::batchnorm, d));
        d = g.add(simple_node(p + "fc1_relu", LayerKind::relu, d));
        d = g.add(dense_node(p + "fc2", d, 128));
        d = g.add(simple_node(p + "fc2_bn", LayerKind::batchnorm, d));
        d = g.add(simple_node(p + "fc2_relu", LayerKind::relu, d));
        d = g.add(dropout_node(p + "head_drop1", d, drop));
        d = g.add(dropout_node(p + "head_drop2", d, drop));
        scale_features.push_back(d);
        ++si;
    }
    int fused = scale_features[0];
    if (scale_features.size() > 1) fused = g.add(concat_node("fuse", scale_features));
    int logits = g.add(dense_node("logits", fused, spec.num_classes));
    int out = g.add(simple_node("softmax", LayerKind::softmax, logits));
    g.set_output(out);
    g.finalize(spec.seed);
    g.validate_classifier();
    return g;
}

Graph build_brassicanet(const ModelSpec& spec) {
    spec.validate();
    const double wm = spec.width_multiplier;
    const double drop = spec.dropout < 0.0 ? 0.5 : spec.dropout;
    auto scales = spec.scales_or_default();
    auto [h, w] = scales[0];
    if (h < 16 || w < 16)
        throw std::invalid_argument("brassicanet: input scale " + std::to_string(h) + "x" +
                                    std::to_string(w) + " cannot fit 4 pool stages");
    const size_t filters[5] = {scaled(64, wm), scaled(256, wm), scaled(256, wm),
                               scaled(256, wm), scaled(128, wm)};
    const size_t kernels[5] = {5, 3, 3, 3, 3};

    Graph g;
    int cur = g.add(input_node(input_name(h, w), {3, h, w}));
    for (int i = 0; i < 4; ++i) {
        const std::string p = "conv" + std::to_string(i + 1);
        cur = g.add(conv_node(p, cur, filters[i], kernels[i]));
        cur = g.add(simple_node(p + "_relu", LayerKind::relu, cur));
        cur = g.add(pool_node(p + "_pool", cur));
    }
    cur = g.add(conv_node("conv5", cur, filters[4], kernels[4]));
    cur = g.add(simple_node("conv5_relu", LayerKind::relu, cur));
    cur = g.add(simple_node("flatten", LayerKind::flatten, cur));
    cur = g.add(dense_node("fc1", cur, scaled(512, wm)));
    cur = g.add(simple_node("fc1_relu", LayerKind::relu, cur));
    cur = g.add(dense_node("fc2", cur, scaled(512, wm)));
    cur = g.add(simple_node("fc2_relu", LayerKind::relu, cur));
    cur = g.add(dropout_node("drop", cur, drop));
    cur = g.add(dense_node("logits", cur, spec.num_classes));
    int out = g.add(simple_node("softmax", LayerKind::softmax, cur));
    g.set_output(out);
    g.finalize(spec.seed);
    g.validate_classifier();
    return g;
}

Graph build_beannet(const ModelSpec& spec) {
    spec.validate();
    const double wm = spec.width_multiplier;
    const double drop = spec.dropout < 0.0 ? 0.3 : spec.dropout;
    auto [h, w] = spec.scales_or_default()[0];
    if (h < 32 || w < 32)
        throw std::invalid_argument("beannet: input scale " + std::to_string(h) + "x" +
                                    std::to_string(w) + " cannot fit 5 pool stages");
    Graph g;
    int cur = g.add(input_node(input_name(h, w), {3, h, w}));
    for (int i = 0; i < 5; ++i) {
        const std::string p = "conv" + std::to_string(i + 1);
        cur = g.add(conv_node(p, cur, scaled(10, wm), 3));
        cur = g.add(simple_node(p + "_relu", LayerKind::relu, cur));
        cur = g.add(pool_node(p + "_pool", cur));
    }
    cur = g.add(simple_node("flatten", LayerKind::flatten, cur));
    cur = g.add(dense_node("fc1", cur, 64));
    cur = g.add(simple_node("fc1_relu", LayerKind::relu, cur));
    cur = g.add(dropout_node("drop", cur, drop));
    cur = g.add(dense_node("logits", cur, spec.num_classes));
    int out = g.add(simple_node("softmax", LayerKind::softmax, cur));
    g.set_output(out);
    g.finalize(spec.seed);
    g.validate_classifier();
    return g;
}

Graph build_micro_dsnet(const ModelSpec& spec) {
    spec.validate();
    const double wm = spec.width_multiplier;
    auto [h, w] = spec.scales_or_default()[0];
    if (h < 8 || w < 8)
        throw std::invalid_argument("micro_dsnet: input scale " + std::to_string(h) + "x" +
                                    std::to_string(w) + " cannot fit 3 pool stages");
    Graph g;
    int cur = g.add(input_node(input_name(h, w), {3, h, w}));
    cur = g.add(conv_node("stem", cur, scaled(8, wm), 3));
    size_t channels = scaled(8, wm);
    for (int i = 0; i < 3; ++i) {
        channels *= 2;
        const std::string p = "ds" + std::to_string(i + 1);
        LayerNode n;
        n.name = p;
        n.kind = LayerKind::depthwise_sep_conv;
        n.inputs = {cur};
        n.hyper.out_channels = channels;
        n.hyper.kernel_h = n.hyper.kernel_w = 3;
        n.hyper.padding = Padding::same;
        cur = g.add(std::move(n));
        cur = g.add(simple_node(p + "_bn", LayerKind::batchnorm, cur));
        cur = g.add(simple_node(p + "_relu", LayerKind::relu, cur));
        cur = g.add(pool_node(p + "_pool", cur));
    }
    cur = g.add(simple_node("gap", LayerKind::global_avg_pool, cur));
    cur = g.add(dense_node("logits", cur, spec.num_classes));
    int out = g.add(simple_node("softmax", LayerKind::softmax, cur));
    g.set_output(out);
    g.finalize(spec.seed);
    g.validate_classifier();
    return g;
}

Graph build_model(const ModelSpec& spec) {
    spec.validate();
    if (spec.name == "dmcnn") return build_dmcnn(spec);
    if (spec.name == "brassicanet") return build_brassicanet(spec);
    if (spec.name == "beannet") return build_beannet(spec);
    return build_micro_dsnet(spec);
}

std::string build_manifest(const ModelSpec& spec, const Graph& g) {
    nlohmann::json j = nlohmann::json::parse(g.manifest_json());
    nlohmann::json s;
    s["name"] = spec.name;
    s["num_classes"] = spec.num_classes;
    s["width_multiplier"] = spec.width_multiplier;
    s["seed"] = spec.seed;
    nlohmann::json scales = nlohmann::json::array();
    for (auto [h, w] : spec.scales_or_default()) scales.push_back({h, w});
    s["input_scales"] = scales;
    j["model"] = std::move(s);
    return j.dump(2);
}

}  // namespace leafnet
