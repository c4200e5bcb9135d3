#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <map>
#include <string>

#include "fd_check.hpp"
#include "leafnet/models.hpp"

using namespace leafnet;
using nlohmann::json;
using fdcheck::random_tensor;

namespace {

// Forward a random batch through the model and require a clean probability
// matrix.
void check_probability_output(const ModelSpec& spec, size_t batch) {
    Graph g = build_model(spec);
    Rng rng(17);
    std::map<std::string, Tensor> inputs;
    for (auto [h, w] : spec.scales_or_default())
        inputs.emplace(input_name(h, w), random_tensor({batch, 3, h, w}, rng, 0.0, 1.0));
    // train mode: a fresh batch-norm model has no inference statistics yet
    Tensor y = g.forward(inputs, Mode::train);
    REQUIRE(y.shape() == Shape{batch, spec.num_classes});
    for (size_t n = 0; n < batch; ++n) {
        double s = 0;
        for (size_t k = 0; k < spec.num_classes; ++k) {
            CHECK(y.at2(n, k) >= 0.0);
            s += y.at2(n, k);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

json node_by_name(const json& manifest, const std::string& name) {
    for (const auto& n : manifest["nodes"])
        if (n["name"] == name) return n;
    FAIL("node not found: " << name);
    return {};
}

}  // namespace

TEST_CASE("every builder emits a valid classifier on a toy scale") {
    ModelSpec spec;
    spec.num_classes = 3;
    spec.width_multiplier = 0.25;
    spec.input_scales = {{32, 32}};
    for (const char* name : {"beannet", "brassicanet", "micro_dsnet", "dmcnn"}) {
        spec.name = name;
        INFO(name);
        check_probability_output(spec, 2);
    }
}

TEST_CASE("multi-scale model consumes one input per scale") {
    ModelSpec spec;
    spec.name = "dmcnn";
    spec.num_classes = 4;
    spec.width_multiplier = 0.125;
    spec.input_scales = {{32, 32}, {48, 48}};
    check_probability_output(spec, 2);

    // a missing scale input is an error
    Graph g = build_model(spec);
    Rng rng(3);
    std::map<std::string, Tensor> inputs;
    inputs.emplace(input_name(32, 32), random_tensor({1, 3, 32, 32}, rng));
    CHECK_THROWS(g.forward(inputs, Mode::train));
}

TEST_CASE("parameter count oracle for the bean classifier") {
    ModelSpec spec;
    spec.name = "beannet";
    spec.num_classes = 3;
    spec.input_scales = {{32, 32}};
    Graph g = build_model(spec);
    // conv1 10x(3x3x3)+10, conv2..5 10x(10x3x3)+10, flatten to 10,
    // fc1 10x64+64, logits 64x3+3
    const size_t expected = (10 * 27 + 10) + 4 * (10 * 90 + 10) + (10 * 64 + 64) +
                            (64 * 3 + 3);
    CHECK(g.param_count() == expected);
}

TEST_CASE("multi-scale manifest conformance at the published scales") {
    ModelSpec spec;
    spec.name = "dmcnn";
    spec.num_classes = 3;
    Graph g = build_model(spec);
    json m = json::parse(build_manifest(spec, g));

    CHECK(m["model"]["input_scales"] ==
          json::array({{224, 224}, {256, 256}, {128, 128}}));

    const size_t expect_channels[4] = {32, 64, 128, 256};
    const size_t expect_kernels[4] = {7, 5, 3, 3};
    size_t softmax_count = 0;
    for (const auto& n : m["nodes"])
        if (n["kind"] == "softmax") ++softmax_count;
    CHECK(softmax_count == 1);

    for (int s = 0; s < 3; ++s) {
        const std::string p = "s" + std::to_string(s) + "_";
        for (int st = 0; st < 4; ++st) {
            json conv =
                node_by_name(m, p + "stage" + std::to_string(st + 1) + "_conv");
            CHECK(conv["out_channels"] == expect_channels[st]);
            CHECK(conv["kernel"] == json::array({expect_kernels[st], expect_kernels[st]}));
        }
        CHECK(node_by_name(m, p + "b1_gap")["kind"] == "global_avg_pool");
        for (int b = 2; b <= 4; ++b) {
            CHECK(node_by_name(m, p + "b" + std::to_string(b) + "_pool")["kind"] ==
                  "maxpool2d");
            CHECK(node_by_name(m, p + "b" + std::to_string(b) + "_flat")["kind"] ==
                  "flatten");
        }
        CHECK(node_by_name(m, p + "concat")["inputs"].size() == 4);
        CHECK(node_by_name(m, p + "fc1")["units"] == 256);
        CHECK(node_by_name(m, p + "fc2")["units"] == 128);
        CHECK(node_by_name(m, p + "head_drop1")["rate"] == 0.5);
        CHECK(node_by_name(m, p + "head_drop2")["rate"] == 0.5);
    }
    CHECK(node_by_name(m, "fuse")["inputs"].size() == 3);
}

TEST_CASE("five-conv classifier manifest: layer count and filter/kernel rosters") {
    ModelSpec spec;
    spec.name = "brassicanet";
    spec.num_classes = 3;
    Graph g = build_model(spec);
    json m = json::parse(build_manifest(spec, g));
    const size_t layers = m["layer_count"].get<size_t>();
    CHECK(layers >= 23);
    CHECK(layers <= 24);
    const size_t filters[5] = {64, 256, 256, 256, 128};
    const size_t kernels[5] = {5, 3, 3, 3, 3};
    for (int i = 0; i < 5; ++i) {
        json conv = node_by_name(m, "conv" + std::to_string(i + 1));
        CHECK(conv["out_channels"] == filters[i]);
        CHECK(conv["kernel"] == json::array({kernels[i], kernels[i]}));
    }
    CHECK(node_by_name(m, "fc1")["units"] == 512);
    CHECK(node_by_name(m, "fc2")["units"] == 512);
}

TEST_CASE("width multiplier shrinks channel widths") {
    ModelSpec spec;
    spec.name = "beannet";
    spec.num_classes = 3;
    spec.input_scales = {{32, 32}};
    Graph full = build_model(spec);
    spec.width_multiplier = 0.5;
    Graph half = build_model(spec);
    CHECK(half.param_count() < full.param_count());
}

TEST_CASE("spec validation rejects bad configurations") {
    ModelSpec spec;
    spec.num_classes = 1;
    CHECK_THROWS(spec.validate());
    spec.num_classes = 3;
    spec.width_multiplier = 0.0;
    CHECK_THROWS(spec.validate());
    spec.width_multiplier = 2.0;
    CHECK_THROWS(spec.validate());
    spec.width_multiplier = 1.0;
    spec.name = "resnet";
    CHECK_THROWS(spec.validate());
    spec.name = "dmcnn";
    spec.input_scales = {{16, 16}};
    CHECK_THROWS(build_model(spec));  // too small for the pool stages
    spec.name = "beannet";
    CHECK_THROWS(build_model(spec));
}

TEST_CASE("depthwise-separable micro net uses separable stages") {
    ModelSpec spec;
    spec.name = "micro_dsnet";
    spec.num_classes = 3;
    spec.input_scales = {{32, 32}};
    Graph g = build_model(spec);
    json m = json::parse(g.manifest_json());
    size_t ds = 0;
    for (const auto& n : m["nodes"])
        if (n["kind"] == "depthwise_sep_conv") ++ds;
    CHECK(ds == 3);
    // channel doubling: 16, 32, 64 after a stem of 8
    CHECK(node_by_name(m, "ds1")["out_channels"] == 16);
    CHECK(node_by_name(m, "ds3")["out_channels"] == 64);
}

TEST_CASE("builds are seed-deterministic") {
    ModelSpec spec;
    spec.name = "beannet";
    spec.num_classes = 3;
    spec.input_scales = {{32, 32}};
    spec.seed = 5;
    Graph a = build_model(spec);
    Graph b = build_model(spec);
    auto la = a.learnables();
    for (size_t i = 0; i < la.size(); ++i) {
        Tensor& pa = a.param(la[i]);
        Tensor& pb = b.param(b.learnables()[i]);
        REQUIRE(pa.size() == pb.size());
        for (size_t j = 0; j < pa.size(); ++j) CHECK(pa[j] == pb[j]);
    }
    spec.seed = 6;
    Graph c = build_model(spec);
    bool differ = false;
    Tensor& pa = a.param(la[0]);
    Tensor& pc = c.param(c.learnables()[0]);
    for (size_t j = 0; j < pa.size(); ++j) differ = differ || pa[j] != pc[j];
    CHECK(differ);
}
