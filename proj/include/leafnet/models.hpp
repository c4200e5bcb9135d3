#pragma once

#include <string>
#include <utility>
#include <vector>

#include "leafnet/layers.hpp"

namespace leafnet {

struct ModelSpec {
    std::string name = "dmcnn";  // dmcnn | brassicanet | beannet | micro_dsnet
    size_t num_classes = 3;
    std::vector<std::pair<size_t, size_t>> input_scales;  // (H,W); empty -> model default
    double width_multiplier = 1.0;
    double dropout = -1.0;  // <0 -> model default
    uint64_t seed = 0;

    void validate() const;
    std::vector<std::pair<size_t, size_t>> scales_or_default() const;
};

// Input node names are "input_<H>x<W>".
std::string input_name(size_t h, size_t w);

Graph build_dmcnn(const ModelSpec& spec);
Graph build_brassicanet(const ModelSpec& spec);
Graph build_beannet(const ModelSpec& spec);
Graph build_micro_dsnet(const ModelSpec& spec);
Graph build_model(const ModelSpec& spec);

// Graph manifest plus an echo of the model settings.
std::string build_manifest(const ModelSpec& spec, const Graph& g);

}  // namespace leafnet
