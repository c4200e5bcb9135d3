#pragma once

#include <map>
#include <string>

#include "leafnet/layers.hpp"

namespace leafnet {

struct Heatmap {
    Tensor values;  // (H,W) of the tapped feature map, max-normalized to [0,1]
    size_t target_class = 0;
    int tap_node = -1;
    double predicted_prob = 0.0;
    size_t predicted_class = 0;
};

// Channel weights are the spatial means of d(logit_target)/d(feature map);
// heatmap = max-normalized ReLU of the weighted channel sum. Differentiates
// the pre-softmax logit; runs in infer mode (dropout identity, batch-norm
// running stats).
// target_class < 0 selects the predicted class; tap_node < 0 selects the
// last convolutional node.
Heatmap gradcam(Graph& g, const std::map<std::string, Tensor>& inputs,
                long long target_class = -1, int tap_node = -1);

}  // namespace leafnet
