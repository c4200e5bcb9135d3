#include "leafnet/gradcam.hpp"

#include <algorithm>
#include <stdexcept>

namespace leafnet {

Heatmap gradcam(Graph& g, const std::map<std::string, Tensor>& inputs,
                long long target_class, int tap_node) {
    if (tap_node < 0) {
        for (int i = static_cast<int>(g.node_count()) - 1; i >= 0; --i) {
            const LayerKind k = g.node(i).kind;
            if (k == LayerKind::conv2d || k == LayerKind::depthwise_sep_conv) {
                tap_node = i;
                break;
            }
        }
        if (tap_node < 0) throw std::runtime_error("gradcam: graph has no convolutional node");
    }

    const Tensor probs = g.forward(inputs, Mode::infer);
    if (probs.rank() != 2 || probs.extent(0) != 1)
        throw std::invalid_argument("gradcam: expects a single-sample batch");
    const size_t k = probs.extent(1);

    Heatmap hm;
    hm.tap_node = tap_node;
    hm.predicted_class = 0;
    for (size_t j = 1; j < k; ++j)
        if (probs.at2(0, j) > probs.at2(0, hm.predicted_class)) hm.predicted_class = j;
    hm.predicted_prob = probs.at2(0, hm.predicted_class);
    hm.target_class =
        target_class < 0 ? hm.predicted_class : static_cast<size_t>(target_class);
    if (hm.target_class >= k)
        throw std::invalid_argument("gradcam: target class out of range");

    Tensor dlogits({1, k});
    dlogits.at2(0, hm.target_class) = 1.0;
    g.backward_from_logits(dlogits);

    const Tensor& fmap = g.activation(tap_node);
    const Tensor& fgrad = g.activation_grad(tap_node);
    if (fmap.rank() != 4)
        throw std::invalid_argument("gradcam: tap layer has no spatial extent");
    if (fgrad.size() == 0)
        throw std::runtime_error("gradcam: tap layer is not on the path to the output");
    const size_t c = fmap.extent(1), h = fmap.extent(2), w = fmap.extent(3);

    hm.values = Tensor({h, w});
    for (size_t ch = 0; ch < c; ++ch) {
        double alpha = 0.0;
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < w; ++j) alpha += fgrad.at4(0, ch, i, j);
        alpha /= double(h * w);
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < w; ++j)
                hm.values.at2(i, j) += alpha * fmap.at4(0, ch, i, j);
    }
    double mx = 0.0;
    for (size_t i = 0; i < hm.values.size(); ++i) {
        hm.values[i] = std::max(hm.values[i], 0.0);
        mx = std::max(mx, hm.values[i]);
    }
    if (mx > 0.0)
        for (size_t i = 0; i < hm.values.size(); ++i) hm.values[i] /= mx;
    return hm;
}

}  // namespace leafnet
