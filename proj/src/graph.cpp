#include <json.hpp>

#include <stdexcept>

#include "leafnet/layers.hpp"
#include "leafnet/rng.hpp"

namespace leafnet {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::input: return "input";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::depthwise_sep_conv: return "depthwise_sep_conv";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::softmax: return "softmax";
        case LayerKind::dropout: return "dropout";
        case LayerKind::flatten: return "flatten";
        case LayerKind::concat: return "concat";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& s) {
    for (int k = 0; k <= static_cast<int>(LayerKind::concat); ++k)
        if (s == layer_kind_name(static_cast<LayerKind>(k))) return static_cast<LayerKind>(k);
    throw std::invalid_argument("unknown layer kind: " + s);
}

int Graph::add(LayerNode node) {
    const int id = static_cast<int>(nodes_.size());
    if (node.kind == LayerKind::input) {
        if (!node.inputs.empty())
            throw std::invalid_argument("graph: input node must have no upstream");
    } else if (node.kind == LayerKind::concat) {
        if (node.inputs.size() < 2)
            throw std::invalid_argument("graph: concat needs >= 2 upstream nodes");
    } else if (node.inputs.size() != 1) {
        throw std::invalid_argument("graph: node '" + node.name + "' needs exactly 1 upstream");
    }
    for (int up : node.inputs)
        if (up < 0 || up >= id)
            throw std::invalid_argument("graph: node '" + node.name +
                                        "' references a node not yet added (cycle or bad id)");
    if (node.kind == LayerKind::dropout &&
        (node.hyper.dropout_rate < 0.0 || node.hyper.dropout_rate >= 1.0))
        throw std::invalid_argument("graph: dropout rate must be in [0,1)");
    if (node.kind == LayerKind::batchnorm && node.hyper.bn_epsilon <= 0.0)
        throw std::invalid_argument("graph: batchnorm epsilon must be > 0");
    if (find(node.name) >= 0)
        throw std::invalid_argument("graph: duplicate node name '" + node.name + "'");
    nodes_.push_back(std::move(node));
    finalized_ = false;
    return id;
}

void Graph::set_output(int id) {
    check_id(id);
    output_ = id;
}

void Graph::check_id(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
        throw std::out_of_range("graph: bad node id");
}

int Graph::find(const std::string& name) const {
    for (size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].name == name) return static_cast<int>(i);
    return -1;
}

void Graph::finalize(uint64_t seed) {
    shapes_.assign(nodes_.size(), {});
    for (size_t i = 0; i < nodes_.size(); ++i) {
        LayerNode& nd = nodes_[i];
        const Shape* in = nd.inputs.empty() ? nullptr : &shapes_[nd.inputs[0]];
        auto need_chw = [&]() {
            if (!in || in->size() != 3)
                throw std::invalid_argument("graph: node '" + nd.name +
                                            "' needs a (C,H,W) input");
        };
        Shape out;
        switch (nd.kind) {
            case LayerKind::input:
                out = nd.hyper.input_shape;
                break;
            case LayerKind::conv2d: {
                need_chw();
                ConvDims d = conv_out_dims((*in)[1], (*in)[2], nd.hyper.kernel_h,
                                           nd.hyper.kernel_w, nd.hyper.stride, nd.hyper.padding);
                out = {nd.hyper.out_channels, d.h_out, d.w_out};
                if (nd.params.empty()) {
                    const size_t c = (*in)[0], f = nd.hyper.out_channels;
                    const size_t kh = nd.hyper.kernel_h, kw = nd.hyper.kernel_w;
                    Tensor w({f, c, kh, kw});
                    const double a = glorot_bound(c * kh * kw, f * kh * kw);
                    Rng rng(derive_seed(seed, i, 0));
                    for (size_t t = 0; t < w.size(); ++t) w[t] = rng.uniform(-a, a);
                    w.set_name(nd.name + ".w");
                    Tensor b({f});
                    b.set_name(nd.name + ".b");
                    nd.params = {std::move(w), std::move(b)};
                }
                break;
            }
            case LayerKind::depthwise_sep_conv: {
                need_chw();
                ConvDims d = conv_out_dims((*in)[1], (*in)[2], nd.hyper.kernel_h,
                                           nd.hyper.kernel_w, nd.hyper.stride, nd.hyper.padding);
                out = {nd.hyper.out_channels, d.h_out, d.w_out};
                if (nd.params.empty()) {
                    const size_t c = (*in)[0], f = nd.hyper.out_channels;
                    const size_t kh = nd.hyper.kernel_h, kw = nd.hyper.kernel_w;
                    Tensor wd({c, kh, kw});
                    Rng r0(derive_seed(seed, i, 0));
                    const double a0 = glorot_bound(kh * kw, kh * kw);
                    for (size_t t = 0; t < wd.size(); ++t) wd[t] = r0.uniform(-a0, a0);
                    wd.set_name(nd.name + ".wd");
                    Tensor wp({f, c});
                    Rng r1(derive_seed(seed, i, 1));
                    const double a1 = glorot_bound(c, f);
                    for (size_t t = 0; t < wp.size(); ++t) wp[t] = r1.uniform(-a1, a1);
                    wp.set_name(nd.name + ".wp");
                    Tensor b({f});
                    b.set_name(nd.name + ".b");
                    nd.params = {std::move(wd), std::move(wp), std::move(b)};
                }
                break;
            }
            case LayerKind::maxpool2d: {
                need_chw();
                const size_t h = (*in)[1], w = (*in)[2];
                if (nd.hyper.pool_h > h || nd.hyper.pool_w > w)
                    throw std::invalid_argument("graph: pool window exceeds input at '" +
                                                nd.name + "'");
                out = {(*in)[0], (h - nd.hyper.pool_h) / nd.hyper.pool_stride + 1,
                       (w - nd.hyper.pool_w) / nd.hyper.pool_stride + 1};
                break;
            }
            case LayerKind::global_avg_pool:
                need_chw();
                out = {(*in)[0]};
                break;
            case LayerKind::batchnorm: {
                if (!in || in->empty())
                    throw std::invalid_argument("graph: batchnorm needs an input");
                out = *in;
                const size_t c = (*in)[0];
                if (nd.params.empty()) {
                    Tensor gamma({c}, 1.0), beta({c}, 0.0);
                    gamma.set_name(nd.name + ".gamma");
                    beta.set_name(nd.name + ".beta");
                    nd.params = {std::move(gamma), std::move(beta)};
                    Tensor rm({c}, 0.0), rv({c}, 1.0);
                    rm.set_name(nd.name + ".running_mean");
                    rv.set_name(nd.name + ".running_var");
                    nd.state = {std::move(rm), std::move(rv)};
                }
                break;
            }
            case LayerKind::dense: {
                if (!in || in->size() != 1)
                    throw std::invalid_argument("graph: dense at '" + nd.name +
                                                "' needs a flat (d,) input");
                const size_t d_in = (*in)[0], d_out = nd.hyper.units;
                out = {d_out};
                if (nd.params.empty()) {
                    Tensor w({d_in, d_out});
                    Rng rng(derive_seed(seed, i, 0));
                    const double a = glorot_bound(d_in, d_out);
                    for (size_t t = 0; t < w.size(); ++t) w[t] = rng.uniform(-a, a);
                    w.set_name(nd.name + ".w");
                    Tensor b({d_out});
                    b.set_name(nd.name + ".b");
                    nd.params = {std::move(w), std::move(b)};
                }
                break;
            }
            case LayerKind::relu:
            case LayerKind::softmax:
            case LayerKind::dropout:
                out = *in;
                break;
            case LayerKind::flatten: {
                size_t total = 1;
                for (size_t e : *in) total *= e;
                out = {total};
                break;
            }
            case LayerKind::concat: {
                // hyper.concat_axis counts the batch axis; axis 1 is the
                // feature/channel axis of the unbatched shapes here
                const size_t ax = nd.hyper.concat_axis - 1;
                out = shapes_[nd.inputs[0]];
                if (ax >= out.size())
                    throw std::invalid_argument("graph: concat axis out of range at '" +
                                                nd.name + "'");
                size_t total = 0;
                for (int up : nd.inputs) {
                    const Shape& s = shapes_[up];
                    if (s.size() != out.size())
                        throw std::invalid_argument("graph: concat rank mismatch at '" +
                                                    nd.name + "'");
                    for (size_t k = 0; k < s.size(); ++k)
                        if (k != ax && s[k] != out[k])
                            throw std::invalid_argument(
                                "graph: concat off-axis mismatch at '" + nd.name + "'");
                    total += s[ax];
                }
                out[ax] = total;
                break;
            }
        }
        shapes_[i] = std::move(out);
    }
    finalized_ = true;
}

void Graph::validate_classifier() const {
    if (output_ < 0) throw std::runtime_error("graph: no output node set");
    int softmax_count = 0;
    for (const auto& nd : nodes_)
        if (nd.kind == LayerKind::softmax) ++softmax_count;
    if (softmax_count != 1 || nodes_[output_].kind != LayerKind::softmax)
        throw std::runtime_error(
            "graph: classification graph must have exactly one softmax node as output");
}

Tensor Graph::forward(const std::map<std::string, Tensor>& inputs, Mode mode) {
    if (!finalized_) throw std::runtime_error("graph: forward before finalize");
    if (output_ < 0) throw std::runtime_error("graph: no output node set");
    mode_ = mode;
    acts_.assign(nodes_.size(), Tensor());
    aux_.assign(nodes_.size(), Tensor());
    bn_cache_.assign(nodes_.size(), BatchNormCache());
    size_t batch = 0;

    for (size_t i = 0; i < nodes_.size(); ++i) {
        LayerNode& nd = nodes_[i];
        const Tensor* in = nd.inputs.empty() ? nullptr : &acts_[nd.inputs[0]];
        switch (nd.kind) {
            case LayerKind::input: {
                auto it = inputs.find(nd.name);
                if (it == inputs.end())
                    throw std::invalid_argument("graph: missing input '" + nd.name + "'");
                const Tensor& x = it->second;
                Shape expect = {x.rank() ? x.extent(0) : 0};
                expect.insert(expect.end(), nd.hyper.input_shape.begin(),
                              nd.hyper.input_shape.end());
                if (x.shape() != expect)
                    throw std::invalid_argument("graph: input '" + nd.name +
                                                "' has the wrong shape");
                if (batch == 0) batch = x.extent(0);
                else if (batch != x.extent(0))
                    throw std::invalid_argument("graph: inconsistent batch extents");
                acts_[i] = x;
                break;
            }
            case LayerKind::conv2d:
                acts_[i] = conv2d_forward(*in, nd.params[0], nd.params[1], nd.hyper.stride,
                                          nd.hyper.padding);
                break;
            case LayerKind::depthwise_sep_conv:
                acts_[i] = depthwise_sep_forward(*in, nd.params[0], nd.params[1], nd.params[2],
                                                 nd.hyper.stride, nd.hyper.padding, &aux_[i]);
                break;
            case LayerKind::maxpool2d:
                acts_[i] = maxpool2d_forward(*in, nd.hyper.pool_h, nd.hyper.pool_w,
                                             nd.hyper.pool_stride, &aux_[i]);
                break;
            case LayerKind::global_avg_pool:
                acts_[i] = global_avg_pool_forward(*in);
                break;
            case LayerKind::batchnorm:
                acts_[i] = batchnorm_forward(*in, nd.params[0], nd.params[1], nd.state[0],
                                             nd.state[1], nd.stats_ready, nd.hyper.bn_momentum,
                                             nd.hyper.bn_epsilon, mode, &bn_cache_[i]);
                break;
            case LayerKind::dense:
                acts_[i] = dense_forward(*in, nd.params[0], nd.params[1]);
                break;
            case LayerKind::relu:
                acts_[i] = relu_forward(*in);
                break;
            case LayerKind::softmax:
                acts_[i] = softmax_forward(*in);
                break;
            case LayerKind::dropout:
                acts_[i] = dropout_forward(*in, nd.hyper.dropout_rate, mode,
                                           derive_seed(dropout_seed, i, step), &aux_[i]);
                break;
            case LayerKind::flatten: {
                Shape s = {in->extent(0), shapes_[i][0]};
                acts_[i] = in->reshaped(s);
                break;
            }
            case LayerKind::concat: {
                std::vector<const Tensor*> xs;
                for (int up : nd.inputs) xs.push_back(&acts_[up]);
                acts_[i] = concat_forward(xs, nd.hyper.concat_axis);
                break;
            }
        }
    }
    forward_done_ = true;
    if (mode == Mode::train) ++step;
    return acts_[output_];
}

static void backprop_nodes(Graph& g, std::vector<Tensor>& act_grads,
                           std::vector<std::vector<Tensor>>& grads,
                           const std::vector<Tensor>& acts, const std::vector<Tensor>& aux,
                           const std::vector<BatchNormCache>& bn_cache, int from_id);

void Graph::backward(const Tensor& d_output) {
    if (!forward_done_) throw std::runtime_error("graph: backward before forward");
    act_grads_.assign(nodes_.size(), Tensor());
    grads_.assign(nodes_.size(), {});
    act_grads_[output_] = d_output;
    backprop_nodes(*this, act_grads_, grads_, acts_, aux_, bn_cache_, output_);
}

void Graph::backward_from_logits(const Tensor& d_logits) {
    if (!forward_done_) throw std::runtime_error("graph: backward before forward");
    if (nodes_[output_].kind != LayerKind::softmax)
        throw std::runtime_error("graph: backward_from_logits needs a softmax output");
    const int logits_id = nodes_[output_].inputs[0];
    act_grads_.assign(nodes_.size(), Tensor());
    grads_.assign(nodes_.size(), {});
    act_grads_[logits_id] = d_logits;
    backprop_nodes(*this, act_grads_, grads_, acts_, aux_, bn_cache_, logits_id);
}

static void accumulate(Tensor& into, Tensor value) {
    if (into.size() == 0) into = std::move(value);
    else into = elementwise(into, value, EwOp::add);
}

static void backprop_nodes(Graph& g, std::vector<Tensor>& act_grads,
                           std::vector<std::vector<Tensor>>& grads,
                           const std::vector<Tensor>& acts, const std::vector<Tensor>& aux,
                           const std::vector<BatchNormCache>& bn_cache, int from_id) {
    for (int i = from_id; i >= 0; --i) {
        LayerNode& nd = g.node(i);
        Tensor& dy = act_grads[i];
        if (dy.size() == 0) continue;  // node not on any path to the output
        const Tensor* in = nd.inputs.empty() ? nullptr : &acts[nd.inputs[0]];
        switch (nd.kind) {
            case LayerKind::input:
                break;
            case LayerKind::conv2d: {
                Tensor dx, dw, db;
                conv2d_backward(*in, nd.params[0], dy, nd.hyper.stride, nd.hyper.padding, dx,
                                dw, db);
                grads[i] = {std::move(dw), std::move(db)};
                accumulate(act_grads[nd.inputs[0]], std::move(dx));
                break;
            }
            case LayerKind::depthwise_sep_conv: {
                Tensor dx, dwd, dwp, db;
                depthwise_sep_backward(*in, nd.params[0], nd.params[1], aux[i], dy,
                                       nd.hyper.stride, nd.hyper.padding, dx, dwd, dwp, db);
                grads[i] = {std::move(dwd), std::move(dwp), std::move(db)};
                accumulate(act_grads[nd.inputs[0]], std::move(dx));
                break;
            }
            case LayerKind::maxpool2d:
                accumulate(act_grads[nd.inputs[0]],
                           maxpool2d_backward(*in, dy, aux[i], nd.hyper.pool_h,
                                              nd.hyper.pool_w, nd.hyper.pool_stride));
                break;
            case LayerKind::global_avg_pool:
                accumulate(act_grads[nd.inputs[0]],
                           global_avg_pool_backward(in->shape(), dy));
                break;
            case LayerKind::batchnorm: {
                Tensor dx, dgamma, dbeta;
                batchnorm_backward(*in, nd.params[0], bn_cache[i], dy, dx, dgamma, dbeta);
                grads[i] = {std::move(dgamma), std::move(dbeta)};
                accumulate(act_grads[nd.inputs[0]], std::move(dx));
                break;
            }
            case LayerKind::dense: {
                Tensor dx, dw, db;
                dense_backward(*in, nd.params[0], dy, dx, dw, db);
                grads[i] = {std::move(dw), std::move(db)};
                accumulate(act_grads[nd.inputs[0]], std::move(dx));
                break;
            }
            case LayerKind::relu:
                accumulate(act_grads[nd.inputs[0]], relu_backward(*in, dy));
                break;
            case LayerKind::softmax:
                accumulate(act_grads[nd.inputs[0]], softmax_backward(acts[i], dy));
                break;
            case LayerKind::dropout:
                accumulate(act_grads[nd.inputs[0]], dropout_backward(aux[i], dy));
                break;
            case LayerKind::flatten:
                accumulate(act_grads[nd.inputs[0]], dy.reshaped(in->shape()));
                break;
            case LayerKind::concat: {
                std::vector<const Tensor*> xs;
                for (int up : nd.inputs) xs.push_back(&acts[up]);
                auto dxs = concat_backward(xs, nd.hyper.concat_axis, dy);
                for (size_t k = 0; k < dxs.size(); ++k)
                    accumulate(act_grads[nd.inputs[k]], std::move(dxs[k]));
                break;
            }
        }
    }
}

std::vector<Graph::Learnable> Graph::learnables() const {
    std::vector<Learnable> out;
    for (size_t i = 0; i < nodes_.size(); ++i)
        for (size_t p = 0; p < nodes_[i].params.size(); ++p)
            out.push_back({static_cast<int>(i), p, nodes_[i].params[p].name()});
    return out;
}

const Tensor& Graph::activation(int id) const {
    check_id(id);
    if (!forward_done_) throw std::runtime_error("graph: no cached forward");
    return acts_[id];
}

const Tensor& Graph::activation_grad(int id) const {
    check_id(id);
    return act_grads_[id];
}

size_t Graph::param_count() const {
    size_t n = 0;
    for (const auto& nd : nodes_)
        for (const auto& p : nd.params) n += p.size();
    return n;
}

std::string Graph::manifest_json() const {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const LayerNode& nd = nodes_[i];
        nlohmann::json n;
        n["id"] = i;
        n["name"] = nd.name;
        n["kind"] = layer_kind_name(nd.kind);
        n["inputs"] = nd.inputs;
        if (!shapes_.empty()) n["output_shape"] = shapes_[i];
        size_t pc = 0;
        for (const auto& p : nd.params) pc += p.size();
        n["param_count"] = pc;
        switch (nd.kind) {
            case LayerKind::conv2d:
            case LayerKind::depthwise_sep_conv:
                n["kernel"] = {nd.hyper.kernel_h, nd.hyper.kernel_w};
                n["stride"] = nd.hyper.stride;
                n["padding"] = nd.hyper.padding == Padding::same ? "same" : "valid";
                n["out_channels"] = nd.hyper.out_channels;
                break;
            case LayerKind::maxpool2d:
                n["window"] = {nd.hyper.pool_h, nd.hyper.pool_w};
                n["stride"] = nd.hyper.pool_stride;
                break;
            case LayerKind::dense:
                n["units"] = nd.hyper.units;
                break;
            case LayerKind::dropout:
                n["rate"] = nd.hyper.dropout_rate;
                break;
            default:
                break;
        }
        j["nodes"].push_back(std::move(n));
    }
    j["output"] = output_;
    j["param_count"] = param_count();
    j["layer_count"] = nodes_.size();
    return j.dump(2);
}

}  // namespace leafnet
