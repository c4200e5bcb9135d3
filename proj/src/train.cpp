#include "leafnet/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "leafnet/config.hpp"
#include "leafnet/layers.hpp"

namespace leafnet {

using nlohmann::json;

void TrainConfig::validate() const {
    model.validate();
    augment.validate();
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (early_stopping.patience < 1)
        throw std::invalid_argument("train: patience must be >= 1");
    if (early_stopping.metric != "val_loss" && early_stopping.metric != "val_accuracy")
        throw std::invalid_argument("train: early stopping metric must be val_loss or val_accuracy");
}

EarlyStopMonitor::EarlyStopMonitor(const EarlyStopping& cfg, bool lower_is_better)
    : cfg_(cfg),
      lower_(lower_is_better),
      best_(lower_is_better ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity()) {}

bool EarlyStopMonitor::update(double metric) {
    improved_ = lower_ ? metric < best_ : metric > best_;
    if (improved_) {
        best_ = metric;
        bad_ = 0;
    } else {
        ++bad_;
    }
    return cfg_.enabled && bad_ >= cfg_.patience;
}

// Assembles one batch: optional augmentation, then a resize per input scale.
static std::map<std::string, Tensor> make_batch(
    const Dataset& ds, const std::vector<size_t>& batch, const ModelSpec& spec,
    const AugmentConfig* aug, size_t epoch) {
    std::map<std::string, Tensor> inputs;
    const auto scales = spec.scales_or_default();
    std::vector<Tensor> images(batch.size());
#pragma omp parallel for schedule(static)
    for (long long b = 0; b < static_cast<long long>(batch.size()); ++b) {
        const Sample& s = ds.samples[batch[b]];
        images[b] = aug ? augment_sample(s.image, *aug, derive_seed(epoch, batch[b]))
                        : s.image;
    }
    for (auto [h, w] : scales) {
        Tensor x({batch.size(), 3, h, w});
        for (size_t b = 0; b < batch.size(); ++b) {
            const Tensor& img = images[b];
            Tensor r = (img.extent(1) == h && img.extent(2) == w) ? img : resize(img, h, w);
            std::copy(r.data(), r.data() + r.size(), x.data() + b * r.size());
        }
        inputs.emplace(input_name(h, w), std::move(x));
    }
    return inputs;
}

static Tensor make_targets(const Dataset& ds, const std::vector<size_t>& batch, size_t k) {
    Tensor t({batch.size(), k});
    for (size_t b = 0; b < batch.size(); ++b) t.at2(b, ds.samples[batch[b]].label) = 1.0;
    return t;
}

static size_t argmax_row(const Tensor& probs, size_t row) {
    size_t best = 0;
    for (size_t j = 1; j < probs.extent(1); ++j)
        if (probs.at2(row, j) > probs.at2(row, best)) best = j;
    return best;
}

struct GradHolder {
    std::vector<Tensor> zeros;
};

static void collect_params(Graph& g, const std::vector<Graph::Learnable>& ls,
                           std::vector<Tensor*>& params, std::vector<const Tensor*>& grads,
                           GradHolder& holder) {
    params.clear();
    grads.clear();
    holder.zeros.clear();
    for (const auto& l : ls) {
        params.push_back(&g.param(l));
        Tensor& gr = g.grad(l);
        if (gr.size() == 0) {
            holder.zeros.emplace_back(g.param(l).shape());
            grads.push_back(&holder.zeros.back());
        } else {
            grads.push_back(&gr);
        }
    }
}

static std::pair<double, double> run_eval_pass(Graph& g, const ModelSpec& spec,
                                               const Dataset& ds,
                                               const std::vector<size_t>& indices,
                                               size_t batch_size, ConfusionMatrix* cm) {
    double loss_sum = 0.0;
    size_t correct = 0;
    const size_t k = spec.num_classes;
    for (size_t start = 0; start < indices.size(); start += batch_size) {
        const size_t end = std::min(start + batch_size, indices.size());
        std::vector<size_t> batch(indices.begin() + start, indices.begin() + end);
        auto inputs = make_batch(ds, batch, spec, nullptr, 0);
        const Tensor probs = g.forward(inputs, Mode::infer);
        const Tensor targets = make_targets(ds, batch, k);
        loss_sum += cross_entropy(probs, targets).loss * double(batch.size());
        for (size_t b = 0; b < batch.size(); ++b) {
            const size_t pred = argmax_row(probs, b);
            if (pred == ds.samples[batch[b]].label) ++correct;
            if (cm) cm->record(ds.samples[batch[b]].label, pred);
        }
    }
    const double n = indices.empty() ? 1.0 : double(indices.size());
    return {loss_sum / n, double(correct) / n};
}

Checkpoint make_checkpoint(const TrainConfig& cfg, const Graph& g, const Optimizer& opt,
                           size_t epoch) {
    Checkpoint ckpt;
    Graph& gm = const_cast<Graph&>(g);
    for (const auto& l : gm.learnables()) ckpt.tensors.push_back(gm.param(l));
    std::vector<int> bn_ready;
    for (size_t i = 0; i < g.node_count(); ++i) {
        const LayerNode& nd = g.node(static_cast<int>(i));
        for (const Tensor& s : nd.state) ckpt.tensors.push_back(s);
        if (nd.kind == LayerKind::batchnorm && nd.stats_ready)
            bn_ready.push_back(static_cast<int>(i));
    }
    Optimizer& om = const_cast<Optimizer&>(opt);
    const auto ls = gm.learnables();
    for (size_t i = 0; i < om.slot_m().size(); ++i) {
        Tensor m = om.slot_m()[i];
        m.set_name(ls[i].name + ".opt_m");
        ckpt.tensors.push_back(std::move(m));
        Tensor v = om.slot_v()[i];
        v.set_name(ls[i].name + ".opt_v");
        ckpt.tensors.push_back(std::move(v));
    }
    json meta;
    meta["config"] = json::parse(train_config_to_json(cfg));
    meta["manifest"] = json::parse(build_manifest(cfg.model, g));
    meta["epoch"] = epoch;
    meta["optimizer_steps"] = opt.steps_taken();
    meta["graph_step"] = g.step;
    meta["bn_ready"] = bn_ready;
    ckpt.meta_json = meta.dump();
    return ckpt;
}

TrainConfig checkpoint_config(const Checkpoint& ckpt) {
    json meta = json::parse(ckpt.meta_json);
    return train_config_from_json(meta.at("config").dump());
}

void restore_graph(const Checkpoint& ckpt, Graph& g) {
    std::map<std::string, const Tensor*> by_name;
    for (const Tensor& t : ckpt.tensors) by_name[t.name()] = &t;
    auto assign = [&](Tensor& dst) {
        auto it = by_name.find(dst.name());
        if (it == by_name.end())
            throw std::runtime_error("checkpoint: missing tensor '" + dst.name() + "'");
        if (it->second->shape() != dst.shape())
            throw std::runtime_error("checkpoint: tensor shape mismatch for '" + dst.name() +
                                     "'");
        const std::string name = dst.name();
        dst = *it->second;
        dst.set_name(name);
    };
    for (const auto& l : g.learnables()) assign(g.param(l));
    json meta = json::parse(ckpt.meta_json);
    std::set<int> bn_ready;
    for (const auto& v : meta.value("bn_ready", json::array()))
        bn_ready.insert(v.get<int>());
    for (size_t i = 0; i < g.node_count(); ++i) {
        LayerNode& nd = g.node(static_cast<int>(i));
        for (Tensor& s : nd.state) assign(s);
        if (nd.kind == LayerKind::batchnorm)
            nd.stats_ready = bn_ready.count(static_cast<int>(i)) > 0;
    }
    g.step = meta.value("graph_step", uint64_t{0});
}

void restore_optimizer(const Checkpoint& ckpt, Optimizer& opt) {
    std::map<std::string, const Tensor*> by_name;
    for (const Tensor& t : ckpt.tensors) by_name[t.name()] = &t;
    opt.slot_m().clear();
    opt.slot_v().clear();
    for (const Tensor& t : ckpt.tensors) {
        const std::string& n = t.name();
        if (n.size() > 6 && n.compare(n.size() - 6, 6, ".opt_m") == 0)
            opt.slot_m().push_back(t);
        else if (n.size() > 6 && n.compare(n.size() - 6, 6, ".opt_v") == 0)
            opt.slot_v().push_back(t);
    }
    json meta = json::parse(ckpt.meta_json);
    opt.set_steps_taken(meta.value("optimizer_steps", uint64_t{0}));
}

TrainResult train(const TrainConfig& cfg, const Dataset& ds, const Split& split) {
    cfg.validate();
    if (ds.num_classes() != cfg.model.num_classes)
        throw std::invalid_argument("train: dataset has " + std::to_string(ds.num_classes()) +
                                    " classes but the model expects " +
                                    std::to_string(cfg.model.num_classes));
    ModelSpec spec = cfg.model;
    spec.seed = derive_seed(cfg.seed, 0x6d6f64 /* "mod" */);
    Graph g = build_model(spec);
    g.dropout_seed = derive_seed(cfg.seed, 0x64726f /* "dro" */);
    Optimizer opt(cfg.optimizer);

    Schedule sched = cfg.schedule;
    sched.eta_max = cfg.optimizer.lr;
    if (sched.kind == Schedule::Kind::cosine_annealing && sched.period <= 1)
        sched.period = cfg.epochs;

    TrainResult result;
    const bool monitor_loss = cfg.early_stopping.metric == "val_loss";
    EarlyStopMonitor monitor(cfg.early_stopping, monitor_loss);

    GradHolder holder;
    std::vector<Tensor*> params;
    std::vector<const Tensor*> grads;
    const auto learnable_list = g.learnables();

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr_t = sched.lr_at(epoch);
        double loss_sum = 0.0;
        size_t correct = 0;

        const auto batches = batch_iter(split.train, cfg.batch_size, cfg.seed, epoch);
        for (size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            auto inputs = make_batch(ds, batch, spec, &cfg.augment, epoch);
            const Tensor probs = g.forward(inputs, Mode::train);
            const Tensor targets = make_targets(ds, batch, spec.num_classes);
            LossResult lr_res = cross_entropy(probs, targets);
            if (!std::isfinite(lr_res.loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + " batch " +
                                         std::to_string(bi + 1));
            loss_sum += lr_res.loss * double(batch.size());
            for (size_t b = 0; b < batch.size(); ++b)
                if (argmax_row(probs, b) == ds.samples[batch[b]].label) ++correct;
            g.backward_from_logits(lr_res.dlogits);
            collect_params(g, learnable_list, params, grads, holder);
            opt.step(params, grads, lr_t);
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.lr = lr_t;
        rec.train_loss = loss_sum / double(split.train.size());
        rec.train_acc = double(correct) / double(split.train.size());
        if (!split.val.empty()) {
            auto [vl, va] = run_eval_pass(g, spec, ds, split.val, cfg.batch_size, nullptr);
            rec.val_loss = vl;
            rec.val_acc = va;
        } else {
            rec.val_loss = rec.train_loss;
            rec.val_acc = rec.train_acc;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
        result.history.records.push_back(rec);
        result.stopped_epoch = epoch + 1;

        const double metric = monitor_loss ? rec.val_loss : rec.val_acc;
        const bool stop = monitor.update(metric);
        if (monitor.improved()) result.best = make_checkpoint(cfg, g, opt, epoch + 1);
        if (stop) {
            result.early_stopped = true;
            break;
        }
    }
    result.final = make_checkpoint(cfg, g, opt, result.stopped_epoch);
    if (result.best.tensors.empty()) result.best = result.final;
    return result;
}

TrainResult train(const TrainConfig& cfg, const Dataset& ds) {
    const Split split =
        split_dataset(ds, cfg.split.train, cfg.split.val, cfg.split.test, cfg.seed);
    return train(cfg, ds, split);
}

EvalResult evaluate(Graph& g, const ModelSpec& spec, const Dataset& ds,
                    const std::vector<size_t>& indices, size_t batch_size) {
    if (ds.num_classes() != spec.num_classes)
        throw std::invalid_argument("evaluate: class-count mismatch");
    EvalResult r;
    r.cm = ConfusionMatrix(spec.num_classes);
    auto [loss, acc] = run_eval_pass(g, spec, ds, indices, batch_size, &r.cm);
    (void)acc;
    r.mean_loss = loss;
    r.report = classification_report(r.cm);
    return r;
}

EvalResult evaluate(const Checkpoint& ckpt, const Dataset& ds,
                    const std::vector<size_t>& indices) {
    TrainConfig cfg = checkpoint_config(ckpt);
    ModelSpec spec = cfg.model;
    spec.seed = derive_seed(cfg.seed, 0x6d6f64);
    Graph g = build_model(spec);
    restore_graph(ckpt, g);
    return evaluate(g, spec, ds, indices, cfg.batch_size);
}

KfoldResult run_kfold(const TrainConfig& cfg, const Dataset& ds) {
    if (cfg.kfold < 2) throw std::invalid_argument("kfold: configured k must be >= 2");
    const auto folds = kfold_split(ds, cfg.kfold, cfg.seed);
    KfoldResult out;
    std::vector<double> accs, f1s;
    for (size_t f = 0; f < folds.size(); ++f) {
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, 0x666f6c64 /* "fold" */, f);
        fold_cfg.kfold = 0;
        Split split;
        split.train = folds[f].first;
        split.val = folds[f].second;
        try {
            TrainResult tr = train(fold_cfg, ds, split);
            EvalResult ev = evaluate(tr.best, ds, split.val);
            out.histories.push_back(std::move(tr.history));
            accs.push_back(ev.report.accuracy);
            f1s.push_back(ev.report.macro_f1);
            out.reports.push_back(std::move(ev.report));
        } catch (const std::exception& e) {
            throw std::runtime_error("kfold: fold " + std::to_string(f) + " failed: " +
                                     e.what());
        }
    }
    auto mean_std = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= double(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::pair<double, double>{m, std::sqrt(s / double(v.size()))};
    };
    std::tie(out.mean_accuracy, out.std_accuracy) = mean_std(accs);
    std::tie(out.mean_macro_f1, out.std_macro_f1) = mean_std(f1s);
    return out;
}

std::string History::to_csv() const {
    std::ostringstream out;
    out << "epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds\n";
    out.precision(17);
    for (const EpochRecord& r : records)
        out << r.epoch << "," << r.train_loss << "," << r.train_acc << "," << r.val_loss
            << "," << r.val_acc << "," << r.lr << "," << r.seconds << "\n";
    return out.str();
}

std::vector<SweepCell> sweep(
    const TrainConfig& base, const SweepGrid& grid, const Dataset& ds, size_t jobs,
    const std::function<void(size_t, const SweepCell&, const TrainResult*)>& on_cell) {
    std::vector<std::string> opts = grid.optimizers;
    if (opts.empty()) opts.push_back(optimizer_name(base.optimizer.variant));
    std::vector<double> lrs = grid.learning_rates;
    if (lrs.empty()) lrs.push_back(base.optimizer.lr);
    std::vector<size_t> bss = grid.batch_sizes;
    if (bss.empty()) bss.push_back(base.batch_size);

    std::vector<SweepCell> cells;
    for (const std::string& o : opts)
        for (double lr : lrs)
            for (size_t bs : bss) {
                SweepCell c;
                c.optimizer = o;
                c.lr = lr;
                c.batch_size = bs;
                cells.push_back(c);
            }

    const long long n = static_cast<long long>(cells.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max<size_t>(jobs, 1)) if (jobs > 1)
    for (long long i = 0; i < n; ++i) {
        SweepCell& c = cells[i];
        try {
            TrainConfig cfg = base;
            cfg.optimizer.variant = optimizer_from_name(c.optimizer);
            cfg.optimizer.lr = c.lr;
            cfg.batch_size = c.batch_size;
            TrainResult tr = train(cfg, ds);
            const EpochRecord& last = tr.history.records.back();
            c.train_acc = last.train_acc;
            c.val_acc = last.val_acc;
            c.train_loss = last.train_loss;
            c.val_loss = last.val_loss;
            std::vector<double> secs;
            for (const auto& r : tr.history.records) secs.push_back(r.seconds);
            std::sort(secs.begin(), secs.end());
            c.median_epoch_seconds = secs[secs.size() / 2];
            if (on_cell) on_cell(static_cast<size_t>(i), c, &tr);
        } catch (const std::exception& e) {
            c.failed = true;
            c.error = e.what();
            if (on_cell) on_cell(static_cast<size_t>(i), c, nullptr);
        }
    }
    return cells;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::ostringstream out;
    out << "optimizer,lr,batch_size,train_acc,val_acc,train_loss,val_loss,"
           "median_epoch_seconds,status\n";
    for (const SweepCell& c : cells) {
        out << c.optimizer << "," << c.lr << "," << c.batch_size << ",";
        if (c.failed) {
            out << ",,,,,FAILED\n";
        } else {
            out << c.train_acc << "," << c.val_acc << "," << c.train_loss << ","
                << c.val_loss << "," << c.median_epoch_seconds << ",OK\n";
        }
    }
    return out.str();
}

}  // namespace leafnet
