#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fd_check.hpp"
#include "leafnet/gradcam.hpp"
#include "leafnet/train.hpp"

using namespace leafnet;
namespace fs = std::filesystem;
using fdcheck::random_tensor;

namespace {

TrainConfig toy_config(size_t epochs, uint64_t seed = 7) {
    TrainConfig cfg;
    cfg.model.name = "beannet";
    cfg.model.num_classes = 3;
    cfg.model.input_scales = {{32, 32}};
    cfg.model.width_multiplier = 0.5;
    cfg.optimizer.variant = OptimizerVariant::adam;
    cfg.optimizer.lr = 0.001;
    cfg.batch_size = 8;
    cfg.epochs = epochs;
    cfg.early_stopping.enabled = false;
    cfg.seed = seed;
    cfg.augment.seed = seed;
    return cfg;
}

Dataset toy_data() { return synth_dataset(3, 10, 32, 7); }

}  // namespace

TEST_CASE("early stop monitor follows scripted loss traces exactly") {
    EarlyStopping es;
    es.patience = 3;
    // best at epoch 2; epochs 3-5 fail to improve -> stop exactly at epoch 5
    EarlyStopMonitor m(es, /*lower_is_better=*/true);
    const double trace[] = {1.0, 0.9, 0.95, 0.93, 0.94};
    std::vector<bool> stops;
    for (double v : trace) stops.push_back(m.update(v));
    CHECK(stops == std::vector<bool>{false, false, false, false, true});

    // an improvement inside the window resets the counter
    EarlyStopMonitor m2(es, true);
    CHECK_FALSE(m2.update(1.0));
    CHECK_FALSE(m2.update(1.1));
    CHECK_FALSE(m2.update(1.2));
    CHECK_FALSE(m2.update(0.9));  // new best
    CHECK_FALSE(m2.update(1.0));
    CHECK_FALSE(m2.update(1.0));
    CHECK(m2.update(1.0));

    // accuracy mode: higher is better
    EarlyStopMonitor m3(es, false);
    CHECK_FALSE(m3.update(0.5));
    CHECK_FALSE(m3.update(0.4));
    CHECK_FALSE(m3.update(0.4));
    CHECK(m3.update(0.4));

    es.enabled = false;
    EarlyStopMonitor m4(es, true);
    for (int i = 0; i < 10; ++i) CHECK_FALSE(m4.update(1.0));
}

TEST_CASE("training records history and improves on the toy problem") {
    Dataset ds = toy_data();
    TrainConfig cfg = toy_config(40);
    TrainResult tr = train(cfg, ds);
    REQUIRE(tr.history.records.size() == 40);
    CHECK(tr.stopped_epoch == 40);
    CHECK_FALSE(tr.early_stopped);
    const auto& first = tr.history.records.front();
    const auto& last = tr.history.records.back();
    CHECK(first.epoch == 1);
    CHECK(last.epoch == 40);
    CHECK(last.train_loss < first.train_loss);
    CHECK(last.train_acc > first.train_acc);
    CHECK(last.lr == cfg.optimizer.lr);  // constant schedule
    CHECK(last.seconds > 0.0);
    CHECK_FALSE(tr.best.tensors.empty());
    CHECK_FALSE(tr.final.tensors.empty());

    const std::string csv = tr.history.to_csv();
    CHECK(csv.rfind("epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds\n", 0) == 0);
    size_t rows = 0;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 41);
}

TEST_CASE("cosine schedule is reflected in the recorded learning rates") {
    Dataset ds = toy_data();
    TrainConfig cfg = toy_config(4);
    cfg.schedule.kind = Schedule::Kind::cosine_annealing;
    cfg.schedule.eta_min = 0.0001;
    cfg.schedule.period = 4;
    TrainResult tr = train(cfg, ds);
    CHECK(tr.history.records[0].lr == doctest::Approx(0.001).epsilon(1e-12));
    for (size_t i = 1; i < 4; ++i)
        CHECK(tr.history.records[i].lr < tr.history.records[i - 1].lr);
}

TEST_CASE("early stopping can end a run before the epoch budget") {
    Dataset ds = toy_data();
    TrainConfig cfg = toy_config(500);
    // accuracy is discrete, so once the toy problem is solved the monitored
    // metric cannot strictly improve and the patience window must run out
    cfg.early_stopping.enabled = true;
    cfg.early_stopping.metric = "val_accuracy";
    cfg.early_stopping.patience = 3;
    TrainResult tr = train(cfg, ds);
    CHECK(tr.early_stopped);
    CHECK(tr.stopped_epoch < 500);
    CHECK(tr.history.records.size() == tr.stopped_epoch);
}

TEST_CASE("training is deterministic for a fixed seed") {
    Dataset ds = toy_data();
    TrainResult a = train(toy_config(3), ds);
    TrainResult b = train(toy_config(3), ds);
    CHECK(a.history.to_csv().substr(0, a.history.to_csv().rfind("seconds")) ==
          b.history.to_csv().substr(0, b.history.to_csv().rfind("seconds")));
    for (size_t e = 0; e < 3; ++e) {
        CHECK(a.history.records[e].train_loss == b.history.records[e].train_loss);
        CHECK(a.history.records[e].val_acc == b.history.records[e].val_acc);
    }
    REQUIRE(a.final.tensors.size() == b.final.tensors.size());
    for (size_t t = 0; t < a.final.tensors.size(); ++t)
        for (size_t i = 0; i < a.final.tensors[t].size(); ++i)
            CHECK(a.final.tensors[t][i] == b.final.tensors[t][i]);

    TrainResult c = train(toy_config(3, 8), ds);
    CHECK(a.history.records[2].train_loss != c.history.records[2].train_loss);
}

TEST_CASE("checkpoint save/load round-trip keeps forward outputs within 1e-6") {
    Dataset ds = toy_data();
    TrainConfig cfg = toy_config(5);
    TrainResult tr = train(cfg, ds);

    const fs::path path = fs::temp_directory_path() / "leafnet_test.ckpt";
    save_checkpoint(tr.final, path);
    Checkpoint back = load_checkpoint(path);

    // original graph state
    ModelSpec spec = cfg.model;
    spec.seed = derive_seed(cfg.seed, 0x6d6f64);
    Graph g1 = build_model(spec);
    restore_graph(tr.final, g1);
    Graph g2 = build_model(spec);
    restore_graph(back, g2);

    Rng rng(4);
    std::map<std::string, Tensor> inputs{
        {input_name(32, 32), random_tensor({2, 3, 32, 32}, rng, 0.0, 1.0)}};
    Tensor y1 = g1.forward(inputs, Mode::infer);
    Tensor y2 = g2.forward(inputs, Mode::infer);
    for (size_t i = 0; i < y1.size(); ++i) {
        const double denom = std::max(std::fabs(y1[i]), 1e-12);
        CHECK(std::fabs(y1[i] - y2[i]) / denom <= 1e-6);
    }
    fs::remove(path);
}

TEST_CASE("checkpoint restore also rebuilds the optimizer slots") {
    Dataset ds = toy_data();
    TrainConfig cfg = toy_config(2);
    TrainResult tr = train(cfg, ds);
    Optimizer opt(cfg.optimizer);
    restore_optimizer(tr.final, opt);
    CHECK(opt.steps_taken() > 0);
    CHECK_FALSE(opt.slot_m().empty());
    CHECK(opt.slot_m().size() == opt.slot_v().size());
}

TEST_CASE("tampered checkpoints fail with distinct errors") {
    Dataset ds = toy_data();
    TrainResult tr = train(toy_config(1), ds);
    const fs::path path = fs::temp_directory_path() / "leafnet_tamper.ckpt";
    save_checkpoint(tr.final, path);

    auto bytes = [&] {
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    auto write_bytes = [&](const std::string& s) {
        std::ofstream out(path, std::ios::binary);
        out << s;
    };
    const std::string good = bytes();

    auto expect_error = [&](const std::string& data, const char* needle) {
        write_bytes(data);
        try {
            load_checkpoint(path);
            FAIL("expected load failure for ", needle);
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    std::string bad = good;
    bad[0] = 'X';
    expect_error(bad, "corrupt header");

    bad = good;
    bad[4] = char(0x7f);  // version bump
    expect_error(bad, "unknown version");

    expect_error(good.substr(0, good.size() - 40), "truncated data");
    expect_error(good + std::string(16, '\0'), "trailing data");

    write_bytes(good);
    CHECK_NOTHROW(load_checkpoint(path));
    fs::remove(path);
}

TEST_CASE("evaluation on an overfit run reports perfect training accuracy") {
    Dataset ds = toy_data();
    TrainConfig cfg = toy_config(150);
    cfg.split.train = 1.0;
    cfg.split.val = 0.0;
    cfg.split.test = 0.0;
    Split split = split_dataset(ds, 1.0, 0.0, 0.0, cfg.seed);
    TrainResult tr = train(cfg, ds, split);
    CHECK(tr.history.records.back().train_acc == 1.0);

    EvalResult ev = evaluate(tr.final, ds, split.train);
    CHECK(ev.report.accuracy == 1.0);
    CHECK(ev.cm.total() == ds.samples.size());
    for (size_t c = 0; c < 3; ++c) CHECK(ev.cm.cell(c, c) == 10);
}

TEST_CASE("class-count mismatch between model and data is rejected") {
    Dataset ds = toy_data();  // 3 classes
    TrainConfig cfg = toy_config(1);
    cfg.model.num_classes = 4;
    CHECK_THROWS(train(cfg, ds));
}

TEST_CASE("k-fold cross-validation aggregates per-fold reports") {
    Dataset ds = toy_data();
    TrainConfig cfg = toy_config(2);
    cfg.kfold = 3;
    KfoldResult kf = run_kfold(cfg, ds);
    REQUIRE(kf.histories.size() == 3);
    REQUIRE(kf.reports.size() == 3);
    CHECK(kf.mean_accuracy >= 0.0);
    CHECK(kf.mean_accuracy <= 1.0);
    CHECK(kf.std_accuracy >= 0.0);
    CHECK(kf.mean_macro_f1 >= 0.0);
    CHECK(kf.mean_macro_f1 <= 1.0);
    cfg.kfold = 1;
    CHECK_THROWS(run_kfold(cfg, ds));
}

TEST_CASE("sweep runs the grid and keeps going past failed cells") {
    Dataset ds = toy_data();
    TrainConfig base = toy_config(2);
    SweepGrid grid;
    grid.optimizers = {"sgd", "adam"};
    grid.learning_rates = {0.001, 0.0};  // lr 0 cells must fail
    auto cells = sweep(base, grid, ds);
    REQUIRE(cells.size() == 4);
    size_t ok = 0, failed = 0;
    for (const auto& c : cells) (c.failed ? failed : ok)++;
    CHECK(ok == 2);
    CHECK(failed == 2);
    for (const auto& c : cells)
        if (c.failed) CHECK_FALSE(c.error.empty());

    const std::string csv = sweep_csv(cells);
    size_t rows = 0;
    for (char ch : csv)
        if (ch == '\n') ++rows;
    CHECK(rows == 5);
    CHECK(csv.find("FAILED") != std::string::npos);
    CHECK(csv.find("OK") != std::string::npos);
}

TEST_CASE("train config validation") {
    TrainConfig cfg = toy_config(1);
    cfg.epochs = 0;
    CHECK_THROWS(cfg.validate());
    cfg = toy_config(1);
    cfg.batch_size = 0;
    CHECK_THROWS(cfg.validate());
    cfg = toy_config(1);
    cfg.early_stopping.metric = "test_loss";
    CHECK_THROWS(cfg.validate());
    cfg = toy_config(1);
    CHECK_NOTHROW(cfg.validate());
}

// ---- saliency heatmap properties ----

namespace {

// input (1,C,H,W) -> 1x1 conv (identity) -> GAP -> dense logits -> softmax,
// with hand-set weights so the logit gradient w.r.t. the conv maps is known.
struct CamRig {
    Graph g;
    int conv_id = -1;

    CamRig(size_t channels, size_t k, const std::vector<double>& dense_w) {
        LayerNode in;
        in.name = "input";
        in.kind = LayerKind::input;
        in.hyper.input_shape = {channels, 4, 4};
        int i0 = g.add(std::move(in));

        LayerNode conv;
        conv.name = "conv";
        conv.kind = LayerKind::conv2d;
        conv.inputs = {i0};
        conv.hyper.out_channels = channels;
        conv.hyper.kernel_h = conv.hyper.kernel_w = 1;
        conv.hyper.padding = Padding::valid;
        conv_id = g.add(std::move(conv));

        LayerNode gap;
        gap.name = "gap";
        gap.kind = LayerKind::global_avg_pool;
        gap.inputs = {conv_id};
        int gid = g.add(std::move(gap));

        LayerNode dense;
        dense.name = "logits";
        dense.kind = LayerKind::dense;
        dense.inputs = {gid};
        dense.hyper.units = k;
        int did = g.add(std::move(dense));

        LayerNode sm;
        sm.name = "softmax";
        sm.kind = LayerKind::softmax;
        sm.inputs = {did};
        g.set_output(g.add(std::move(sm)));
        g.finalize(1);

        // conv = identity: w[c][c][0][0] = 1, b = 0
        auto ls = g.learnables();
        Tensor& cw = g.param(ls[0]);
        for (size_t i = 0; i < cw.size(); ++i) cw[i] = 0.0;
        for (size_t c = 0; c < channels; ++c) cw.at4(c, c, 0, 0) = 1.0;
        Tensor& cb = g.param(ls[1]);
        for (size_t i = 0; i < cb.size(); ++i) cb[i] = 0.0;
        // dense weights (channels x k) as given, bias 0
        Tensor& dw = g.param(ls[2]);
        REQUIRE(dw.size() == dense_w.size());
        for (size_t i = 0; i < dw.size(); ++i) dw[i] = dense_w[i];
        Tensor& db = g.param(ls[3]);
        for (size_t i = 0; i < db.size(); ++i) db[i] = 0.0;
    }
};

}  // namespace

TEST_CASE("heatmap is in [0,1] and normalized to a unit peak") {
    CamRig rig(2, 3, {1.0, 0.2, -0.3, 0.4, 0.5, 0.6});
    Rng rng(5);
    std::map<std::string, Tensor> inputs{
        {"input", random_tensor({1, 2, 4, 4}, rng, 0.0, 1.0)}};
    Heatmap hm = gradcam(rig.g, inputs, 0);
    REQUIRE(hm.values.shape() == Shape{4, 4});
    double peak = 0;
    for (size_t i = 0; i < hm.values.size(); ++i) {
        CHECK(hm.values[i] >= 0.0);
        CHECK(hm.values[i] <= 1.0);
        peak = std::max(peak, hm.values[i]);
    }
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(hm.tap_node == rig.conv_id);
    CHECK(hm.predicted_prob > 0.0);
    CHECK(hm.predicted_prob <= 1.0);
}

TEST_CASE("uniform positive gradient reduces to the normalized relu of the map") {
    // single channel, positive weight to the target logit
    CamRig rig(1, 2, {1.0, -1.0});
    Tensor x({1, 1, 4, 4});
    Rng rng(6);
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Heatmap hm = gradcam(rig.g, {{"input", x}}, 0);
    double peak = 0;
    for (size_t i = 0; i < x.size(); ++i) peak = std::max(peak, x[i]);
    for (size_t i = 0; i < x.size(); ++i) {
        const double expect = x[i] > 0 ? x[i] / peak : 0.0;
        CHECK(hm.values[i] == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("uniform negative gradient clips to an all-zero heatmap") {
    CamRig rig(1, 2, {-1.0, 1.0});
    Tensor x({1, 1, 4, 4}, 0.5);
    Heatmap hm = gradcam(rig.g, {{"input", x}}, 0);
    for (size_t i = 0; i < hm.values.size(); ++i) CHECK(hm.values[i] == 0.0);
}

TEST_CASE("heatmap is invariant to a uniform logit shift") {
    CamRig a(2, 3, {1.0, 0.2, -0.3, 0.4, 0.5, 0.6});
    CamRig b(2, 3, {1.0, 0.2, -0.3, 0.4, 0.5, 0.6});
    // shift every logit of rig b by the same constant via the bias
    Tensor& db = b.g.param(b.g.learnables()[3]);
    for (size_t i = 0; i < db.size(); ++i) db[i] = 12.5;

    Rng rng(7);
    Tensor x = random_tensor({1, 2, 4, 4}, rng, 0.0, 1.0);
    Heatmap ha = gradcam(a.g, {{"input", x}}, 1);
    Heatmap hb = gradcam(b.g, {{"input", x}}, 1);
    for (size_t i = 0; i < ha.values.size(); ++i)
        CHECK(ha.values[i] == doctest::Approx(hb.values[i]).epsilon(1e-12));
}

TEST_CASE("two-map heatmap matches the hand computation") {
    // channel weights to logit 0: alpha_0 = 2/16... the dense weight divided
    // by the map area, but normalization cancels the common 1/area factor.
    CamRig rig(2, 2, {2.0, 0.0, -1.0, 0.0});
    Tensor x({1, 2, 4, 4});
    // map 0: ramp i/16, map 1: constant 0.5
    for (size_t i = 0; i < 16; ++i) {
        x[i] = double(i) / 16.0;
        x[16 + i] = 0.5;
    }
    Heatmap hm = gradcam(rig.g, {{"input", x}}, 0);
    // weighted sum per pixel: 2*map0 - 1*map1 (alphas share the 1/16 factor)
    std::vector<double> expect(16);
    double peak = 0;
    for (size_t i = 0; i < 16; ++i) {
        expect[i] = std::max(0.0, 2.0 * x[i] - 0.5);
        peak = std::max(peak, expect[i]);
    }
    REQUIRE(peak > 0);
    for (size_t i = 0; i < 16; ++i)
        CHECK(hm.values[i] == doctest::Approx(expect[i] / peak).epsilon(1e-9));
}

TEST_CASE("target selection: default is the predicted class, bad targets throw") {
    CamRig rig(2, 3, {1.0, 0.2, -0.3, 0.4, 0.5, 0.6});
    Rng rng(8);
    Tensor x = random_tensor({1, 2, 4, 4}, rng, 0.0, 1.0);
    Heatmap hm = gradcam(rig.g, {{"input", x}});
    CHECK(hm.target_class == hm.predicted_class);
    CHECK_THROWS(gradcam(rig.g, {{"input", x}}, 99));
}
