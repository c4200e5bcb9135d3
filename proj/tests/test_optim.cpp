#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "leafnet/optim.hpp"

using namespace leafnet;

namespace {

// Runs `steps` single-parameter updates with the given gradient sequence and
// returns the parameter value.
double run_scalar(OptimizerConfig cfg, double p0, const std::vector<double>& gs) {
    Optimizer opt(cfg);
    Tensor p({1}, p0);
    for (double gv : gs) {
        Tensor g({1}, gv);
        opt.step({&p}, {&g}, cfg.lr);
    }
    return p[0];
}

}  // namespace

TEST_CASE("adam two-step trace against hand-computed values") {
    OptimizerConfig cfg;
    cfg.variant = OptimizerVariant::adam;
    cfg.lr = 0.1;
    Optimizer opt(cfg);
    Tensor p({1}, 1.0);
    Tensor g1({1}, 0.5), g2({1}, -0.3);
    opt.step({&p}, {&g1}, cfg.lr);
    CHECK(p[0] == doctest::Approx(0.900000002).epsilon(1e-12));
    opt.step({&p}, {&g2}, cfg.lr);
    CHECK(p[0] == doctest::Approx(0.8808501989417752).epsilon(1e-12));
    CHECK(opt.steps_taken() == 2);
}

TEST_CASE("nadam two-step trace against hand-computed values") {
    OptimizerConfig cfg;
    cfg.variant = OptimizerVariant::nadam;
    cfg.lr = 0.1;
    CHECK(run_scalar(cfg, 1.0, {0.5}) == doctest::Approx(0.8526315818947368).epsilon(1e-12));
    CHECK(run_scalar(cfg, 1.0, {0.5, -0.3}) ==
          doctest::Approx(0.8788477329449264).epsilon(1e-12));
}

TEST_CASE("rmsprop and adagrad traces against hand-computed values") {
    OptimizerConfig cfg;
    cfg.variant = OptimizerVariant::rmsprop;
    cfg.lr = 0.1;
    CHECK(run_scalar(cfg, 1.0, {0.5, -0.3}) ==
          doctest::Approx(0.8528030954050552).epsilon(1e-12));
    cfg.variant = OptimizerVariant::adagrad;
    CHECK(run_scalar(cfg, 1.0, {0.5, -0.3}) ==
          doctest::Approx(0.9514495766603996).epsilon(1e-12));
}

TEST_CASE("sgd with and without momentum") {
    OptimizerConfig cfg;
    cfg.variant = OptimizerVariant::sgd;
    cfg.lr = 0.1;
    CHECK(run_scalar(cfg, 1.0, {0.5}) == doctest::Approx(0.95).epsilon(1e-12));
    cfg.momentum = 0.9;
    CHECK(run_scalar(cfg, 1.0, {0.5, -0.3}) == doctest::Approx(0.935).epsilon(1e-12));
}

TEST_CASE("every variant strictly decreases a quadratic loss in one step") {
    for (auto variant : {OptimizerVariant::sgd, OptimizerVariant::adam,
                         OptimizerVariant::rmsprop, OptimizerVariant::adagrad,
                         OptimizerVariant::nadam}) {
        OptimizerConfig cfg;
        cfg.variant = variant;
        cfg.lr = 0.05;
        Optimizer opt(cfg);
        Tensor p({3}, {1.0, -2.0, 3.0});
        const double before = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        Tensor g = p;  // gradient of 0.5*|p|^2
        opt.step({&p}, {&g}, cfg.lr);
        const double after = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        INFO(optimizer_name(variant));
        CHECK(after < before);
    }
}

TEST_CASE("adam first-step magnitude approaches lr as eps vanishes") {
    OptimizerConfig cfg;
    cfg.variant = OptimizerVariant::adam;
    cfg.lr = 0.01;
    cfg.eps = 1e-12;
    Optimizer opt(cfg);
    Tensor p({2}, {0.0, 0.0});
    Tensor g({2}, {0.37, -123.0});
    opt.step({&p}, {&g}, cfg.lr);
    CHECK(std::fabs(std::fabs(p[0]) - cfg.lr) < 1e-6);
    CHECK(std::fabs(std::fabs(p[1]) - cfg.lr) < 1e-6);
    CHECK(p[0] < 0);  // moves against the gradient
    CHECK(p[1] > 0);
}

TEST_CASE("adam update is invariant to gradient rescaling") {
    for (double scale : {1.0, 1000.0, 1e-3}) {
        OptimizerConfig cfg;
        cfg.variant = OptimizerVariant::adam;
        cfg.lr = 0.01;
        cfg.eps = 1e-12;
        Optimizer opt(cfg);
        Tensor p({1}, 5.0);
        Tensor g({1}, 0.7 * scale);
        opt.step({&p}, {&g}, cfg.lr);
        CHECK(p[0] == doctest::Approx(5.0 - cfg.lr).epsilon(1e-6));
    }
}

TEST_CASE("weight decay: coupled for sgd, decoupled for adam") {
    OptimizerConfig cfg;
    cfg.variant = OptimizerVariant::sgd;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.01;
    // sgd folds decay into the gradient: p -= lr*(g + wd*p)
    CHECK(run_scalar(cfg, 2.0, {0.5}) ==
          doctest::Approx(2.0 - 0.1 * (0.5 + 0.01 * 2.0)).epsilon(1e-12));

    // adam applies decay as a separate shrink; with zero gradient the main
    // update is zero and only the shrink remains
    cfg.variant = OptimizerVariant::adam;
    CHECK(run_scalar(cfg, 2.0, {0.0}) == doctest::Approx(2.0 * (1 - 0.1 * 0.01)).epsilon(1e-12));
}

TEST_CASE("optimizer input validation") {
    OptimizerConfig cfg;
    Optimizer opt(cfg);
    Tensor p({2}), g({2});
    CHECK_THROWS(opt.step({&p}, {&g}, 0.0));
    CHECK_THROWS(opt.step({&p}, {}, 0.1));
    Tensor g3({3});
    CHECK_THROWS(opt.step({&p}, {&g3}, 0.1));
}

TEST_CASE("cosine annealing endpoints, midpoint, and clamp are exact") {
    Schedule s;
    s.kind = Schedule::Kind::cosine_annealing;
    s.eta_max = 0.1;
    s.eta_min = 0.001;
    s.period = 100;
    CHECK(std::fabs(s.lr_at(0) - 0.1) < 1e-12);
    CHECK(std::fabs(s.lr_at(50) - 0.5 * (0.1 + 0.001)) < 1e-12);
    CHECK(std::fabs(s.lr_at(100) - 0.001) < 1e-12);
    CHECK(std::fabs(s.lr_at(1000) - 0.001) < 1e-12);  // clamps past the period
    // monotone decrease within the period
    for (size_t t = 1; t <= 100; ++t) CHECK(s.lr_at(t) < s.lr_at(t - 1));

    Schedule c;
    c.eta_max = 0.05;
    CHECK(c.lr_at(0) == 0.05);
    CHECK(c.lr_at(999) == 0.05);
}
