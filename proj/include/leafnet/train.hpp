#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "leafnet/augment.hpp"
#include "leafnet/checkpoint.hpp"
#include "leafnet/data.hpp"
#include "leafnet/metrics.hpp"
#include "leafnet/models.hpp"
#include "leafnet/optim.hpp"

namespace leafnet {

struct EarlyStopping {
    std::string metric = "val_loss";  // val_loss | val_accuracy
    size_t patience = 3;
    bool enabled = true;
};

// Tracks the monitored metric; update() returns true when the run should
// stop (no strict improvement for `patience` consecutive epochs).
class EarlyStopMonitor {
public:
    EarlyStopMonitor(const EarlyStopping& cfg, bool lower_is_better);
    // Returns true to stop after this epoch. improved() reports whether the
    // last update was a new best.
    bool update(double metric);
    bool improved() const { return improved_; }

private:
    EarlyStopping cfg_;
    bool lower_;
    bool improved_ = false;
    double best_;
    size_t bad_ = 0;
};

struct SplitRatios {
    double train = 0.8, val = 0.1, test = 0.1;
};

struct TrainConfig {
    ModelSpec model;
    OptimizerConfig optimizer;
    Schedule schedule;
    size_t batch_size = 32;
    size_t epochs = 10;
    EarlyStopping early_stopping;
    AugmentConfig augment;
    SplitRatios split;
    size_t kfold = 0;  // 0 = off
    uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    size_t epoch = 0;
    double train_loss = 0, train_acc = 0, val_loss = 0, val_acc = 0;
    double lr = 0, seconds = 0;
};

struct History {
    std::vector<EpochRecord> records;
    std::string to_csv() const;  // epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds
};

struct TrainResult {
    Checkpoint best;
    Checkpoint final;
    History history;
    size_t stopped_epoch = 0;  // 1-based epoch after which training stopped
    bool early_stopped = false;
};

TrainResult train(const TrainConfig& cfg, const Dataset& ds, const Split& split);
// Splits the dataset per cfg.split first.
TrainResult train(const TrainConfig& cfg, const Dataset& ds);

struct EvalResult {
    ConfusionMatrix cm{1};
    Report report;
    double mean_loss = 0.0;
};

EvalResult evaluate(Graph& g, const ModelSpec& spec, const Dataset& ds,
                    const std::vector<size_t>& indices, size_t batch_size);
EvalResult evaluate(const Checkpoint& ckpt, const Dataset& ds,
                    const std::vector<size_t>& indices);

// Checkpoint packing: graph parameters, batch-norm running stats, and
// optimizer slots, plus a meta block with the config echo, build manifest
// and counters.
Checkpoint make_checkpoint(const TrainConfig& cfg, const Graph& g, const Optimizer& opt,
                           size_t epoch);
TrainConfig checkpoint_config(const Checkpoint& ckpt);
void restore_graph(const Checkpoint& ckpt, Graph& g);
void restore_optimizer(const Checkpoint& ckpt, Optimizer& opt);

struct KfoldResult {
    std::vector<History> histories;
    std::vector<Report> reports;
    double mean_accuracy = 0, std_accuracy = 0;
    double mean_macro_f1 = 0, std_macro_f1 = 0;
};
KfoldResult run_kfold(const TrainConfig& cfg, const Dataset& ds);

struct SweepGrid {
    std::vector<std::string> optimizers;
    std::vector<double> learning_rates;
    std::vector<size_t> batch_sizes;
};

struct SweepCell {
    std::string optimizer;
    double lr = 0;
    size_t batch_size = 0;
    bool failed = false;
    std::string error;
    double train_acc = 0, val_acc = 0, train_loss = 0, val_loss = 0;
    double median_epoch_seconds = 0;
};

// Cartesian product; empty grid dimensions fall back to the base config
// value. Per-cell failures are recorded in the row and the sweep continues.
std::vector<SweepCell> sweep(
    const TrainConfig& base, const SweepGrid& grid, const Dataset& ds, size_t jobs = 1,
    const std::function<void(size_t, const SweepCell&, const TrainResult*)>& on_cell = {});

std::string sweep_csv(const std::vector<SweepCell>& cells);

}  // namespace leafnet
