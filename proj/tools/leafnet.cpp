#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "leafnet/checkpoint.hpp"
#include "leafnet/config.hpp"
#include "leafnet/gradcam.hpp"
#include "leafnet/image_io.hpp"
#include "leafnet/svg_plot.hpp"
#include "leafnet/train.hpp"

namespace fs = std::filesystem;
using namespace leafnet;
using nlohmann::json;

namespace {

// Artifacts written so far in the current command; removed if it fails so a
// failed run never leaves partial outputs behind.
std::vector<fs::path> g_written;
std::mutex g_written_mu;

void note_written(const fs::path& path) {
    std::lock_guard<std::mutex> lock(g_written_mu);
    g_written.push_back(path);
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
    note_written(path);
}

void remove_partial_outputs() {
    std::error_code ec;
    for (const fs::path& p : g_written) fs::remove(p, ec);
    g_written.clear();
}

RunConfig load_config_with_overrides(const std::string& config_path, long long seed,
                                     long long epochs, const std::string& out) {
    RunConfig rc = load_run_config(config_path);
    if (seed >= 0) rc.train.seed = static_cast<uint64_t>(seed);
    if (epochs >= 0) rc.train.epochs = static_cast<size_t>(epochs);
    if (!out.empty()) rc.out_dir = out;
    rc.train.augment.seed = rc.train.seed;
    return rc;
}

void write_run_artifacts(const fs::path& out_dir, const TrainConfig& cfg,
                         const TrainResult& tr) {
    fs::create_directories(out_dir);
    write_text(out_dir / "history.csv", tr.history.to_csv());

    save_checkpoint(tr.best, out_dir / "best.ckpt");
    note_written(out_dir / "best.ckpt");
    save_checkpoint(tr.final, out_dir / "final.ckpt");
    note_written(out_dir / "final.ckpt");

    ModelSpec spec = cfg.model;
    spec.seed = derive_seed(cfg.seed, 0x6d6f64);
    Graph g = build_model(spec);
    write_text(out_dir / "manifest.json", build_manifest(spec, g));

    std::vector<double> tl, vl, ta, va;
    for (const EpochRecord& r : tr.history.records) {
        tl.push_back(r.train_loss);
        vl.push_back(r.val_loss);
        ta.push_back(r.train_acc);
        va.push_back(r.val_acc);
    }
    write_text(out_dir / "curves.svg", svg_training_curves(tl, vl, ta, va));
}

int cmd_train(const std::string& config_path, long long seed, long long epochs,
              const std::string& out) {
    RunConfig rc = load_config_with_overrides(config_path, seed, epochs, out);
    Dataset ds = load_or_synth_dataset(rc);
    TrainResult tr = rc.train.kfold >= 2 ? TrainResult{} : train(rc.train, ds);
    if (rc.train.kfold >= 2) {
        KfoldResult kf = run_kfold(rc.train, ds);
        fs::create_directories(rc.out_dir);
        std::ostringstream s;
        s << "fold,accuracy,macro_f1\n";
        for (size_t f = 0; f < kf.reports.size(); ++f)
            s << f << "," << kf.reports[f].accuracy << "," << kf.reports[f].macro_f1 << "\n";
        s << "mean," << kf.mean_accuracy << "," << kf.mean_macro_f1 << "\n";
        s << "std," << kf.std_accuracy << "," << kf.std_macro_f1 << "\n";
        write_text(fs::path(rc.out_dir) / "kfold.csv", s.str());
        std::cout << "kfold mean accuracy " << kf.mean_accuracy << " (std "
                  << kf.std_accuracy << ")\n";
        // continue with a plain run so the standard artifacts exist too
        TrainConfig flat = rc.train;
        flat.kfold = 0;
        tr = train(flat, ds);
    }
    write_run_artifacts(rc.out_dir, rc.train, tr);
    const EpochRecord& last = tr.history.records.back();
    std::cout << "trained " << tr.stopped_epoch << " epochs"
              << (tr.early_stopped ? " (early stop)" : "") << ", final train_acc "
              << last.train_acc << ", val_acc " << last.val_acc << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_root,
             const std::string& split_sel, const std::string& format) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrainConfig cfg = checkpoint_config(ckpt);
    Dataset ds = load_dataset(data_root);

    std::vector<size_t> indices;
    if (split_sel == "all") {
        for (size_t i = 0; i < ds.samples.size(); ++i) indices.push_back(i);
    } else if (split_sel == "test") {
        Split sp = split_dataset(ds, cfg.split.train, cfg.split.val, cfg.split.test,
                                 cfg.seed);
        indices = sp.test;
    } else if (split_sel == "train") {
        Split sp = split_dataset(ds, cfg.split.train, cfg.split.val, cfg.split.test,
                                 cfg.seed);
        indices = sp.train;
    } else {
        throw std::invalid_argument("eval: --split must be test, train or all");
    }
    if (indices.empty()) throw std::invalid_argument("eval: selected split is empty");

    EvalResult ev = evaluate(ckpt, ds, indices);
    if (format == "text")
        std::cout << ev.report.to_text(ds.class_names);
    else if (format == "json")
        std::cout << ev.report.to_json(ds.class_names) << "\n";
    else if (format == "csv")
        std::cout << ev.cm.to_csv(ds.class_names);
    else
        throw std::invalid_argument("eval: --format must be json, text or csv");
    return 0;
}

int cmd_gradcam(const std::string& ckpt_path, const std::string& image_path,
                long long target_class, const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrainConfig cfg = checkpoint_config(ckpt);
    ModelSpec spec = cfg.model;
    spec.seed = derive_seed(cfg.seed, 0x6d6f64);
    Graph g = build_model(spec);
    restore_graph(ckpt, g);

    if (target_class >= static_cast<long long>(spec.num_classes))
        throw std::invalid_argument("gradcam: --class " + std::to_string(target_class) +
                                    " out of range for " +
                                    std::to_string(spec.num_classes) + " classes");

    Tensor img = read_image(image_path);
    if (img.extent(0) == 1) {
        // grayscale input into an RGB model: replicate the channel
        Tensor rgb({3, img.extent(1), img.extent(2)});
        for (size_t c = 0; c < 3; ++c)
            std::copy(img.data(), img.data() + img.size(),
                      rgb.data() + c * img.size());
        img = std::move(rgb);
    }

    std::map<std::string, Tensor> inputs;
    for (auto [h, w] : spec.scales_or_default()) {
        Tensor r = resize(img, h, w);
        Tensor x({1, 3, h, w});
        std::copy(r.data(), r.data() + r.size(), x.data());
        inputs.emplace(input_name(h, w), std::move(x));
    }

    Heatmap hm = gradcam(g, inputs, target_class);

    const size_t H = img.extent(1), W = img.extent(2);
    Tensor heat = resize(hm.values.reshaped({1, hm.values.extent(0), hm.values.extent(1)}),
                         H, W);
    fs::create_directories(out_dir);
    write_pgm(fs::path(out_dir) / "heatmap.pgm", heat);
    note_written(fs::path(out_dir) / "heatmap.pgm");

    // overlay: push heat into red, pull it out of blue
    Tensor overlay = img;
    for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) {
            const double h = heat.at3(0, y, x);
            overlay.at3(0, y, x) = std::min(1.0, overlay.at3(0, y, x) * (1 - h) + h);
            overlay.at3(2, y, x) = overlay.at3(2, y, x) * (1 - h);
        }
    write_ppm(fs::path(out_dir) / "overlay.ppm", overlay);
    note_written(fs::path(out_dir) / "overlay.ppm");

    std::cout << "predicted class " << hm.predicted_class << " p=" << hm.predicted_prob
              << " target class " << hm.target_class << "\n";
    return 0;
}

SweepGrid load_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("sweep: cannot open grid file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error("sweep: grid parse error: " + std::string(e.what()));
    }
    SweepGrid grid;
    for (const auto& o : j.value("optimizers", json::array()))
        grid.optimizers.push_back(o.get<std::string>());
    for (const auto& lr : j.value("learning_rates", json::array()))
        grid.learning_rates.push_back(lr.get<double>());
    for (const auto& bs : j.value("batch_sizes", json::array()))
        grid.batch_sizes.push_back(bs.get<size_t>());
    if (grid.optimizers.empty() && grid.learning_rates.empty() && grid.batch_sizes.empty())
        throw std::invalid_argument("sweep: grid file declares no dimensions");
    return grid;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path,
              const std::string& out, size_t jobs, long long seed, long long epochs) {
    RunConfig rc = load_config_with_overrides(config_path, seed, epochs, out);
    SweepGrid grid = load_grid(grid_path);
    Dataset ds = load_or_synth_dataset(rc);
    const fs::path out_dir = rc.out_dir;
    fs::create_directories(out_dir);

    auto on_cell = [&](size_t i, const SweepCell& c, const TrainResult* tr) {
        std::ostringstream dir;
        dir << "cell_" << i << "_" << c.optimizer << "_lr" << c.lr << "_bs"
            << c.batch_size;
        if (tr) {
            TrainConfig cfg = rc.train;
            cfg.optimizer.variant = optimizer_from_name(c.optimizer);
            cfg.optimizer.lr = c.lr;
            cfg.batch_size = c.batch_size;
            write_run_artifacts(out_dir / dir.str(), cfg, *tr);
        } else {
            std::cerr << "sweep cell " << dir.str() << " failed: " << c.error << "\n";
        }
    };

    std::vector<SweepCell> cells = sweep(rc.train, grid, ds, jobs, on_cell);
    write_text(out_dir / "sweep.csv", sweep_csv(cells));

    size_t ok = 0;
    for (const SweepCell& c : cells)
        if (!c.failed) ++ok;
    std::cout << "sweep: " << ok << "/" << cells.size() << " cells succeeded\n";
    if (ok == 0) throw std::runtime_error("sweep: every cell failed");
    return 0;
}

int cmd_synth(const std::string& out_dir, size_t classes, size_t per_class, size_t extent,
              uint64_t seed) {
    Dataset ds = synth_dataset(classes, per_class, extent, seed);
    write_dataset_tree(ds, out_dir);
    std::cout << "wrote " << ds.samples.size() << " images under " << out_dir << "\n";
    return 0;
}

int cmd_report(const std::string& ckpt_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    json meta = json::parse(ckpt.meta_json);
    std::cout << meta.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* det = std::getenv("LEAFNET_DETERMINISTIC"); det && det[0] == '1') {
#ifdef _OPENMP
        omp_set_num_threads(1);
#endif
    }

    CLI::App app{"leafnet: train, evaluate and explain small image classifiers"};
    app.footer(config_help_text() +
               "\nFlag overrides beat config-file values, which beat defaults.\n"
               "LEAFNET_DETERMINISTIC=1 forces single-threaded, bit-reproducible runs.");
    app.require_subcommand(1);

    std::string config_path, out, ckpt_path, data_root, image_path, grid_path;
    std::string split_sel = "test", format = "text";
    long long seed = -1, epochs = -1, target_class = -1;
    size_t jobs = 1, classes = 3, per_class = 10, extent = 32;
    uint64_t synth_seed = 0;

    auto* t = app.add_subcommand("train", "train a model and write run artifacts");
    t->add_option("--config", config_path, "JSON config file")->required();
    t->add_option("--seed", seed, "override train.seed");
    t->add_option("--epochs", epochs, "override train.epochs");
    t->add_option("--out", out, "override the output directory");

    auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    e->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    e->add_option("--data", data_root, "dataset root directory")->required();
    e->add_option("--split", split_sel, "test | train | all (default test)");
    e->add_option("--format", format, "text | json | csv (default text)");

    auto* gc = app.add_subcommand("gradcam", "write a saliency heatmap for one image");
    gc->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    gc->add_option("--image", image_path, "input image")->required();
    gc->add_option("--class", target_class, "target class (default: predicted)");
    gc->add_option("--out", out, "output directory")->required();

    auto* sw = app.add_subcommand("sweep", "hyperparameter grid sweep");
    sw->add_option("--config", config_path, "JSON base config file")->required();
    sw->add_option("--grid", grid_path, "JSON grid file")->required();
    sw->add_option("--out", out, "override the output directory");
    sw->add_option("--jobs", jobs, "parallel cells (default 1)");
    sw->add_option("--seed", seed, "override train.seed");
    sw->add_option("--epochs", epochs, "override train.epochs");

    auto* sy = app.add_subcommand("synth", "write the synthetic fixture dataset");
    sy->add_option("--out", out, "output directory")->required();
    sy->add_option("--classes", classes, "number of classes (default 3)");
    sy->add_option("--per-class", per_class, "images per class (default 10)");
    sy->add_option("--extent", extent, "square image extent (default 32)");
    sy->add_option("--seed", synth_seed, "generator seed (default 0)");

    auto* rp = app.add_subcommand("report", "print a checkpoint's meta block");
    rp->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (t->parsed()) return cmd_train(config_path, seed, epochs, out);
        if (e->parsed()) return cmd_eval(ckpt_path, data_root, split_sel, format);
        if (gc->parsed()) return cmd_gradcam(ckpt_path, image_path, target_class, out);
        if (sw->parsed()) return cmd_sweep(config_path, grid_path, out, jobs, seed, epochs);
        if (sy->parsed()) return cmd_synth(out, classes, per_class, extent, synth_seed);
        if (rp->parsed()) return cmd_report(ckpt_path);
    } catch (const std::logic_error& ex) {
        // invalid_argument is a user/input problem; other logic errors are bugs
        remove_partial_outputs();
        std::cerr << "error: " << ex.what() << "\n";
        return dynamic_cast<const std::invalid_argument*>(&ex) ? 1 : 2;
    } catch (const std::exception& ex) {
        remove_partial_outputs();
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 2;
}
