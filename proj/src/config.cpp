#include "leafnet/config.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace leafnet {

using nlohmann::json;

static json model_to_json(const ModelSpec& m) {
    json j;
    j["name"] = m.name;
    j["num_classes"] = m.num_classes;
    if (!m.input_scales.empty()) {
        json scales = json::array();
        for (auto [h, w] : m.input_scales) scales.push_back({h, w});
        j["scales"] = scales;
    }
    j["width_multiplier"] = m.width_multiplier;
    if (m.dropout >= 0.0) j["dropout"] = m.dropout;
    return j;
}

static ModelSpec model_from_json(const json& j) {
    ModelSpec m;
    m.name = j.value("name", m.name);
    m.num_classes = j.value("num_classes", m.num_classes);
    if (j.contains("scales"))
        for (const auto& s : j["scales"])
            m.input_scales.emplace_back(s.at(0).get<size_t>(), s.at(1).get<size_t>());
    m.width_multiplier = j.value("width_multiplier", m.width_multiplier);
    m.dropout = j.value("dropout", m.dropout);
    return m;
}

static json tc_to_json(const TrainConfig& c) {
    json j;
    j["model"] = model_to_json(c.model);
    j["optimizer"] = {{"variant", optimizer_name(c.optimizer.variant)},
                      {"lr", c.optimizer.lr},
                      {"weight_decay", c.optimizer.weight_decay},
                      {"momentum", c.optimizer.momentum},
                      {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2},
                      {"eps", c.optimizer.eps},
                      {"rho", c.optimizer.rho}};
    j["schedule"] = {{"kind", c.schedule.kind == Schedule::Kind::cosine_annealing
                                  ? "cosine_annealing"
                                  : "constant"},
                     {"eta_min", c.schedule.eta_min},
                     {"period", c.schedule.period}};
    j["train"] = {{"batch_size", c.batch_size},
                  {"epochs", c.epochs},
                  {"seed", c.seed},
                  {"kfold", c.kfold}};
    j["early_stopping"] = {{"metric", c.early_stopping.metric},
                           {"patience", c.early_stopping.patience},
                           {"enabled", c.early_stopping.enabled}};
    j["augment"] = {{"horizontal_flip", c.augment.horizontal_flip},
                    {"rotation_range", c.augment.rotation_range},
                    {"zoom_range", c.augment.zoom_range},
                    {"shift_range", c.augment.shift_range}};
    j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
    return j;
}

static TrainConfig tc_from_json(const json& j) {
    TrainConfig c;
    if (j.contains("model")) c.model = model_from_json(j["model"]);
    if (j.contains("optimizer")) {
        const json& o = j["optimizer"];
        if (o.contains("variant"))
            c.optimizer.variant = optimizer_from_name(o["variant"].get<std::string>());
        c.optimizer.lr = o.value("lr", c.optimizer.lr);
        c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
        c.optimizer.momentum = o.value("momentum", c.optimizer.momentum);
        c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
        c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
        c.optimizer.eps = o.value("eps", c.optimizer.eps);
        c.optimizer.rho = o.value("rho", c.optimizer.rho);
    }
    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        const std::string kind = s.value("kind", "constant");
        if (kind == "cosine_annealing") c.schedule.kind = Schedule::Kind::cosine_annealing;
        else if (kind == "constant") c.schedule.kind = Schedule::Kind::constant;
        else throw std::invalid_argument("config: unknown schedule.kind '" + kind + "'");
        c.schedule.eta_min = s.value("eta_min", c.schedule.eta_min);
        c.schedule.period = s.value("period", c.schedule.period);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        c.batch_size = t.value("batch_size", c.batch_size);
        c.epochs = t.value("epochs", c.epochs);
        c.seed = t.value("seed", c.seed);
        c.kfold = t.value("kfold", c.kfold);
    }
    if (j.contains("early_stopping")) {
        const json& e = j["early_stopping"];
        c.early_stopping.metric = e.value("metric", c.early_stopping.metric);
        c.early_stopping.patience = e.value("patience", c.early_stopping.patience);
        c.early_stopping.enabled = e.value("enabled", c.early_stopping.enabled);
    }
    if (j.contains("augment")) {
        const json& a = j["augment"];
        c.augment.horizontal_flip = a.value("horizontal_flip", c.augment.horizontal_flip);
        c.augment.rotation_range = a.value("rotation_range", c.augment.rotation_range);
        c.augment.zoom_range = a.value("zoom_range", c.augment.zoom_range);
        c.augment.shift_range = a.value("shift_range", c.augment.shift_range);
    }
    if (j.contains("split")) {
        const json& s = j["split"];
        c.split.train = s.value("train", c.split.train);
        c.split.val = s.value("val", c.split.val);
        c.split.test = s.value("test", c.split.test);
    }
    c.augment.seed = c.seed;
    c.schedule.eta_max = c.optimizer.lr;
    if (c.schedule.period == 1 && c.schedule.kind == Schedule::Kind::cosine_annealing)
        c.schedule.period = c.epochs;
    return c;
}

std::string train_config_to_json(const TrainConfig& cfg) { return tc_to_json(cfg).dump(); }

TrainConfig train_config_from_json(const std::string& json_text) {
    return tc_from_json(json::parse(json_text));
}

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"data.root", "dataset directory: root/<class_name>/<images> (PPM; PNG if built in)"},
        {"data.synth", "generate the synthetic class-blob fixture instead of loading files"},
        {"data.synth_classes", "synthetic fixture: number of classes (>= 2)"},
        {"data.synth_per_class", "synthetic fixture: samples per class"},
        {"data.synth_extent", "synthetic fixture: square image extent in pixels"},
        {"out", "output directory for run artifacts"},
        {"model.name", "architecture: dmcnn | brassicanet | beannet | micro_dsnet"},
        {"model.num_classes", "number of output classes (>= 2)"},
        {"model.scales", "input scales as [H,W] pairs; omitted = model default"},
        {"model.width_multiplier", "channel width scale in (0,1] for desk-size runs"},
        {"model.dropout", "dropout rate override; omitted = model default"},
        {"optimizer.variant", "sgd | adam | rmsprop | adagrad | nadam"},
        {"optimizer.lr", "base learning rate (> 0)"},
        {"optimizer.weight_decay", "decoupled weight decay coefficient (>= 0)"},
        {"optimizer.momentum", "sgd momentum coefficient"},
        {"optimizer.beta1", "adam/nadam first-moment decay"},
        {"optimizer.beta2", "adam/nadam second-moment decay"},
        {"optimizer.eps", "denominator epsilon for adaptive variants"},
        {"optimizer.rho", "rmsprop accumulator decay"},
        {"schedule.kind", "constant | cosine_annealing"},
        {"schedule.eta_min", "cosine annealing floor rate"},
        {"schedule.period", "cosine annealing period in epochs; defaults to train.epochs"},
        {"train.batch_size", "samples per optimizer step (>= 1)"},
        {"train.epochs", "epoch budget (>= 1)"},
        {"train.seed", "master seed; fixes init, shuffles, dropout and augmentation"},
        {"train.kfold", "stratified fold count; 0 disables cross-validation"},
        {"early_stopping.metric", "monitored metric: val_loss | val_accuracy"},
        {"early_stopping.patience", "epochs without improvement before stopping (>= 1)"},
        {"early_stopping.enabled", "whether early stopping is active"},
        {"augment.horizontal_flip", "random horizontal flip on training samples"},
        {"augment.rotation_range", "rotation draw range in degrees, [0,180]"},
        {"augment.zoom_range", "zoom factor drawn in [1-r, 1+r], r in [0,1)"},
        {"augment.shift_range", "shift fraction of extent drawn in [-r, r], r in [0,1)"},
        {"split.train", "stratified split ratio for training"},
        {"split.val", "stratified split ratio for validation"},
        {"split.test", "stratified split ratio for testing"},
    };
    return schema;
}

std::string config_help_text() {
    std::ostringstream out;
    out << "Config file keys (JSON):\n";
    for (const ConfigKey& k : config_schema()) out << "  " << k.key << "  -  " << k.doc << "\n";
    return out.str();
}

static void collect_keys(const json& j, const std::string& prefix,
                         std::vector<std::string>& out) {
    for (const auto& [key, value] : j.items()) {
        const std::string dotted = prefix.empty() ? key : prefix + "." + key;
        // model.scales and similar arrays are leaves
        if (value.is_object()) collect_keys(value, dotted, out);
        else out.push_back(dotted);
    }
}

static void validate_keys(const json& j) {
    std::set<std::string> known;
    for (const ConfigKey& k : config_schema()) known.insert(k.key);
    std::vector<std::string> present;
    collect_keys(j, "", present);
    std::vector<std::string> unknown;
    for (const std::string& k : present)
        if (!known.count(k)) unknown.push_back(k);
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const std::string& k : unknown) msg += " " + k;
        throw std::invalid_argument(msg);
    }
}

RunConfig run_config_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    validate_keys(j);
    RunConfig rc;
    rc.train = tc_from_json(j);
    if (j.contains("data")) {
        const json& d = j["data"];
        rc.data_root = d.value("root", rc.data_root);
        rc.synth = d.value("synth", rc.synth);
        rc.synth_classes = d.value("synth_classes", rc.synth_classes);
        rc.synth_per_class = d.value("synth_per_class", rc.synth_per_class);
        rc.synth_extent = d.value("synth_extent", rc.synth_extent);
    }
    rc.out_dir = j.value("out", rc.out_dir);
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return run_config_from_json(ss.str());
    } catch (const json::exception& e) {
        throw std::runtime_error("config: parse error in " + path.string() + ": " + e.what());
    }
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j = tc_to_json(cfg.train);
    j["data"] = {{"root", cfg.data_root},
                 {"synth", cfg.synth},
                 {"synth_classes", cfg.synth_classes},
                 {"synth_per_class", cfg.synth_per_class},
                 {"synth_extent", cfg.synth_extent}};
    j["out"] = cfg.out_dir;
    return j.dump(2);
}

Dataset load_or_synth_dataset(const RunConfig& cfg) {
    if (cfg.synth)
        return synth_dataset(cfg.synth_classes, cfg.synth_per_class, cfg.synth_extent,
                             cfg.train.seed);
    if (cfg.data_root.empty())
        throw std::invalid_argument("config: data.root required unless data.synth is true");
    return load_dataset(cfg.data_root);
}

}  // namespace leafnet
