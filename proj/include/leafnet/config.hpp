#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "leafnet/train.hpp"

namespace leafnet {

// Full run description: the training recipe plus data and output paths.
struct RunConfig {
    TrainConfig train;
    std::string data_root;  // folder tree root/<class>/<images>
    bool synth = false;     // generate the synthetic fixture instead of loading
    size_t synth_classes = 3, synth_per_class = 10, synth_extent = 32;
    std::string out_dir = "out";
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& json_text);

// Parses a JSON config file; every key is validated against the schema and
// unknown keys are an error naming them.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const std::string& json_text);
std::string run_config_to_json(const RunConfig& cfg);

struct ConfigKey {
    std::string key;  // dotted, e.g. "optimizer.lr"
    std::string doc;
};
const std::vector<ConfigKey>& config_schema();
// One line per schema key; embedded into the CLI --help output.
std::string config_help_text();

Dataset load_or_synth_dataset(const RunConfig& cfg);

}  // namespace leafnet
