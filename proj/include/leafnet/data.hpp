#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "leafnet/augment.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {

struct Sample {
    Tensor image;  // (C,H,W), values in [0,1]
    size_t label = 0;
    std::string source;  // file path or synthetic tag
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names;  // sorted ascending, byte order

    std::vector<size_t> counts() const;
    size_t num_classes() const { return class_names.size(); }
};

struct Split {
    std::vector<size_t> train, val, test;
};

inline double normalize_pixel(unsigned int byte) { return byte / 255.0; }

// Directory tree root/<class_name>/<image files>; class order is the
// sorted folder names, sample order the sorted file paths. An optional
// root/manifest.csv with header `path,class` overrides discovery.
Dataset load_dataset(const std::filesystem::path& root);

Tensor one_hot(size_t k, size_t num_classes);

// Per class: test = floor(r_test*n), train = floor(r_train*n), val gets
// the remainder; membership by seeded in-class shuffle.
Split split_dataset(const Dataset& ds, double r_train, double r_val, double r_test,
                    uint64_t seed);

// Stratified k-fold; element i is (train indices, val indices) of fold i.
std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> kfold_split(
    const Dataset& ds, size_t k, uint64_t seed);

// Appends augmented copies of seeded-randomly chosen members of each
// minority class until all counts reach target (default: the max count).
Dataset balance_by_augmentation(const Dataset& ds, const AugmentConfig& cfg,
                                size_t target = 0);

// Seeded shuffle per epoch, all indices covered once, last batch may be short.
std::vector<std::vector<size_t>> batch_iter(const std::vector<size_t>& indices,
                                            size_t batch_size, uint64_t seed, size_t epoch);

// Class-separable fixture: one colored blob per class at a class-specific
// position, plus low-amplitude seeded noise.
Dataset synth_dataset(size_t num_classes, size_t per_class, size_t extent, uint64_t seed);

// Writes a dataset as a root/<class>/<n>.ppm tree (fixture for the CLI).
void write_dataset_tree(const Dataset& ds, const std::filesystem::path& root);

}  // namespace leafnet
