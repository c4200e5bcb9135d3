#include "leafnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "leafnet/image_io.hpp"

namespace leafnet {

namespace fs = std::filesystem;

std::vector<size_t> Dataset::counts() const {
    std::vector<size_t> c(class_names.size(), 0);
    for (const Sample& s : samples) ++c[s.label];
    return c;
}

static Dataset load_from_manifest(const fs::path& root, const fs::path& manifest) {
    std::ifstream in(manifest);
    std::string line;
    if (!std::getline(in, line) || line.rfind("path,class", 0) != 0)
        throw std::runtime_error("manifest.csv: expected header `path,class`");
    std::vector<std::pair<std::string, std::string>> rows;
    std::map<std::string, size_t> class_ids;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const size_t comma = line.rfind(',');
        if (comma == std::string::npos)
            throw std::runtime_error("manifest.csv: malformed row: " + line);
        rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
        class_ids[rows.back().second] = 0;
    }
    Dataset ds;
    for (auto& [name, id] : class_ids) {
        id = ds.class_names.size();
        ds.class_names.push_back(name);
    }
    std::sort(rows.begin(), rows.end());
    for (const auto& [rel, cls] : rows) {
        Sample s;
        s.image = read_image(root / rel);
        s.label = class_ids.at(cls);
        s.source = (root / rel).string();
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset load_dataset(const fs::path& root) {
    if (!fs::is_directory(root))
        throw std::runtime_error("dataset root is not a directory: " + root.string());
    const fs::path manifest = root / "manifest.csv";
    if (fs::exists(manifest)) return load_from_manifest(root, manifest);

    std::vector<std::string> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty())
        throw std::runtime_error("dataset root has no class folders: " + root.string());

    Dataset ds;
    ds.class_names = class_dirs;
    for (size_t k = 0; k < class_dirs.size(); ++k) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(root / class_dirs[k]))
            if (e.is_regular_file()) files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty())
            std::cerr << "warning: class folder '" << class_dirs[k] << "' is empty\n";
        for (const std::string& f : files) {
            Sample s;
            s.image = read_image(f);  // throws naming the file if undecodable
            s.label = k;
            s.source = f;
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

Tensor one_hot(size_t k, size_t num_classes) {
    if (k >= num_classes) throw std::out_of_range("one_hot: class index out of range");
    Tensor t({num_classes});
    t[k] = 1.0;
    return t;
}

static std::vector<std::vector<size_t>> per_class_indices(const Dataset& ds) {
    std::vector<std::vector<size_t>> by_class(ds.num_classes());
    for (size_t i = 0; i < ds.samples.size(); ++i) by_class[ds.samples[i].label].push_back(i);
    return by_class;
}

Split split_dataset(const Dataset& ds, double r_train, double r_val, double r_test,
                    uint64_t seed) {
    if (r_train < 0 || r_val < 0 || r_test < 0)
        throw std::invalid_argument("split: ratios must be non-negative");
    if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9)
        throw std::invalid_argument("split: ratios must sum to 1");
    Split sp;
    auto by_class = per_class_indices(ds);
    for (size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        Rng rng(derive_seed(seed, 0x73706c69 /* "spli" */, c));
        rng.shuffle(idx);
        const size_t n = idx.size();
        const size_t n_test = static_cast<size_t>(std::floor(r_test * double(n)));
        const size_t n_train = static_cast<size_t>(std::floor(r_train * double(n)));
        size_t pos = 0;
        for (size_t i = 0; i < n_test; ++i) sp.test.push_back(idx[pos++]);
        for (size_t i = 0; i < n_train; ++i) sp.train.push_back(idx[pos++]);
        while (pos < n) sp.val.push_back(idx[pos++]);
    }
    return sp;
}

std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> kfold_split(
    const Dataset& ds, size_t k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
    auto by_class = per_class_indices(ds);
    for (size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].size() < k)
            throw std::invalid_argument("kfold: class '" + ds.class_names[c] +
                                        "' has fewer samples than k");
    std::vector<std::vector<size_t>> folds(k);
    for (size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        Rng rng(derive_seed(seed, 0x6b666f6c /* "kfol" */, c));
        rng.shuffle(idx);
        for (size_t i = 0; i < idx.size(); ++i) folds[i % k].push_back(idx[i]);
    }
    std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> out;
    for (size_t f = 0; f < k; ++f) {
        std::vector<size_t> train;
        for (size_t g = 0; g < k; ++g)
            if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
        out.emplace_back(std::move(train), folds[f]);
    }
    return out;
}

Dataset balance_by_augmentation(const Dataset& ds, const AugmentConfig& cfg, size_t target) {
    auto counts = ds.counts();
    size_t goal = target;
    if (goal == 0)
        for (size_t c : counts) goal = std::max(goal, c);
    Dataset out = ds;
    auto by_class = per_class_indices(ds);
    for (size_t c = 0; c < counts.size(); ++c) {
        if (by_class[c].empty()) continue;
        Rng rng(derive_seed(cfg.seed, 0x62616c /* "bal" */, c));
        size_t added = 0;
        while (counts[c] + added < goal) {
            const size_t src = by_class[c][rng.next_below(by_class[c].size())];
            Sample s;
            s.image = augment_sample(ds.samples[src].image, cfg,
                                     derive_seed(c, counts[c] + added));
            s.label = c;
            s.source = ds.samples[src].source + "#aug" + std::to_string(added);
            out.samples.push_back(std::move(s));
            ++added;
        }
    }
    return out;
}

std::vector<std::vector<size_t>> batch_iter(const std::vector<size_t>& indices,
                                            size_t batch_size, uint64_t seed, size_t epoch) {
    if (batch_size < 1) throw std::invalid_argument("batch_iter: batch size must be >= 1");
    std::vector<size_t> order = indices;
    Rng rng(derive_seed(seed, 0x62617463 /* "batc" */, epoch));
    rng.shuffle(order);
    std::vector<std::vector<size_t>> batches;
    for (size_t start = 0; start < order.size(); start += batch_size) {
        const size_t end = std::min(start + batch_size, order.size());
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

Dataset synth_dataset(size_t num_classes, size_t per_class, size_t extent, uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("synth_dataset: need >= 2 classes");
    Dataset ds;
    for (size_t k = 0; k < num_classes; ++k) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "class_%02zu", k);
        ds.class_names.push_back(buf);
    }
    const double e = static_cast<double>(extent);
    for (size_t k = 0; k < num_classes; ++k) {
        // blob center on a circle, one angle per class
        const double ang = 2.0 * M_PI * double(k) / double(num_classes);
        const double cy = e / 2.0 + 0.3 * e * std::sin(ang);
        const double cx = e / 2.0 + 0.3 * e * std::cos(ang);
        double color[3];
        for (int c = 0; c < 3; ++c)
            color[c] = 0.5 + 0.5 * std::cos(ang + double(c) * 2.0 * M_PI / 3.0);
        for (size_t s = 0; s < per_class; ++s) {
            Rng rng(derive_seed(seed, k, s));
            Tensor img({3, extent, extent});
            const double sigma = e / 6.0;
            for (size_t i = 0; i < extent; ++i)
                for (size_t j = 0; j < extent; ++j) {
                    const double d2 = (double(i) - cy) * (double(i) - cy) +
                                      (double(j) - cx) * (double(j) - cx);
                    const double bump = std::exp(-d2 / (2.0 * sigma * sigma));
                    for (size_t c = 0; c < 3; ++c) {
                        const double noise = 0.02 * rng.next_double();
                        img.at3(c, i, j) =
                            std::clamp(0.1 + 0.8 * bump * color[c] + noise, 0.0, 1.0);
                    }
                }
            Sample smp;
            smp.image = std::move(img);
            smp.label = k;
            smp.source = "synth:" + std::to_string(k) + ":" + std::to_string(s);
            ds.samples.push_back(std::move(smp));
        }
    }
    return ds;
}

void write_dataset_tree(const Dataset& ds, const fs::path& root) {
    fs::create_directories(root);
    std::vector<size_t> written(ds.num_classes(), 0);
    for (const Sample& s : ds.samples) {
        const fs::path dir = root / ds.class_names[s.label];
        fs::create_directories(dir);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "img_%04zu.ppm", written[s.label]++);
        write_ppm(dir / buf, s.image);
    }
}

}  // namespace leafnet
