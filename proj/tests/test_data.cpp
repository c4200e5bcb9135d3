#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fd_check.hpp"
#include "leafnet/data.hpp"
#include "leafnet/image_io.hpp"

using namespace leafnet;
namespace fs = std::filesystem;

namespace {

Dataset dummy_dataset(const std::vector<size_t>& class_counts) {
    Dataset ds;
    for (size_t c = 0; c < class_counts.size(); ++c) {
        ds.class_names.push_back("c" + std::to_string(c));
        for (size_t i = 0; i < class_counts[c]; ++i) {
            Sample s;
            s.image = Tensor({3, 2, 2}, 0.5);
            s.label = c;
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("stratified split reproduces the reference sizes for every seed") {
    Dataset ds = dummy_dataset({436, 432, 428});
    for (uint64_t seed : {0ull, 1ull, 7ull, 42ull, 1234ull}) {
        Split sp = split_dataset(ds, 0.8, 0.1, 0.1, seed);
        CHECK(sp.train.size() == 1035);
        CHECK(sp.val.size() == 133);
        CHECK(sp.test.size() == 128);
        std::vector<size_t> test_support(3, 0);
        for (size_t i : sp.test) ++test_support[ds.samples[i].label];
        CHECK(test_support[0] == 43);
        CHECK(test_support[1] == 43);
        CHECK(test_support[2] == 42);
    }
}

TEST_CASE("split is a partition and seed-dependent") {
    Dataset ds = dummy_dataset({50, 40, 30});
    Split sp = split_dataset(ds, 0.8, 0.1, 0.1, 3);
    std::set<size_t> all;
    for (const auto* part : {&sp.train, &sp.val, &sp.test})
        for (size_t i : *part) CHECK(all.insert(i).second);  // disjoint
    CHECK(all.size() == ds.samples.size());

    Split sp2 = split_dataset(ds, 0.8, 0.1, 0.1, 4);
    CHECK(sp.train != sp2.train);
    Split sp3 = split_dataset(ds, 0.8, 0.1, 0.1, 3);
    CHECK(sp.train == sp3.train);
    CHECK_THROWS(split_dataset(ds, 0.9, 0.2, 0.1, 3));  // ratios > 1
}

TEST_CASE("k-fold folds partition each class with balance within one") {
    Dataset ds = dummy_dataset({23, 17, 11});
    const size_t k = 5;
    auto folds = kfold_split(ds, k, 9);
    REQUIRE(folds.size() == k);
    std::vector<std::vector<size_t>> val_count_per_class(k,
                                                         std::vector<size_t>(3, 0));
    std::set<size_t> seen;
    for (size_t f = 0; f < k; ++f) {
        for (size_t i : folds[f].second) {
            CHECK(seen.insert(i).second);  // each sample validates exactly once
            ++val_count_per_class[f][ds.samples[i].label];
        }
        // train + val of each fold covers everything exactly once
        CHECK(folds[f].first.size() + folds[f].second.size() == ds.samples.size());
    }
    CHECK(seen.size() == ds.samples.size());
    for (size_t c = 0; c < 3; ++c) {
        size_t lo = ds.samples.size(), hi = 0;
        for (size_t f = 0; f < k; ++f) {
            lo = std::min(lo, val_count_per_class[f][c]);
            hi = std::max(hi, val_count_per_class[f][c]);
        }
        CHECK(hi - lo <= 1);
    }
    CHECK_THROWS(kfold_split(ds, 1, 0));
    Dataset tiny = dummy_dataset({2, 3});
    CHECK_THROWS(kfold_split(tiny, 5, 0));  // a class smaller than k
}

TEST_CASE("batching: 1034 samples at 32 give 33 batches covering all once") {
    std::vector<size_t> idx(1034);
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto batches = batch_iter(idx, 32, 5, 0);
    CHECK(batches.size() == 33);
    std::set<size_t> seen;
    for (const auto& b : batches) {
        CHECK(b.size() <= 32);
        for (size_t i : b) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == 1034);
    CHECK(batches.back().size() == 1034 - 32 * 32);

    auto again = batch_iter(idx, 32, 5, 0);
    CHECK(batches == again);
    auto other_epoch = batch_iter(idx, 32, 5, 1);
    CHECK(batches != other_epoch);
}

TEST_CASE("one-hot encoding") {
    Tensor t = one_hot(2, 4);
    CHECK(t.shape() == Shape{4});
    CHECK(t[2] == 1.0);
    CHECK(t[0] + t[1] + t[3] == 0.0);
    CHECK_THROWS(one_hot(4, 4));
}

TEST_CASE("synthetic dataset is nearest-centroid separable") {
    Dataset ds = synth_dataset(3, 12, 24, 77);
    REQUIRE(ds.samples.size() == 36);
    CHECK(ds.num_classes() == 3);
    // class centroids in pixel space
    std::vector<Tensor> centroid(3, Tensor(ds.samples[0].image.shape()));
    std::vector<size_t> n(3, 0);
    for (const Sample& s : ds.samples) {
        for (size_t i = 0; i < s.image.size(); ++i) centroid[s.label][i] += s.image[i];
        ++n[s.label];
    }
    for (size_t c = 0; c < 3; ++c)
        for (size_t i = 0; i < centroid[c].size(); ++i) centroid[c][i] /= double(n[c]);
    size_t correct = 0;
    for (const Sample& s : ds.samples) {
        double best = 1e300;
        size_t arg = 0;
        for (size_t c = 0; c < 3; ++c) {
            double d = 0;
            for (size_t i = 0; i < s.image.size(); ++i) {
                const double e = s.image[i] - centroid[c][i];
                d += e * e;
            }
            if (d < best) best = d, arg = c;
        }
        if (arg == s.label) ++correct;
    }
    CHECK(correct == ds.samples.size());

    // deterministic per seed
    Dataset ds2 = synth_dataset(3, 12, 24, 77);
    for (size_t i = 0; i < ds.samples.size(); ++i)
        for (size_t j = 0; j < ds.samples[i].image.size(); ++j)
            CHECK(ds.samples[i].image[j] == ds2.samples[i].image[j]);
}

TEST_CASE("dataset tree round-trips through the loader") {
    Dataset ds = synth_dataset(3, 4, 16, 5);
    const fs::path root = fs::temp_directory_path() / "leafnet_test_tree";
    fs::remove_all(root);
    write_dataset_tree(ds, root);
    Dataset back = load_dataset(root);
    REQUIRE(back.samples.size() == ds.samples.size());
    CHECK(std::is_sorted(back.class_names.begin(), back.class_names.end()));
    CHECK(back.counts() == ds.counts());
    // 8-bit quantization bounds the pixel error
    double worst = 0;
    for (size_t i = 0; i < back.samples.size(); ++i)
        for (size_t j = 0; j < back.samples[i].image.size(); ++j)
            worst = std::max(worst, std::fabs(back.samples[i].image[j] -
                                              ds.samples[i].image[j]));
    CHECK(worst <= 0.5 / 255.0 + 1e-12);
    fs::remove_all(root);
}

TEST_CASE("loader errors on unreadable roots and undecodable files") {
    CHECK_THROWS(load_dataset(fs::temp_directory_path() / "leafnet_missing_root"));
    const fs::path root = fs::temp_directory_path() / "leafnet_bad_tree";
    fs::remove_all(root);
    fs::create_directories(root / "classA");
    std::ofstream(root / "classA" / "bad.ppm") << "not a ppm";
    try {
        load_dataset(root);
        FAIL("expected an error for the undecodable file");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("bad.ppm") != std::string::npos);
    }
    fs::remove_all(root);
}

TEST_CASE("manifest.csv overrides directory discovery") {
    Dataset ds = synth_dataset(2, 3, 8, 1);
    const fs::path root = fs::temp_directory_path() / "leafnet_manifest_tree";
    fs::remove_all(root);
    write_dataset_tree(ds, root);
    // manifest that keeps only 2 of the 6 images, with custom class names
    std::ofstream m(root / "manifest.csv");
    m << "path,class\n";
    m << "class_00/img_0000.ppm,zebra\n";
    m << "class_01/img_0001.ppm,aardvark\n";
    m.close();
    Dataset back = load_dataset(root);
    REQUIRE(back.samples.size() == 2);
    CHECK(back.class_names == std::vector<std::string>{"aardvark", "zebra"});
    CHECK(back.samples[0].label != back.samples[1].label);
    fs::remove_all(root);
}

TEST_CASE("augmentation balancing tops up minority classes") {
    Dataset ds = synth_dataset(2, 3, 12, 2);
    // drop two samples of class 1
    Dataset skew;
    skew.class_names = ds.class_names;
    size_t kept1 = 0;
    for (const Sample& s : ds.samples)
        if (s.label == 0 || kept1++ < 1) skew.samples.push_back(s);
    AugmentConfig cfg;
    cfg.horizontal_flip = true;
    cfg.rotation_range = 10.0;
    cfg.seed = 3;
    Dataset balanced = balance_by_augmentation(skew, cfg);
    auto counts = balanced.counts();
    CHECK(counts[0] == counts[1]);
    CHECK(counts[0] == 3);
}

TEST_CASE("pixel normalization maps bytes to [0,1]") {
    CHECK(normalize_pixel(0) == 0.0);
    CHECK(normalize_pixel(255) == 1.0);
    CHECK(normalize_pixel(51) == doctest::Approx(0.2).epsilon(1e-12));
}
