#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace leafnet {

// K x K counts; cell(i,j) = samples of true class i predicted as class j.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(size_t num_classes);
    ConfusionMatrix(size_t num_classes, std::vector<uint64_t> counts);

    size_t num_classes() const { return k_; }
    uint64_t cell(size_t true_class, size_t pred_class) const;
    void record(size_t true_class, size_t pred_class);

    uint64_t total() const;
    uint64_t row_sum(size_t i) const;  // support of class i
    uint64_t col_sum(size_t j) const;

    std::string to_csv(const std::vector<std::string>& class_names) const;

private:
    size_t k_;
    std::vector<uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(const std::vector<size_t>& true_labels,
                                 const std::vector<size_t>& pred_labels, size_t num_classes);

struct Report {
    std::vector<double> precision, recall, f1;
    std::vector<uint64_t> support;
    double accuracy = 0.0;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
    uint64_t total = 0;
    bool has_zero_division = false;  // some 0/0 metric was defined as 0

    std::string to_text(const std::vector<std::string>& class_names) const;
    std::string to_json(const std::vector<std::string>& class_names) const;
};

// precision = TP/(TP+FP), recall = TP/(TP+FN), f1 = 2PR/(P+R),
// accuracy = trace/total; 0/0 cells become 0 with the report flag set.
Report classification_report(const ConfusionMatrix& cm);

}  // namespace leafnet
