#include "leafnet/metrics.hpp"

#include <json.hpp>

#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace leafnet {

ConfusionMatrix::ConfusionMatrix(size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes == 0) throw std::invalid_argument("confusion matrix: K must be >= 1");
}

ConfusionMatrix::ConfusionMatrix(size_t num_classes, std::vector<uint64_t> counts)
    : k_(num_classes), counts_(std::move(counts)) {
    if (counts_.size() != k_ * k_)
        throw std::invalid_argument("confusion matrix: counts size must be K*K");
}

uint64_t ConfusionMatrix::cell(size_t i, size_t j) const {
    if (i >= k_ || j >= k_) throw std::out_of_range("confusion matrix: bad cell");
    return counts_[i * k_ + j];
}

void ConfusionMatrix::record(size_t i, size_t j) {
    if (i >= k_ || j >= k_) throw std::out_of_range("confusion matrix: label out of range");
    ++counts_[i * k_ + j];
}

uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), uint64_t{0});
}

uint64_t ConfusionMatrix::row_sum(size_t i) const {
    uint64_t s = 0;
    for (size_t j = 0; j < k_; ++j) s += counts_[i * k_ + j];
    return s;
}

uint64_t ConfusionMatrix::col_sum(size_t j) const {
    uint64_t s = 0;
    for (size_t i = 0; i < k_; ++i) s += counts_[i * k_ + j];
    return s;
}

std::string ConfusionMatrix::to_csv(const std::vector<std::string>& class_names) const {
    std::ostringstream out;
    out << "true\\pred";
    for (size_t j = 0; j < k_; ++j)
        out << "," << (j < class_names.size() ? class_names[j] : std::to_string(j));
    out << "\n";
    for (size_t i = 0; i < k_; ++i) {
        out << (i < class_names.size() ? class_names[i] : std::to_string(i));
        for (size_t j = 0; j < k_; ++j) out << "," << counts_[i * k_ + j];
        out << "\n";
    }
    return out.str();
}

ConfusionMatrix confusion_matrix(const std::vector<size_t>& true_labels,
                                 const std::vector<size_t>& pred_labels, size_t num_classes) {
    if (true_labels.size() != pred_labels.size())
        throw std::invalid_argument("confusion_matrix: label list lengths differ");
    ConfusionMatrix cm(num_classes);
    for (size_t i = 0; i < true_labels.size(); ++i)
        cm.record(true_labels[i], pred_labels[i]);
    return cm;
}

Report classification_report(const ConfusionMatrix& cm) {
    const size_t k = cm.num_classes();
    Report r;
    r.total = cm.total();
    if (r.total == 0) throw std::invalid_argument("classification_report: empty matrix");

    uint64_t trace = 0;
    for (size_t c = 0; c < k; ++c) {
        const uint64_t tp = cm.cell(c, c);
        const uint64_t fp = cm.col_sum(c) - tp;
        const uint64_t fn = cm.row_sum(c) - tp;
        trace += tp;
        auto ratio = [&](uint64_t num, uint64_t den) {
            if (den == 0) {
                r.has_zero_division = true;
                return 0.0;
            }
            return double(num) / double(den);
        };
        const double p = ratio(tp, tp + fp);
        const double rc = ratio(tp, tp + fn);
        double f = 0.0;
        if (p + rc > 0.0) f = 2.0 * p * rc / (p + rc);
        else r.has_zero_division = true;
        r.precision.push_back(p);
        r.recall.push_back(rc);
        r.f1.push_back(f);
        r.support.push_back(cm.row_sum(c));
    }
    r.accuracy = double(trace) / double(r.total);
    for (size_t c = 0; c < k; ++c) {
        r.macro_precision += r.precision[c] / double(k);
        r.macro_recall += r.recall[c] / double(k);
        r.macro_f1 += r.f1[c] / double(k);
        const double w = double(r.support[c]) / double(r.total);
        r.weighted_precision += w * r.precision[c];
        r.weighted_recall += w * r.recall[c];
        r.weighted_f1 += w * r.f1[c];
    }
    return r;
}

std::string Report::to_text(const std::vector<std::string>& class_names) const {
    std::ostringstream out;
    size_t name_w = 12;
    for (const auto& n : class_names) name_w = std::max(name_w, n.size());
    char buf[256];
    auto row = [&](const std::string& name, const char* p, const char* r, const char* f,
                   const std::string& s) {
        std::snprintf(buf, sizeof(buf), "%*s %9s %9s %9s %9s\n", int(name_w), name.c_str(), p,
                      r, f, s.c_str());
        out << buf;
    };
    auto fmt = [&](double v) {
        char b[16];
        std::snprintf(b, sizeof(b), "%.4f", v);
        return std::string(b);
    };
    row("", "precision", "recall", "f1-score", "support");
    out << "\n";
    for (size_t c = 0; c < precision.size(); ++c) {
        const std::string name =
            c < class_names.size() ? class_names[c] : std::to_string(c);
        row(name, fmt(precision[c]).c_str(), fmt(recall[c]).c_str(), fmt(f1[c]).c_str(),
            std::to_string(support[c]));
    }
    out << "\n";
    row("accuracy", "", "", fmt(accuracy).c_str(), std::to_string(total));
    row("macro avg", fmt(macro_precision).c_str(), fmt(macro_recall).c_str(),
        fmt(macro_f1).c_str(), std::to_string(total));
    row("weighted avg", fmt(weighted_precision).c_str(), fmt(weighted_recall).c_str(),
        fmt(weighted_f1).c_str(), std::to_string(total));
    return out.str();
}

std::string Report::to_json(const std::vector<std::string>& class_names) const {
    nlohmann::json j;
    for (size_t c = 0; c < precision.size(); ++c) {
        const std::string name =
            c < class_names.size() ? class_names[c] : std::to_string(c);
        j["classes"][name] = {{"precision", precision[c]},
                              {"recall", recall[c]},
                              {"f1", f1[c]},
                              {"support", support[c]}};
    }
    j["accuracy"] = accuracy;
    j["macro avg"] = {{"precision", macro_precision},
                      {"recall", macro_recall},
                      {"f1", macro_f1}};
    j["weighted avg"] = {{"precision", weighted_precision},
                         {"recall", weighted_recall},
                         {"f1", weighted_f1}};
    j["total"] = total;
    j["zero_division"] = has_zero_division;
    return j.dump(2);
}

}  // namespace leafnet
