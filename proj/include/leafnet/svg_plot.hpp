#pragma once

#include <string>
#include <vector>

namespace leafnet {

struct Series {
    std::string label;
    std::string color;  // any SVG color string
    std::vector<double> values;  // one point per epoch, x = 1..n
};

// Minimal line chart: axes, tick labels, a legend, one polyline per series.
std::string svg_line_chart(const std::string& title, const std::string& y_label,
                           const std::vector<Series>& series, size_t width = 640,
                           size_t height = 400);

// Two stacked charts (accuracy, loss) built from a history CSV's columns.
std::string svg_training_curves(const std::vector<double>& train_loss,
                                const std::vector<double>& val_loss,
                                const std::vector<double>& train_acc,
                                const std::vector<double>& val_acc);

}  // namespace leafnet
