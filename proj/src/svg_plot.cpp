#include "leafnet/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace leafnet {

static double nice_step(double range, size_t target_ticks) {
    if (range <= 0) return 1.0;
    const double raw = range / double(target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    double step;
    if (norm < 1.5) step = 1.0;
    else if (norm < 3.0) step = 2.0;
    else if (norm < 7.0) step = 5.0;
    else step = 10.0;
    return step * mag;
}

static std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

std::string svg_line_chart(const std::string& title, const std::string& y_label,
                           const std::vector<Series>& series, size_t width,
                           size_t height) {
    const double ml = 60, mr = 20, mt = 36, mb = 44;
    const double pw = double(width) - ml - mr, ph = double(height) - mt - mb;

    size_t n = 0;
    double ymin = 0.0, ymax = 1e-9;
    for (const Series& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (n < 1) n = 1;
    const double yr = ymax - ymin <= 0 ? 1.0 : ymax - ymin;
    const double xmax = double(std::max<size_t>(n, 2));

    auto px = [&](double x) { return ml + (x - 1.0) / (xmax - 1.0) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / yr * ph; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";

    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
        << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";

    // y ticks
    const double ystep = nice_step(yr, 5);
    for (double y = std::ceil(ymin / ystep) * ystep; y <= ymax + 1e-12; y += ystep) {
        const double yy = py(y);
        out << "<line x1=\"" << ml - 4 << "\" y1=\"" << yy << "\" x2=\"" << ml
            << "\" y2=\"" << yy << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << yy + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << fmt(y) << "</text>\n";
    }

    // x ticks at integer epochs
    const double xstep = std::max(1.0, std::round(nice_step(xmax - 1.0, 8)));
    for (double x = 1; x <= xmax + 1e-12; x += xstep) {
        const double xx = px(x);
        out << "<line x1=\"" << xx << "\" y1=\"" << mt + ph << "\" x2=\"" << xx
            << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << xx << "\" y=\"" << mt + ph + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
            << fmt(x) << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << double(height) - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">epoch"
        << "</text>\n";
    out << "<text x=\"14\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
        << "transform=\"rotate(-90 14 " << mt + ph / 2 << ")\">" << y_label << "</text>\n";

    // series + legend
    double lx = ml + 8, ly = mt + 12;
    for (const Series& s : series) {
        if (!s.values.empty()) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"1.5\" points=\"";
            for (size_t i = 0; i < s.values.size(); ++i)
                out << px(double(i + 1)) << "," << py(s.values[i]) << " ";
            out << "\"/>\n";
        }
        out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 18
            << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color
            << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << lx + 22 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"10\">" << s.label << "</text>\n";
        ly += 14;
    }

    out << "</svg>\n";
    return out.str();
}

std::string svg_training_curves(const std::vector<double>& train_loss,
                                const std::vector<double>& val_loss,
                                const std::vector<double>& train_acc,
                                const std::vector<double>& val_acc) {
    const std::string acc = svg_line_chart(
        "accuracy", "accuracy",
        {{"train", "#1f77b4", train_acc}, {"val", "#d62728", val_acc}});
    const std::string loss = svg_line_chart(
        "loss", "loss", {{"train", "#1f77b4", train_loss}, {"val", "#d62728", val_loss}});
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"800\">\n"
        << "<g>" << acc << "</g>\n"
        << "<g transform=\"translate(0 400)\">" << loss << "</g>\n"
        << "</svg>\n";
    return out.str();
}

}  // namespace leafnet
