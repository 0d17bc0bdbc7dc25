#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dmba/reporting.hpp"
#include "dmba/util.hpp"

// Hand-emitted standalone SVG. Every coordinate goes through fixed-width
// formatting and every container is iterated in a defined order, so a chart
// is a pure function of its inputs.

namespace dmba {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 170.0;  // room for the legend
constexpr double kMarginTop = 56.0;
constexpr double kMarginBottom = 64.0;

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                          "#edc949", "#af7aa1", "#ff9da7", "#9c755f", "#bab0ac"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string svg_open() {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
           "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) +
           "\" font-family=\"sans-serif\">\n"
           "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
}

std::string text_at(double x, double y, const std::string& s, const std::string& attrs = {}) {
    return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\"" + (attrs.empty() ? "" : " " + attrs) + ">" +
           escape_text(s) + "</text>\n";
}

std::string title_block(const std::string& title) {
    return text_at(kWidth / 2.0, 28.0, title, "text-anchor=\"middle\" font-size=\"16\" font-weight=\"bold\"");
}

// Horizontal gridlines and tick labels for a fixed 0-100 percentage axis.
std::string percent_axis(const std::string& y_label, double plot_x, double plot_w, double plot_y,
                         double plot_h) {
    std::string out;
    for (int tick = 0; tick <= 100; tick += 20) {
        double y = plot_y + plot_h - plot_h * tick / 100.0;
        out += "<line x1=\"" + fmt(plot_x) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(plot_x + plot_w) +
               "\" y2=\"" + fmt(y) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out += text_at(plot_x - 8.0, y + 4.0, std::to_string(tick), "text-anchor=\"end\" font-size=\"11\"");
    }
    out += "<text x=\"" + fmt(18.0) + "\" y=\"" + fmt(plot_y + plot_h / 2.0) + "\" font-size=\"12\" transform=\"rotate(-90 " +
           fmt(18.0) + " " + fmt(plot_y + plot_h / 2.0) + ")\" text-anchor=\"middle\">" + escape_text(y_label) +
           "</text>\n";
    return out;
}

std::string legend_block(const std::vector<std::string>& labels, double x, double y) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double row_y = y + 20.0 * static_cast<double>(i);
        out += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(row_y) + "\" width=\"12\" height=\"12\" fill=\"" +
               kPalette[i % kPaletteSize] + "\"/>\n";
        out += text_at(x + 18.0, row_y + 10.0, labels[i], "font-size=\"11\"");
    }
    return out;
}

}  // namespace

std::string render_grouped_bar_svg(const std::string& title, const std::string& y_label,
                                   const std::vector<std::string>& group_labels,
                                   const std::vector<std::string>& series_labels,
                                   const std::vector<std::vector<std::optional<double>>>& values) {
    const double plot_x = kMarginLeft;
    const double plot_y = kMarginTop;
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;

    std::string out = svg_open() + title_block(title) + percent_axis(y_label, plot_x, plot_w, plot_y, plot_h);

    const std::size_t n_groups = group_labels.size();
    const std::size_t n_series = std::max<std::size_t>(series_labels.size(), 1);
    if (n_groups == 0) {
        out += text_at(kWidth / 2.0, kHeight / 2.0, "no data", "text-anchor=\"middle\" font-size=\"14\" fill=\"#888888\"");
        return out + "</svg>\n";
    }

    const double group_w = plot_w / static_cast<double>(n_groups);
    const double bar_w = group_w / static_cast<double>(n_series + 1);  // one bar width of padding per group

    for (std::size_t g = 0; g < n_groups; ++g) {
        double group_x = plot_x + group_w * static_cast<double>(g);
        for (std::size_t s = 0; s < series_labels.size(); ++s) {
            if (g >= values.size() || s >= values[g].size() || !values[g][s]) continue;
            double v = std::clamp(*values[g][s], 0.0, 100.0);
            double h = plot_h * v / 100.0;
            double x = group_x + bar_w * (0.5 + static_cast<double>(s));
            double y = plot_y + plot_h - h;
            out += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(bar_w * 0.9) +
                   "\" height=\"" + fmt(h) + "\" fill=\"" + kPalette[s % kPaletteSize] + "\"/>\n";
            out += text_at(x + bar_w * 0.45, y - 3.0, fmt(v), "text-anchor=\"middle\" font-size=\"9\"");
        }
        out += text_at(group_x + group_w / 2.0, plot_y + plot_h + 18.0, group_labels[g],
                       "text-anchor=\"middle\" font-size=\"12\"");
    }

    out += "<line x1=\"" + fmt(plot_x) + "\" y1=\"" + fmt(plot_y + plot_h) + "\" x2=\"" + fmt(plot_x + plot_w) +
           "\" y2=\"" + fmt(plot_y + plot_h) + "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out += legend_block(series_labels, plot_x + plot_w + 16.0, plot_y);
    return out + "</svg>\n";
}

std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label, const std::vector<double>& xs,
                                  const std::vector<LineSeries>& series) {
    const double plot_x = kMarginLeft;
    const double plot_y = kMarginTop;
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;

    std::string out = svg_open() + title_block(title) + percent_axis(y_label, plot_x, plot_w, plot_y, plot_h);

    if (xs.empty()) {
        out += text_at(kWidth / 2.0, kHeight / 2.0, "no data", "text-anchor=\"middle\" font-size=\"14\" fill=\"#888888\"");
        return out + "</svg>\n";
    }

    const double x_min = *std::min_element(xs.begin(), xs.end());
    const double x_max = *std::max_element(xs.begin(), xs.end());
    auto x_pos = [&](double x) {
        if (x_max == x_min) return plot_x + plot_w / 2.0;  // single grid point
        return plot_x + plot_w * (x - x_min) / (x_max - x_min);
    };
    auto y_pos = [&](double v) { return plot_y + plot_h - plot_h * std::clamp(v, 0.0, 100.0) / 100.0; };

    for (double x : xs) {
        out += "<line x1=\"" + fmt(x_pos(x)) + "\" y1=\"" + fmt(plot_y) + "\" x2=\"" + fmt(x_pos(x)) +
               "\" y2=\"" + fmt(plot_y + plot_h) + "\" stroke=\"#eeeeee\" stroke-width=\"1\"/>\n";
        out += text_at(x_pos(x), plot_y + plot_h + 18.0, format_double(x), "text-anchor=\"middle\" font-size=\"11\"");
    }
    out += text_at(plot_x + plot_w / 2.0, kHeight - 16.0, x_label, "text-anchor=\"middle\" font-size=\"12\"");

    std::vector<std::string> legend_labels;
    for (std::size_t s = 0; s < series.size(); ++s) {
        legend_labels.push_back(series[s].label);
        const char* color = kPalette[s % kPaletteSize];
        // Connect only consecutive defined points; gaps stay gaps.
        std::string points;
        for (std::size_t i = 0; i < xs.size() && i < series[s].values.size(); ++i) {
            if (!series[s].values[i]) {
                if (!points.empty()) {
                    out += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + color +
                           "\" stroke-width=\"2\"/>\n";
                    points.clear();
                }
                continue;
            }
            double cx = x_pos(xs[i]);
            double cy = y_pos(*series[s].values[i]);
            if (!points.empty()) points += " ";
            points += fmt(cx) + "," + fmt(cy);
            out += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
        }
        if (!points.empty())
            out += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"2\"/>\n";
    }

    out += "<line x1=\"" + fmt(plot_x) + "\" y1=\"" + fmt(plot_y + plot_h) + "\" x2=\"" + fmt(plot_x + plot_w) +
           "\" y2=\"" + fmt(plot_y + plot_h) + "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out += legend_block(legend_labels, plot_x + plot_w + 16.0, plot_y);
    return out + "</svg>\n";
}

std::string render_heatmap_svg(const std::string& title, const std::vector<std::string>& labels,
                               const std::vector<std::vector<std::optional<double>>>& values) {
    const std::size_t n = labels.size();
    const double cell = 46.0;
    const double label_w = 130.0;
    const double top = 120.0;
    const double width = label_w + cell * static_cast<double>(n) + 40.0;
    const double height = top + cell * static_cast<double>(n) + 30.0;

    auto cell_color = [](double v) {
        // Diverging scale: -1 deep blue, 0 white, +1 deep red.
        double t = std::clamp(std::abs(v), 0.0, 1.0);
        int r, g, b;
        if (v >= 0) {
            r = static_cast<int>(255 + (178 - 255) * t);
            g = static_cast<int>(255 + (24 - 255) * t);
            b = static_cast<int>(255 + (43 - 255) * t);
        } else {
            r = static_cast<int>(255 + (33 - 255) * t);
            g = static_cast<int>(255 + (102 - 255) * t);
            b = static_cast<int>(255 + (172 - 255) * t);
        }
        char buf[8];
        std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
        return std::string(buf);
    };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
                      fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) +
                      "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    out += text_at(width / 2.0, 28.0, title, "text-anchor=\"middle\" font-size=\"16\" font-weight=\"bold\"");

    for (std::size_t j = 0; j < n; ++j) {
        double x = label_w + cell * (static_cast<double>(j) + 0.5);
        out += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(top - 8.0) + "\" font-size=\"10\" text-anchor=\"start\" transform=\"rotate(-45 " +
               fmt(x) + " " + fmt(top - 8.0) + ")\">" + escape_text(labels[j]) + "</text>\n";
    }

    for (std::size_t i = 0; i < n; ++i) {
        double y = top + cell * static_cast<double>(i);
        out += text_at(label_w - 8.0, y + cell / 2.0 + 4.0, labels[i], "text-anchor=\"end\" font-size=\"10\"");
        for (std::size_t j = 0; j < n; ++j) {
            double x = label_w + cell * static_cast<double>(j);
            std::optional<double> v = (i < values.size() && j < values[i].size()) ? values[i][j] : std::nullopt;
            std::string fill = v ? cell_color(*v) : "#e0e0e0";
            out += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(cell) + "\" height=\"" +
                   fmt(cell) + "\" fill=\"" + fill + "\" stroke=\"#ffffff\" stroke-width=\"1\"/>\n";
            std::string text = v ? fmt(*v) : "n/a";
            std::string color = v && std::abs(*v) > 0.6 ? "#ffffff" : "#333333";
            out += text_at(x + cell / 2.0, y + cell / 2.0 + 4.0, text,
                           "text-anchor=\"middle\" font-size=\"10\" fill=\"" + color + "\"");
        }
    }
    return out + "</svg>\n";
}

}  // namespace dmba
