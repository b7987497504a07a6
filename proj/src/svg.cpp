#include "afex/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "afex/csv.hpp"

namespace afex::svg {

namespace {

constexpr double kWidth = 720.0, kHeight = 480.0;
constexpr double kLeft = 70.0, kRight = 24.0, kTop = 42.0, kBottom = 54.0;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#17becf"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

// Ramp endpoints for heatmaps (dark blue to light yellow).
constexpr int kLowColor[3] = {32, 74, 135};
constexpr int kHighColor[3] = {252, 233, 79};

std::string escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) { return csv::format_double(v); }

struct Range {
    double lo = 0.0, hi = 1.0;

    void expand(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    /// Pixel position of v across span, guarding the degenerate range.
    double pos(double v, double origin, double span, bool invert) const {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        return origin + (invert ? (1.0 - t) : t) * span;
    }
};

Range fit_range(double lo, double hi) {
    Range r;
    r.lo = lo;
    r.hi = hi;
    return r;
}

void open_document(std::ostringstream& out, const PlotSpec& spec) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
        << "\">\n"
        << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"#ffffff\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">"
        << escape(spec.title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const PlotSpec& spec, const Range& xr,
               const Range& yr, const std::string& y_label) {
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW
        << "\" height=\"" << kPlotH
        << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    constexpr int kTicks = 5;
    for (int t = 0; t < kTicks; ++t) {
        const double f = static_cast<double>(t) / (kTicks - 1);
        const double xv = xr.lo + f * (xr.hi - xr.lo);
        const double yv = yr.lo + f * (yr.hi - yr.lo);
        const double px = kLeft + f * kPlotW;
        const double py = kTop + (1.0 - f) * kPlotH;
        out << "<text x=\"" << px << "\" y=\"" << kTop + kPlotH + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << num(xv) << "</text>\n"
            << "<text x=\"" << kLeft - 8 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << num(yv) << "</text>\n";
    }
    out << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kHeight - 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape(spec.x_label) << "</text>\n"
        << "<text x=\"18\" y=\"" << kTop + kPlotH / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18 "
        << kTop + kPlotH / 2 << ")\">" << escape(y_label) << "</text>\n";
}

}  // namespace

void PlotSpec::validate() const {
    if (path.size() < 4 || !path.ends_with(".svg")) {
        throw SvgError("plot path '" + path + "' must end in .svg");
    }
}

std::string render_line_plot(const PlotSpec& spec, const std::vector<Series>& series) {
    if (series.empty()) throw SvgError("line plot needs at least one series");
    const bool log_y = spec.kind == PlotSpec::Kind::LossTrace;

    auto y_value = [log_y](double v) {
        return log_y ? std::log10(std::max(v, 1e-300)) : v;
    };

    bool any = false;
    Range xr, yr;
    for (const Series& s : series) {
        if (s.x.size() != s.y.size()) {
            throw SvgError("series '" + s.name + "' has mismatched lengths");
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!any) {
                xr = fit_range(s.x[i], s.x[i]);
                yr = fit_range(y_value(s.y[i]), y_value(s.y[i]));
                any = true;
            } else {
                xr.expand(s.x[i]);
                yr.expand(y_value(s.y[i]));
            }
        }
    }
    if (!any) throw SvgError("line plot has no points");

    std::ostringstream out;
    open_document(out, spec);
    draw_axes(out, spec, xr, yr,
              log_y ? "log10(" + spec.y_label + ")" : spec.y_label);

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = kPalette[si % kPaletteSize];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) out << ' ';
            out << num(xr.pos(s.x[i], kLeft, kPlotW, false)) << ','
                << num(yr.pos(y_value(s.y[i]), kTop, kPlotH, true));
        }
        out << "\"/>\n";
        // Legend entry, top right, one row per series.
        const double ly = kTop + 14.0 + 16.0 * static_cast<double>(si);
        out << "<rect x=\"" << kLeft + kPlotW - 150 << "\" y=\"" << ly - 9
            << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n"
            << "<text x=\"" << kLeft + kPlotW - 132 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.name)
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string render_heatmap(const PlotSpec& spec, const std::vector<double>& grid_x,
                           const std::vector<double>& grid_y, const Tensor& values) {
    const std::size_t nx = grid_x.size(), ny = grid_y.size();
    if (nx == 0 || ny == 0 || values.rank() != 2 || values.rows() != nx ||
        values.cols() != ny) {
        throw SvgError("heatmap values must be a grid_x by grid_y matrix");
    }

    double lo = values[0], hi = values[0];
    for (std::size_t i = 0; i < values.numel(); ++i) {
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
    }

    std::ostringstream out;
    open_document(out, spec);
    const double cw = kPlotW / static_cast<double>(nx);
    const double ch = kPlotH / static_cast<double>(ny);
    for (std::size_t p = 0; p < nx; ++p) {
        for (std::size_t q = 0; q < ny; ++q) {
            const double t =
                hi > lo ? (values.at(p, q) - lo) / (hi - lo) : 0.5;
            int rgb[3];
            for (int c = 0; c < 3; ++c) {
                rgb[c] = static_cast<int>(
                    std::lround(kLowColor[c] + t * (kHighColor[c] - kLowColor[c])));
            }
            const double px = kLeft + cw * static_cast<double>(p);
            // Row q = 0 is the smallest grid_y value, drawn at the bottom.
            const double py = kTop + kPlotH - ch * static_cast<double>(q + 1);
            out << "<rect class=\"cell\" x=\"" << num(px) << "\" y=\"" << num(py)
                << "\" width=\"" << num(cw) << "\" height=\"" << num(ch)
                << "\" fill=\"rgb(" << rgb[0] << ',' << rgb[1] << ',' << rgb[2]
                << ")\"/>\n";
        }
    }
    draw_axes(out, spec, fit_range(grid_x.front(), grid_x.back()),
              fit_range(grid_y.front(), grid_y.back()), spec.y_label);
    out << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 14
        << "\" font-family=\"sans-serif\" font-size=\"11\">min " << num(lo) << " max "
        << num(hi) << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace afex::svg
