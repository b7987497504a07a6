#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "afex/tensor.hpp"

namespace afex::svg {

struct SvgError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PlotSpec {
    enum class Kind { Curve, Heatmap, LossTrace };
    Kind kind = Kind::Curve;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::string path;  // must end in .svg

    void validate() const;
};

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Polyline chart, one colored line per series with a legend. LossTrace
/// plots log10(y) (values clamped to 1e-300 first) so decades of mse stay
/// readable; Curve plots y as-is. Output bytes depend only on the inputs.
std::string render_line_plot(const PlotSpec& spec, const std::vector<Series>& series);

/// Cell grid colored on a two-color linear ramp from #204a87 (minimum) to
/// #fce94f (maximum); values mapped affinely between the extremes. grid_x
/// indexes rows of values, grid_y the columns.
std::string render_heatmap(const PlotSpec& spec, const std::vector<double>& grid_x,
                           const std::vector<double>& grid_y, const Tensor& values);

}  // namespace afex::svg
