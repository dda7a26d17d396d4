#pragma once

#include <string>

// Dependency-light plotting of report CSVs. Series files (columns t, x_true,
// x_hat[, residual]) render as a reconstruction overlay with a residual
// panel; any other CSV renders one polyline per numeric column against the
// first column. A .csv output path writes the parsed (and, for series,
// residual-augmented) table instead of drawing.

namespace lpsd::plot {

void render(const std::string& report_path, const std::string& out_path);

} // namespace lpsd::plot
