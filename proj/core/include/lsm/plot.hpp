#pragma once

#include <string>
#include <string_view>

#include "lsm/io.hpp"

namespace lsm::plot {

enum class PlotKind { LossCurve, Scaling, Pareto, Confusion };

std::string_view kind_name(PlotKind k);
PlotKind kind_from_name(std::string_view name);

/// Renders an SVG document from a CSV table. Expected columns:
///   loss-curve: step, loss, and optionally split (one series per split)
///   scaling:    variant, flops, loss (log-log, one series per variant)
///   pareto:     flops, loss (log-log, front drawn over all points)
///   confusion:  a label column followed by one count column per class
/// Throws SchemaError for tables without rows or without the needed columns.
std::string render(const io::Table& table, PlotKind kind);

}  // namespace lsm::plot
