#pragma once

#include <string>
#include <string_view>

#include "qpc/panel.hpp"

namespace qpc {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a whole field; throws DataError mentioning `where`.
double parse_double(std::string_view text, const std::string& where);

/// Long format: header id,t,y,x1,...,xK and one row per (id, t). Rows with
/// t = 0 carry y0 (their x fields may be empty). Units keep their order of
/// first appearance; periods are sorted. Throws DataError on malformed rows
/// or an unbalanced panel.
PanelData read_long_csv(const std::string& path);
void write_long_csv(const PanelData& data, const std::string& path);

/// Wide format: a directory with y.csv, x1.csv, x2.csv, ... and optionally
/// y0.csv. Each matrix file has header id,1,...,T and one row per unit;
/// y0.csv has header id,y0.
PanelData read_wide_dir(const std::string& dir);
void write_wide_dir(const PanelData& data, const std::string& dir);

}  // namespace qpc
