#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace lexisafe {

/// Full-precision text for CSV cells: shortest round-trip form, "nan" and
/// "inf" for non-finite values.
std::string csv_number(double x);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  void row(const std::vector<std::string>& cells);
  std::size_t columns() const { return n_columns_; }

 private:
  std::ofstream out_;
  std::size_t n_columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws DataError when the column is missing.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  /// Column parsed as numbers; empty cells become NaN.
  std::vector<double> numeric(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // NaN entries break the polyline
};

struct SvgPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
  std::optional<double> reference_line;  // horizontal dashed line
  bool log_x = false;
  bool log_y = false;
};

std::string render_line_plot(const SvgPlot& plot);

struct SvgBarGroup {
  std::string label;
  std::vector<double> values;  // one bar per entry of bar_labels
};

std::string render_bar_chart(const std::string& title, const std::vector<std::string>& bar_labels,
                             const std::vector<SvgBarGroup>& groups, std::optional<double> reference_line);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace lexisafe
