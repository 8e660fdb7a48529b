#include "lexisafe/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "lexisafe/errors.hpp"

namespace lexisafe {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace

std::string csv_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : out_(path, std::ios::binary), n_columns_(header.size()) {
  if (!out_) throw DataError(DataErrorKind::io, "cannot write " + path.string());
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != n_columns_) throw UsageError("csv row has the wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  out_.flush();
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError(DataErrorKind::bad_header, "csv has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<double> CsvTable::numeric(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const std::string& cell = r.at(c);
    if (cell.empty() || cell == "nan") {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    } else if (cell == "inf" || cell == "-inf") {
      out.push_back(cell[0] == '-' ? -std::numeric_limits<double>::infinity()
                                   : std::numeric_limits<double>::infinity());
    } else {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{}) throw DataError(DataErrorKind::bad_header, "non-numeric cell in column " + name);
      out.push_back(v);
    }
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::io, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(DataErrorKind::bad_header, path.string() + " is empty");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw DataError(DataErrorKind::length_disagreement, path.string() + ": ragged row");
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::string render_line_plot(const SvgPlot& plot) {
  constexpr double W = 720, H = 420, L = 70, R = 170, T = 40, B = 55;
  auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
  auto ty = [&](double y) { return plot.log_y ? std::log10(y) : y; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double x = tx(s.x[i]), y = ty(s.y[i]);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (plot.reference_line) {
    y0 = std::min(y0, ty(*plot.reference_line));
    y1 = std::max(y1, ty(*plot.reference_line));
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(plot.title)
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = L + (W - L - R) * k / 4.0, sy = H - B - (H - T - B) * k / 4.0;
    os << "<text x=\"" << sx << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
       << fmt(plot.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">"
       << fmt(plot.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << escape_xml(plot.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << escape_xml(plot.y_label) << "</text>\n";
  if (plot.reference_line) {
    const double y = py(*plot.reference_line);
    os << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << W - R << "\" y2=\"" << y
       << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    auto flush = [&] {
      if (!points.empty()) {
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points
           << "\"/>\n";
      }
      points.clear();
    };
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(tx(s.x[i])) || !std::isfinite(ty(s.y[i]))) {
        flush();
        continue;
      }
      points += fmt(px(s.x[i]), 6) + "," + fmt(py(s.y[i]), 6) + " ";
    }
    flush();
    const double ly = T + 10 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << escape_xml(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_bar_chart(const std::string& title, const std::vector<std::string>& bar_labels,
                             const std::vector<SvgBarGroup>& groups, std::optional<double> reference_line) {
  constexpr double H = 420, L = 70, R = 170, T = 40, B = 70;
  const double group_w = 40.0 + 22.0 * static_cast<double>(bar_labels.size());
  const double W = L + R + group_w * static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  double y1 = reference_line.value_or(0.0);
  for (const auto& g : groups) {
    for (double v : g.values) {
      if (std::isfinite(v)) y1 = std::max(y1, v);
    }
  }
  y1 = y1 > 0 ? 1.1 * y1 : 1.0;
  auto py = [&](double y) { return H - B - y / y1 * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title)
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = y1 * k / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = L + group_w * static_cast<double>(g) + 20.0;
    for (std::size_t b = 0; b < groups[g].values.size() && b < bar_labels.size(); ++b) {
      const double v = std::isfinite(groups[g].values[b]) ? std::max(groups[g].values[b], 0.0) : 0.0;
      os << "<rect x=\"" << gx + 22.0 * static_cast<double>(b) << "\" y=\"" << py(v) << "\" width=\"20\" height=\""
         << H - B - py(v) << "\" fill=\"" << kPalette[b % std::size(kPalette)] << "\"/>\n";
    }
    os << "<text x=\"" << gx + 11.0 * static_cast<double>(bar_labels.size()) << "\" y=\"" << H - B + 16
       << "\" text-anchor=\"middle\">" << escape_xml(groups[g].label) << "</text>\n";
  }
  if (reference_line) {
    os << "<line x1=\"" << L << "\" y1=\"" << py(*reference_line) << "\" x2=\"" << W - R << "\" y2=\""
       << py(*reference_line) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (std::size_t b = 0; b < bar_labels.size(); ++b) {
    const double ly = T + 10 + 18.0 * static_cast<double>(b);
    os << "<rect x=\"" << W - R + 12 << "\" y=\"" << ly - 6 << "\" width=\"12\" height=\"12\" fill=\""
       << kPalette[b % std::size(kPalette)] << "\"/>\n";
    os << "<text x=\"" << W - R + 30 << "\" y=\"" << ly + 4 << "\">" << escape_xml(bar_labels[b]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw DataError(DataErrorKind::io, "write failed for " + path.string());
}

}  // namespace lexisafe
