#pragma once

// IO helpers for the command-line front end: CSV emission with a fixed
// numeric format, sweep-grid parsing, and a minimal static SVG line chart.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace phaselim {

// 17 significant digits round-trips IEEE doubles exactly, which is what makes
// rerun outputs byte-comparable.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  using Cell = std::variant<double, long, std::string>;

  explicit CsvWriter(std::size_t columns) : columns_(columns) {}

  void header(const std::vector<std::string>& names) {
    if (names.size() != columns_) throw std::invalid_argument("csv header width mismatch");
    append_line(names);
  }

  void row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_) throw std::invalid_argument("csv row width mismatch");
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (const auto& c : cells) {
      if (std::holds_alternative<double>(c))
        text.push_back(format_number(std::get<double>(c)));
      else if (std::holds_alternative<long>(c))
        text.push_back(std::to_string(std::get<long>(c)));
      else
        text.push_back(std::get<std::string>(c));
    }
    append_line(text);
  }

  const std::string& str() const { return out_; }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    f << out_;
    if (!f) throw std::runtime_error("write failed: " + path);
  }

 private:
  void append_line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';  // LF only, independent of platform
  }

  std::size_t columns_;
  std::string out_;
};

// Grid specifications: "a,b,c" explicit values, "start:stop:count" linear,
// "log:start:stop:count" geometric. Values must come out ascending.
inline std::vector<double> parse_grid_spec(const std::string& spec) {
  std::vector<double> grid;
  auto parse_double = [](const std::string& s) {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("bad number in grid spec: " + s);
    return v;
  };
  std::string body = spec;
  bool log_scale = false;
  if (body.rfind("log:", 0) == 0) {
    log_scale = true;
    body = body.substr(4);
  }
  if (body.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw std::invalid_argument("range grid needs start:stop:count");
    double a = parse_double(parts[0]);
    double b = parse_double(parts[1]);
    long n = std::stol(parts[2]);
    if (n < 2) throw std::invalid_argument("range grid needs count >= 2");
    if (log_scale && !(a > 0.0 && b > 0.0))
      throw std::invalid_argument("log grid needs positive endpoints");
    for (long i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / (n - 1);
      grid.push_back(log_scale ? a * std::pow(b / a, t) : a + t * (b - a));
    }
  } else {
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) grid.push_back(parse_double(item));
    }
  }
  if (grid.empty()) throw std::invalid_argument("empty grid spec");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw std::invalid_argument("grid values must be strictly increasing");
  return grid;
}

// Minimal static line chart; enough for eyeballing sweep output without
// external plotting.
class SvgChart {
 public:
  SvgChart(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_series(std::string name, std::vector<std::pair<double, double>> points) {
    series_.push_back({std::move(name), std::move(points)});
  }

  void write(const std::string& path) const {
    const double w = 760, h = 480, ml = 70, mr = 160, mt = 40, mb = 50;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series_)
      for (auto [x, y] : s.points) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    if (!(xmax > xmin)) xmax = xmin + 1.0;
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
    static const char* colors[] = {"#1f6fb2", "#c23b22", "#2e8b57", "#8a5fbf",
                                   "#b8860b", "#3a3a3a"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << w - ml - mr
        << "\" height=\"" << h - mt - mb << "\" fill=\"none\" stroke=\"#888\"/>\n";
    svg << "<text x=\"" << ml << "\" y=\"" << mt - 14 << "\" font-size=\"15\">" << title_
        << "</text>\n";
    svg << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\">" << x_label_ << "</text>\n";
    svg << "<text x=\"16\" y=\"" << (mt + h - mb) / 2 << "\" transform=\"rotate(-90 16 "
        << (mt + h - mb) / 2 << ")\" text-anchor=\"middle\">" << y_label_ << "</text>\n";
    for (double t : {0.0, 0.5, 1.0}) {
      double xv = xmin + t * (xmax - xmin), yv = ymin + t * (ymax - ymin);
      svg << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 16
          << "\" text-anchor=\"middle\">" << short_number(xv) << "</text>\n";
      svg << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4
          << "\" text-anchor=\"end\">" << short_number(yv) << "</text>\n";
    }
    for (std::size_t i = 0; i < series_.size(); ++i) {
      const auto& s = series_[i];
      const char* color = colors[i % 6];
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (auto [x, y] : s.points) svg << px(x) << ',' << py(y) << ' ';
      svg << "\"/>\n";
      double ly = mt + 16 + 16 * static_cast<double>(i);
      svg << "<line x1=\"" << w - mr + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << w - mr + 30
          << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << w - mr + 36 << "\" y=\"" << ly << "\">" << s.name << "</text>\n";
    }
    svg << "</svg>\n";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open svg output: " + path);
    f << svg.str();
  }

 private:
  struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
  };

  static std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
  }

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
};

}  // namespace phaselim
