#include "lsm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "lsm/scaling.hpp"

namespace lsm::plot {

std::string_view kind_name(PlotKind k) {
  switch (k) {
    case PlotKind::LossCurve: return "loss-curve";
    case PlotKind::Scaling: return "scaling";
    case PlotKind::Pareto: return "pareto";
    case PlotKind::Confusion: return "confusion";
  }
  return "loss-curve";
}

PlotKind kind_from_name(std::string_view name) {
  for (auto k : {PlotKind::LossCurve, PlotKind::Scaling, PlotKind::Pareto, PlotKind::Confusion}) {
    if (kind_name(k) == name) return k;
  }
  throw InvalidArgument("unknown plot kind: " + std::string(name));
}

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 80, kRight = 150, kTop = 30, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double parse(const std::string& s, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw SchemaError("column " + column + " holds a non-numeric value: " + s);
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;

  double t(double v) const {
    const double a = log ? std::log10(v) : v;
    return (a - lo) / (hi - lo);
  }
};

Axis make_axis(const std::vector<double>& values, bool log) {
  Axis ax;
  ax.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (std::isnan(v) || (log && v <= 0)) continue;
    const double a = log ? std::log10(v) : v;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  if (!std::isfinite(lo)) throw SchemaError("no plottable values");
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  ax.lo = lo - pad;
  ax.hi = hi + pad;
  return ax;
}

class Canvas {
 public:
  Canvas() {
    out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kWidth) + "\" height=\"" + px(kHeight) +
            "\" viewBox=\"0 0 " + px(kWidth) + " " + px(kHeight) + "\">\n";
    out_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  void raw(const std::string& s) { out_ += s; }
  void text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12) {
    out_ += "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-family=\"sans-serif\" font-size=\"" +
            std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke = "black", double w = 1) {
    out_ += "<line x1=\"" + px(x1) + "\" y1=\"" + px(y1) + "\" x2=\"" + px(x2) + "\" y2=\"" + px(y2) +
            "\" stroke=\"" + stroke + "\" stroke-width=\"" + px(w) + "\"/>\n";
  }
  std::string finish() { return out_ + "</svg>\n"; }

 private:
  std::string out_;
};

double plot_x(const Axis& ax, double v) { return kLeft + ax.t(v) * (kWidth - kLeft - kRight); }
double plot_y(const Axis& ax, double v) { return kHeight - kBottom - ax.t(v) * (kHeight - kTop - kBottom); }

void axes(Canvas& cv, const Axis& xa, const Axis& ya, const std::string& xlabel, const std::string& ylabel) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  cv.line(x0, y0, x1, y0);
  cv.line(x0, y0, x0, y1);
  auto ticks = [](const Axis& a) {
    std::vector<double> out;
    if (a.log) {
      for (double e = std::ceil(a.lo); e <= a.hi; e += 1.0) out.push_back(std::pow(10.0, e));
      if (out.size() < 2) out = {std::pow(10.0, a.lo + 0.05 * (a.hi - a.lo) / 1.1), std::pow(10.0, a.hi - 0.05 * (a.hi - a.lo) / 1.1)};
    } else {
      for (int k = 0; k <= 4; ++k) out.push_back(a.lo + (a.hi - a.lo) * static_cast<double>(k) / 4.0);
    }
    return out;
  };
  for (double v : ticks(xa)) {
    const double x = plot_x(xa, v);
    cv.line(x, y0, x, y0 + 5);
    cv.text(x, y0 + 18, num(v));
  }
  for (double v : ticks(ya)) {
    const double y = plot_y(ya, v);
    cv.line(x0 - 5, y, x0, y);
    cv.text(x0 - 8, y + 4, num(v), "end");
  }
  cv.text((x0 + x1) / 2, kHeight - 15, xlabel);
  cv.raw("<text x=\"18\" y=\"" + px((y0 + y1) / 2) + "\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 18 " + px((y0 + y1) / 2) + ")\">" + ylabel + "</text>\n");
}

struct Series {
  std::string name;
  std::vector<double> x, y;
};

void draw_series(Canvas& cv, const std::vector<Series>& series, const Axis& xa, const Axis& ya, bool lines) {
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto* color = kPalette[s % std::size(kPalette)];
    cv.raw("<g class=\"series\" data-name=\"" + series[s].name + "\">\n");
    std::string path;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      const double x = series[s].x[i], y = series[s].y[i];
      if (std::isnan(x) || std::isnan(y) || (xa.log && x <= 0) || (ya.log && y <= 0)) continue;
      const auto pxs = px(plot_x(xa, x)), pys = px(plot_y(ya, y));
      path += (path.empty() ? "M" : " L") + pxs + " " + pys;
      if (!lines) cv.raw("<circle cx=\"" + pxs + "\" cy=\"" + pys + "\" r=\"3.5\" fill=\"" + color + "\"/>\n");
    }
    if (lines && !path.empty()) {
      cv.raw("<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n");
    }
    cv.raw("</g>\n");
    const double ly = kTop + 10 + 18 * static_cast<double>(s);
    cv.raw("<rect x=\"" + px(kWidth - kRight + 15) + "\" y=\"" + px(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
           color + "\"/>\n");
    cv.text(kWidth - kRight + 30, ly + 1, series[s].name, "start");
  }
}

std::vector<Series> group(const io::Table& t, const std::string& key, const std::string& xcol, const std::string& ycol) {
  const auto xi = t.column(xcol), yi = t.column(ycol);
  std::ptrdiff_t ki = -1;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == key) ki = static_cast<std::ptrdiff_t>(i);
  }
  std::vector<Series> out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : t.rows) {
    const std::string name = ki >= 0 ? row[static_cast<std::size_t>(ki)] : ycol;
    auto it = index.find(name);
    if (it == index.end()) {
      it = index.emplace(name, out.size()).first;
      out.push_back({name, {}, {}});
    }
    out[it->second].x.push_back(parse(row[xi], xcol));
    out[it->second].y.push_back(parse(row[yi], ycol));
  }
  return out;
}

std::string xy_plot(const std::vector<Series>& series, bool log, bool lines, const std::string& xl,
                    const std::string& yl, const Series* front = nullptr) {
  std::vector<double> xs, ys;
  for (const auto& s : series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  const auto xa = make_axis(xs, log), ya = make_axis(ys, log);
  Canvas cv;
  axes(cv, xa, ya, xl, yl);
  draw_series(cv, series, xa, ya, lines);
  if (front && !front->x.empty()) {
    std::string path;
    for (std::size_t i = 0; i < front->x.size(); ++i) {
      path += (i ? " L" : "M") + px(plot_x(xa, front->x[i])) + " " + px(plot_y(ya, front->y[i]));
    }
    cv.raw("<path class=\"front\" d=\"" + path + "\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n");
  }
  return cv.finish();
}

std::string confusion_plot(const io::Table& t) {
  const std::size_t k = t.header.size() - 1;
  if (k == 0 || t.rows.size() != k) throw SchemaError("confusion CSV must be square");
  std::vector<std::vector<double>> m(k, std::vector<double>(k));
  double mx = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      m[r][c] = parse(t.rows[r][c + 1], t.header[c + 1]);
      mx = std::max(mx, m[r][c]);
    }
  }
  Canvas cv;
  const double cell = std::min((kWidth - kLeft - 40) / static_cast<double>(k), (kHeight - kTop - kBottom) / static_cast<double>(k));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const double share = mx > 0 ? m[r][c] / mx : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - share)));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
      const double x = kLeft + cell * static_cast<double>(c), y = kTop + cell * static_cast<double>(r);
      cv.raw("<rect x=\"" + px(x) + "\" y=\"" + px(y) + "\" width=\"" + px(cell) + "\" height=\"" + px(cell) +
             "\" fill=\"" + fill + "\" stroke=\"white\"/>\n");
      cv.text(x + cell / 2, y + cell / 2 + 4, num(m[r][c]), "middle", 10);
    }
    cv.text(kLeft - 6, kTop + cell * (static_cast<double>(r) + 0.5) + 4, t.rows[r][0], "end", 10);
  }
  for (std::size_t c = 0; c < k; ++c) {
    cv.text(kLeft + cell * (static_cast<double>(c) + 0.5), kTop + cell * static_cast<double>(k) + 14, t.header[c + 1],
            "middle", 10);
  }
  cv.text(kLeft + cell * static_cast<double>(k) / 2, kTop + cell * static_cast<double>(k) + 34, "predicted");
  return cv.finish();
}

}  // namespace

std::string render(const io::Table& table, PlotKind kind) {
  if (table.rows.empty()) throw SchemaError("CSV has no data rows");
  switch (kind) {
    case PlotKind::LossCurve:
      return xy_plot(group(table, "split", "step", "loss"), false, true, "step", "loss");
    case PlotKind::Scaling:
      return xy_plot(group(table, "variant", "flops", "loss"), true, true, "training FLOPs", "eval loss");
    case PlotKind::Pareto: {
      auto all = group(table, "", "flops", "loss");
      all.front().name = "runs";
      Series front{"front", {}, {}};
      for (auto i : scaling::pareto_indices(all.front().x, all.front().y)) {
        front.x.push_back(all.front().x[i]);
        front.y.push_back(all.front().y[i]);
      }
      return xy_plot(all, true, false, "training FLOPs", "eval loss", &front);
    }
    case PlotKind::Confusion:
      return confusion_plot(table);
  }
  throw InvalidArgument("unknown plot kind");
}

}  // namespace lsm::plot
