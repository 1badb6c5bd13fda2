#pragma once

#include "ccsim/common.hpp"
#include "ccsim/solvers.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace ccsim {

struct SummaryRecord {
  std::string scenario;
  std::string solver;
  double sweep_value = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_residual = 0.0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot open output file " + path);
  return out;
}

}  // namespace detail

inline void write_trace_csv(const std::string& path, const ConvergenceTrace& trace) {
  std::ofstream out = detail::open_out(path);
  out << "iteration,energy,grad_norm,residual,step_norm,alpha\n";
  for (const TraceRow& r : trace.rows)
    out << r.iteration << ',' << format_double(r.energy) << ',' << format_double(r.grad_norm) << ','
        << format_double(r.residual) << ',' << format_double(r.step_norm) << ','
        << format_double(r.alpha) << '\n';
}

/// Pure matrix, no header: one row per executed iteration, one column per
/// free vertex, values are displacement magnitude since the step began.
inline void write_heatmap_csv(const std::string& path, const std::vector<Vec>& rows) {
  std::ofstream out = detail::open_out(path);
  for (const Vec& row : rows) {
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << format_double(row[j]);
    }
    out << '\n';
  }
}

inline void write_heatmap_csv(const std::string& path, const ConvergenceTrace& trace) {
  write_heatmap_csv(path, trace.heatmap);
}

inline void write_summary_csv(const std::string& path, const std::vector<SummaryRecord>& records) {
  std::ofstream out = detail::open_out(path);
  out << "scenario,solver,sweep_value,iterations,converged,final_residual,wall_ms,seed\n";
  for (const SummaryRecord& r : records)
    out << r.scenario << ',' << r.solver << ',' << format_double(r.sweep_value) << ',' << r.iterations
        << ',' << (r.converged ? "true" : "false") << ',' << format_double(r.final_residual) << ','
        << format_double(r.wall_ms) << ',' << r.seed << '\n';
}

inline nlohmann::json summary_to_json(const std::vector<SummaryRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const SummaryRecord& r : records) {
    arr.push_back({{"scenario", r.scenario},
                   {"solver", r.solver},
                   {"sweep_value", r.sweep_value},
                   {"iterations", r.iterations},
                   {"converged", r.converged},
                   {"final_residual", r.final_residual},
                   {"wall_ms", r.wall_ms},
                   {"seed", r.seed}});
  }
  return arr;
}

inline void write_summary_json(const std::string& path, const std::vector<SummaryRecord>& records) {
  std::ofstream out = detail::open_out(path);
  out << summary_to_json(records).dump(2) << '\n';
}

/// A named series for the SVG plot; y values are plotted on a log axis.
struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal semilog-y line chart, enough to eyeball convergence behavior.
inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           const std::vector<PlotSeries>& series) {
  constexpr int width = 720, height = 480;
  constexpr int ml = 70, mr = 140, mt = 40, mb = 50;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;

  double x_min = 0, x_max = 1, ly_min = 0, ly_max = 1;
  bool any = false;
  for (const PlotSeries& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!(s.y[k] > 0) || !std::isfinite(s.y[k]) || !std::isfinite(s.x[k])) continue;
      const double ly = std::log10(s.y[k]);
      if (!any) {
        x_min = x_max = s.x[k];
        ly_min = ly_max = ly;
        any = true;
      } else {
        x_min = std::min(x_min, s.x[k]);
        x_max = std::max(x_max, s.x[k]);
        ly_min = std::min(ly_min, ly);
        ly_max = std::max(ly_max, ly);
      }
    }
  if (!any) {
    x_min = 0;
    x_max = 1;
    ly_min = -1;
    ly_max = 1;
  }
  if (x_max - x_min < 1e-12) x_max = x_min + 1;
  if (ly_max - ly_min < 1e-12) ly_max = ly_min + 1;

  auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return mt + plot_h - (std::log10(y) - ly_min) / (ly_max - ly_min) * plot_h; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

  std::ofstream out = detail::open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";

  // frame and log-decade grid
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(std::ceil(ly_min)); d <= static_cast<int>(std::floor(ly_max)); ++d) {
    const double y = mt + plot_h - (d - ly_min) / (ly_max - ly_min) * plot_h;
    out << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + plot_w << "\" y2=\"" << y
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << d
        << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double xv = x_min + (x_max - x_min) * t / 4.0;
    const double x = px(xv);
    out << "<text x=\"" << x << "\" y=\"" << mt + plot_h + 18 << "\" text-anchor=\"middle\">"
        << format_double(xv) << "</text>\n";
  }
  out << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << mt + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << mt + plot_h / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = palette[si % (sizeof(palette) / sizeof(palette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!(s.y[k] > 0) || !std::isfinite(s.y[k])) continue;
      out << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
    }
    out << "\"/>\n";
    const double ly0 = mt + 14 + 16 * static_cast<double>(si);
    out << "<line x1=\"" << ml + plot_w + 8 << "\" y1=\"" << ly0 << "\" x2=\"" << ml + plot_w + 28
        << "\" y2=\"" << ly0 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + plot_w + 32 << "\" y=\"" << ly0 + 4 << "\">" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace ccsim
