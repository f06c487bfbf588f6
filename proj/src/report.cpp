#include "actbench/report.hpp"

#include "actbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace actbench {

namespace {

void check_point(const ParetoPoint& p) {
  if (!std::isfinite(p.execution_time) || !std::isfinite(p.success_rate))
    throw std::invalid_argument("pareto point '" + p.label + "' has non-finite values");
  if (p.success_rate < 0.0 || p.success_rate > 100.0)
    throw std::invalid_argument("pareto point '" + p.label +
                                "' success rate outside [0, 100]");
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<bool> pareto_frontier(const std::vector<ParetoPoint>& points) {
  for (const ParetoPoint& p : points) check_point(p);
  const std::size_t n = points.size();
  std::vector<bool> flags(n, false);
  if (n == 0) return flags;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].execution_time != points[b].execution_time)
      return points[a].execution_time < points[b].execution_time;
    return points[a].success_rate > points[b].success_rate;
  });

  // Sweep time groups in ascending order; a point survives iff it tops its
  // own time group and strictly beats everything faster.
  double best_faster = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < n) {
    const double t = points[order[i]].execution_time;
    const double group_max = points[order[i]].success_rate;
    std::size_t j = i;
    while (j < n && points[order[j]].execution_time == t) {
      const double s = points[order[j]].success_rate;
      flags[order[j]] = s == group_max && s > best_faster;
      ++j;
    }
    best_faster = std::max(best_faster, group_max);
    i = j;
  }
  return flags;
}

void flag_pareto(AblationReport& report) {
  std::vector<ParetoPoint> points;
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    AblationRow& row = report.rows[i];
    row.pareto = false;
    if (row.failed) continue;
    points.push_back({row.policy, row.exec_time_min, row.success_rate_pct});
    live.push_back(i);
  }
  const std::vector<bool> flags = pareto_frontier(points);
  for (std::size_t k = 0; k < live.size(); ++k) report.rows[live[k]].pareto = flags[k];
}

std::string report_csv_text(const AblationReport& report) {
  std::string out = kReportCsvHeader;
  out += "\n";
  for (const AblationRow& r : report.rows) {
    if (r.failed) continue;
    out += r.policy;
    out += "," + std::to_string(r.state_dim);
    out += "," + fmt("%.3f", r.train_wall_s);
    out += "," + std::to_string(r.trials);
    out += "," + fmt("%.3f", r.exec_time_min);
    out += "," + fmt("%.3f", r.success_rate_pct);
    out += r.pareto ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

std::string pareto_svg_text(const AblationReport& report) {
  std::vector<const AblationRow*> rows;
  for (const AblationRow& r : report.rows)
    if (!r.failed) rows.push_back(&r);

  const double kW = 640, kH = 440;
  const double kL = 70, kR = 610, kT = 40, kB = 380;

  double tmin = std::numeric_limits<double>::infinity();
  double tmax = -tmin;
  for (const AblationRow* r : rows) {
    tmin = std::min(tmin, r->exec_time_min);
    tmax = std::max(tmax, r->exec_time_min);
  }
  if (rows.empty()) {
    tmin = 0.0;
    tmax = 1.0;
  }
  double pad = (tmax - tmin) * 0.08;
  if (pad <= 0.0) pad = std::max(0.1, std::abs(tmax) * 0.1);
  tmin -= pad;
  tmax += pad;

  auto sx = [&](double t) { return kL + (t - tmin) / (tmax - tmin) * (kR - kL); };
  auto sy = [&](double s) { return kB - s / 100.0 * (kB - kT); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\""
      << kH << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  svg << "  <rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"#ffffff\"/>\n";
  svg << "  <text x=\"" << (kW / 2)
      << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
         "execution time (min) vs success rate (%)</text>\n";

  // grid and ticks
  for (int i = 0; i <= 4; ++i) {
    const double s = 25.0 * i;
    const double y = sy(s);
    svg << "  <line x1=\"" << kL << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << kR
        << "\" y2=\"" << fmt("%.2f", y) << "\" stroke=\"#dddddd\"/>\n";
    svg << "  <text x=\"" << (kL - 8) << "\" y=\"" << fmt("%.2f", y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt("%.0f", s) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double t = tmin + (tmax - tmin) * i / 4.0;
    const double x = sx(t);
    svg << "  <line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << kB << "\" x2=\""
        << fmt("%.2f", x) << "\" y2=\"" << (kB + 6) << "\" stroke=\"#333333\"/>\n";
    svg << "  <text x=\"" << fmt("%.2f", x) << "\" y=\"" << (kB + 22)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt("%.2f", t) << "</text>\n";
  }
  svg << "  <line x1=\"" << kL << "\" y1=\"" << kB << "\" x2=\"" << kR << "\" y2=\"" << kB
      << "\" stroke=\"#333333\"/>\n";
  svg << "  <line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kB
      << "\" stroke=\"#333333\"/>\n";
  svg << "  <text x=\"" << (kL + (kR - kL) / 2) << "\" y=\"" << (kB + 42)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
         "execution time (min)</text>\n";
  svg << "  <text x=\"20\" y=\"" << (kT + (kB - kT) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\""
         " transform=\"rotate(-90 20 "
      << (kT + (kB - kT) / 2) << ")\">success rate (%)</text>\n";

  // frontier guide line beneath the markers
  std::vector<const AblationRow*> frontier;
  for (const AblationRow* r : rows)
    if (r->pareto) frontier.push_back(r);
  std::sort(frontier.begin(), frontier.end(), [](const AblationRow* a, const AblationRow* b) {
    return a->exec_time_min < b->exec_time_min;
  });
  if (frontier.size() >= 2) {
    svg << "  <polyline fill=\"none\" stroke=\"#c0392b\" stroke-dasharray=\"4 3\" points=\"";
    for (const AblationRow* r : frontier)
      svg << fmt("%.2f", sx(r->exec_time_min)) << "," << fmt("%.2f", sy(r->success_rate_pct))
          << " ";
    svg << "\"/>\n";
  }

  // exactly one circle marker per row
  for (const AblationRow* r : rows) {
    const double x = sx(r->exec_time_min);
    const double y = sy(r->success_rate_pct);
    svg << "  <circle cx=\"" << fmt("%.2f", x) << "\" cy=\"" << fmt("%.2f", y)
        << "\" r=\"5\" fill=\"" << (r->pareto ? "#c0392b" : "#2c6fad")
        << "\" stroke=\"#222222\"/>\n";
    svg << "  <text x=\"" << fmt("%.2f", x + 8) << "\" y=\"" << fmt("%.2f", y - 7)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(r->policy)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_report(const AblationReport& report, const std::filesystem::path& out_dir) {
  bool any = false;
  for (const AblationRow& r : report.rows) any = any || !r.failed;
  if (!any) throw std::invalid_argument("report has no successful rows to emit");
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "report.csv", report_csv_text(report));
  write_file_atomic(out_dir / "pareto.svg", pareto_svg_text(report));
}

AblationReport read_report_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw NotFoundError("report csv not found: " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader)
    throw FormatError("report csv has an unexpected header");
  AblationReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 7) throw FormatError("report csv row with wrong column count");
    AblationRow row;
    try {
      row.policy = f[0];
      row.state_dim = std::stoi(f[1]);
      row.train_wall_s = std::stod(f[2]);
      row.trials = std::stoi(f[3]);
      row.exec_time_min = std::stod(f[4]);
      row.success_rate_pct = std::stod(f[5]);
      if (f[6] != "0" && f[6] != "1") throw FormatError("pareto flag must be 0 or 1");
      row.pareto = f[6] == "1";
    } catch (const std::invalid_argument&) {
      throw FormatError("report csv row with a malformed number: " + line);
    } catch (const std::out_of_range&) {
      throw FormatError("report csv row with an out-of-range number: " + line);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace actbench
