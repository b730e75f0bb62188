#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>
#include <vector>

#include "hyperking/cli.hpp"
#include "hyperking/tensor.hpp"

namespace hyperking::cli {
namespace {

struct Row {
  double epoch, d_real, d_fake, loss_g, loss_d;
};

std::vector<Row> parse_curves(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,phase,", 0) != 0) throw Error("curves: missing CSV header");
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row r{};
    char phase = 0;
    if (std::sscanf(line.c_str(), "%lf,%c,%lf,%lf,%lf,%lf", &r.epoch, &phase, &r.d_real, &r.d_fake, &r.loss_g,
                    &r.loss_d) != 6) {
      throw Error("curves: malformed line '" + line + "'");
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw Error("curves: no data rows");
  return rows;
}

void panel(std::ostringstream& svg, const std::vector<Row>& rows, double top, const char* title,
           const std::vector<std::pair<double Row::*, const char*>>& series) {
  constexpr double left = 60, width = 640, height = 200;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : rows)
    for (const auto& s : series) {
      lo = std::min(lo, r.*(s.first));
      hi = std::max(hi, r.*(s.first));
    }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double e0 = rows.front().epoch, e1 = std::max(rows.back().epoch, e0 + 1.0);
  auto x = [&](double e) { return left + (e - e0) / (e1 - e0) * width; };
  auto y = [&](double v) { return top + height - (v - lo) / (hi - lo) * height; };

  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#888\"/>\n"
                "<text x=\"%g\" y=\"%g\" font-size=\"13\">%s</text>\n"
                "<text x=\"%g\" y=\"%g\" font-size=\"10\" text-anchor=\"end\">%.4g</text>\n"
                "<text x=\"%g\" y=\"%g\" font-size=\"10\" text-anchor=\"end\">%.4g</text>\n",
                left, top, width, height, left, top - 6, title, left - 4, top + 10, hi, left - 4, top + height, lo);
  svg << buf;
  int k = 0;
  for (const auto& [member, name] : series) {
    svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << (k == 0 ? "#1f77b4" : "#d62728") << "\" points=\"";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x(r.epoch), y(r.*member));
      svg << buf;
    }
    svg << "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"11\" fill=\"%s\">%s</text>\n",
                  left + width - 120.0 + 60.0 * k, top - 6, k == 0 ? "#1f77b4" : "#d62728", name);
    svg << buf;
    ++k;
  }
}

}  // namespace

std::string curves_svg(const std::string& csv_text) {
  const auto rows = parse_curves(csv_text);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"520\" font-family=\"sans-serif\">\n";
  panel(svg, rows, 30, "mean discriminator output", {{&Row::d_real, "D(real)"}, {&Row::d_fake, "D(fake)"}});
  panel(svg, rows, 290, "losses", {{&Row::loss_g, "loss_g"}, {&Row::loss_d, "loss_d"}});
  svg << "<text x=\"380\" y=\"510\" font-size=\"11\" text-anchor=\"middle\">epoch</text>\n</svg>\n";
  return svg.str();
}

}  // namespace hyperking::cli
