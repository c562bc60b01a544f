#include "sparseplan/svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace sparseplan::svg {

namespace {

constexpr double kPx = 8.0;  // pixels per meter in BEV views

struct View {
  GridSpec spec;
  double width() const { return (spec.y_max - spec.y_min) * kPx; }
  double height() const { return (spec.x_max - spec.x_min) * kPx; }
  double sx(const Vector2& p) const { return (spec.y_max - p.y()) * kPx; }
  double sy(const Vector2& p) const { return (spec.x_max - p.x()) * kPx; }
};

std::string header(double w, double h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      w, h, w, h);
}

std::string escape(const std::string& s) {
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

/// Dark blue to yellow ramp.
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(68 + t * (253 - 68)));
  const int g = static_cast<int>(std::lround(1 + t * (231 - 1)));
  const int b = static_cast<int>(std::lround(84 + t * (37 - 84)));
  return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
}

std::string polyline(const View& v, const Eigen::Ref<const Eigen::Matrix2Xd>& pts, const std::string& style,
                     bool from_origin = false) {
  std::string d;
  if (from_origin) d += fmt::format("{:.2f},{:.2f} ", v.sx(Vector2::Zero()), v.sy(Vector2::Zero()));
  for (Eigen::Index c = 0; c < pts.cols(); ++c) d += fmt::format("{:.2f},{:.2f} ", v.sx(pts.col(c)), v.sy(pts.col(c)));
  return fmt::format("<polyline points=\"{}\" fill=\"none\" {}/>\n", d, style);
}

std::string box(const View& v, const AnchorBox& b, const std::string& style) {
  const BasicObb<double> o{b.position(), b.yaw(), 0.5 * b.length(), 0.5 * b.width()};
  std::string d;
  for (const auto& c : o.corners()) d += fmt::format("{:.2f},{:.2f} ", v.sx(c), v.sy(c));
  return fmt::format("<polygon points=\"{}\" {}/>\n", d, style);
}

}  // namespace

std::string heatmap(const BevGrid& grid, const std::string& title) {
  const View v{grid.spec};
  const double lo = grid.values.size() ? grid.values.minCoeff() : 0.0;
  const double hi = grid.values.size() ? grid.values.maxCoeff() : 0.0;
  std::string out = header(v.width(), v.height());
  if (!title.empty()) out += fmt::format("<title>{}</title>\n", escape(title));
  const double c = grid.spec.cell * kPx;
  for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.values.cols(); ++j) {
      const double t = hi > lo ? (grid.values(i, j) - lo) / (hi - lo) : 0.0;
      const Vector2 corner(grid.spec.x_min + static_cast<double>(i + 1) * grid.spec.cell,
                           grid.spec.y_min + static_cast<double>(j + 1) * grid.spec.cell);
      out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                         v.sx(corner), v.sy(corner), c, c, ramp(t));
    }
  }
  out += "</svg>\n";
  return out;
}

std::string loss_curve(const std::vector<netlet::LossSample>& curve, const std::string& title) {
  constexpr double w = 640, h = 400, m = 40;
  std::string out = header(w, h);
  if (!title.empty()) out += fmt::format("<title>{}</title>\n", escape(title));
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", w, h);
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", m, h - m, w - m);
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", m, m, h - m);
  if (!curve.empty()) {
    double top = 0.0;
    for (const auto& s : curve) top = std::max({top, s.total, s.bce, s.l2});
    if (top <= 0.0) top = 1.0;
    const double last = std::max(1, curve.back().step);
    const auto series = [&](auto field, const char* color, const char* name) {
      std::string d;
      for (const auto& s : curve)
        d += fmt::format("{:.2f},{:.2f} ", m + (w - 2 * m) * s.step / last, (h - m) - (h - 2 * m) * field(s) / top);
      return fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"><title>{}</title></polyline>\n",
                         d, color, name);
    };
    out += series([](const netlet::LossSample& s) { return s.total; }, "black", "total");
    out += series([](const netlet::LossSample& s) { return s.bce; }, "#1f77b4", "bce");
    out += series([](const netlet::LossSample& s) { return s.l2; }, "#d62728", "l2");
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\">max {:.4g}</text>\n", m + 4, m - 6, top);
  }
  out += "</svg>\n";
  return out;
}

std::string scene(const Scenario& s, const RefineResult* result, const GridSpec& view) {
  const View v{view};
  std::string out = header(v.width(), v.height());
  out += fmt::format("<title>{}</title>\n", escape(s.name));
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#f4f4f4\"/>\n", v.width(), v.height());
  for (const MapPolyline& m : s.maps) {
    const char* style = m.kind == MapKind::Boundary ? "stroke=\"#333\" stroke-width=\"2\""
                        : m.kind == MapKind::Divider ? "stroke=\"#999\" stroke-dasharray=\"6,4\""
                                                     : "stroke=\"#6a9\" stroke-width=\"3\"";
    out += polyline(v, m.points, style);
  }
  std::unordered_set<int> selected;
  if (result && !result->stages.empty())
    for (const auto& q : result->stages.back().selection.agents.kept) selected.insert(q.id);
  for (const Agent& a : s.agents) {
    const bool hot = selected.contains(a.id);
    out += box(v, a.box, hot ? "fill=\"#f5a623\" stroke=\"#b35900\"" : "fill=\"#bbb\" stroke=\"#777\"");
  }
  if (result && !result->stages.empty()) {
    for (const auto& pred : result->stages.back().motion.agents) {
      std::vector<std::size_t> order(pred.modes.modes.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pred.modes.scores[static_cast<Eigen::Index>(a)] > pred.modes.scores[static_cast<Eigen::Index>(b)];
      });
      for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k)
        out += polyline(v, pred.modes.modes[order[k]].points, "stroke=\"#b35900\" stroke-opacity=\"0.6\"");
    }
    out += polyline(v, result->stages.front().line.polyline(), "stroke=\"#2ca02c\" stroke-dasharray=\"3,3\"");
  }
  out += polyline(v, s.ego_gt_future.points, "stroke=\"#555\" stroke-dasharray=\"2,2\"", true);
  out += box(v, s.ego_box, "fill=\"#1f77b4\" stroke=\"#0b3d66\"");
  if (result) out += polyline(v, result->plan.points, "stroke=\"#d62728\" stroke-width=\"2\"", true);
  out += "</svg>\n";
  return out;
}

}  // namespace sparseplan::svg
