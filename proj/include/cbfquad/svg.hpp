#pragma once

// Static SVG summaries of a run: an isometric view of the flown path inside
// the position box, and nominal vs filtered input traces.

#include "cbfquad/log_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace cbfquad {

namespace detail {

struct Point2
{
    double x = 0.0;
    double y = 0.0;
};

inline Point2 isometric(const Vec3& p)
{
    const double c = std::cos(std::numbers::pi / 6.0);
    const double s = std::sin(std::numbers::pi / 6.0);
    return {(p.x() - p.y()) * c, -(p.z() + (p.x() + p.y()) * s)};
}

struct Frame
{
    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    double left = 0.0, top = 0.0, width = 1.0, height = 1.0;

    void include(Point2 p)
    {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }

    Point2 map(Point2 p) const
    {
        const double sx = max_x > min_x ? width / (max_x - min_x) : 1.0;
        const double sy = max_y > min_y ? height / (max_y - min_y) : 1.0;
        return {left + (p.x - min_x) * sx, top + (p.y - min_y) * sy};
    }
};

inline std::string polyline(const std::vector<Point2>& pts, const Frame& f, const char* colour, double width = 1.2)
{
    std::string s = "<polyline fill=\"none\" stroke=\"";
    s += colour;
    s += "\" stroke-width=\"" + format_number(width) + "\" points=\"";
    char buf[64];
    for (const auto& p : pts) {
        const Point2 m = f.map(p);
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", m.x, m.y);
        s += buf;
    }
    s += "\"/>\n";
    return s;
}

inline std::string text(double x, double y, const std::string& body, int size = 12, const char* anchor = "start")
{
    char buf[128];
    std::snprintf(buf, sizeof(buf), "<text x=\"%.1f\" y=\"%.1f\" font-size=\"%d\" font-family=\"sans-serif\" text-anchor=\"%s\">",
                  x, y, size, anchor);
    return std::string(buf) + body + "</text>\n";
}

// Decimates long logs so the files stay small.
template <typename F>
std::vector<Point2> sample(const std::vector<LogRecord>& log, F&& fn, std::size_t max_points = 4000)
{
    std::vector<Point2> pts;
    if (log.empty()) return pts;
    const std::size_t stride = std::max<std::size_t>(1, log.size() / max_points);
    for (std::size_t i = 0; i < log.size(); i += stride) pts.push_back(fn(log[i]));
    if ((log.size() - 1) % stride != 0) pts.push_back(fn(log.back()));
    return pts;
}

}  // namespace detail

inline void write_path_svg(std::ostream& os, const std::vector<LogRecord>& log, const CbfParams& cbf,
                           const std::string& title = "path")
{
    using detail::Point2;
    constexpr double W = 640.0, H = 640.0, margin = 40.0;

    std::array<Vec3, 8> corners;
    for (int i = 0; i < 8; ++i)
        corners[i] = Vec3(i & 1 ? cbf.r_max.x() : cbf.r_min.x(), i & 2 ? cbf.r_max.y() : cbf.r_min.y(),
                          i & 4 ? cbf.r_max.z() : cbf.r_min.z());

    detail::Frame f;
    const Point2 c0 = detail::isometric(corners[0]);
    f.min_x = f.max_x = c0.x;
    f.min_y = f.max_y = c0.y;
    for (const auto& c : corners) f.include(detail::isometric(c));
    const auto path = detail::sample(log, [](const LogRecord& r) { return detail::isometric(r.state.position); });
    for (const auto& p : path) f.include(p);
    // Equal scale on both axes.
    const double span = std::max(f.max_x - f.min_x, f.max_y - f.min_y);
    const double cx = 0.5 * (f.min_x + f.max_x), cy = 0.5 * (f.min_y + f.max_y);
    f.min_x = cx - span / 2;
    f.max_x = cx + span / 2;
    f.min_y = cy - span / 2;
    f.max_y = cy + span / 2;
    f.left = margin;
    f.top = margin;
    f.width = W - 2 * margin;
    f.height = H - 2 * margin;

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << detail::text(W / 2, 24, title, 14, "middle");
    for (int a = 0; a < 8; ++a)
        for (int bit : {1, 2, 4})
            if (!(a & bit))
                os << detail::polyline({detail::isometric(corners[a]), detail::isometric(corners[a | bit])}, f,
                                       "#888888", 0.8);
    os << detail::polyline(path, f, "#1f5fbf", 1.4);
    if (!path.empty()) {
        const Point2 s = f.map(path.front()), e = f.map(path.back());
        char buf[160];
        std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#2a9d3a\"/>\n", s.x, s.y);
        os << buf;
        std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#c0392b\"/>\n", e.x, e.y);
        os << buf;
    }
    os << "</svg>\n";
}

inline void write_inputs_svg(std::ostream& os, const std::vector<LogRecord>& log, const std::string& title = "inputs")
{
    using detail::Point2;
    constexpr double W = 900.0, panel_h = 170.0, margin = 50.0, gap = 30.0;
    const double H = 40.0 + 4 * (panel_h + gap);
    static const char* labels[4] = {"thrust [N]", "tau_x [N m]", "tau_y [N m]", "tau_z [N m]"};

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << detail::text(W / 2, 22, title + " (grey: nominal, blue: filtered)", 14, "middle");

    for (int c = 0; c < 4; ++c) {
        auto nominal = detail::sample(log, [c](const LogRecord& r) { return Point2{r.t, -r.nominal.as_vector()[c]}; });
        auto safe = detail::sample(log, [c](const LogRecord& r) { return Point2{r.t, -r.safe.as_vector()[c]}; });
        detail::Frame f;
        if (!nominal.empty()) {
            f.min_x = nominal.front().x;
            f.max_x = nominal.back().x;
            f.min_y = f.max_y = nominal.front().y;
        }
        for (const auto& p : nominal) f.include(p);
        for (const auto& p : safe) f.include(p);
        if (f.max_y - f.min_y < 1e-9) {
            f.min_y -= 0.5;
            f.max_y += 0.5;
        }
        f.left = margin;
        f.top = 40.0 + c * (panel_h + gap);
        f.width = W - 2 * margin;
        f.height = panel_h;

        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#cccccc\"/>\n",
                      f.left, f.top, f.width, f.height);
        os << buf;
        os << detail::text(f.left + 4, f.top + 14, labels[c], 11);
        os << detail::text(f.left - 4, f.top + 10, format_number(-f.min_y), 9, "end");
        os << detail::text(f.left - 4, f.top + f.height, format_number(-f.max_y), 9, "end");
        os << detail::text(f.left + f.width, f.top + f.height + 12, format_number(f.max_x) + " s", 9, "end");
        os << detail::polyline(nominal, f, "#999999", 1.0);
        os << detail::polyline(safe, f, "#1f5fbf", 1.2);
    }
    os << "</svg>\n";
}

}  // namespace cbfquad
