#include "sur/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "sur/error.hpp"

namespace sur {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string text(double x, double y, const std::string& s, const char* anchor = "start", int size = 12) {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
           "\" text-anchor=\"" + anchor + "\" font-family=\"sans-serif\">" + escape(s) + "</text>\n";
}

std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

std::string loss_curve_svg(const std::vector<TrainRecord>& log) {
    if (log.empty()) fail(ErrorKind::EmptyInput, "training log has no records");
    struct Series {
        const char* name;
        std::function<double(const TrainRecord&)> get;
        const char* color;
    };
    const std::vector<Series> series = {
        {"l_total", [](const TrainRecord& r) { return r.l_total; }, "#1f77b4"},
        {"l_simple", [](const TrainRecord& r) { return r.l_simple; }, "#2ca02c"},
        {"l_llm", [](const TrainRecord& r) { return r.l_llm; }, "#d62728"},
        {"l_cp", [](const TrainRecord& r) { return r.l_cp; }, "#9467bd"},
    };
    const double width = 640, panel_h = 140, left = 70, right = 20, top = 30, gap = 30;
    const double height = top + series.size() * (panel_h + gap);
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << text(width / 2, 18, "Loss value during training", "middle", 14);
    const double first = static_cast<double>(log.front().step), last = static_cast<double>(log.back().step);
    const double span_x = std::max(last - first, 1.0);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double y0 = top + s * (panel_h + gap);
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& r : log) {
            const double v = series[s].get(r);
            if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
        }
        if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-300) hi = lo + 1.0;
        svg << "<rect x=\"" << num(left) << "\" y=\"" << num(y0) << "\" width=\"" << num(width - left - right)
            << "\" height=\"" << num(panel_h) << "\" fill=\"none\" stroke=\"#888\"/>\n";
        svg << text(left + 6, y0 + 14, series[s].name);
        svg << text(left - 4, y0 + 10, short_number(hi), "end", 10);
        svg << text(left - 4, y0 + panel_h, short_number(lo), "end", 10);
        svg << "<polyline fill=\"none\" stroke=\"" << series[s].color << "\" stroke-width=\"1\" points=\"";
        for (const auto& r : log) {
            const double v = series[s].get(r);
            if (!std::isfinite(v)) continue;
            const double x = left + (static_cast<double>(r.step) - first) / span_x * (width - left - right);
            const double y = y0 + panel_h - (v - lo) / (hi - lo) * panel_h;
            svg << num(x) << "," << num(y) << " ";
        }
        svg << "\"/>\n";
    }
    svg << text(width / 2, height - 6, "step " + std::to_string(log.front().step) + " to " +
                                           std::to_string(log.back().step), "middle", 11);
    svg << "</svg>\n";
    return svg.str();
}

std::string report_svg(const Json& report) {
    try {
        const Json& acc = report.at("accuracy");
        const Json& base = acc.at("baseline");
        const Json& adapt = acc.at("adapter");
        std::vector<std::string> cats;
        for (auto it = base.begin(); it != base.end(); ++it) cats.push_back(it.key());
        const double width = 560, height = 320, left = 50, bottom = 260, top = 40, bar = 36;
        std::ostringstream svg;
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
            << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
        svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        svg << text(width / 2, 20, "Semantic accuracy (%)", "middle", 14);
        svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(width - 20) << "\" y2=\""
            << num(bottom) << "\" stroke=\"#444\"/>\n";
        for (int tick = 0; tick <= 100; tick += 25) {
            const double y = bottom - tick / 100.0 * (bottom - top);
            svg << text(left - 6, y + 4, std::to_string(tick), "end", 10);
        }
        const double slot = (width - left - 40) / static_cast<double>(std::max<std::size_t>(cats.size(), 1));
        for (std::size_t i = 0; i < cats.size(); ++i) {
            const double x = left + 20 + i * slot;
            const double pb = base.at(cats[i]).at("percent").get<double>();
            const double pa = adapt.at(cats[i]).at("percent").get<double>();
            for (int m = 0; m < 2; ++m) {
                const double p = m == 0 ? pb : pa;
                const double h = p / 100.0 * (bottom - top);
                svg << "<rect x=\"" << num(x + m * bar) << "\" y=\"" << num(bottom - h) << "\" width=\"" << num(bar - 4)
                    << "\" height=\"" << num(h) << "\" fill=\"" << (m == 0 ? "#999999" : "#1f77b4") << "\"/>\n";
                svg << text(x + m * bar + (bar - 4) / 2, bottom - h - 4, num(p), "middle", 10);
            }
            svg << text(x + bar, bottom + 16, cats[i], "middle");
        }
        const Json& clip = report.at("clip_score");
        svg << text(left, bottom + 40,
                    "CLIP score  baseline " + short_number(clip.at("baseline").get<double>()) + "  adapter " +
                        short_number(clip.at("adapter").get<double>()));
        svg << "<rect x=\"" << num(width - 150) << "\" y=\"30\" width=\"10\" height=\"10\" fill=\"#999999\"/>\n";
        svg << text(width - 135, 39, "baseline", "start", 11);
        svg << "<rect x=\"" << num(width - 150) << "\" y=\"46\" width=\"10\" height=\"10\" fill=\"#1f77b4\"/>\n";
        svg << text(width - 135, 55, "adapter", "start", 11);
        svg << "</svg>\n";
        return svg.str();
    } catch (const Json::exception& e) {
        fail(ErrorKind::Format, std::string("not an evaluation report: ") + e.what());
    }
}

}  // namespace sur
