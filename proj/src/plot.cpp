#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "risshare/errors.hpp"
#include "risshare/harness.hpp"

namespace risshare {

using nlohmann::json;

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 30, kBottom = 50;
const char *const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool dashed = false;
};

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    }
};

std::vector<double> nice_ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

std::string num(double v, int digits = 6) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string escape(const std::string &s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

class Canvas {
public:
    Canvas(Range x, Range y, bool log_x, std::string xlabel, std::string ylabel)
        : x_(x), y_(y), log_x_(log_x), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {
        x_.settle();
        y_.settle();
        const double pad = 0.05 * (y_.hi - y_.lo);
        y_.lo -= pad;
        y_.hi += pad;
    }

    double px(double x) const {
        const double lo = log_x_ ? std::log10(x_.lo) : x_.lo, hi = log_x_ ? std::log10(x_.hi) : x_.hi;
        const double v = log_x_ ? std::log10(x) : x;
        const double span = hi - lo < 1e-12 ? 1.0 : hi - lo;
        return kLeft + (v - lo) / span * (kWidth - kLeft - kRight);
    }
    double py(double y) const { return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

    void axes() {
        body_ << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
              << "\" height=\"" << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"#333\"/>\n";
        for (double t : nice_ticks(y_.lo, y_.hi)) {
            body_ << "<line x1=\"" << kLeft - 4 << "\" x2=\"" << kLeft << "\" y1=\"" << py(t) << "\" y2=\"" << py(t)
                  << "\" stroke=\"#333\"/><text x=\"" << kLeft - 7 << "\" y=\"" << py(t) + 4
                  << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
        }
        std::vector<double> xt;
        if (log_x_) {
            for (double d = std::floor(std::log10(x_.lo)); d <= std::ceil(std::log10(x_.hi)); d += 1.0) {
                const double v = std::pow(10.0, d);
                if (v >= x_.lo * (1 - 1e-9) && v <= x_.hi * (1 + 1e-9)) xt.push_back(v);
            }
        } else {
            xt = nice_ticks(x_.lo, x_.hi);
        }
        for (double t : xt)
            body_ << "<line x1=\"" << px(t) << "\" x2=\"" << px(t) << "\" y1=\"" << kHeight - kBottom << "\" y2=\""
                  << kHeight - kBottom + 4 << "\" stroke=\"#333\"/><text x=\"" << px(t) << "\" y=\""
                  << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
        body_ << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 10
              << "\" text-anchor=\"middle\">" << escape(xlabel_) << "</text>\n";
        body_ << "<text transform=\"translate(16," << (kTop + kHeight - kBottom) / 2
              << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel_) << "</text>\n";
    }

    void line(const Series &s, const char *colour) {
        body_ << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\""
              << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.y[i])) body_ << px(s.x[i]) << "," << py(s.y[i]) << " ";
        body_ << "\"/>\n";
    }

    void marker(double x, double y, const char *colour) {
        body_ << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
    }

    void bar(double centre, double half, double y, const char *colour, const std::string &label) {
        const double top = py(std::max(y, 0.0)), base = py(std::min(y, 0.0));
        body_ << "<rect x=\"" << px(centre - half) << "\" y=\"" << top << "\" width=\"" << px(centre + half) - px(centre - half)
              << "\" height=\"" << base - top << "\" fill=\"" << colour << "\" data-value=\"" << num(y, 17) << "\"/>\n";
        body_ << "<text x=\"" << px(centre) << "\" y=\"" << top - 4 << "\" text-anchor=\"middle\">" << num(y)
              << "</text>\n";
        body_ << "<text x=\"" << px(centre) << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">"
              << escape(label) << "</text>\n";
    }

    void legend(std::size_t slot, const std::string &label, const char *colour, bool dashed) {
        const double x = kWidth - kRight + 12, y = kTop + 10 + 18 * static_cast<double>(slot);
        body_ << "<line x1=\"" << x << "\" x2=\"" << x + 22 << "\" y1=\"" << y << "\" y2=\"" << y << "\" stroke=\""
              << colour << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
        body_ << "<text x=\"" << x + 28 << "\" y=\"" << y + 4 << "\">" << escape(label) << "</text>\n";
    }

    void zero_line() {
        if (y_.lo < 0 && y_.hi > 0)
            body_ << "<line x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << py(0) << "\" y2=\""
                  << py(0) << "\" stroke=\"#999\"/>\n";
    }

    void save(const fs::path &path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path.string());
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
            << "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << body_.str() << "</svg>\n";
    }

private:
    Range x_, y_;
    bool log_x_;
    std::string xlabel_, ylabel_;
    std::ostringstream body_;
};

// Distinct labels from file stems, prefixed with the parent directory when stems collide.
std::vector<std::string> labels_for(const std::vector<fs::path> &paths) {
    std::map<std::string, int> seen;
    for (const auto &p : paths) ++seen[p.stem().string()];
    std::vector<std::string> out;
    for (const auto &p : paths) {
        const std::string stem = p.stem().string();
        out.push_back(seen[stem] > 1 ? p.parent_path().filename().string() + "/" + stem : stem);
    }
    return out;
}

std::string reward_column(const MetricsTable &t, const fs::path &path) {
    for (const char *c : {"reward_smoothed", "reward_smoothed_median"})
        if (t.column(c) >= 0) return c;
    throw SchemaMismatch(path.string() + ": no smoothed reward column");
}

json read_json(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw SchemaMismatch(path.string() + ": " + e.what());
    }
}

void plot_curves(const std::vector<fs::path> &inputs, const fs::path &out, const std::vector<fs::path> &benchmarks) {
    std::vector<Series> series;
    Range xr, yr;
    const auto labels = labels_for(inputs);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const MetricsTable t = read_metrics_csv(inputs[i]);
        if (t.rows.empty()) throw EmptyInput(inputs[i].string() + " has no rows");
        Series s{labels[i], t.values("step"), t.values(reward_column(t, inputs[i]))};
        for (double x : s.x) xr.add(x);
        for (double y : s.y) yr.add(y);
        series.push_back(std::move(s));
    }
    const auto bench_labels = labels_for(benchmarks);
    for (std::size_t i = 0; i < benchmarks.size(); ++i) {
        const json b = read_json(benchmarks[i]);
        if (!b.contains("mean_reward") || !b["mean_reward"].is_number())
            throw SchemaMismatch(benchmarks[i].string() + ": missing mean_reward");
        const double level = b["mean_reward"].get<double>();
        yr.add(level);
        series.push_back({"EDS " + bench_labels[i], {xr.lo, xr.hi}, {level, level}, true});
    }
    Canvas c(xr, yr, false, "step", "smoothed reward");
    c.axes();
    c.zero_line();
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char *colour = kPalette[i % std::size(kPalette)];
        c.line(series[i], colour);
        c.legend(i, series[i].label, colour, series[i].dashed);
    }
    c.save(out);
}

void plot_bars(const std::vector<fs::path> &inputs, const fs::path &out) {
    const auto labels = labels_for(inputs);
    std::vector<double> finals;
    Range yr;
    yr.add(0.0);
    for (const auto &path : inputs) {
        const MetricsTable t = read_metrics_csv(path);
        if (t.rows.empty()) throw EmptyInput(path.string() + " has no rows");
        finals.push_back(t.values(reward_column(t, path)).back());
        yr.add(finals.back());
    }
    Range xr;
    xr.add(-0.5);
    xr.add(static_cast<double>(finals.size()) - 0.5);
    Canvas c(xr, yr, false, "", "final smoothed reward");
    c.axes();
    c.zero_line();
    for (std::size_t i = 0; i < finals.size(); ++i)
        c.bar(static_cast<double>(i), 0.35, finals[i], kPalette[i % std::size(kPalette)], labels[i]);
    c.save(out);
}

void plot_sweep(const std::vector<fs::path> &inputs, const fs::path &out) {
    std::vector<Series> series;
    Range xr, yr;
    bool log_x = true;
    std::string axis;
    const auto labels = labels_for(inputs);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const json r = read_json(inputs[i]);
        if (!r.contains("points") || !r["points"].is_array() || !r.contains("axis"))
            throw SchemaMismatch(inputs[i].string() + ": not a sweep report");
        axis = r["axis"].get<std::string>();
        std::map<std::string, Series> by_agent;
        for (const auto &p : r["points"]) {
            const std::string agent = p.at("agent").get<std::string>();
            Series &s = by_agent[agent];
            s.label = inputs.size() > 1 ? labels[i] + " " + agent : agent;
            s.x.push_back(p.at("value").get<double>());
            s.y.push_back(p.at("median_final_smoothed").get<double>());
        }
        for (auto &[_, s] : by_agent) {
            for (double x : s.x) {
                xr.add(x);
                if (x <= 0) log_x = false;
            }
            for (double y : s.y) yr.add(y);
            series.push_back(std::move(s));
        }
    }
    if (series.empty()) throw EmptyInput("sweep reports contain no points");
    Canvas c(xr, yr, log_x, axis, "median final smoothed reward");
    c.axes();
    c.zero_line();
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char *colour = kPalette[i % std::size(kPalette)];
        c.line(series[i], colour);
        for (std::size_t k = 0; k < series[i].x.size(); ++k) c.marker(series[i].x[k], series[i].y[k], colour);
        c.legend(i, series[i].label, colour, false);
    }
    c.save(out);
}

} // namespace

PlotStyle parse_plot_style(const std::string &name) {
    if (name == "curves") return PlotStyle::curves;
    if (name == "bars") return PlotStyle::bars;
    if (name == "sweep") return PlotStyle::sweep;
    throw InvalidConfig("style", "expected curves, bars or sweep, got '" + name + "'");
}

fs::path cmd_plot(const std::vector<fs::path> &inputs, PlotStyle style, const fs::path &out,
                  const std::vector<fs::path> &benchmarks) {
    if (inputs.empty()) throw EmptyInput("no input files to plot");
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    switch (style) {
    case PlotStyle::curves: plot_curves(inputs, out, benchmarks); break;
    case PlotStyle::bars: plot_bars(inputs, out); break;
    case PlotStyle::sweep: plot_sweep(inputs, out); break;
    }
    return out;
}

} // namespace risshare
