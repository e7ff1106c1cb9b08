#include "sfda/cli/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

#include "sfda/core/errors.hpp"
#include "sfda/core/io.hpp"

namespace sfda::cli {

namespace fs = std::filesystem;

namespace {

// Minimal static SVG emitters; enough for bar and line charts.
struct SvgCanvas {
    int width = 640;
    int height = 400;
    std::ostringstream body;

    std::string finish() {
        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << body.str() << "</svg>\n";
        return out.str();
    }

    void text(double x, double y, const std::string& s, int size = 12,
              const std::string& anchor = "start") {
        body << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
             << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s
             << "</text>\n";
    }
    void line(double x1, double y1, double x2, double y2, const std::string& color,
              double width_ = 1.0, const std::string& dash = "") {
        body << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
             << "\" stroke=\"" << color << "\" stroke-width=\"" << width_ << "\"";
        if (!dash.empty()) body << " stroke-dasharray=\"" << dash << "\"";
        body << "/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& color) {
        body << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
             << "\" fill=\"" << color << "\"/>\n";
    }
    void circle(double x, double y, double r, const std::string& color) {
        body << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << r << "\" fill=\"" << color
             << "\"/>\n";
    }
};

std::string format_num(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << std::fixed << v;
    return s.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot open for write: " + p.string());
    out << content;
}

void risk_gap_chart(const json& selection, const fs::path& out_path) {
    const auto& candidates = selection.at("candidates");
    const double tau = selection.at("tau").get<double>();
    SvgCanvas svg;
    const double left = 60, bottom = svg.height - 60, top = 30;
    const double plot_h = bottom - top;
    double max_gap = tau * 1.4;
    for (const auto& c : candidates)
        max_gap = std::max(max_gap, c.at("risk_gap").get<double>() * 1.15);
    const double bar_w = (svg.width - left - 20) / (2.0 * candidates.size());

    svg.text(svg.width / 2.0, 18, "candidate risk gaps (mIoU drop on the frozen baseline)", 13,
             "middle");
    svg.line(left, bottom, svg.width - 10, bottom, "black");
    svg.line(left, bottom, left, top, "black");
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = max_gap * tick / 4.0;
        const double y = bottom - plot_h * tick / 4.0;
        svg.line(left - 4, y, left, y, "black");
        svg.text(left - 8, y + 4, format_num(v, 2), 10, "end");
    }
    int i = 0;
    for (const auto& c : candidates) {
        const double gap = c.at("risk_gap").get<double>();
        const bool selected = c.at("selected").get<bool>();
        const double x = left + bar_w * (2 * i + 0.5);
        const double h = std::max(0.0, gap / max_gap) * plot_h;
        svg.rect(x, bottom - h, bar_w, h, selected ? "#2e7d32" : "#b0bec5");
        svg.text(x + bar_w / 2, bottom + 14, std::to_string(c.at("ag_id").get<int>()), 10,
                 "middle");
        svg.text(x + bar_w / 2, bottom + 28, c.at("name").get<std::string>(), 8, "middle");
        ++i;
    }
    const double tau_y = bottom - (tau / max_gap) * plot_h;
    svg.line(left, tau_y, svg.width - 10, tau_y, "#c62828", 1.5, "6,4");
    svg.text(svg.width - 12, tau_y - 6, "tau = " + format_num(tau, 2), 11, "end");
    write_file(out_path, svg.finish());
}

void adapt_curve_chart(const json& adapt_report, const fs::path& out_path) {
    const auto& rounds = adapt_report.at("rounds");
    SvgCanvas svg;
    const double left = 60, bottom = svg.height - 50, top = 30;
    const double plot_h = bottom - top, plot_w = svg.width - left - 30;
    svg.text(svg.width / 2.0, 18, "pseudo-label quality and self-entropy per round", 13,
             "middle");
    svg.line(left, bottom, svg.width - 10, bottom, "black");
    svg.line(left, bottom, left, top, "black");
    const int n = static_cast<int>(rounds.size());
    double max_ent = 1e-9;
    for (const auto& r : rounds)
        max_ent = std::max(max_ent, r.at("avg_self_entropy").get<double>());
    auto x_of = [&](int i) { return left + plot_w * (n == 1 ? 0.5 : double(i) / (n - 1)); };
    for (int series = 0; series < 2; ++series) {
        const char* color = series == 0 ? "#1565c0" : "#ef6c00";
        double prev_x = 0, prev_y = 0;
        for (int i = 0; i < n; ++i) {
            const auto& r = rounds[i];
            double v = 0.0;
            if (series == 0)
                v = r.at("pseudo_miou").is_null() ? 0.0 : r.at("pseudo_miou").get<double>();
            else
                v = r.at("avg_self_entropy").get<double>() / max_ent;
            const double x = x_of(i), y = bottom - v * plot_h;
            svg.circle(x, y, 3, color);
            if (i > 0) svg.line(prev_x, prev_y, x, y, color, 1.5);
            prev_x = x;
            prev_y = y;
        }
    }
    for (int i = 0; i < n; ++i)
        svg.text(x_of(i), bottom + 16, "round " + std::to_string(i + 1), 10, "middle");
    svg.text(left + 4, top + 10, "blue: pseudo-label mIoU vs GT", 10);
    svg.text(left + 4, top + 24, "orange: avg self-entropy (scaled)", 10);
    write_file(out_path, svg.finish());
}

void ksweep_chart(const std::vector<std::pair<int, double>>& pts, const fs::path& out_path) {
    SvgCanvas svg;
    const double left = 60, bottom = svg.height - 50, top = 30;
    const double plot_h = bottom - top, plot_w = svg.width - left - 30;
    svg.text(svg.width / 2.0, 18, "target mIoU vs number of heads (K)", 13, "middle");
    svg.line(left, bottom, svg.width - 10, bottom, "black");
    svg.line(left, bottom, left, top, "black");
    int max_k = 1;
    double max_v = 1e-9;
    for (auto& [k, v] : pts) {
        max_k = std::max(max_k, k);
        max_v = std::max(max_v, v);
    }
    double prev_x = 0, prev_y = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        const double x = left + plot_w * (max_k == 0 ? 0.5 : double(pts[i].first) / max_k);
        const double y = bottom - (pts[i].second / (max_v * 1.1)) * plot_h;
        svg.circle(x, y, 3, "#1565c0");
        svg.text(x, bottom + 16, "K=" + std::to_string(pts[i].first), 10, "middle");
        svg.text(x, y - 8, format_num(pts[i].second, 3), 9, "middle");
        if (i > 0) svg.line(prev_x, prev_y, x, y, "#1565c0", 1.5);
        prev_x = x;
        prev_y = y;
    }
    write_file(out_path, svg.finish());
}

struct RunSummary {
    std::string dir_name;
    std::string routing;
    int k = 0;
    double baseline_target = 0.0;
    double adapted_target = 0.0;
    bool has_adapted = false;
    json metrics;
};

RunSummary summarize_run(const fs::path& dir) {
    RunSummary s;
    s.dir_name = dir.filename().string();
    json config = load_json_file(dir / "config.json");
    s.routing = config.at("routing").get<std::string>();
    s.metrics = load_json_file(dir / "reports" / "metrics.json");
    const auto& tt = s.metrics.at("target_test");
    if (tt.contains("baseline")) s.baseline_target = tt.at("baseline").at("miou").get<double>();
    if (tt.contains("adapted")) {
        s.adapted_target = tt.at("adapted").at("miou").get<double>();
        s.has_adapted = true;
    }
    for (const auto& [key, value] : tt.items()) {
        (void)value;
        if (key.rfind("vendor_loo", 0) == 0) ++s.k;
    }
    return s;
}

void single_run_report(const fs::path& dir) {
    std::vector<std::string> missing;
    for (const char* req : {"manifest.json", "reports/selection.json", "reports/metrics.json"})
        if (!fs::exists(dir / req)) missing.push_back(req);
    if (!missing.empty()) {
        std::string msg = "report: run is incomplete; missing:";
        for (const auto& m : missing) msg += " " + m;
        throw DependencyError(msg);
    }
    const fs::path plots = dir / "reports" / "plots";
    fs::create_directories(plots);

    risk_gap_chart(load_json_file(dir / "reports" / "selection.json"),
                   plots / "risk_gaps.svg");
    if (fs::exists(dir / "reports" / "adapt.json"))
        adapt_curve_chart(load_json_file(dir / "reports" / "adapt.json"),
                          plots / "adapt_rounds.svg");

    // Per-head target-test table.
    json metrics = load_json_file(dir / "reports" / "metrics.json");
    std::ostringstream csv;
    csv << "model,miou\n";
    for (const auto& [name, rep] : metrics.at("target_test").items())
        if (rep.is_object() && rep.contains("miou"))
            csv << name << "," << rep.at("miou").dump() << "\n";
    write_file(dir / "reports" / "head_mious.csv", csv.str());
}

void multi_run_report(const fs::path& root, const std::vector<fs::path>& runs) {
    std::vector<RunSummary> summaries;
    for (const auto& r : runs) {
        try {
            summaries.push_back(summarize_run(r));
        } catch (const std::exception&) {
            // runs without metrics are simply left out of the aggregate table
        }
    }
    if (summaries.empty())
        throw DependencyError("report: no completed runs found under " + root.string());
    fs::create_directories(root / "reports");

    // Ablation rows: single-source baseline plus each routing's adapted model.
    std::ostringstream csv;
    csv << "row,run,mIoU\n";
    const auto* first = &summaries.front();
    csv << "single-source," << first->dir_name << "," << format_num(first->baseline_target, 4)
        << "\n";
    for (const char* routing : {"ERM", "DE++", "LO++"}) {
        for (const auto& s : summaries) {
            if (s.routing == routing && s.has_adapted) {
                csv << routing << "," << s.dir_name << "," << format_num(s.adapted_target, 4)
                    << "\n";
                break;
            }
        }
    }
    write_file(root / "reports" / "ablation.csv", csv.str());

    // K-sweep across runs that differ in head count.
    std::vector<std::pair<int, double>> pts;
    for (const auto& s : summaries)
        if (s.has_adapted) pts.emplace_back(s.k, s.adapted_target);
    std::sort(pts.begin(), pts.end());
    if (pts.size() >= 2) ksweep_chart(pts, root / "reports" / "ksweep.svg");
}

}  // namespace

void write_reports(const fs::path& run_or_root_dir) {
    if (fs::exists(run_or_root_dir / "manifest.json")) {
        single_run_report(run_or_root_dir);
        return;
    }
    std::vector<fs::path> runs;
    if (fs::exists(run_or_root_dir))
        for (const auto& entry : fs::directory_iterator(run_or_root_dir))
            if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
                runs.push_back(entry.path());
    std::sort(runs.begin(), runs.end());
    if (runs.empty())
        throw DependencyError("report: no run manifest found at " + run_or_root_dir.string());
    for (const auto& r : runs) single_run_report(r);
    multi_run_report(run_or_root_dir, runs);
}

}  // namespace sfda::cli
