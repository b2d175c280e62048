#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "driftflow/batch.hpp"
#include "driftflow/flow.hpp"
#include "driftflow/generator.hpp"
#include "driftflow/sinkhorn.hpp"

namespace driftflow {

// Shortest round-trip representation; fixed format so identical runs write
// identical bytes.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_long_double(long double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.21Lg", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    out << content;
}

// --- CSV ---------------------------------------------------------------

inline void write_batch_csv(const std::filesystem::path& path, const ParticleBatch& batch) {
    std::ostringstream out;
    for (int k = 0; k < batch.dim(); ++k) out << (k ? "," : "") << "x" << k;
    out << "\n";
    for (int i = 0; i < batch.n(); ++i) {
        const auto p = batch.point(i);
        for (int k = 0; k < batch.dim(); ++k) out << (k ? "," : "") << format_double(p[k]);
        out << "\n";
    }
    write_text_file(path, out.str());
}

inline ParticleBatch read_batch_csv(const std::filesystem::path& path, Role role) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "': empty file");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("'" + path.string() + "': bad numeric cell '" + cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("'" + path.string() + "': no data rows");
    return ParticleBatch(Matrix::from_rows(rows), role);
}

inline void write_flow_metrics_csv(const std::filesystem::path& path,
                                   const std::vector<FlowRecord>& records) {
    std::ostringstream out;
    out << "step,energy_mmd2,mean_drift_norm,max_drift_norm,diverged\n";
    for (const auto& r : records)
        out << r.step << "," << format_double(r.energy_mmd2) << ","
            << format_double(r.mean_drift_norm) << "," << format_double(r.max_drift_norm) << ","
            << (r.diverged ? 1 : 0) << "\n";
    write_text_file(path, out.str());
}

inline void write_train_metrics_csv(const std::filesystem::path& path,
                                    const std::vector<TrainRecord>& records) {
    std::ostringstream out;
    out << "step,loss,mmd2_holdout\n";
    for (const auto& r : records)
        out << r.step << "," << format_double(r.loss) << "," << format_double(r.mmd2_holdout)
            << "\n";
    write_text_file(path, out.str());
}

inline void write_plan_csv(const std::filesystem::path& path, const TransportPlan& plan) {
    std::ostringstream out;
    out << "i,j,log_weight\n";
    for (int i = 0; i < plan.log_plan.rows(); ++i)
        for (int j = 0; j < plan.log_plan.cols(); ++j)
            out << i << "," << j << "," << format_double(plan.log_plan(i, j)) << "\n";
    write_text_file(path, out.str());
}

inline void write_two_delta_csv(const std::filesystem::path& path,
                                const std::vector<TwoDeltaRow>& rows) {
    std::ostringstream out;
    out << "tau,epsilon,v_kl,v_sp,sp_over_kl,v_w2,underflowed\n";
    for (const auto& r : rows) {
        out << format_double(r.tau) << "," << format_long_double(r.epsilon) << ","
            << format_long_double(r.v_kl) << "," << format_long_double(r.v_sp) << ","
            << format_long_double(r.sp_over_kl) << "," << format_long_double(r.v_w2) << ","
            << (r.underflowed ? 1 : 0) << "\n";
    }
    write_text_file(path, out.str());
}

// --- SVG ---------------------------------------------------------------
// Plots are emitted as plain SVG text on a fixed 640x640 canvas with 5%
// data-range margins. They are derived strictly from already-written CSVs.

struct SvgSeries {
    std::vector<std::pair<double, double>> points;
    std::string color = "#1f77b4";
    double radius = 2.0;
    std::string label;
};

namespace detail {

struct SvgScale {
    double x_min, x_max, y_min, y_max;
    static constexpr double canvas = 640.0;
    static constexpr double pad = 40.0;
    double px(double x) const {
        const double r = x_max > x_min ? (x - x_min) / (x_max - x_min) : 0.5;
        return pad + r * (canvas - 2 * pad);
    }
    double py(double y) const {
        const double r = y_max > y_min ? (y - y_min) / (y_max - y_min) : 0.5;
        return canvas - pad - r * (canvas - 2 * pad);
    }
};

inline SvgScale fit_scale(const std::vector<SvgSeries>& series) {
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (first) {
                x_min = x_max = x;
                y_min = y_max = y;
                first = false;
            }
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    const double mx = 0.05 * std::max(x_max - x_min, 1e-12);
    const double my = 0.05 * std::max(y_max - y_min, 1e-12);
    return SvgScale{x_min - mx, x_max + mx, y_min - my, y_max + my};
}

inline std::string svg_header(const SvgScale& sc, const std::string& title) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
           "viewBox=\"0 0 640 640\">\n";
    out << "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
    out << "<text x=\"20\" y=\"24\" font-family=\"monospace\" font-size=\"14\">" << title
        << "</text>\n";
    // axes box with corner labels
    out << "<rect x=\"40\" y=\"40\" width=\"560\" height=\"560\" fill=\"none\" stroke=\"#999\"/>\n";
    out << "<text x=\"40\" y=\"616\" font-family=\"monospace\" font-size=\"10\">"
        << format_double(sc.x_min) << "</text>\n";
    out << "<text x=\"540\" y=\"616\" font-family=\"monospace\" font-size=\"10\">"
        << format_double(sc.x_max) << "</text>\n";
    out << "<text x=\"4\" y=\"600\" font-family=\"monospace\" font-size=\"10\">"
        << format_double(sc.y_min) << "</text>\n";
    out << "<text x=\"4\" y=\"52\" font-family=\"monospace\" font-size=\"10\">"
        << format_double(sc.y_max) << "</text>\n";
    return out.str();
}

}  // namespace detail

inline void write_svg_scatter(const std::filesystem::path& path, const std::string& title,
                              const std::vector<SvgSeries>& series) {
    const auto sc = detail::fit_scale(series);
    std::ostringstream out;
    out << detail::svg_header(sc, title);
    double legend_y = 60.0;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points)
            out << "<circle cx=\"" << format_double(sc.px(x)) << "\" cy=\""
                << format_double(sc.py(y)) << "\" r=\"" << s.radius << "\" fill=\"" << s.color
                << "\" fill-opacity=\"0.6\"/>\n";
        if (!s.label.empty()) {
            out << "<circle cx=\"560\" cy=\"" << legend_y - 4 << "\" r=\"4\" fill=\"" << s.color
                << "\"/>\n<text x=\"570\" y=\"" << legend_y
                << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"start\">" << s.label
                << "</text>\n";
            legend_y += 16.0;
        }
    }
    out << "</svg>\n";
    write_text_file(path, out.str());
}

inline void write_svg_lines(const std::filesystem::path& path, const std::string& title,
                            const std::vector<SvgSeries>& series) {
    const auto sc = detail::fit_scale(series);
    std::ostringstream out;
    out << detail::svg_header(sc, title);
    double legend_y = 60.0;
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points)
            out << format_double(sc.px(x)) << "," << format_double(sc.py(y)) << " ";
        out << "\"/>\n";
        for (const auto& [x, y] : s.points)
            out << "<circle cx=\"" << format_double(sc.px(x)) << "\" cy=\""
                << format_double(sc.py(y)) << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
        if (!s.label.empty()) {
            out << "<rect x=\"552\" y=\"" << legend_y - 10 << "\" width=\"12\" height=\"4\" fill=\""
                << s.color << "\"/>\n<text x=\"570\" y=\"" << legend_y
                << "\" font-family=\"monospace\" font-size=\"11\">" << s.label << "</text>\n";
            legend_y += 16.0;
        }
    }
    out << "</svg>\n";
    write_text_file(path, out.str());
}

inline std::vector<SvgSeries> scatter_series_from_csvs(
    const std::vector<std::pair<std::filesystem::path, std::string>>& csv_and_color) {
    std::vector<SvgSeries> series;
    for (const auto& [path, color] : csv_and_color) {
        const ParticleBatch b = read_batch_csv(path, Role::data);
        SvgSeries s;
        s.color = color;
        s.label = path.filename().string();
        for (int i = 0; i < b.n(); ++i) {
            const auto p = b.point(i);
            s.points.emplace_back(p[0], b.dim() > 1 ? p[1] : 0.0);
        }
        series.push_back(std::move(s));
    }
    return series;
}

}  // namespace driftflow
