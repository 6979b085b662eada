#include "marlcc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "marlcc/error.hpp"

namespace marlcc::io {

std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

void write_episode_csv(const std::filesystem::path& path,
                       const std::vector<env::EpisodeRow>& rows, int n_agents) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "episode,kind,steps,reward,collisions,msgs_sent,msgs_dropped,msgs_delivered,"
           "mean_entropy,mean_lambda2";
    for (int i = 0; i < n_agents; ++i) out << ",phi_sum_" << i;
    out << "\n";
    for (const auto& r : rows) {
        out << r.episode << ',' << (r.eval ? "eval" : "train") << ',' << r.steps << ','
            << format_double(r.reward) << ',' << r.collisions << ',' << r.msgs_sent << ','
            << r.msgs_dropped << ',' << r.msgs_delivered << ','
            << format_double(r.mean_entropy) << ',' << format_double(r.mean_lambda2);
        for (int i = 0; i < n_agents; ++i) {
            out << ',' << format_double(i < static_cast<int>(r.phi_sums.size()) ? r.phi_sums[i]
                                                                                : 0.0);
        }
        out << "\n";
    }
}

void write_step_csv(const std::filesystem::path& path,
                    const std::vector<env::StepRecord>& steps, int n_agents) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "tick,R";
    for (int i = 0; i < n_agents; ++i) out << ",phi_" << i;
    out << ",collisions,msgs_sent,msgs_dropped\n";
    for (const auto& s : steps) {
        out << s.tick << ',' << format_double(s.global_reward);
        for (int i = 0; i < n_agents; ++i) {
            out << ','
                << format_double(i < static_cast<int>(s.phi.size()) ? s.phi[i] : 0.0);
        }
        out << ',' << s.collisions << ',' << s.msgs_sent << ',' << s.msgs_dropped << "\n";
    }
}

void write_message_csv(const std::filesystem::path& path,
                       const std::vector<env::MessageLogRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "t,sender,recipient,kind,dropped\n";
    for (const auto& r : rows) {
        const char* kind = r.kind == comms::PayloadKind::Observation     ? "observation"
                           : r.kind == comms::PayloadKind::StateEstimate ? "state-estimate"
                                                                         : "intended-action";
        out << r.tick << ',' << r.sender << ',' << r.recipient << ',' << kind << ','
            << (r.dropped ? 1 : 0) << "\n";
    }
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

namespace {

std::vector<double> smooth(const std::vector<double>& v, int window) {
    if (window <= 1) return v;
    std::vector<double> out;
    out.reserve(v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc += v[i];
        if (i >= static_cast<std::size_t>(window)) acc -= v[i - window];
        const int denom = std::min<int>(window, static_cast<int>(i) + 1);
        out.push_back(acc / denom);
    }
    return out;
}

std::string svg_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series, int smooth_window,
                       const std::string& x_label, const std::string& y_label) {
    constexpr int kWidth = 720, kHeight = 440;
    constexpr int kLeft = 64, kRight = 24, kTop = 24, kBottom = 48;
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;

    std::vector<PlotSeries> smoothed;
    double x_max = 1.0;
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        PlotSeries sm{s.label, smooth(s.values, smooth_window)};
        for (double v : sm.values) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
        x_max = std::max(x_max, static_cast<double>(sm.values.size()));
        smoothed.push_back(std::move(sm));
    }
    if (!(y_min < y_max)) {
        y_min -= 1.0;
        y_max += 1.0;
    }
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    auto sx = [&](double x) { return kLeft + plot_w * x / std::max(1.0, x_max - 1.0); };
    auto sy = [&](double y) { return kTop + plot_h * (1.0 - (y - y_min) / (y_max - y_min)); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    // axes
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << (kTop + plot_h) << "\" x2=\""
        << (kLeft + plot_w) << "\" y2=\"" << (kTop + plot_h)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
        << (kTop + plot_h) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    // axis labels and range ticks
    svg << "<text x=\"" << (kLeft + plot_w / 2) << "\" y=\"" << (kHeight - 12)
        << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label << "</text>\n";
    svg << "<text x=\"16\" y=\"" << (kTop + plot_h / 2)
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << (kTop + plot_h / 2) << ")\">" << y_label << "</text>\n";
    svg << "<text x=\"" << kLeft << "\" y=\"" << (kTop + plot_h + 16)
        << "\" font-size=\"11\" text-anchor=\"middle\">1</text>\n";
    svg << "<text x=\"" << (kLeft + plot_w) << "\" y=\"" << (kTop + plot_h + 16)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << format_double(x_max)
        << "</text>\n";
    svg << "<text x=\"" << (kLeft - 6) << "\" y=\"" << (kTop + plot_h)
        << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(y_min) << "</text>\n";
    svg << "<text x=\"" << (kLeft - 6) << "\" y=\"" << (kTop + 10)
        << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(y_max) << "</text>\n";

    for (std::size_t k = 0; k < smoothed.size(); ++k) {
        const auto& s = smoothed[k];
        if (s.values.empty()) continue;
        svg << "<polyline fill=\"none\" stroke=\"" << svg_color(k)
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            if (i) svg << ' ';
            svg << format_double(sx(static_cast<double>(i))) << ','
                << format_double(sy(s.values[i]));
        }
        svg << "\"/>\n";
        // legend entry
        const int ly = kTop + 8 + static_cast<int>(k) * 18;
        svg << "<line x1=\"" << (kLeft + plot_w - 150) << "\" y1=\"" << ly << "\" x2=\""
            << (kLeft + plot_w - 126) << "\" y2=\"" << ly << "\" stroke=\"" << svg_color(k)
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << (kLeft + plot_w - 120) << "\" y=\"" << (ly + 4)
            << "\" font-size=\"12\">" << s.label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace marlcc::io
