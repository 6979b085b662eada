#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "marlcc/trainer.hpp"

namespace marlcc::io {

/// Shortest round-trip decimal form of a double (via std::to_chars);
/// locale independent, so logs are byte-reproducible.
std::string format_double(double value);

/// episodes.csv: one row per training or evaluation episode.
/// Columns: episode,kind,steps,reward,collisions,msgs_sent,msgs_dropped,
///          msgs_delivered,mean_entropy,mean_lambda2,phi_sum_0..phi_sum_{N-1}
void write_episode_csv(const std::filesystem::path& path,
                       const std::vector<env::EpisodeRow>& rows, int n_agents);

/// steps.csv: one row per simulation step of one episode.
/// Columns: tick,R,phi_0..phi_{N-1},collisions,msgs_sent,msgs_dropped
void write_step_csv(const std::filesystem::path& path,
                    const std::vector<env::StepRecord>& steps, int n_agents);

/// messages.csv: one row per transmission attempt.
/// Columns: t,sender,recipient,kind,dropped
void write_message_csv(const std::filesystem::path& path,
                       const std::vector<env::MessageLogRow>& rows);

/// Minimal CSV table reader (no quoting; the formats above never need it).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);

/// One polyline of a reward plot.
struct PlotSeries {
    std::string label;
    std::vector<double> values;
};

/// Renders a deterministic, self-contained SVG line chart with axes and a
/// legend; values are smoothed with a trailing moving average of
/// `smooth_window` when it is > 1.
std::string render_svg(const std::vector<PlotSeries>& series, int smooth_window = 1,
                       const std::string& x_label = "episode",
                       const std::string& y_label = "reward");

}  // namespace marlcc::io
