#pragma once

#include <array>
#include <string>
#include <vector>

namespace nfvs::report {

/// Per-step metric columns read back from one episode trace file.
struct Trace {
    std::vector<double> t, pe, oe, ce, cs;
};

/// Parses a trace CSV written by the evaluation module. Throws IoError on
/// unreadable files and ConfigError when the header lacks the metric columns.
Trace read_trace(const std::string& path);

/// Time-aligned quartile bands across episodes: row k aggregates every trace
/// that is at least k+1 steps long. Each metric column carries the lower
/// quartile, the median, and the upper quartile.
struct Bands {
    std::vector<double> t;  // median time per step
    std::vector<int> count;  // traces still contributing at this step
    std::vector<std::array<double, 3>> pe, oe, ce, cs;
};

Bands quantile_bands(const std::vector<Trace>& traces);

/// Loads every trace CSV in the directory (non-trace CSV files such as
/// summary tables are skipped) and aggregates. Throws ConfigError when the
/// directory holds no traces.
Bands collect_bands(const std::string& trace_dir);

/// Comma-separated band table with fixed formatting (reruns are
/// byte-identical).
void write_bands(const Bands& bands, const std::string& path);

}  // namespace nfvs::report
