#include "nfvs/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nfvs/errors.hpp"

namespace nfvs::report {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    return out;
}

// Linear-interpolation quantile on a sorted sample.
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * double(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

std::array<double, 3> quartiles(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    return {quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75)};
}

}  // namespace

Trace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty trace file");
    const std::vector<std::string> header = split_csv(line);
    int it = -1, ipe = -1, ioe = -1, ice = -1, ics = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "t") it = int(i);
        if (header[i] == "pe") ipe = int(i);
        if (header[i] == "oe") ioe = int(i);
        if (header[i] == "ce") ice = int(i);
        if (header[i] == "cs") ics = int(i);
    }
    if (it < 0 || ipe < 0 || ioe < 0 || ice < 0 || ics < 0)
        throw ConfigError(path + ": not an episode trace (missing metric columns)");

    Trace tr;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv(line);
        if (cells.size() != header.size())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": ragged trace row");
        const auto num = [&](int idx) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[std::size_t(idx)], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[std::size_t(idx)].size())
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": malformed number '" + cells[std::size_t(idx)] + "'");
            return v;
        };
        tr.t.push_back(num(it));
        tr.pe.push_back(num(ipe));
        tr.oe.push_back(num(ioe));
        tr.ce.push_back(num(ice));
        tr.cs.push_back(num(ics));
    }
    return tr;
}

Bands quantile_bands(const std::vector<Trace>& traces) {
    if (traces.empty()) throw ConfigError("no traces to aggregate");
    std::size_t longest = 0;
    for (const Trace& tr : traces) longest = std::max(longest, tr.t.size());

    Bands b;
    for (std::size_t k = 0; k < longest; ++k) {
        std::vector<double> t, pe, oe, ce, cs;
        for (const Trace& tr : traces) {
            if (k >= tr.t.size()) continue;
            t.push_back(tr.t[k]);
            pe.push_back(tr.pe[k]);
            oe.push_back(tr.oe[k]);
            ce.push_back(tr.ce[k]);
            cs.push_back(tr.cs[k]);
        }
        b.count.push_back(int(t.size()));
        std::sort(t.begin(), t.end());
        b.t.push_back(quantile(t, 0.5));
        b.pe.push_back(quartiles(pe));
        b.oe.push_back(quartiles(oe));
        b.ce.push_back(quartiles(ce));
        b.cs.push_back(quartiles(cs));
    }
    return b;
}

Bands collect_bands(const std::string& trace_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(trace_dir))
        throw IoError("not a directory: " + trace_dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(trace_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());

    std::vector<Trace> traces;
    for (const std::string& p : paths) {
        try {
            traces.push_back(read_trace(p));
        } catch (const ConfigError&) {
            // Other CSV files (summary tables, band output) share the
            // directory; only actual traces contribute.
        }
    }
    if (traces.empty())
        throw ConfigError("no episode traces found in " + trace_dir);
    return quantile_bands(traces);
}

void write_bands(const Bands& bands, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open band file for writing: " + path);
    out << "step,t,count";
    for (const char* m : {"pe", "oe", "ce", "cs"})
        for (const char* q : {"q25", "q50", "q75"}) out << "," << m << "_" << q;
    out << "\n";
    char buf[64];
    for (std::size_t k = 0; k < bands.t.size(); ++k) {
        out << k;
        std::snprintf(buf, sizeof buf, ",%.9e", bands.t[k]);
        out << buf << "," << bands.count[k];
        for (const auto* metric : {&bands.pe, &bands.oe, &bands.ce, &bands.cs})
            for (double v : (*metric)[k]) {
                std::snprintf(buf, sizeof buf, ",%.9e", v);
                out << buf;
            }
        out << "\n";
    }
    if (!out) throw IoError("failed while writing bands: " + path);
}

}  // namespace nfvs::report
