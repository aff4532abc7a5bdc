#include "relactrl/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace relactrl {

namespace {

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

[[noreturn]] void fail(const std::string& source, size_t line_no, const std::string& msg) {
    throw std::invalid_argument(source + ":" + std::to_string(line_no) + ": " + msg);
}

}  // namespace

MetricsTable parse_metrics_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument(source_name + ": empty file, expected header layer_index,fid,hdd");
    }
    const std::vector<std::string> header = split_fields(strip_cr(line));
    const std::vector<std::string> expected{"layer_index", "fid", "hdd"};
    for (const auto& col : expected) {
        if (std::find(header.begin(), header.end(), col) == header.end()) {
            throw std::invalid_argument(source_name + ": header is missing column '" + col +
                                        "' (expected exactly layer_index,fid,hdd)");
        }
    }
    if (header != expected) {
        throw std::invalid_argument(source_name +
                                    ": header must be exactly 'layer_index,fid,hdd', got '" +
                                    strip_cr(line) + "'");
    }

    MetricsTable t;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string row = strip_cr(line);
        if (row.empty()) continue;
        const std::vector<std::string> f = split_fields(row);
        if (f.size() != 3) fail(source_name, line_no, "expected 3 fields, got " + std::to_string(f.size()));
        int64_t layer = 0;
        double fid = 0.0, hdd = 0.0;
        try {
            size_t pos = 0;
            layer = std::stoll(f[0], &pos);
            if (pos != f[0].size()) throw std::invalid_argument("trailing junk");
            fid = std::stod(f[1]);
            hdd = std::stod(f[2]);
        } catch (const std::invalid_argument&) {
            fail(source_name, line_no, "malformed row '" + row + "'");
        } catch (const std::out_of_range&) {
            fail(source_name, line_no, "value out of range in row '" + row + "'");
        }
        if (!std::isfinite(fid) || !std::isfinite(hdd) || fid < 0.0 || hdd < 0.0) {
            fail(source_name, line_no, "metric values must be finite and >= 0");
        }
        t.layers.push_back(layer);
        t.fid.push_back(fid);
        t.hdd.push_back(hdd);
    }
    if (t.layers.empty()) {
        throw std::invalid_argument(source_name + ": no data rows");
    }

    // Normalize to 0-based contiguous indices.
    const auto [lo_it, hi_it] = std::minmax_element(t.layers.begin(), t.layers.end());
    const int64_t lo = *lo_it, hi = *hi_it;
    const int64_t n = int64_t(t.layers.size());
    if (lo != 0 && lo != 1) {
        throw std::invalid_argument(source_name + ": layer indices must start at 0 or 1, got " +
                                    std::to_string(lo));
    }
    if (hi - lo + 1 != n) {
        throw std::invalid_argument(source_name + ": layer indices must be contiguous (" +
                                    std::to_string(n) + " rows spanning [" + std::to_string(lo) +
                                    ", " + std::to_string(hi) + "])");
    }
    std::vector<bool> seen(size_t(n), false);
    for (auto& l : t.layers) {
        l -= lo;
        if (seen[size_t(l)]) {
            throw std::invalid_argument(source_name + ": duplicate layer index " +
                                        std::to_string(l + lo));
        }
        seen[size_t(l)] = true;
    }
    return t;
}

MetricsTable read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open metrics file: " + path);
    return parse_metrics_csv(in, path);
}

void write_metrics_csv(const std::string& path, const MetricsTable& table) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write metrics file: " + path);
    out << "layer_index,fid,hdd\n";
    out.precision(17);
    for (size_t i = 0; i < table.size(); ++i) {
        out << table.layers[i] << "," << table.fid[i] << "," << table.hdd[i] << "\n";
    }
}

}  // namespace relactrl
