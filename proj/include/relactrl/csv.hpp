#ifndef RELACTRL_CSV_HPP
#define RELACTRL_CSV_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace relactrl {

// Skip-study metric table. The header is mandatory and exact
// (`layer_index,fid,hdd`); positional parsing is rejected so transposed
// columns cannot slip through. Indices may arrive 0- or 1-based and are
// normalized to 0-based.
struct MetricsTable {
    std::vector<int64_t> layers;  // 0-based, contiguous
    std::vector<double> fid;
    std::vector<double> hdd;

    size_t size() const { return layers.size(); }
};

MetricsTable read_metrics_csv(const std::string& path);
MetricsTable parse_metrics_csv(std::istream& in, const std::string& source_name);

void write_metrics_csv(const std::string& path, const MetricsTable& table);

}  // namespace relactrl

#endif
