#ifndef RELACTRL_SVG_HPP
#define RELACTRL_SVG_HPP

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace relactrl {

// Minimal hand-rolled bar chart: layer index on x, score on y, selected bars
// highlighted. No plotting dependency.
void write_score_bar_chart(const std::string& path, const std::string& title,
                           const std::vector<int64_t>& layers,
                           const std::vector<double>& scores,
                           const std::set<int64_t>& highlighted);

}  // namespace relactrl

#endif
