#include "relactrl/rng.hpp"

#include <cmath>
#include <numeric>

namespace relactrl {

double Stream::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller; u clamped away from 0 so log stays finite.
    double u = next_unit();
    if (u < 1e-300) u = 1e-300;
    double v = next_unit();
    double r = std::sqrt(-2.0 * std::log(u));
    double theta = 2.0 * M_PI * v;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

void Stream::shuffle_indices(std::vector<size_t>& idx) {
    for (size_t i = idx.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(next_below(i));
        std::swap(idx[i - 1], idx[j]);
    }
}

std::vector<size_t> Stream::permutation(size_t n) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    shuffle_indices(idx);
    return idx;
}

}  // namespace relactrl
