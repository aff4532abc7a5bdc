#ifndef RELACTRL_TENSOR_HPP
#define RELACTRL_TENSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace relactrl {

// Dense 64-bit float tensor, row-major flat storage. Shapes are explicit;
// there are no strides and no broadcasting beyond what the ops define.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape_, double fill = 0.0);
    Tensor(std::vector<int64_t> shape_, std::vector<double> data_);

    int64_t numel() const;
    int64_t dim(size_t i) const { return shape.at(i); }
    size_t rank() const { return shape.size(); }

    double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return data[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;

    static Tensor zeros(std::vector<int64_t> shape_) { return Tensor(std::move(shape_), 0.0); }
    static Tensor identity(int64_t n);
};

std::string shape_to_string(const std::vector<int64_t>& shape);
int64_t shape_numel(const std::vector<int64_t>& shape);

// Throws std::invalid_argument naming `what` if any element is NaN/Inf.
void require_finite(const Tensor& t, const char* what);

// Bitwise equality (memcmp on the payload); shapes must match too.
bool bit_equal(const Tensor& a, const Tensor& b);

double max_abs_diff(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& t);

}  // namespace relactrl

#endif
