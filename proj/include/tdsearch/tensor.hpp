#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tds {

/// Row-major dense tensor of doubles. An empty shape denotes an order-0
/// tensor (scalar) holding exactly one value. Tensors are treated as
/// immutable values once constructed and are safe to share across threads.
class DenseTensor {
public:
    DenseTensor() : data_(1, 0.0) {}
    explicit DenseTensor(std::vector<std::size_t> shape);
    DenseTensor(std::vector<std::size_t> shape, std::vector<double> data);

    static DenseTensor scalar(double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t order() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double& operator[](std::size_t flat) { return data_[flat]; }

    double at(std::span<const std::size_t> index) const;
    double& at(std::span<const std::size_t> index);

    /// Row-major strides, one per axis.
    std::vector<std::size_t> strides() const;

    bool operator==(const DenseTensor& other) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape);

/// Same data sequence under a new shape; products must match.
DenseTensor reshape(const DenseTensor& t, std::vector<std::size_t> new_shape);

/// Reorder axes: result axis k is input axis axis_order[k].
DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> axis_order);

double frobenius_norm(const DenseTensor& t);

/// ||w - w_approx||_F / ||w||_F. Throws when ||w||_F is zero.
double relative_error(const DenseTensor& w, const DenseTensor& w_approx);

/// Element-count-normalized (population) variance.
double population_variance(const DenseTensor& t);

struct VarianceScaled {
    DenseTensor tensor;
    double factor = 1.0;
    bool scaled = false;  ///< false when Var(w_approx) was zero and no scale applied
};

/// Rescale w_approx so its variance matches Var(w). A constant w_approx is
/// returned unscaled with scaled=false.
VarianceScaled variance_match_scale(const DenseTensor& w, const DenseTensor& w_approx);

}  // namespace tds
