#include "tdsearch/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tds {

namespace {

void check_positive_extents(const std::vector<std::size_t>& shape) {
    for (std::size_t e : shape) {
        if (e == 0) throw std::invalid_argument("tensor extent must be positive");
    }
}

}  // namespace

std::size_t shape_product(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    check_positive_extents(shape_);
    data_.assign(shape_product(shape_), 0.0);
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_positive_extents(shape_);
    if (data_.size() != shape_product(shape_)) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape product " +
                                    std::to_string(shape_product(shape_)));
    }
}

DenseTensor DenseTensor::scalar(double value) {
    DenseTensor t;
    t.data_[0] = value;
    return t;
}

std::vector<std::size_t> DenseTensor::strides() const {
    std::vector<std::size_t> s(shape_.size(), 1);
    for (std::size_t k = shape_.size(); k-- > 1;) s[k - 1] = s[k] * shape_[k];
    return s;
}

double DenseTensor::at(std::span<const std::size_t> index) const {
    return const_cast<DenseTensor*>(this)->at(index);
}

double& DenseTensor::at(std::span<const std::size_t> index) {
    if (index.size() != shape_.size()) throw std::invalid_argument("index order mismatch");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
        if (index[k] >= shape_[k]) throw std::out_of_range("tensor index out of range");
        flat = flat * shape_[k] + index[k];
    }
    return data_[flat];
}

DenseTensor reshape(const DenseTensor& t, std::vector<std::size_t> new_shape) {
    check_positive_extents(new_shape);
    if (shape_product(new_shape) != t.size()) {
        throw std::invalid_argument("reshape size mismatch");
    }
    return DenseTensor(std::move(new_shape), t.values());
}

DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> axis_order) {
    const std::size_t d = t.order();
    if (axis_order.size() != d) throw std::invalid_argument("permutation order mismatch");
    std::vector<bool> seen(d, false);
    for (std::size_t a : axis_order) {
        if (a >= d || seen[a]) throw std::invalid_argument("invalid axis permutation");
        seen[a] = true;
    }
    if (d <= 1) return t;

    std::vector<std::size_t> new_shape(d);
    for (std::size_t k = 0; k < d; ++k) new_shape[k] = t.extent(axis_order[k]);

    const std::vector<std::size_t> in_strides = t.strides();
    std::vector<std::size_t> out_axis_in_stride(d);
    for (std::size_t k = 0; k < d; ++k) out_axis_in_stride[k] = in_strides[axis_order[k]];

    DenseTensor out(new_shape);
    std::vector<std::size_t> idx(d, 0);
    const std::size_t n = out.size();
    std::size_t src = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        out[flat] = t[src];
        for (std::size_t k = d; k-- > 0;) {
            ++idx[k];
            src += out_axis_in_stride[k];
            if (idx[k] < new_shape[k]) break;
            idx[k] = 0;
            src -= out_axis_in_stride[k] * new_shape[k];
        }
    }
    return out;
}

double frobenius_norm(const DenseTensor& t) {
    double acc = 0.0;
    for (double v : t.values()) acc += v * v;
    return std::sqrt(acc);
}

double relative_error(const DenseTensor& w, const DenseTensor& w_approx) {
    if (w.shape() != w_approx.shape()) throw std::invalid_argument("relative_error shape mismatch");
    const double denom = frobenius_norm(w);
    if (denom == 0.0) throw std::invalid_argument("relative_error: reference has zero norm");
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = w[i] - w_approx[i];
        acc += d * d;
    }
    return std::sqrt(acc) / denom;
}

double population_variance(const DenseTensor& t) {
    const std::size_t n = t.size();
    double mean = 0.0;
    for (double v : t.values()) mean += v;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (double v : t.values()) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(n);
}

VarianceScaled variance_match_scale(const DenseTensor& w, const DenseTensor& w_approx) {
    if (w.shape() != w_approx.shape()) {
        throw std::invalid_argument("variance_match_scale shape mismatch");
    }
    VarianceScaled result;
    const double var_target = population_variance(w);
    const double var_approx = population_variance(w_approx);
    if (var_approx == 0.0) {
        result.tensor = w_approx;
        return result;
    }
    result.factor = std::sqrt(var_target / var_approx);
    std::vector<double> data = w_approx.values();
    for (double& v : data) v *= result.factor;
    result.tensor = DenseTensor(w_approx.shape(), std::move(data));
    result.scaled = true;
    return result;
}

}  // namespace tds
