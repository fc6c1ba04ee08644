#ifndef DXANN_TENSOR_HPP
#define DXANN_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dxann {

// Dense row-major array of doubles with shape metadata. A scalar has an
// empty shape and one element.
class Tensor {
public:
    Tensor() : data_(1, 0.0) {}

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(count(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_))
            throw std::invalid_argument("Tensor: data length " +
                                        std::to_string(data_.size()) +
                                        " does not match shape " + shape_str());
    }

    static Tensor scalar(double v) {
        Tensor t;
        t.data_[0] = v;
        return t;
    }

    static Tensor vector(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor({n}, std::move(v));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool is_scalar() const { return shape_.empty(); }
    double item() const {
        if (data_.size() != 1)
            throw std::invalid_argument("Tensor::item on non-scalar of shape " + shape_str());
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) os << ',';
            os << shape_[i];
        }
        os << ']';
        return os.str();
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
}

}  // namespace dxann

#endif
