#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lossland {

// Thrown when an op's inputs have incompatible dimensions.
class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

std::string shape_str(const std::vector<int> &shape);
int64_t shape_numel(const std::vector<int> &shape);

// Dense row-major float32 tensor.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
    }
    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, float v) {
        Tensor t(std::move(s));
        for (auto &x : t.data) x = v;
        return t;
    }
    static Tensor scalar(float v) { return Tensor({1}, {v}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<size_t>(i)); }
    bool same_shape(const Tensor &o) const { return shape == o.shape; }

    float *ptr() { return data.data(); }
    const float *ptr() const { return data.data(); }
};

}  // namespace lossland
