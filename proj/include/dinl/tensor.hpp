#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dinl {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-major batch × features matrix of doubles.
class Tensor2 {
public:
    Tensor2() = default;
    Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void fill(double v);
    bool all_finite() const;

    friend bool operator==(const Tensor2&, const Tensor2&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_string(const Tensor2& t);
void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what);

/// Column-wise concatenation of equally tall tensors.
Tensor2 concat_cols(std::span<const Tensor2> parts);
/// Splits columns back into blocks of the given widths.
std::vector<Tensor2> split_cols(const Tensor2& t, std::span<const std::size_t> widths);
/// Columns [begin, begin + width).
Tensor2 slice_cols(const Tensor2& t, std::size_t begin, std::size_t width);

void add_inplace(Tensor2& acc, const Tensor2& x);
void scale_inplace(Tensor2& t, double factor);

}  // namespace dinl
