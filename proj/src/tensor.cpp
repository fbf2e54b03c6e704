#include "dinl/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace dinl {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::string shape_string(const Tensor2& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(what) + ": shape " + shape_string(a) + " vs " + shape_string(b));
}

Tensor2 concat_cols(std::span<const Tensor2> parts) {
    if (parts.empty()) return {};
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const Tensor2& p : parts) {
        if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
        cols += p.cols();
    }
    Tensor2 out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t offset = 0;
        for (const Tensor2& p : parts) {
            std::copy_n(p.row(r).begin(), p.cols(), out.row(r).begin() + offset);
            offset += p.cols();
        }
    }
    return out;
}

std::vector<Tensor2> split_cols(const Tensor2& t, std::span<const std::size_t> widths) {
    std::size_t total = 0;
    for (std::size_t w : widths) total += w;
    if (total != t.cols()) throw ShapeError("split_cols: widths do not sum to " + std::to_string(t.cols()));
    std::vector<Tensor2> out;
    std::size_t offset = 0;
    for (std::size_t w : widths) {
        out.push_back(slice_cols(t, offset, w));
        offset += w;
    }
    return out;
}

Tensor2 slice_cols(const Tensor2& t, std::size_t begin, std::size_t width) {
    if (begin + width > t.cols()) throw ShapeError("slice_cols: range exceeds " + shape_string(t));
    Tensor2 out(t.rows(), width);
    for (std::size_t r = 0; r < t.rows(); ++r)
        std::copy_n(t.row(r).begin() + begin, width, out.row(r).begin());
    return out;
}

void add_inplace(Tensor2& acc, const Tensor2& x) {
    require_same_shape(acc, x, "add_inplace");
    auto a = acc.values();
    auto b = x.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void scale_inplace(Tensor2& t, double factor) {
    for (double& v : t.values()) v *= factor;
}

}  // namespace dinl
