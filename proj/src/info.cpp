#include "dinl/info.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dinl {

double empirical_mi(const Tensor2& joint_counts) {
    const std::size_t rows = joint_counts.rows();
    const std::size_t cols = joint_counts.cols();
    std::vector<double> row_sum(rows, 0.0);
    std::vector<double> col_sum(cols, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const double n = joint_counts(r, c);
            if (!std::isfinite(n) || n < 0.0)
                throw std::invalid_argument("empirical_mi: counts must be finite and >= 0");
            row_sum[r] += n;
            col_sum[c] += n;
            total += n;
        }
    if (total <= 0.0) throw std::invalid_argument("empirical_mi: count table is all zero");

    // I = Σ p(x,y) log( n(x,y)·N / (n(x)·n(y)) )
    double mi = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const double n = joint_counts(r, c);
            if (n == 0.0) continue;
            mi += (n / total) * std::log(n * total / (row_sum[r] * col_sum[c]));
        }
    return mi < 0.0 ? 0.0 : mi;
}

}  // namespace dinl
