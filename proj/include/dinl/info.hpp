#pragma once

#include "dinl/tensor.hpp"

namespace dinl {

/// Plug-in mutual information (nats) of the empirical joint distribution
/// given by a K × M table of nonnegative counts. 0·log 0 = 0. Throws
/// std::invalid_argument for negative/non-finite entries or an all-zero table.
double empirical_mi(const Tensor2& joint_counts);

}  // namespace dinl
