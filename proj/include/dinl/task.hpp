#pragma once

// Synthetic distributed binary classification: sensors observe noisy 2-D
// projections of a shared Gaussian latent; the label is the sign of a fixed
// projection of that latent.

#include <cstdint>
#include <string>
#include <vector>

#include "dinl/tensor.hpp"

namespace dinl {

struct TaskSpec {
    std::size_t latent_dim = 4;
    std::size_t sensors = 6;
    std::size_t obs_dim = 2;
    double noise_std = 1.4;
    std::size_t train_size = 120;
    std::size_t val_size = 120;
    std::size_t test_size = 1000;
    std::uint64_t seed = 0;
};

void validate(const TaskSpec& spec);

struct DistributedSample {
    std::vector<double> observations;  // sensors × obs_dim, sensor-major
    int label = 0;
};

struct Dataset {
    std::size_t sensors = 0;
    std::size_t obs_dim = 0;
    std::vector<DistributedSample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    /// Observations of one sensor for the given sample indices (rows).
    Tensor2 sensor_batch(std::size_t sensor, const std::vector<std::size_t>& rows) const;
    Tensor2 label_batch(const std::vector<std::size_t>& rows) const;
    /// All samples as a flat (N × sensors·obs_dim) design matrix.
    Tensor2 design_matrix() const;
};

struct TaskSplits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Generator parameters drawn for a seed: label direction w (unit norm)
/// and per-sensor projections A_j with unit-norm rows.
struct TaskModel {
    std::vector<double> label_direction;
    std::vector<Tensor2> projections;
};

TaskModel draw_task_model(const TaskSpec& spec);
TaskSplits generate(const TaskSpec& spec);

/// Fraction of positive labels; throws std::invalid_argument when empty.
double label_balance(const Dataset& data);

/// One row per sample: sensors·obs_dim observation scalars then the label.
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path, std::size_t sensors, std::size_t obs_dim);

}  // namespace dinl
