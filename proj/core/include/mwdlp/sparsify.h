#pragma once

#include <array>

#include "mwdlp/tensor.h"

namespace mwdlp {

// Progressive magnitude pruning of the sparse GRU recurrent kernels.
// Gate order everywhere: update, reset, new.
struct SparsitySchedule {
    std::array<double, 3> target_density = {0.09, 0.09, 0.12};
    long start_step = 0;
    long end_step = 0;
    long rerank_interval = 1000;  // re-rank cadence during the anneal
    int block_rows = 16;          // 16x1 blocks: 16 output rows, 1 input column

    double average_target() const {
        return (target_density[0] + target_density[1] + target_density[2]) / 3.0;
    }
    void validate() const;
};

// 1.0 before start; cubic decay to the target across [start, end]; target after.
double density_at(long step, double target, const SparsitySchedule& sched);

// Keep the top `density` fraction of 16x1 blocks by L2 norm; blocks covering
// the diagonal are always kept (counted inside the budget). Returns the 0/1
// mask; `weights` is [units, units] with rows divisible by block_rows.
Tensor prune(const Tensor& weights, double density, int block_rows = 16);

// Measured fraction of nonzero mask entries.
double mask_density(const Tensor& mask);

}  // namespace mwdlp
