#include "mwdlp/sparsify.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mwdlp {

void SparsitySchedule::validate() const {
    for (double d : target_density)
        if (d <= 0.0 || d > 1.0) throw std::invalid_argument("target density must be in (0,1]");
    if (end_step < start_step) throw std::invalid_argument("sparsity end before start");
    if (rerank_interval < 1) throw std::invalid_argument("rerank interval must be positive");
}

double density_at(long step, double target, const SparsitySchedule& sched) {
    if (step < sched.start_step) return 1.0;
    if (step >= sched.end_step) return target;
    const double tau =
        double(step - sched.start_step) / double(sched.end_step - sched.start_step);
    const double r = 1.0 - tau;
    return target + (1.0 - target) * r * r * r;
}

Tensor prune(const Tensor& weights, double density, int block_rows) {
    if (density <= 0.0 || density > 1.0) throw std::invalid_argument("prune: density out of range");
    if (weights.rows % block_rows != 0)
        throw std::invalid_argument("prune: rows not divisible by block height");

    const int rblocks = weights.rows / block_rows;
    const int cols = weights.cols;
    const long total = long(rblocks) * cols;

    struct Block {
        double norm_sq;
        int rb, col;
    };
    std::vector<Block> blocks;
    blocks.reserve(size_t(total));
    std::vector<char> forced(size_t(total), 0);
    for (int rb = 0; rb < rblocks; ++rb) {
        for (int c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int i = 0; i < block_rows; ++i) {
                const double v = weights.at(rb * block_rows + i, c);
                s += v * v;
            }
            // Diagonal-covering blocks are exempt from pruning.
            const bool diag = c >= rb * block_rows && c < (rb + 1) * block_rows && c < weights.rows;
            if (diag) forced[size_t(rb) * cols + c] = 1;
            blocks.push_back({s, rb, c});
        }
    }

    long keep = std::lround(density * double(total));
    keep = std::clamp(keep, 1L, total);

    Tensor mask(weights.rows, weights.cols, 0.0);
    long kept = 0;
    for (int rb = 0; rb < rblocks && kept < keep; ++rb) {
        for (int c = 0; c < cols && kept < keep; ++c) {
            if (forced[size_t(rb) * cols + c]) {
                for (int i = 0; i < block_rows; ++i) mask.at(rb * block_rows + i, c) = 1.0;
                ++kept;
            }
        }
    }

    // Rank the rest by norm, ties broken by position for determinism.
    std::sort(blocks.begin(), blocks.end(), [cols](const Block& a, const Block& b) {
        if (a.norm_sq != b.norm_sq) return a.norm_sq > b.norm_sq;
        return long(a.rb) * cols + a.col < long(b.rb) * cols + b.col;
    });
    for (const Block& b : blocks) {
        if (kept >= keep) break;
        if (forced[size_t(b.rb) * cols + b.col]) continue;
        for (int i = 0; i < block_rows; ++i) mask.at(b.rb * block_rows + i, b.col) = 1.0;
        forced[size_t(b.rb) * cols + b.col] = 1;  // reuse as "kept" marker
        ++kept;
    }
    return mask;
}

double mask_density(const Tensor& mask) {
    double nz = 0.0;
    for (double v : mask.v) nz += (v != 0.0) ? 1.0 : 0.0;
    return nz / double(mask.size());
}

}  // namespace mwdlp
