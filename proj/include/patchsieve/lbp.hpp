#pragma once

#include "patchsieve/descriptor.hpp"
#include "patchsieve/image.hpp"
#include "patchsieve/tiling.hpp"

#include <vector>

namespace patchsieve {

struct LbpScale {
    double radius = 1.0;
    int neighbors = 8;

    int bins() const { return neighbors + 2; }
    /// Valid pixels lie at least this far from every border.
    int margin() const;
};

struct LbpConfig {
    std::vector<LbpScale> scales{{3.0, 24}, {1.0, 8}};
    bool normalize = true;

    int dim() const;
    void validate() const;
};

/// Circular sample offsets (dx, dy) for one scale. For neighbors divisible by
/// four the offsets are closed under an exact 90° rotation, so rotating the
/// image permutes the samples without rounding differences.
std::vector<Eigen::Vector2d> lbp_offsets(const LbpScale& scale);

/// Rotation-invariant uniform code of the pixel at (x, y) of a grayscale
/// image: the number of neighbors >= center when the circular bit pattern
/// has at most two transitions, `neighbors + 1` otherwise.
int lbp_code(const Image& gray, int x, int y, const LbpScale& scale);

/// Histogram of lbp_code over every valid interior pixel, length
/// neighbors + 2. L1-normalized when `normalize` is set.
Eigen::VectorXd lbp_histogram(const Image& gray, const LbpScale& scale, bool normalize);

/// Concatenated per-scale histograms of a patch (36 values by default).
Descriptor lbp_descriptor(const Patch& patch, const LbpConfig& cfg = {});
Eigen::VectorXd lbp_vector(const Image& image, const LbpConfig& cfg = {});

}  // namespace patchsieve
