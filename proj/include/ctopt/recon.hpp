#pragma once

#include <cstddef>
#include <vector>

#include "ctopt/geometry.hpp"
#include "ctopt/phantom.hpp"

namespace ctopt {

/// Reconstructed attenuation volume (same grid convention as Phantom).
struct Volume {
    GridSpec grid;
    std::vector<double> values;

    double at(int ix, int iy, int iz) const { return values[grid.index(ix, iy, iz)]; }
};

/// Per-voxel boolean mask over a Volume geometry.
struct RoiMask {
    GridSpec grid;
    std::vector<char> inside;

    std::size_t true_count() const;
};

/// Spherical mask of the given radius around a center.
RoiMask sphere_mask(const GridSpec& grid, const Vec3& center, double radius_m);

/// Spherical shell r_inner < dist <= r_outer (disjoint from its inner
/// sphere); the default CNR background region.
RoiMask shell_mask(const GridSpec& grid, const Vec3& center, double r_inner_m,
                   double r_outer_m);

struct SartResult {
    Volume volume;
    /// Residual 2-norm ||p - A x|| over all views, recorded after each
    /// full sweep (and once before the first).
    std::vector<double> residual_norms;
};

/// SART: converts transmissions to line integrals p = -ln(max(value, 1e-12)),
/// then view-by-view simultaneous updates using the same voxel traversal
/// as the projector (matched forward/back pair). Views are processed in
/// ascending id; negatives are clamped to zero after each full sweep.
SartResult sart_reconstruct(const std::vector<ProjectionImage>& projections,
                            const std::vector<ViewCandidate>& views,
                            const GridSpec& grid, int n_iters, double relaxation);

/// 10*log10(peak^2 / MSE) over the ROI, peak = max |reference| in the ROI.
/// Returns +infinity when test matches reference exactly on the ROI.
double psnr(const Volume& reference, const Volume& test, const RoiMask& roi);

/// Mean local SSIM over the ROI bounding box: 8-voxel cubic windows,
/// stride 1, windows fully inside the box. L = max - min of the reference
/// over the ROI; C1 = (0.01 L)^2, C2 = (0.03 L)^2.
double ssim(const Volume& reference, const Volume& test, const RoiMask& roi);

struct CnrResult {
    double value = 0.0;
    /// Set when std(background) == 0; value is then +infinity.
    bool constant_background = false;
};

/// |mean(roi) - mean(background)| / population std(background).
CnrResult cnr(const Volume& volume, const RoiMask& roi, const RoiMask& background);

}  // namespace ctopt
