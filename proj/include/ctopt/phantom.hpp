#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "ctopt/geometry.hpp"
#include "ctopt/vec3.hpp"

namespace ctopt {

/// Regular voxel grid: cubic voxels of edge voxel_size_m, origin_m is the
/// center of voxel (0,0,0). Shared by phantoms and reconstructed volumes.
struct GridSpec {
    std::array<int, 3> dims{0, 0, 0};  // nx, ny, nz
    double voxel_size_m = 0.0;
    Vec3 origin_m;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int ix, int iy, int iz) const {
        return static_cast<std::size_t>(ix) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(iy) +
                    static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(iz));
    }
    Vec3 voxel_center(int ix, int iy, int iz) const {
        return origin_m + Vec3{ix * voxel_size_m, iy * voxel_size_m, iz * voxel_size_m};
    }
    /// Lower corner of the grid volume (face of voxel (0,0,0)).
    Vec3 lower_corner() const {
        return origin_m - Vec3{0.5 * voxel_size_m, 0.5 * voxel_size_m, 0.5 * voxel_size_m};
    }
    Vec3 upper_corner() const {
        Vec3 lo = lower_corner();
        return lo + Vec3{dims[0] * voxel_size_m, dims[1] * voxel_size_m,
                         dims[2] * voxel_size_m};
    }

    void validate() const;
    bool operator==(const GridSpec&) const = default;
};

/// Voxelized object: linear attenuation coefficient per voxel, 1/m.
struct Phantom {
    GridSpec grid;
    std::vector<double> mu;

    double at(int ix, int iy, int iz) const { return mu[grid.index(ix, iy, iz)]; }
};

enum class ShapeKind { box, sphere, cylinder };

/// Analytic primitive used to rasterize phantoms. Box uses half_extents,
/// sphere uses radius, cylinder uses radius + axis + height (full length,
/// centered on `center`).
struct ShapeSpec {
    ShapeKind kind = ShapeKind::box;
    Vec3 center;
    Vec3 half_extents;  // box
    double radius = 0.0;         // sphere, cylinder
    UnitVec axis = UnitVec::from_components(0, 0, 1);  // cylinder
    double height = 0.0;         // cylinder
    double mu_value = 0.0;       // 1/m

    bool contains(const Vec3& p) const;
    void validate() const;
};

/// Transmission image of one view: dimensionless I/I0 per pixel, in [0,1].
struct ProjectionImage {
    int view_id = 0;
    int pixels_u = 0;
    int pixels_v = 0;
    std::vector<double> values;  // index iv * pixels_u + iu

    double at(int iu, int iv) const {
        return values[static_cast<std::size_t>(iv) * pixels_u + iu];
    }
};

/// Inclusive pixel rectangle on a detector.
struct PixelRect {
    int u0 = 0;
    int v0 = 0;
    int u1 = -1;
    int v1 = -1;

    bool empty() const { return u1 < u0 || v1 < v0; }
    std::size_t pixel_count() const {
        return empty() ? 0
                       : static_cast<std::size_t>(u1 - u0 + 1) *
                             static_cast<std::size_t>(v1 - v0 + 1);
    }
    bool operator==(const PixelRect&) const = default;
};

/// Rasterize shapes onto the grid: each voxel takes the mu of the LAST
/// shape (list order) containing its center, 0 where none does.
Phantom build_phantom(const GridSpec& grid, const std::vector<ShapeSpec>& shapes);

/// Optical depth along the segment p0 -> p1: exact voxel traversal, sum of
/// mu * intersection-length over traversed voxels. 0 when the segment
/// misses the grid entirely.
double line_integral(const Phantom& phantom, const Vec3& p0, const Vec3& p1);

/// Visit every voxel the segment crosses with its intersection length.
/// Shared by line_integral and the SART forward/back pair so the operator
/// pair stays matched.
void traverse_voxels(const GridSpec& grid, const Vec3& p0, const Vec3& p1,
                     const std::function<void(std::size_t, double)>& visit);

/// Monochromatic noiseless Beer-Lambert projection: per pixel center q,
/// value = exp(-line_integral(source, q)).
ProjectionImage simulate_projection(const Phantom& phantom, const ViewCandidate& view);

/// Minimal axis-aligned pixel rectangle containing the projections of the
/// 6 axis-extreme points of the VOI sphere, clamped to detector bounds.
/// Throws RoiNotVisibleError when the VOI center is behind the source or
/// projects off the detector.
PixelRect project_voi_roi(const ViewCandidate& view, const Voi& voi);

/// Absorbed fraction over the ROI: 1 - mean(transmission). Larger means
/// more attenuation; feasibility is absorption <= alpha.
double absorption_metric(const ProjectionImage& projection, const PixelRect& roi);

}  // namespace ctopt
