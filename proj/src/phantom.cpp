#include "ctopt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctopt/errors.hpp"

namespace ctopt {

void GridSpec::validate() const {
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
        throw std::invalid_argument("grid dims must each be >= 1");
    }
    if (!(voxel_size_m > 0.0)) {
        throw std::invalid_argument("voxel size must be positive");
    }
}

bool ShapeSpec::contains(const Vec3& p) const {
    const Vec3 d = p - center;
    switch (kind) {
        case ShapeKind::box:
            return std::abs(d.x) <= half_extents.x && std::abs(d.y) <= half_extents.y &&
                   std::abs(d.z) <= half_extents.z;
        case ShapeKind::sphere:
            return d.dot(d) <= radius * radius;
        case ShapeKind::cylinder: {
            const double a = d.dot(axis.vec());
            if (std::abs(a) > 0.5 * height) return false;
            const Vec3 radial = d - axis.vec() * a;
            return radial.dot(radial) <= radius * radius;
        }
    }
    return false;
}

void ShapeSpec::validate() const {
    if (mu_value < 0.0) throw std::invalid_argument("shape mu_value must be >= 0");
    switch (kind) {
        case ShapeKind::box:
            if (!(half_extents.x > 0.0) || !(half_extents.y > 0.0) ||
                !(half_extents.z > 0.0)) {
                throw std::invalid_argument("box half extents must be positive");
            }
            break;
        case ShapeKind::sphere:
            if (!(radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
            break;
        case ShapeKind::cylinder:
            if (!(radius > 0.0) || !(height > 0.0)) {
                throw std::invalid_argument("cylinder radius and height must be positive");
            }
            break;
    }
}

Phantom build_phantom(const GridSpec& grid, const std::vector<ShapeSpec>& shapes) {
    grid.validate();
    for (const auto& s : shapes) s.validate();

    Phantom ph;
    ph.grid = grid;
    ph.mu.assign(grid.voxel_count(), 0.0);

    for (int iz = 0; iz < grid.dims[2]; ++iz) {
        for (int iy = 0; iy < grid.dims[1]; ++iy) {
            for (int ix = 0; ix < grid.dims[0]; ++ix) {
                const Vec3 c = grid.voxel_center(ix, iy, iz);
                double value = 0.0;
                for (const auto& s : shapes) {
                    if (s.contains(c)) value = s.mu_value;  // last shape wins
                }
                ph.mu[grid.index(ix, iy, iz)] = value;
            }
        }
    }
    return ph;
}

void traverse_voxels(const GridSpec& grid, const Vec3& p0, const Vec3& p1,
                     const std::function<void(std::size_t, double)>& visit) {
    const Vec3 seg = p1 - p0;
    const double length = seg.norm();
    if (length == 0.0) throw std::invalid_argument("segment endpoints coincide");
    const Vec3 dir = seg / length;  // unit direction; parameter s is metric

    const Vec3 lo = grid.lower_corner();
    const Vec3 hi = grid.upper_corner();

    // Slab clip of [0, length] against the grid box.
    double s_enter = 0.0;
    double s_exit = length;
    for (int a = 0; a < 3; ++a) {
        const double d = dir[a];
        const double o = p0[a];
        if (d == 0.0) {
            if (o < lo[a] || o > hi[a]) return;
            continue;
        }
        double s0 = (lo[a] - o) / d;
        double s1 = (hi[a] - o) / d;
        if (s0 > s1) std::swap(s0, s1);
        s_enter = std::max(s_enter, s0);
        s_exit = std::min(s_exit, s1);
    }
    if (s_enter >= s_exit) return;

    // Entry voxel straight from the entry position. An entry point exactly
    // on a face may land in the neighboring voxel; the resulting
    // zero-length first segment is skipped and the walk corrects itself at
    // the same parameter value.
    const double h = grid.voxel_size_m;
    int idx[3];
    int step[3];
    double s_next[3];  // s of next boundary crossing per axis
    for (int a = 0; a < 3; ++a) {
        const double c = (p0[a] + dir[a] * s_enter - lo[a]) / h;
        idx[a] = std::clamp(static_cast<int>(std::floor(c)), 0, grid.dims[a] - 1);
        if (dir[a] > 0.0) {
            step[a] = 1;
            s_next[a] = ((lo[a] + (idx[a] + 1) * h) - p0[a]) / dir[a];
        } else if (dir[a] < 0.0) {
            step[a] = -1;
            s_next[a] = ((lo[a] + idx[a] * h) - p0[a]) / dir[a];
        } else {
            step[a] = 0;
            s_next[a] = std::numeric_limits<double>::infinity();
        }
    }

    double s = s_enter;
    for (;;) {
        int axis = 0;
        if (s_next[1] < s_next[axis]) axis = 1;
        if (s_next[2] < s_next[axis]) axis = 2;
        const double s_stop = std::min(s_next[axis], s_exit);
        if (s_stop > s) {
            visit(grid.index(idx[0], idx[1], idx[2]), s_stop - s);
            s = s_stop;
        }
        if (s_next[axis] >= s_exit) break;
        idx[axis] += step[axis];
        if (idx[axis] < 0 || idx[axis] >= grid.dims[axis]) break;
        s_next[axis] += h / std::abs(dir[axis]);
    }
}

double line_integral(const Phantom& phantom, const Vec3& p0, const Vec3& p1) {
    double depth = 0.0;
    traverse_voxels(phantom.grid, p0, p1,
                    [&](std::size_t idx, double len) { depth += phantom.mu[idx] * len; });
    return depth;
}

ProjectionImage simulate_projection(const Phantom& phantom, const ViewCandidate& view) {
    view.validate();
    const int pu = view.detector.pixels_u;
    const int pv = view.detector.pixels_v;
    const double dw = view.detector.pixel_width_m();
    const double dh = view.detector.pixel_height_m();
    const Vec3 u_axis = view.detector_u_axis.vec();
    const Vec3 v_axis = view.detector_v_axis().vec();

    ProjectionImage img;
    img.view_id = view.id;
    img.pixels_u = pu;
    img.pixels_v = pv;
    img.values.resize(static_cast<std::size_t>(pu) * pv);

    for (int iv = 0; iv < pv; ++iv) {
        const double sv = (iv + 0.5 - 0.5 * pv) * dh;
        for (int iu = 0; iu < pu; ++iu) {
            const double su = (iu + 0.5 - 0.5 * pu) * dw;
            const Vec3 q = view.detector_center + u_axis * su + v_axis * sv;
            const double depth = line_integral(phantom, view.source_pos, q);
            img.values[static_cast<std::size_t>(iv) * pu + iu] = std::exp(-depth);
        }
    }
    return img;
}

namespace {

// Detector-plane coordinates (su, sv) of the central projection of P;
// throws when P is on or behind the source plane.
struct PlanePoint {
    double su;
    double sv;
};

PlanePoint project_point(const ViewCandidate& view, const Vec3& p) {
    const Vec3 dir = p - view.source_pos;
    const double denom = dir.dot(view.detector_normal.vec());
    if (denom == 0.0) {
        throw RoiNotVisibleError("projection ray parallel to detector plane");
    }
    const double t =
        (view.detector_center - view.source_pos).dot(view.detector_normal.vec()) / denom;
    if (t <= 0.0) {
        throw RoiNotVisibleError("point does not project forward onto the detector");
    }
    const Vec3 hit = view.source_pos + dir * t;
    const Vec3 local = hit - view.detector_center;
    return {local.dot(view.detector_u_axis.vec()),
            local.dot(view.detector_v_axis().vec())};
}

}  // namespace

PixelRect project_voi_roi(const ViewCandidate& view, const Voi& voi) {
    view.validate();
    voi.validate();

    const double half_w = 0.5 * view.detector.width_m;
    const double half_h = 0.5 * view.detector.height_m;

    const PlanePoint c = project_point(view, voi.center);
    if (std::abs(c.su) > half_w || std::abs(c.sv) > half_h) {
        throw RoiNotVisibleError("voi center projects off the detector");
    }

    const double dw = view.detector.pixel_width_m();
    const double dh = view.detector.pixel_height_m();
    auto pixel_u = [&](double su) {
        int i = static_cast<int>(std::floor((su + half_w) / dw));
        return std::clamp(i, 0, view.detector.pixels_u - 1);
    };
    auto pixel_v = [&](double sv) {
        int i = static_cast<int>(std::floor((sv + half_h) / dh));
        return std::clamp(i, 0, view.detector.pixels_v - 1);
    };

    PixelRect rect;
    rect.u0 = rect.u1 = pixel_u(c.su);
    rect.v0 = rect.v1 = pixel_v(c.sv);

    const double r = voi.roi_radius_m;
    const Vec3 offs[6] = {{r, 0, 0}, {-r, 0, 0}, {0, r, 0},
                          {0, -r, 0}, {0, 0, r}, {0, 0, -r}};
    for (const Vec3& o : offs) {
        const PlanePoint p = project_point(view, voi.center + o);
        const double su = std::clamp(p.su, -half_w, half_w);
        const double sv = std::clamp(p.sv, -half_h, half_h);
        rect.u0 = std::min(rect.u0, pixel_u(su));
        rect.u1 = std::max(rect.u1, pixel_u(su));
        rect.v0 = std::min(rect.v0, pixel_v(sv));
        rect.v1 = std::max(rect.v1, pixel_v(sv));
    }
    return rect;
}

double absorption_metric(const ProjectionImage& projection, const PixelRect& roi) {
    if (roi.empty()) throw std::invalid_argument("roi rectangle is empty");
    if (roi.u0 < 0 || roi.v0 < 0 || roi.u1 >= projection.pixels_u ||
        roi.v1 >= projection.pixels_v) {
        throw std::invalid_argument("roi rectangle exceeds image bounds");
    }
    double sum = 0.0;
    for (int iv = roi.v0; iv <= roi.v1; ++iv) {
        for (int iu = roi.u0; iu <= roi.u1; ++iu) {
            sum += projection.at(iu, iv);
        }
    }
    return 1.0 - sum / static_cast<double>(roi.pixel_count());
}

}  // namespace ctopt
