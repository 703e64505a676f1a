#include "ctopt/recon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctopt {

namespace {

constexpr double kLogClamp = 1e-12;

void check_same_geometry(const GridSpec& a, const GridSpec& b) {
    if (!(a == b)) throw std::invalid_argument("volume geometries differ");
}

// Bounding box (inclusive) of the true voxels.
struct Box {
    int lo[3];
    int hi[3];
};

Box roi_bounding_box(const RoiMask& roi) {
    Box b{{0, 0, 0}, {-1, -1, -1}};
    bool any = false;
    const auto& g = roi.grid;
    for (int iz = 0; iz < g.dims[2]; ++iz) {
        for (int iy = 0; iy < g.dims[1]; ++iy) {
            for (int ix = 0; ix < g.dims[0]; ++ix) {
                if (!roi.inside[g.index(ix, iy, iz)]) continue;
                if (!any) {
                    b.lo[0] = b.hi[0] = ix;
                    b.lo[1] = b.hi[1] = iy;
                    b.lo[2] = b.hi[2] = iz;
                    any = true;
                } else {
                    b.lo[0] = std::min(b.lo[0], ix);
                    b.hi[0] = std::max(b.hi[0], ix);
                    b.lo[1] = std::min(b.lo[1], iy);
                    b.hi[1] = std::max(b.hi[1], iy);
                    b.lo[2] = std::min(b.lo[2], iz);
                    b.hi[2] = std::max(b.hi[2], iz);
                }
            }
        }
    }
    if (!any) throw std::invalid_argument("roi mask has no true voxel");
    return b;
}

}  // namespace

std::size_t RoiMask::true_count() const {
    std::size_t n = 0;
    for (char c : inside) n += (c != 0);
    return n;
}

RoiMask sphere_mask(const GridSpec& grid, const Vec3& center, double radius_m) {
    grid.validate();
    RoiMask mask;
    mask.grid = grid;
    mask.inside.assign(grid.voxel_count(), 0);
    const double r2 = radius_m * radius_m;
    for (int iz = 0; iz < grid.dims[2]; ++iz) {
        for (int iy = 0; iy < grid.dims[1]; ++iy) {
            for (int ix = 0; ix < grid.dims[0]; ++ix) {
                const Vec3 d = grid.voxel_center(ix, iy, iz) - center;
                if (d.dot(d) <= r2) mask.inside[grid.index(ix, iy, iz)] = 1;
            }
        }
    }
    return mask;
}

RoiMask shell_mask(const GridSpec& grid, const Vec3& center, double r_inner_m,
                   double r_outer_m) {
    grid.validate();
    RoiMask mask;
    mask.grid = grid;
    mask.inside.assign(grid.voxel_count(), 0);
    const double ri2 = r_inner_m * r_inner_m;
    const double ro2 = r_outer_m * r_outer_m;
    for (int iz = 0; iz < grid.dims[2]; ++iz) {
        for (int iy = 0; iy < grid.dims[1]; ++iy) {
            for (int ix = 0; ix < grid.dims[0]; ++ix) {
                const Vec3 d = grid.voxel_center(ix, iy, iz) - center;
                const double d2 = d.dot(d);
                if (d2 > ri2 && d2 <= ro2) mask.inside[grid.index(ix, iy, iz)] = 1;
            }
        }
    }
    return mask;
}

namespace {

// Sparse system row: voxel indices and intersection lengths of one ray.
struct Ray {
    Vec3 source;
    Vec3 pixel;
    double measurement = 0.0;  // p = -ln(T)
};

}  // namespace

SartResult sart_reconstruct(const std::vector<ProjectionImage>& projections,
                            const std::vector<ViewCandidate>& views,
                            const GridSpec& grid, int n_iters, double relaxation) {
    grid.validate();
    if (n_iters < 1) throw std::invalid_argument("n_iters must be >= 1");
    if (!(relaxation > 0.0) || relaxation > 1.0) {
        throw std::invalid_argument("relaxation must lie in (0, 1]");
    }
    if (projections.size() != views.size()) {
        throw std::invalid_argument("projection/view count mismatch");
    }

    // Pair projections with views by id, process in ascending view id.
    std::vector<std::size_t> order(views.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return views[a].id < views[b].id;
    });
    for (std::size_t i : order) {
        if (projections[i].view_id != views[i].id) {
            throw std::invalid_argument("projection ids do not match view ids");
        }
    }

    const std::size_t n_voxels = grid.voxel_count();
    Volume vol;
    vol.grid = grid;
    vol.values.assign(n_voxels, 0.0);

    // Precompute measurement rays per view.
    std::vector<std::vector<Ray>> view_rays(views.size());
    for (std::size_t vi = 0; vi < views.size(); ++vi) {
        const auto& view = views[vi];
        view.validate();
        const auto& img = projections[vi];
        if (img.pixels_u != view.detector.pixels_u ||
            img.pixels_v != view.detector.pixels_v) {
            throw std::invalid_argument("projection size does not match detector");
        }
        const double dw = view.detector.pixel_width_m();
        const double dh = view.detector.pixel_height_m();
        const Vec3 u_axis = view.detector_u_axis.vec();
        const Vec3 v_axis = view.detector_v_axis().vec();
        auto& rays = view_rays[vi];
        rays.reserve(static_cast<std::size_t>(img.pixels_u) * img.pixels_v);
        for (int iv = 0; iv < img.pixels_v; ++iv) {
            const double sv = (iv + 0.5 - 0.5 * img.pixels_v) * dh;
            for (int iu = 0; iu < img.pixels_u; ++iu) {
                const double su = (iu + 0.5 - 0.5 * img.pixels_u) * dw;
                Ray r;
                r.source = view.source_pos;
                r.pixel = view.detector_center + u_axis * su + v_axis * sv;
                r.measurement = -std::log(std::max(img.at(iu, iv), kLogClamp));
                rays.push_back(r);
            }
        }
    }

    SartResult result;
    result.volume = std::move(vol);
    auto& x = result.volume.values;

    auto residual_norm = [&]() {
        double sum2 = 0.0;
        for (const auto& rays : view_rays) {
            for (const auto& ray : rays) {
                double fwd = 0.0;
                traverse_voxels(grid, ray.source, ray.pixel,
                                [&](std::size_t j, double len) { fwd += len * x[j]; });
                const double r = ray.measurement - fwd;
                sum2 += r * r;
            }
        }
        return std::sqrt(sum2);
    };

    result.residual_norms.push_back(residual_norm());

    std::vector<double> numer(n_voxels);
    std::vector<double> denom(n_voxels);

    for (int iter = 0; iter < n_iters; ++iter) {
        for (std::size_t oi : order) {
            const auto& rays = view_rays[oi];
            std::fill(numer.begin(), numer.end(), 0.0);
            std::fill(denom.begin(), denom.end(), 0.0);
            for (const auto& ray : rays) {
                double fwd = 0.0;
                double row_sum = 0.0;
                traverse_voxels(grid, ray.source, ray.pixel,
                                [&](std::size_t j, double len) {
                                    fwd += len * x[j];
                                    row_sum += len;
                                });
                if (row_sum <= 0.0) continue;
                const double update = (ray.measurement - fwd) / row_sum;
                traverse_voxels(grid, ray.source, ray.pixel,
                                [&](std::size_t j, double len) {
                                    numer[j] += len * update;
                                    denom[j] += len;
                                });
            }
            for (std::size_t j = 0; j < n_voxels; ++j) {
                if (denom[j] > 0.0) x[j] += relaxation * numer[j] / denom[j];
            }
        }
        for (double& v : x) v = std::max(v, 0.0);  // clamp after each sweep
        result.residual_norms.push_back(residual_norm());
    }
    return result;
}

double psnr(const Volume& reference, const Volume& test, const RoiMask& roi) {
    check_same_geometry(reference.grid, test.grid);
    check_same_geometry(reference.grid, roi.grid);

    double peak = 0.0;
    double mse = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < roi.inside.size(); ++i) {
        if (!roi.inside[i]) continue;
        peak = std::max(peak, std::abs(reference.values[i]));
        const double d = reference.values[i] - test.values[i];
        mse += d * d;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("roi mask has no true voxel");
    if (peak == 0.0) throw std::invalid_argument("reference is all zero over the roi");
    mse /= static_cast<double>(n);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Volume& reference, const Volume& test, const RoiMask& roi) {
    check_same_geometry(reference.grid, test.grid);
    check_same_geometry(reference.grid, roi.grid);

    constexpr int kWindow = 8;
    const Box box = roi_bounding_box(roi);
    for (int a = 0; a < 3; ++a) {
        if (box.hi[a] - box.lo[a] + 1 < kWindow) {
            throw std::invalid_argument("roi bounding box smaller than ssim window");
        }
    }

    double lmin = std::numeric_limits<double>::infinity();
    double lmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < roi.inside.size(); ++i) {
        if (!roi.inside[i]) continue;
        lmin = std::min(lmin, reference.values[i]);
        lmax = std::max(lmax, reference.values[i]);
    }
    const double L = lmax - lmin;
    const double c1 = (0.01 * L) * (0.01 * L);
    const double c2 = (0.03 * L) * (0.03 * L);

    // 0/0 factors degenerate to 1 (constant windows with zero constants).
    auto factor = [](double num, double den) {
        if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        return num / den;
    };

    const auto& g = reference.grid;
    const double inv_n = 1.0 / (kWindow * kWindow * kWindow);
    double total = 0.0;
    std::size_t n_windows = 0;

    for (int z0 = box.lo[2]; z0 + kWindow - 1 <= box.hi[2]; ++z0) {
        for (int y0 = box.lo[1]; y0 + kWindow - 1 <= box.hi[1]; ++y0) {
            for (int x0 = box.lo[0]; x0 + kWindow - 1 <= box.hi[0]; ++x0) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int dz = 0; dz < kWindow; ++dz) {
                    for (int dy = 0; dy < kWindow; ++dy) {
                        for (int dx = 0; dx < kWindow; ++dx) {
                            const std::size_t idx = g.index(x0 + dx, y0 + dy, z0 + dz);
                            const double a = reference.values[idx];
                            const double b = test.values[idx];
                            sx += a;
                            sy += b;
                            sxx += a * a;
                            syy += b * b;
                            sxy += a * b;
                        }
                    }
                }
                const double mx = sx * inv_n;
                const double my = sy * inv_n;
                const double vx = sxx * inv_n - mx * mx;
                const double vy = syy * inv_n - my * my;
                const double cov = sxy * inv_n - mx * my;
                const double f1 = factor(2.0 * mx * my + c1, mx * mx + my * my + c1);
                const double f2 = factor(2.0 * cov + c2, vx + vy + c2);
                total += f1 * f2;
                ++n_windows;
            }
        }
    }
    return total / static_cast<double>(n_windows);
}

CnrResult cnr(const Volume& volume, const RoiMask& roi, const RoiMask& background) {
    check_same_geometry(volume.grid, roi.grid);
    check_same_geometry(volume.grid, background.grid);

    double roi_sum = 0.0;
    std::size_t roi_n = 0;
    double bg_sum = 0.0;
    std::size_t bg_n = 0;
    for (std::size_t i = 0; i < volume.values.size(); ++i) {
        if (roi.inside[i] && background.inside[i]) {
            throw std::invalid_argument("roi and background masks overlap");
        }
        if (roi.inside[i]) {
            roi_sum += volume.values[i];
            ++roi_n;
        } else if (background.inside[i]) {
            bg_sum += volume.values[i];
            ++bg_n;
        }
    }
    if (roi_n == 0 || bg_n == 0) {
        throw std::invalid_argument("roi and background must be nonempty");
    }
    const double roi_mean = roi_sum / static_cast<double>(roi_n);
    const double bg_mean = bg_sum / static_cast<double>(bg_n);

    double var = 0.0;
    for (std::size_t i = 0; i < volume.values.size(); ++i) {
        if (!background.inside[i]) continue;
        const double d = volume.values[i] - bg_mean;
        var += d * d;
    }
    var /= static_cast<double>(bg_n);  // population variance

    CnrResult r;
    if (var == 0.0) {
        r.value = std::numeric_limits<double>::infinity();
        r.constant_background = true;
    } else {
        r.value = std::abs(roi_mean - bg_mean) / std::sqrt(var);
    }
    return r;
}

}  // namespace ctopt
