#pragma once

#include "sgs/geom.hpp"
#include "sgs/rng.hpp"

#include <vector>

namespace sgs {

struct Triangle {
    Vec3 a, b, c;
    Vec3 albedo;

    Vec3 normal() const { return (b - a).cross(c - a).normalized(); }
    double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
};

struct TargetMesh {
    std::vector<Triangle> triangles;

    double total_area() const;
    double bounding_radius() const;
};

// Procedural satellite: box bus (1.0 x 0.6 x 0.6 m) plus a thin solar panel
// (2.4 x 0.8 x 0.02 m) offset on +y, distinct albedos, outward windings.
TargetMesh make_satellite_mesh();

/// Area-weighted uniform surface samples. Throws DegenerateMesh.
std::vector<Vec3> sample_surface(const TargetMesh& mesh, size_t n, Rng& rng);

struct RayHit {
    double t = -1.0;
    int triangle = -1;
    bool hit() const { return triangle >= 0; }
};

/// Nearest intersection with t > t_min (Moller-Trumbore).
RayHit intersect_mesh(const TargetMesh& mesh, const Vec3& origin, const Vec3& dir,
                      double t_min = 1e-9);

/// True when the open ray origin + t*dir (t > t_min) hits any triangle.
bool any_intersection(const TargetMesh& mesh, const Vec3& origin, const Vec3& dir,
                      double t_min = 1e-5);

} // namespace sgs
