#include "sgs/mesh.hpp"

#include <algorithm>

namespace sgs {

double TargetMesh::total_area() const {
    double a = 0;
    for (const auto& t : triangles) a += t.area();
    return a;
}

double TargetMesh::bounding_radius() const {
    double r2 = 0;
    for (const auto& t : triangles)
        for (const Vec3* v : {&t.a, &t.b, &t.c}) r2 = std::max(r2, v->squaredNorm());
    return std::sqrt(r2);
}

namespace {

// Axis-aligned box with outward windings; 12 triangles.
void add_box(TargetMesh& mesh, const Vec3& center, const Vec3& half, const Vec3 face_albedo[6]) {
    const Vec3 c = center, h = half;
    auto quad = [&](const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3,
                    const Vec3& albedo) {
        mesh.triangles.push_back({p0, p1, p2, albedo});
        mesh.triangles.push_back({p0, p2, p3, albedo});
    };
    Vec3 v[8];
    for (int i = 0; i < 8; ++i) {
        v[i] = c + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                        (i & 4) ? h.z() : -h.z());
    }
    quad(v[1], v[3], v[7], v[5], face_albedo[0]); // +x
    quad(v[0], v[4], v[6], v[2], face_albedo[1]); // -x
    quad(v[2], v[6], v[7], v[3], face_albedo[2]); // +y
    quad(v[0], v[1], v[5], v[4], face_albedo[3]); // -y
    quad(v[4], v[5], v[7], v[6], face_albedo[4]); // +z
    quad(v[0], v[2], v[3], v[1], face_albedo[5]); // -z
}

} // namespace

TargetMesh make_satellite_mesh() {
    TargetMesh mesh;
    // Bus: gold foil tones, one radiator face.
    const Vec3 bus[6] = {
        Vec3(0.82, 0.64, 0.22), Vec3(0.72, 0.55, 0.20), Vec3(0.78, 0.62, 0.26),
        Vec3(0.70, 0.58, 0.24), Vec3(0.80, 0.80, 0.78), Vec3(0.35, 0.36, 0.40),
    };
    add_box(mesh, Vec3(0, 0, 0), Vec3(0.5, 0.3, 0.3), bus);

    // Solar panel above the bus (+y), normal along z, cell-blue faces.
    const Vec3 panel_face(0.15, 0.22, 0.55);
    const Vec3 panel_edge(0.45, 0.45, 0.48);
    const Vec3 panel[6] = {panel_edge, panel_edge, panel_edge, panel_edge, panel_face, panel_face};
    add_box(mesh, Vec3(0, 0.75, 0), Vec3(1.2, 0.4, 0.01), panel);
    return mesh;
}

std::vector<Vec3> sample_surface(const TargetMesh& mesh, size_t n, Rng& rng) {
    if (n < 1) fail("DegenerateMesh", "need at least one sample");
    if (mesh.triangles.empty()) fail("DegenerateMesh", "empty mesh");

    std::vector<double> cdf(mesh.triangles.size());
    double acc = 0;
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        acc += mesh.triangles[i].area();
        cdf[i] = acc;
    }
    if (acc <= 0) fail("DegenerateMesh", "zero surface area");

    std::vector<Vec3> points;
    points.reserve(n);
    for (size_t s = 0; s < n; ++s) {
        double u = rng.uniform() * acc;
        size_t i = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        if (i >= mesh.triangles.size()) i = mesh.triangles.size() - 1;
        const Triangle& t = mesh.triangles[i];
        // Uniform barycentric via the sqrt trick.
        double r1 = std::sqrt(rng.uniform());
        double r2 = rng.uniform();
        points.push_back((1 - r1) * t.a + r1 * (1 - r2) * t.b + r1 * r2 * t.c);
    }
    return points;
}

RayHit intersect_mesh(const TargetMesh& mesh, const Vec3& origin, const Vec3& dir, double t_min) {
    RayHit best;
    best.t = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        const Triangle& tri = mesh.triangles[i];
        Vec3 e1 = tri.b - tri.a, e2 = tri.c - tri.a;
        Vec3 p = dir.cross(e2);
        double det = e1.dot(p);
        if (std::abs(det) < 1e-14) continue;
        double inv_det = 1.0 / det;
        Vec3 s = origin - tri.a;
        double u = s.dot(p) * inv_det;
        if (u < 0.0 || u > 1.0) continue;
        Vec3 q = s.cross(e1);
        double v = dir.dot(q) * inv_det;
        if (v < 0.0 || u + v > 1.0) continue;
        double t = e2.dot(q) * inv_det;
        if (t > t_min && t < best.t) {
            best.t = t;
            best.triangle = int(i);
        }
    }
    if (best.triangle < 0) best.t = -1.0;
    return best;
}

bool any_intersection(const TargetMesh& mesh, const Vec3& origin, const Vec3& dir, double t_min) {
    for (const Triangle& tri : mesh.triangles) {
        Vec3 e1 = tri.b - tri.a, e2 = tri.c - tri.a;
        Vec3 p = dir.cross(e2);
        double det = e1.dot(p);
        if (std::abs(det) < 1e-14) continue;
        double inv_det = 1.0 / det;
        Vec3 s = origin - tri.a;
        double u = s.dot(p) * inv_det;
        if (u < 0.0 || u > 1.0) continue;
        Vec3 q = s.cross(e1);
        double v = dir.dot(q) * inv_det;
        if (v < 0.0 || u + v > 1.0) continue;
        double t = e2.dot(q) * inv_det;
        if (t > t_min) return true;
    }
    return false;
}

} // namespace sgs
