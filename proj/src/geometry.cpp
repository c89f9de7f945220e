#include "harvest/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace harvest::geom {

void CameraIntrinsics::validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw DomainError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw DomainError("intrinsics: image size must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
        throw DomainError("intrinsics: principal point outside image");
}

Point3 backproject(const Pixel& pixel, double depth, const CameraIntrinsics& K) {
    K.validate();
    if (depth <= 0.0) throw DomainError("backproject: depth must be positive");
    if (!K.contains(pixel)) throw DomainError("backproject: pixel out of image bounds");
    return {(pixel.u - K.cx) * depth / K.fx, (pixel.v - K.cy) * depth / K.fy, depth};
}

Pixel project(const Point3& p, const CameraIntrinsics& K) {
    K.validate();
    if (p.z <= 0.0) throw DomainError("project: point behind camera (z <= 0)");
    return {K.fx * p.x / p.z + K.cx, K.fy * p.y / p.z + K.cy};
}

double pixel_radius_to_metric(double r_px, double depth, const CameraIntrinsics& K) {
    K.validate();
    if (r_px <= 0.0) throw DomainError("pixel_radius_to_metric: radius must be positive");
    if (depth <= 0.0) throw DomainError("pixel_radius_to_metric: depth must be positive");
    return r_px * depth / K.mean_focal();
}

PointCloud sphere_virtual_cloud(const Point3& center, double radius, int n) {
    if (radius <= 0.0) throw DomainError("sphere_virtual_cloud: radius must be positive");
    if (n < 4) throw DomainError("sphere_virtual_cloud: need at least 4 points");

    const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
    std::vector<Point3> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double y = 1.0 - 2.0 * (i + 0.5) / n;
        double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        double phi = golden_angle * i;
        pts[i] = {radius * r * std::cos(phi), radius * y, radius * r * std::sin(phi)};
    }
    // The raw lattice centroid drifts ~1e-4 * radius off center.  A few
    // recenter-and-renormalize rounds pull the centroid under 1e-8 * radius
    // while keeping every point exactly on the sphere.
    for (int iter = 0; iter < 8; ++iter) {
        Vec3 c{0, 0, 0};
        for (const auto& p : pts) c += p;
        c = c / static_cast<double>(n);
        for (auto& p : pts) p = (p - c).normalized() * radius;
    }
    PointCloud cloud;
    cloud.points.reserve(pts.size());
    for (const auto& p : pts) cloud.points.push_back(p + center);
    return cloud;
}

namespace {

// Hermite basis on local parameter x in [0,1].
Point3 hermite(const Point3& p0, const Point3& p1, const Vec3& m0, const Vec3& m1,
               double x, double ds) {
    double x2 = x * x, x3 = x2 * x;
    double h00 = 2 * x3 - 3 * x2 + 1;
    double h10 = x3 - 2 * x2 + x;
    double h01 = -2 * x3 + 3 * x2;
    double h11 = x3 - x2;
    return p0 * h00 + m0 * (h10 * ds) + p1 * h01 + m1 * (h11 * ds);
}

Vec3 hermite_deriv(const Point3& p0, const Point3& p1, const Vec3& m0, const Vec3& m1,
                   double x, double ds) {
    double x2 = x * x;
    double d00 = 6 * x2 - 6 * x;
    double d10 = 3 * x2 - 4 * x + 1;
    double d01 = -6 * x2 + 6 * x;
    double d11 = 3 * x2 - 2 * x;
    // derivative w.r.t. knot parameter s (x = (s - s_i)/ds)
    return (p0 * d00 + m0 * (d10 * ds) + p1 * d01 + m1 * (d11 * ds)) / ds;
}

Vec3 hermite_second_deriv(const Point3& p0, const Point3& p1, const Vec3& m0, const Vec3& m1,
                          double x, double ds) {
    double d00 = 12 * x - 6;
    double d10 = 6 * x - 4;
    double d01 = -12 * x + 6;
    double d11 = 6 * x - 2;
    return (p0 * d00 + m0 * (d10 * ds) + p1 * d01 + m1 * (d11 * ds)) / (ds * ds);
}

constexpr int kSamplesPerSegment = 64;
constexpr double kStraightCurvature = 1e-6;

}  // namespace

ParametricCurve fit_curve(const std::vector<Point3>& points) {
    if (points.size() < 2) throw DomainError("fit_curve: need at least 2 control points");
    for (std::size_t i = 1; i < points.size(); ++i) {
        if ((points[i] - points[i - 1]).norm() == 0.0)
            throw DomainError("fit_curve: duplicate consecutive control points");
    }

    ParametricCurve c;
    c.pts_ = points;
    const std::size_t n = points.size();

    // Centripetal knot spacing.
    c.knots_.resize(n);
    c.knots_[0] = 0.0;
    for (std::size_t i = 1; i < n; ++i)
        c.knots_[i] = c.knots_[i - 1] + std::sqrt((points[i] - points[i - 1]).norm());

    // Non-uniform Catmull-Rom tangents; one-sided at the endpoints
    // (equivalent to duplicated-endpoint padding).
    c.tangents_.resize(n);
    auto dt = [&](std::size_t i) { return c.knots_[i + 1] - c.knots_[i]; };
    c.tangents_[0] = (points[1] - points[0]) / dt(0);
    c.tangents_[n - 1] = (points[n - 1] - points[n - 2]) / dt(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        Vec3 a = (points[i] - points[i - 1]) / dt(i - 1);
        Vec3 b = (points[i + 1] - points[i]) / dt(i);
        c.tangents_[i] = (a * dt(i) + b * dt(i - 1)) / (dt(i - 1) + dt(i));
    }

    // Arc-length table, 64 samples per segment.
    c.table_knot_.push_back(0.0);
    c.table_len_.push_back(0.0);
    Point3 prev = points[0];
    double acc = 0.0;
    for (std::size_t seg = 0; seg + 1 < n; ++seg) {
        for (int k = 1; k <= kSamplesPerSegment; ++k) {
            double s = c.knots_[seg] + dt(seg) * k / kSamplesPerSegment;
            Point3 p = c.eval_knot(s);
            acc += (p - prev).norm();
            prev = p;
            c.table_knot_.push_back(s);
            c.table_len_.push_back(acc);
        }
    }
    c.total_length_ = acc;
    return c;
}

std::size_t ParametricCurve::segment_of(double s) const {
    std::size_t seg = 0;
    while (seg + 2 < knots_.size() && s >= knots_[seg + 1]) ++seg;
    return seg;
}

Point3 ParametricCurve::eval_knot(double s) const {
    std::size_t i = segment_of(s);
    double ds = knots_[i + 1] - knots_[i];
    double x = (s - knots_[i]) / ds;
    return hermite(pts_[i], pts_[i + 1], tangents_[i], tangents_[i + 1], x, ds);
}

Vec3 ParametricCurve::deriv_knot(double s) const {
    std::size_t i = segment_of(s);
    double ds = knots_[i + 1] - knots_[i];
    double x = (s - knots_[i]) / ds;
    return hermite_deriv(pts_[i], pts_[i + 1], tangents_[i], tangents_[i + 1], x, ds);
}

Vec3 ParametricCurve::second_deriv_knot(double s) const {
    std::size_t i = segment_of(s);
    double ds = knots_[i + 1] - knots_[i];
    double x = (s - knots_[i]) / ds;
    return hermite_second_deriv(pts_[i], pts_[i + 1], tangents_[i], tangents_[i + 1], x, ds);
}

double ParametricCurve::knot_from_t(double t) const {
    if (t < 0.0 || t > 1.0) throw DomainError("curve: parameter t outside [0,1]");
    double target = t * total_length_;
    auto it = std::lower_bound(table_len_.begin(), table_len_.end(), target);
    if (it == table_len_.begin()) return table_knot_.front();
    if (it == table_len_.end()) return table_knot_.back();
    std::size_t hi = static_cast<std::size_t>(it - table_len_.begin());
    std::size_t lo = hi - 1;
    double span = table_len_[hi] - table_len_[lo];
    double w = span > 0.0 ? (target - table_len_[lo]) / span : 0.0;
    return table_knot_[lo] + w * (table_knot_[hi] - table_knot_[lo]);
}

Point3 ParametricCurve::evaluate(double t) const { return eval_knot(knot_from_t(t)); }

Vec3 ParametricCurve::tangent(double t) const {
    Vec3 d = deriv_knot(knot_from_t(t));
    if (d.norm() == 0.0) throw DomainError("curve: degenerate tangent");
    return d.normalized();
}

Vec3 ParametricCurve::normal(double t) const {
    double s = knot_from_t(t);
    Vec3 d1 = deriv_knot(s);
    Vec3 d2 = second_deriv_knot(s);
    Vec3 T = d1.normalized();
    double speed = d1.norm();
    double curvature = speed > 0.0 ? d1.cross(d2).norm() / (speed * speed * speed) : 0.0;
    if (curvature >= kStraightCurvature) {
        Vec3 nvec = d2 - T * d2.dot(T);
        if (nvec.norm() > 0.0) return nvec.normalized();
    }
    // Locally straight: perpendicular to the tangent in the plane spanned
    // by the tangent and world-down; fruits hang downward.
    Vec3 down{0, 1, 0};
    Vec3 nvec = down - T * down.dot(T);
    if (nvec.norm() < 1e-9) {
        Vec3 xaxis{1, 0, 0};
        nvec = xaxis - T * xaxis.dot(T);
    }
    return nvec.normalized();
}

double ParametricCurve::nearest_parameter(const Point3& q) const {
    // Coarse scan over the arc-length table, then a local refinement.
    std::size_t best = 0;
    double best_d2 = (eval_knot(table_knot_[0]) - q).norm2();
    for (std::size_t i = 1; i < table_knot_.size(); ++i) {
        double d2 = (eval_knot(table_knot_[i]) - q).norm2();
        if (d2 < best_d2) { best_d2 = d2; best = i; }
    }
    double t = total_length_ > 0.0 ? table_len_[best] / total_length_ : 0.0;
    double step = 1.0 / static_cast<double>(table_knot_.size());
    for (int iter = 0; iter < 24; ++iter) {
        double lo = std::max(0.0, t - step);
        double hi = std::min(1.0, t + step);
        double d_lo = (evaluate(lo) - q).norm2();
        double d_hi = (evaluate(hi) - q).norm2();
        double d_t = (evaluate(t) - q).norm2();
        if (d_lo < d_t && d_lo <= d_hi) t = lo;
        else if (d_hi < d_t) t = hi;
        else step *= 0.5;
    }
    return t;
}

Vec3 curve_normal(const ParametricCurve& curve, double t) { return curve.normal(t); }

}  // namespace harvest::geom
