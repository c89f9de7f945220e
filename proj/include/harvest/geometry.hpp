#pragma once

#include <vector>

#include "harvest/common.hpp"

namespace harvest::geom {

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;
    double mean_focal() const { return 0.5 * (fx + fy); }
    bool contains(const Pixel& p) const {
        return p.u >= 0.0 && p.u < width && p.v >= 0.0 && p.v < height;
    }
};

struct PointCloud {
    std::vector<Point3> points;
    // Optional source pixel per point (organized depth-image cloud).
    // Empty, or same length as points.
    std::vector<Pixel> pixel_map;

    bool has_pixel_map() const { return !pixel_map.empty(); }
    std::size_t size() const { return points.size(); }
};

Point3 backproject(const Pixel& pixel, double depth, const CameraIntrinsics& K);
Pixel project(const Point3& p, const CameraIntrinsics& K);
double pixel_radius_to_metric(double r_px, double depth, const CameraIntrinsics& K);

// Deterministic Fibonacci-lattice sphere sampling, recentered so the
// point centroid coincides with the sphere center while every point
// stays exactly at distance `radius`.
PointCloud sphere_virtual_cloud(const Point3& center, double radius, int n);

// Interpolating piecewise cubic through ordered control points
// (centripetal Catmull-Rom tangents), reparameterized to arc length so
// t in [0,1] maps uniformly to distance along the curve.
class ParametricCurve {
public:
    const std::vector<Point3>& control_points() const { return pts_; }
    double length() const { return total_length_; }

    Point3 evaluate(double t) const;
    Vec3 tangent(double t) const;  // unit
    // Unit principal normal; falls back to the world-down plane where the
    // curve is locally straight (curvature < 1e-6).
    Vec3 normal(double t) const;
    // Arc-length parameter of the point on the curve nearest to q.
    double nearest_parameter(const Point3& q) const;

private:
    friend ParametricCurve fit_curve(const std::vector<Point3>& points);

    double knot_from_t(double t) const;
    Point3 eval_knot(double s) const;
    Vec3 deriv_knot(double s) const;
    Vec3 second_deriv_knot(double s) const;
    std::size_t segment_of(double s) const;

    std::vector<Point3> pts_;
    std::vector<Vec3> tangents_;       // dP/ds at each knot
    std::vector<double> knots_;        // centripetal knot values
    std::vector<double> table_knot_;   // arc-length table: knot samples
    std::vector<double> table_len_;    // cumulative length at each sample
    double total_length_ = 0.0;
};

ParametricCurve fit_curve(const std::vector<Point3>& points);
Vec3 curve_normal(const ParametricCurve& curve, double t);

}  // namespace harvest::geom
