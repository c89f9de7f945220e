#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "harvest/geometry.hpp"

namespace harvest::cluster {

// Per-point labels. Non-negative values are dense cluster ids.
constexpr int kUnvisited = -2;  // never examined (adaptive runs only)
constexpr int kNoise = -1;      // examined and rejected
constexpr int kUnreached = -1;  // seed_assignments: seed not clustered

struct BBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    void validate() const {
        if (!(x_min < x_max) || !(y_min < y_max))
            throw DomainError("bbox: requires x_min < x_max and y_min < y_max");
    }
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    Pixel center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
    bool contains(const Pixel& p) const {
        return p.u >= x_min && p.u <= x_max && p.v >= y_min && p.v <= y_max;
    }
    BBox expanded(double margin) const {
        return {x_min - margin, y_min - margin, x_max + margin, y_max + margin};
    }
};

struct ClusterParams {
    double eps = 0.03;      // meters; placeholder from structural priors
    int min_pts = 8;
    double crop_margin = 0; // pixels
    int seed_window = 2;    // pixels, half-size of depth lookup window

    void validate() const {
        if (eps <= 0.0) throw DomainError("cluster params: eps must be positive");
        if (min_pts < 1) throw DomainError("cluster params: min_pts must be >= 1");
        if (crop_margin < 0 || seed_window < 0)
            throw DomainError("cluster params: margins must be non-negative");
    }
};

struct ClusterStats {
    std::size_t distance_computations = 0;
    std::size_t points_visited = 0;
};

struct ClusterResult {
    std::vector<int> labels;            // per point: cluster id, kNoise, or kUnvisited
    std::vector<int> seed_assignments;  // per seed: cluster id or kUnreached
    int cluster_count = 0;
    ClusterStats stats;
};

struct CropResult {
    geom::PointCloud cloud;
    std::vector<std::size_t> index_map;  // cropped index -> original index
};

CropResult crop_by_bbox(const geom::PointCloud& cloud, const BBox& bbox, double margin);

// Median-depth point among cloud points whose source pixel falls in the
// (2*window+1)^2 square around `pixel`. Returns the point index.
std::optional<std::size_t> seed_point_index(const Pixel& pixel, const geom::PointCloud& cloud,
                                            int window);
std::optional<Point3> seed_point_lookup(const Pixel& pixel, const geom::PointCloud& cloud,
                                        int window);

// Textbook DBSCAN, index-order scan, O(n^2) neighbor queries. Oracle.
ClusterResult naive_dbscan(const geom::PointCloud& cloud, double eps, int min_pts);

// Detection-seeded DBSCAN: crops to the truss bbox, resolves fruit-center
// seeds to 3D points, and expands only from those seeds over a voxel grid.
// Labels are reported on the original cloud; unexamined points stay Unvisited.
ClusterResult adaptive_dbscan(const geom::PointCloud& cloud, const BBox& truss_bbox,
                              const std::vector<Pixel>& fruit_seed_pixels,
                              const ClusterParams& params);

struct ClusterDepth {
    int cluster_id = 0;
    double median_z = 0.0;
};

// Clusters ordered front to back by median depth; ties by cluster id.
std::vector<ClusterDepth> split_foreground_background(const ClusterResult& clusters,
                                                      const geom::PointCloud& cloud);

}  // namespace harvest::cluster
