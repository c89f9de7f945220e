#include "harvest/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

namespace harvest::cluster {

CropResult crop_by_bbox(const geom::PointCloud& cloud, const BBox& bbox, double margin) {
    bbox.validate();
    if (!cloud.has_pixel_map()) throw DomainError("crop_by_bbox: cloud has no pixel map");
    if (margin < 0) throw DomainError("crop_by_bbox: margin must be non-negative");

    BBox roi = bbox.expanded(margin);
    CropResult out;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if (roi.contains(cloud.pixel_map[i])) {
            out.cloud.points.push_back(cloud.points[i]);
            out.cloud.pixel_map.push_back(cloud.pixel_map[i]);
            out.index_map.push_back(i);
        }
    }
    return out;
}

std::optional<std::size_t> seed_point_index(const Pixel& pixel, const geom::PointCloud& cloud,
                                            int window) {
    if (!cloud.has_pixel_map()) throw DomainError("seed_point_lookup: cloud has no pixel map");
    if (window < 0) throw DomainError("seed_point_lookup: window must be non-negative");

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const Pixel& p = cloud.pixel_map[i];
        if (std::abs(p.u - pixel.u) <= window && std::abs(p.v - pixel.v) <= window)
            candidates.push_back(i);
    }
    if (candidates.empty()) return std::nullopt;
    // Lower median by depth: robust against depth outliers in the window.
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        return cloud.points[a].z < cloud.points[b].z;
    });
    return candidates[(candidates.size() - 1) / 2];
}

std::optional<Point3> seed_point_lookup(const Pixel& pixel, const geom::PointCloud& cloud,
                                        int window) {
    auto idx = seed_point_index(pixel, cloud, window);
    if (!idx) return std::nullopt;
    return cloud.points[*idx];
}

namespace {

struct BruteQuery {
    const geom::PointCloud& cloud;
    double eps2;
    ClusterStats& stats;

    std::vector<std::size_t> operator()(std::size_t i) {
        ++stats.points_visited;
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < cloud.points.size(); ++j) {
            ++stats.distance_computations;
            if ((cloud.points[j] - cloud.points[i]).norm2() <= eps2) out.push_back(j);
        }
        return out;
    }
};

// Uniform voxel grid with cell size eps; neighbor queries touch 27 cells.
class VoxelGrid {
public:
    VoxelGrid(const geom::PointCloud& cloud, double eps, ClusterStats& stats)
        : cloud_(cloud), eps_(eps), eps2_(eps * eps), stats_(stats) {
        cells_.reserve(cloud.points.size());
        for (std::size_t i = 0; i < cloud.points.size(); ++i)
            cells_[key(cloud.points[i])].push_back(i);
    }

    std::vector<std::size_t> query(std::size_t i) {
        ++stats_.points_visited;
        const Point3& p = cloud_.points[i];
        long ix = cell(p.x), iy = cell(p.y), iz = cell(p.z);
        std::vector<std::size_t> out;
        for (long dx = -1; dx <= 1; ++dx)
            for (long dy = -1; dy <= 1; ++dy)
                for (long dz = -1; dz <= 1; ++dz) {
                    auto it = cells_.find(pack(ix + dx, iy + dy, iz + dz));
                    if (it == cells_.end()) continue;
                    for (std::size_t j : it->second) {
                        ++stats_.distance_computations;
                        if ((cloud_.points[j] - p).norm2() <= eps2_) out.push_back(j);
                    }
                }
        return out;
    }

private:
    long cell(double v) const { return static_cast<long>(std::floor(v / eps_)); }
    std::uint64_t key(const Point3& p) const { return pack(cell(p.x), cell(p.y), cell(p.z)); }
    static std::uint64_t pack(long x, long y, long z) {
        auto u = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1FFFFF; };
        return (u(x) << 42) | (u(y) << 21) | u(z);
    }

    const geom::PointCloud& cloud_;
    double eps_;
    double eps2_;
    ClusterStats& stats_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

// Queue-based cluster expansion shared by both variants.
template <typename Query>
void expand(std::size_t start, const std::vector<std::size_t>& start_neighbors, int cid,
            int min_pts, std::vector<int>& labels, Query& query) {
    labels[start] = cid;
    std::deque<std::size_t> queue(start_neighbors.begin(), start_neighbors.end());
    while (!queue.empty()) {
        std::size_t j = queue.front();
        queue.pop_front();
        if (labels[j] == kNoise) labels[j] = cid;  // border point
        if (labels[j] != kUnvisited) continue;
        labels[j] = cid;
        auto nbrs = query(j);
        if (static_cast<int>(nbrs.size()) >= min_pts)
            queue.insert(queue.end(), nbrs.begin(), nbrs.end());
    }
}

}  // namespace

ClusterResult naive_dbscan(const geom::PointCloud& cloud, double eps, int min_pts) {
    if (eps <= 0.0) throw DomainError("naive_dbscan: eps must be positive");
    if (min_pts < 1) throw DomainError("naive_dbscan: min_pts must be >= 1");
    for (const auto& p : cloud.points)
        if (!p.finite()) throw DomainError("naive_dbscan: non-finite point");

    ClusterResult result;
    result.labels.assign(cloud.points.size(), kUnvisited);
    BruteQuery query{cloud, eps * eps, result.stats};

    int cid = 0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if (result.labels[i] != kUnvisited) continue;
        auto nbrs = query(i);
        if (static_cast<int>(nbrs.size()) < min_pts) {
            result.labels[i] = kNoise;
            continue;
        }
        expand(i, nbrs, cid, min_pts, result.labels, query);
        ++cid;
    }
    result.cluster_count = cid;
    return result;
}

ClusterResult adaptive_dbscan(const geom::PointCloud& cloud, const BBox& truss_bbox,
                              const std::vector<Pixel>& fruit_seed_pixels,
                              const ClusterParams& params) {
    params.validate();
    if (fruit_seed_pixels.empty()) throw DomainError("adaptive_dbscan: need at least one seed");

    CropResult crop = crop_by_bbox(cloud, truss_bbox, params.crop_margin);

    std::vector<std::optional<std::size_t>> seeds(fruit_seed_pixels.size());
    bool any = false;
    for (std::size_t s = 0; s < fruit_seed_pixels.size(); ++s) {
        seeds[s] = seed_point_index(fruit_seed_pixels[s], crop.cloud, params.seed_window);
        any = any || seeds[s].has_value();
    }
    if (!any) throw SeedResolutionError("adaptive_dbscan: no seed resolved to a 3D point");

    ClusterResult result;
    result.seed_assignments.assign(fruit_seed_pixels.size(), kUnreached);
    std::vector<int> labels(crop.cloud.points.size(), kUnvisited);
    VoxelGrid grid(crop.cloud, params.eps, result.stats);
    auto query = [&grid](std::size_t i) { return grid.query(i); };

    int cid = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        if (!seeds[s]) continue;
        std::size_t i = *seeds[s];
        if (labels[i] >= 0) {  // reached by an earlier seed's expansion
            result.seed_assignments[s] = labels[i];
            continue;
        }
        auto nbrs = grid.query(i);
        if (static_cast<int>(nbrs.size()) >= params.min_pts) {
            expand(i, nbrs, cid, params.min_pts, labels, query);
            result.seed_assignments[s] = cid;
            ++cid;
            continue;
        }
        // Non-core seed: attach to (and expand) the first core neighbor.
        bool attached = false;
        for (std::size_t j : nbrs) {
            if (j == i) continue;
            if (labels[j] >= 0) {
                labels[i] = labels[j];
                result.seed_assignments[s] = labels[j];
                attached = true;
                break;
            }
            auto nj = grid.query(j);
            if (static_cast<int>(nj.size()) >= params.min_pts) {
                expand(j, nj, cid, params.min_pts, labels, query);
                labels[i] = cid;
                result.seed_assignments[s] = cid;
                ++cid;
                attached = true;
                break;
            }
        }
        if (!attached) labels[i] = kNoise;
    }
    result.cluster_count = cid;

    result.labels.assign(cloud.points.size(), kUnvisited);
    for (std::size_t i = 0; i < crop.index_map.size(); ++i)
        result.labels[crop.index_map[i]] = labels[i];
    return result;
}

std::vector<ClusterDepth> split_foreground_background(const ClusterResult& clusters,
                                                      const geom::PointCloud& cloud) {
    if (clusters.cluster_count < 1)
        throw DomainError("split_foreground_background: no clusters");
    std::vector<std::vector<double>> depths(clusters.cluster_count);
    for (std::size_t i = 0; i < clusters.labels.size(); ++i)
        if (clusters.labels[i] >= 0) depths[clusters.labels[i]].push_back(cloud.points[i].z);

    std::vector<ClusterDepth> out;
    for (int c = 0; c < clusters.cluster_count; ++c) {
        if (depths[c].empty()) continue;
        std::sort(depths[c].begin(), depths[c].end());
        out.push_back({c, depths[c][(depths[c].size() - 1) / 2]});
    }
    if (out.empty()) throw DomainError("split_foreground_background: no cluster members");
    std::sort(out.begin(), out.end(), [](const ClusterDepth& a, const ClusterDepth& b) {
        return a.median_z != b.median_z ? a.median_z < b.median_z : a.cluster_id < b.cluster_id;
    });
    return out;
}

}  // namespace harvest::cluster
