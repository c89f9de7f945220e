#include <doctest.h>

#include <random>

#include "harvest/clustering.hpp"

using namespace harvest;
using namespace harvest::cluster;

namespace {

geom::PointCloud grid_cloud() {
    // 10 points on a pixel-aligned line, x spaced 1 cm.
    geom::PointCloud cloud;
    for (int i = 0; i < 10; ++i) {
        cloud.points.push_back({0.01 * i, 0.0, 1.0});
        cloud.pixel_map.push_back({100.0 + 10.0 * i, 200.0});
    }
    return cloud;
}

}  // namespace

TEST_CASE("crop_by_bbox full image keeps everything") {
    auto cloud = grid_cloud();
    auto crop = crop_by_bbox(cloud, {0, 0, 640, 480}, 0);
    CHECK(crop.cloud.points.size() == cloud.points.size());
}

TEST_CASE("crop_by_bbox empty region and exact membership") {
    auto cloud = grid_cloud();
    CHECK(crop_by_bbox(cloud, {400, 400, 500, 470}, 0).cloud.points.empty());

    // bbox covering pixels u in [100, 130]: exactly points 0..3.
    auto crop = crop_by_bbox(cloud, {100, 190, 130, 210}, 0);
    REQUIRE(crop.index_map.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(crop.index_map[i] == i);
}

TEST_CASE("crop_by_bbox requires a pixel map") {
    geom::PointCloud bare;
    bare.points.push_back({0, 0, 1});
    CHECK_THROWS_AS(crop_by_bbox(bare, {0, 0, 10, 10}, 0), DomainError);
}

TEST_CASE("seed_point_lookup exact hit and empty window") {
    auto cloud = grid_cloud();
    auto p = seed_point_lookup({120.0, 200.0}, cloud, 0);
    REQUIRE(p.has_value());
    CHECK(p->x == doctest::Approx(0.02));
    CHECK_FALSE(seed_point_lookup({600.0, 50.0}, cloud, 2).has_value());
}

TEST_CASE("seed_point_lookup takes the median depth") {
    geom::PointCloud cloud;
    cloud.points = {{0, 0, 0.9}, {0, 0, 1.0}, {0, 0, 5.0}};
    cloud.pixel_map = {{10, 10}, {11, 10}, {10, 11}};
    auto p = seed_point_lookup({10, 10}, cloud, 1);
    REQUIRE(p.has_value());
    CHECK(p->z == doctest::Approx(1.0));
}

TEST_CASE("naive_dbscan separates two well-spaced blobs") {
    geom::PointCloud cloud;
    for (int i = 0; i < 5; ++i) cloud.points.push_back({0.01 * i, 0, 1.0});
    for (int i = 0; i < 5; ++i) cloud.points.push_back({1.0 + 0.01 * i, 0, 1.0});
    auto result = naive_dbscan(cloud, 0.05, 3);
    CHECK(result.cluster_count == 2);
    for (int label : result.labels) CHECK(label >= 0);
    CHECK(result.labels[0] != result.labels[5]);
}

TEST_CASE("naive_dbscan labels isolated points as noise") {
    geom::PointCloud cloud;
    cloud.points = {{0, 0, 1}, {1, 0, 1}, {2, 0, 1}};
    auto result = naive_dbscan(cloud, 0.05, 2);
    CHECK(result.cluster_count == 0);
    for (int label : result.labels) CHECK(label == kNoise);
}

TEST_CASE("naive_dbscan single point with min_pts 1") {
    geom::PointCloud cloud;
    cloud.points = {{0, 0, 1}};
    auto result = naive_dbscan(cloud, 0.05, 1);
    CHECK(result.cluster_count == 1);
    CHECK(result.labels[0] == 0);
}

namespace {

struct Scene {
    geom::PointCloud cloud;
    BBox bbox;
    std::vector<Pixel> seeds;
};

// A dense blob around a pixel-mapped area plus scattered noise.
Scene blob_scene() {
    Scene s;
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> jitter(-0.004, 0.004);
    for (int i = 0; i < 60; ++i) {
        double x = 0.1 + jitter(rng), y = jitter(rng), z = 1.0 + jitter(rng);
        s.cloud.points.push_back({x, y, z});
        s.cloud.pixel_map.push_back({300.0 + 5.0 * (i % 8), 200.0 + 5.0 * (i / 8)});
    }
    std::uniform_real_distribution<double> far(2.0, 6.0);
    for (int i = 0; i < 30; ++i) {
        s.cloud.points.push_back({far(rng), far(rng), far(rng)});
        s.cloud.pixel_map.push_back({50.0 + i, 50.0});
    }
    s.bbox = {280, 180, 360, 260};
    s.seeds = {{305.0, 205.0}};
    return s;
}

}  // namespace

TEST_CASE("adaptive_dbscan matches the naive oracle on the cropped cloud") {
    Scene s = blob_scene();
    ClusterParams params;
    params.eps = 0.02;
    params.min_pts = 4;
    params.seed_window = 3;
    auto adaptive = adaptive_dbscan(s.cloud, s.bbox, s.seeds, params);
    REQUIRE(adaptive.seed_assignments[0] >= 0);

    auto crop = crop_by_bbox(s.cloud, s.bbox, params.crop_margin);
    auto naive = naive_dbscan(crop.cloud, params.eps, params.min_pts);

    // The adaptive cluster holding the seed must equal the naive cluster
    // holding the same seed, as a point set over original indices.
    auto seed_idx = seed_point_index(s.seeds[0], crop.cloud, params.seed_window);
    REQUIRE(seed_idx.has_value());
    int naive_cid = naive.labels[*seed_idx];
    REQUIRE(naive_cid >= 0);
    for (std::size_t i = 0; i < crop.index_map.size(); ++i) {
        bool in_naive = naive.labels[i] == naive_cid;
        bool in_adaptive = adaptive.labels[crop.index_map[i]] == adaptive.seed_assignments[0];
        CHECK(in_naive == in_adaptive);
    }
}

TEST_CASE("adaptive_dbscan leaves unexamined points unvisited") {
    Scene s = blob_scene();
    ClusterParams params;
    params.eps = 0.02;
    params.min_pts = 4;
    params.seed_window = 3;
    auto result = adaptive_dbscan(s.cloud, s.bbox, s.seeds, params);
    int unvisited = 0;
    for (int label : result.labels) {
        if (label == kUnvisited) ++unvisited;
        CHECK(label != kNoise);  // the far noise block was never examined
    }
    CHECK(unvisited >= 30);
    CHECK(result.stats.distance_computations >= result.stats.points_visited);
}

TEST_CASE("adaptive_dbscan does less distance work than the naive scan") {
    Scene s = blob_scene();
    ClusterParams params;
    params.eps = 0.02;
    params.min_pts = 4;
    params.seed_window = 3;
    auto adaptive = adaptive_dbscan(s.cloud, s.bbox, s.seeds, params);
    auto naive = naive_dbscan(s.cloud, params.eps, params.min_pts);
    CHECK(adaptive.stats.distance_computations < naive.stats.distance_computations);
}

TEST_CASE("adaptive_dbscan with a seed over a depth hole") {
    Scene s = blob_scene();
    ClusterParams params;
    CHECK_THROWS_AS(adaptive_dbscan(s.cloud, s.bbox, {{330.0, 185.0}}, params),
                    SeedResolutionError);
}

TEST_CASE("two seeds in one blob share a cluster id") {
    Scene s = blob_scene();
    ClusterParams params;
    params.eps = 0.02;
    params.min_pts = 4;
    params.seed_window = 3;
    auto result = adaptive_dbscan(s.cloud, s.bbox, {{305.0, 205.0}, {320.0, 215.0}}, params);
    REQUIRE(result.seed_assignments.size() == 2);
    CHECK(result.seed_assignments[0] >= 0);
    CHECK(result.seed_assignments[0] == result.seed_assignments[1]);
}

TEST_CASE("adaptive_dbscan is deterministic") {
    Scene s = blob_scene();
    ClusterParams params;
    params.eps = 0.02;
    params.min_pts = 4;
    params.seed_window = 3;
    auto a = adaptive_dbscan(s.cloud, s.bbox, s.seeds, params);
    auto b = adaptive_dbscan(s.cloud, s.bbox, s.seeds, params);
    CHECK(a.labels == b.labels);
    CHECK(a.seed_assignments == b.seed_assignments);
}

TEST_CASE("split_foreground_background orders clusters by median depth") {
    ClusterResult result;
    result.cluster_count = 2;
    geom::PointCloud cloud;
    for (int i = 0; i < 5; ++i) {
        cloud.points.push_back({0, 0, 1.4});
        result.labels.push_back(0);
    }
    for (int i = 0; i < 5; ++i) {
        cloud.points.push_back({0, 0, 0.8});
        result.labels.push_back(1);
    }
    auto order = split_foreground_background(result, cloud);
    REQUIRE(order.size() == 2);
    CHECK(order[0].cluster_id == 1);
    CHECK(order[0].median_z == doctest::Approx(0.8));
    CHECK(order[1].cluster_id == 0);
}

TEST_CASE("split_foreground_background tie goes to the lower cluster id") {
    ClusterResult result;
    result.cluster_count = 2;
    geom::PointCloud cloud;
    cloud.points = {{0, 0, 1.0}, {0, 0, 1.0}};
    result.labels = {1, 0};
    auto order = split_foreground_background(result, cloud);
    CHECK(order[0].cluster_id == 0);

    ClusterResult empty;
    CHECK_THROWS_AS(split_foreground_background(empty, cloud), DomainError);
}
