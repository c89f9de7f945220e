#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace harvest {

// Camera frame convention used across the whole library:
// z forward (into the scene), x right, y down. "World down" is +y.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? *this / n : Vec3{0, 0, 0};
    }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

using Point3 = Vec3;

struct Pixel {
    double u = 0.0;
    double v = 0.0;
};

// Invalid argument / precondition violation on a domain operation.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// No fruit seed pixel could be resolved to a 3D point.
struct SeedResolutionError : DomainError {
    explicit SeedResolutionError(const std::string& msg) : DomainError(msg) {}
};

// A required pedicel keypoint is missing from a 3D pose.
struct PoseIncompleteError : DomainError {
    explicit PoseIncompleteError(const std::string& msg) : DomainError(msg) {}
};

// Phenotype assembly called with zero assigned fruits.
struct EmptyTrussError : DomainError {
    explicit EmptyTrussError(const std::string& msg) : DomainError(msg) {}
};

// Illegal (state, event) combination in the harvest state machine.
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; message carries line/field diagnostics.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace harvest
