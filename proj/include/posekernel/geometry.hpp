#pragma once

#include <array>
#include <cmath>

namespace pk {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend Vec3 operator*(Vec3 a, double s) { return s * a; }
    friend bool operator==(Vec3 a, Vec3 b) { return a.x == b.x && a.y == b.y && a.z == b.z; }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

inline double distance(Vec3 a, Vec3 b) { return norm(a - b); }

inline bool is_finite(Vec3 a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Row-major 3x3 matrix, used for camera rotations.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double at(std::size_t row, std::size_t col) const { return m[3 * row + col]; }
    double& at(std::size_t row, std::size_t col) { return m[3 * row + col]; }

    friend Vec3 operator*(const Mat3& r, Vec3 v) {
        return {r.m[0] * v.x + r.m[1] * v.y + r.m[2] * v.z,
                r.m[3] * v.x + r.m[4] * v.y + r.m[5] * v.z,
                r.m[6] * v.x + r.m[7] * v.y + r.m[8] * v.z};
    }

    Mat3 transposed() const {
        Mat3 t;
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c) t.at(c, r) = at(r, c);
        return t;
    }
};

/// Max absolute deviation of R*R^T from the identity.
inline double orthonormality_error(const Mat3& r) {
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 3; ++k) acc += r.at(i, k) * r.at(j, k);
            const double target = (i == j) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(acc - target));
        }
    }
    return worst;
}

inline bool is_orthonormal(const Mat3& r, double tol = 1e-9) {
    return orthonormality_error(r) <= tol;
}

}  // namespace pk
