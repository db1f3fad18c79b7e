#pragma once

#include <array>
#include <cmath>

namespace orlicz {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
/// z-component of the cross product; twice the signed area of (0, a, b).
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

/// N x n matrix with N = n = 2; rows are target components, columns space
/// directions.  Houses gradients, the arguments of the A/V maps, and the
/// matrices P, Q of the shifted-function estimates.
struct Mat22 {
    // e[i][alpha]: component i, direction alpha
    double e[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

    static Mat22 identity() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }
    static Mat22 outer(Vec2 a, Vec2 b) {
        return {{{a.x * b.x, a.x * b.y}, {a.y * b.x, a.y * b.y}}};
    }

    Mat22 operator+(const Mat22& o) const {
        Mat22 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r.e[i][j] = e[i][j] + o.e[i][j];
        return r;
    }
    Mat22 operator-(const Mat22& o) const {
        Mat22 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r.e[i][j] = e[i][j] - o.e[i][j];
        return r;
    }
    Mat22 operator*(double s) const {
        Mat22 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r.e[i][j] = e[i][j] * s;
        return r;
    }
    Mat22& operator+=(const Mat22& o) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) e[i][j] += o.e[i][j];
        return *this;
    }

    /// Frobenius inner product.
    double dot(const Mat22& o) const {
        double s = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) s += e[i][j] * o.e[i][j];
        return s;
    }
    /// Frobenius norm |Q|.
    double norm() const { return std::sqrt(dot(*this)); }

    Vec2 apply(Vec2 v) const {
        return {e[0][0] * v.x + e[0][1] * v.y, e[1][0] * v.x + e[1][1] * v.y};
    }
};

inline Mat22 operator*(double s, const Mat22& m) { return m * s; }

/// Constant fourth-order tensor T[i][a][j][b] acting on 2x2 matrices,
/// T(P)_{ia} = T_{ij}^{ab} P_{jb}.  Storage for D^2 f and the elliptic forms.
struct Tensor4 {
    double t[2][2][2][2] = {};

    static Tensor4 identity() {
        Tensor4 r;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a) r.t[i][a][i][a] = 1.0;
        return r;
    }

    Mat22 apply(const Mat22& p) const {
        Mat22 r;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a) {
                double s = 0.0;
                for (int j = 0; j < 2; ++j)
                    for (int b = 0; b < 2; ++b) s += t[i][a][j][b] * p.e[j][b];
                r.e[i][a] = s;
            }
        return r;
    }

    /// Bilinear form T(P, R).
    double bilinear(const Mat22& p, const Mat22& r) const { return apply(p).dot(r); }

    /// Euclidean norm of the entries.
    double norm() const {
        double s = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int j = 0; j < 2; ++j)
                    for (int b = 0; b < 2; ++b) s += t[i][a][j][b] * t[i][a][j][b];
        return std::sqrt(s);
    }

    /// Index transposition (i,a) <-> (j,b); the formal adjoint of the induced
    /// divergence-form operator.
    Tensor4 transposed() const {
        Tensor4 r;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int j = 0; j < 2; ++j)
                    for (int b = 0; b < 2; ++b) r.t[i][a][j][b] = t[j][b][i][a];
        return r;
    }

    Tensor4 operator+(const Tensor4& o) const {
        Tensor4 r;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int j = 0; j < 2; ++j)
                    for (int b = 0; b < 2; ++b)
                        r.t[i][a][j][b] = t[i][a][j][b] + o.t[i][a][j][b];
        return r;
    }
    Tensor4 operator-(const Tensor4& o) const {
        Tensor4 r;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int j = 0; j < 2; ++j)
                    for (int b = 0; b < 2; ++b)
                        r.t[i][a][j][b] = t[i][a][j][b] - o.t[i][a][j][b];
        return r;
    }
    Tensor4 operator*(double s) const {
        Tensor4 r;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int j = 0; j < 2; ++j)
                    for (int b = 0; b < 2; ++b) r.t[i][a][j][b] = t[i][a][j][b] * s;
        return r;
    }
};

} // namespace orlicz
