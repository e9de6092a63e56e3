#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>

namespace kinlab {

// Fixed-size spatial/velocity vector. D is the spatial dimension (2 or 3
// everywhere in this project, but the type itself is generic).
template <int D>
struct Vec {
    std::array<double, D> c{};

    constexpr double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    constexpr double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    static constexpr Vec zero() { return Vec{}; }

    constexpr Vec& operator+=(const Vec& o) {
        for (int i = 0; i < D; ++i) c[i] += o.c[i];
        return *this;
    }
    constexpr Vec& operator-=(const Vec& o) {
        for (int i = 0; i < D; ++i) c[i] -= o.c[i];
        return *this;
    }
    constexpr Vec& operator*=(double s) {
        for (int i = 0; i < D; ++i) c[i] *= s;
        return *this;
    }

    friend constexpr Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend constexpr Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend constexpr Vec operator*(Vec a, double s) { return a *= s; }
    friend constexpr Vec operator*(double s, Vec a) { return a *= s; }
    friend constexpr Vec operator/(Vec a, double s) { return a *= (1.0 / s); }
    friend constexpr Vec operator-(Vec a) { return a *= -1.0; }

    friend constexpr bool operator==(const Vec& a, const Vec& b) { return a.c == b.c; }

    friend std::ostream& operator<<(std::ostream& os, const Vec& v) {
        os << '(';
        for (int i = 0; i < D; ++i) os << (i ? "," : "") << v.c[i];
        return os << ')';
    }
};

template <int D>
constexpr double dot(const Vec<D>& a, const Vec<D>& b) {
    double s = 0;
    for (int i = 0; i < D; ++i) s += a[i] * b[i];
    return s;
}

template <int D>
constexpr double norm2(const Vec<D>& a) { return dot(a, a); }

template <int D>
double norm(const Vec<D>& a) { return std::sqrt(norm2(a)); }

template <int D>
Vec<D> normalized(const Vec<D>& a) { return a / norm(a); }

// |a ^ b|: magnitude of the wedge product (area of the parallelogram).
inline double wedge_norm(const Vec<2>& a, const Vec<2>& b) {
    return std::abs(a[0] * b[1] - a[1] * b[0]);
}
inline double wedge_norm(const Vec<3>& a, const Vec<3>& b) {
    const double x = a[1] * b[2] - a[2] * b[1];
    const double y = a[2] * b[0] - a[0] * b[2];
    const double z = a[0] * b[1] - a[1] * b[0];
    return std::sqrt(x * x + y * y + z * z);
}

// Component of v orthogonal to the unit vector u.
template <int D>
Vec<D> reject(const Vec<D>& v, const Vec<D>& u) {
    return v - dot(v, u) * u;
}

}  // namespace kinlab
