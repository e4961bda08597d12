#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace latgate {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kPi = std::numbers::pi;

inline double khz_to_rad(double f_khz) { return kTwoPi * 1e3 * f_khz; }
inline double rad_to_khz(double w) { return w / (kTwoPi * 1e3); }
inline double us_to_s(double t_us) { return 1e-6 * t_us; }

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a <= -kPi) a += kTwoPi;
    if (a > kPi) a -= kTwoPi;
    return a;
}

struct Mat2 {
    cplx m00{1}, m01{0}, m10{0}, m11{1};

    static Mat2 identity() { return {}; }

    Mat2 operator*(const Mat2& b) const {
        return {m00 * b.m00 + m01 * b.m10, m00 * b.m01 + m01 * b.m11,
                m10 * b.m00 + m11 * b.m10, m10 * b.m01 + m11 * b.m11};
    }

    Mat2 dagger() const {
        return {std::conj(m00), std::conj(m10), std::conj(m01), std::conj(m11)};
    }

    cplx trace() const { return m00 + m11; }
    cplx det() const { return m00 * m11 - m01 * m10; }

    double max_abs_diff(const Mat2& b) const {
        double d = std::abs(m00 - b.m00);
        d = std::max(d, std::abs(m01 - b.m01));
        d = std::max(d, std::abs(m10 - b.m10));
        d = std::max(d, std::abs(m11 - b.m11));
        return d;
    }
};

// exp(-i (e0*I + bx*X + by*Y + bz*Z) t) with X = [[0,1],[1,0]],
// Y = [[0,i],[-i,0]], Z = diag(1,-1).  Exact, unitary.
inline Mat2 exp_pauli(double e0, double bx, double by, double bz, double t) {
    const double b = std::sqrt(bx * bx + by * by + bz * bz);
    const cplx ph = std::polar(1.0, -e0 * t);
    if (b * t == 0.0) return {ph, 0, 0, ph};
    const double c = std::cos(b * t);
    const double s = std::sin(b * t) / b;
    const cplx i{0, 1};
    return {ph * (c - i * s * bz), ph * (-i * s * (bx + i * by)),
            ph * (-i * s * (bx - i * by)), ph * (c + i * s * bz)};
}

// Rotation by theta about the equatorial axis at azimuth phi:
// R(theta, phi) = [[cos(t/2), -i e^{+i phi} sin(t/2)], [-i e^{-i phi} sin(t/2), cos(t/2)]].
// phi = 0 is Rx, phi = pi/2 is Ry; Ry(theta) = Rx(pi/2) Rz(theta) Rx(-pi/2).
inline Mat2 rot_xy(double theta, double phi) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const cplx i{0, 1};
    return {c, -i * std::polar(s, phi), -i * std::polar(s, -phi), c};
}

// Rz(theta) = diag(e^{-i theta/2}, e^{+i theta/2}); adds theta to arg(a1/a0).
inline Mat2 rot_z(double theta) {
    return {std::polar(1.0, -0.5 * theta), 0, 0, std::polar(1.0, 0.5 * theta)};
}

// Rotation about an arbitrary Bloch axis (axis need not be normalized).
inline Mat2 rot_axis(double theta, double nx, double ny, double nz) {
    const double n = std::sqrt(nx * nx + ny * ny + nz * nz);
    if (n == 0.0) throw std::invalid_argument("rot_axis: zero axis");
    return exp_pauli(0.0, 0.5 * theta * nx / n, 0.5 * theta * ny / n, 0.5 * theta * nz / n, 1.0);
}

// Distance to the identity modulo global phase, as a rotation angle in rad.
// Tolerates a small uniform non-unitary shrink (leakage) via det normalization.
inline double rotation_angle_from_identity(const Mat2& u) {
    const double dn = std::sqrt(std::abs(u.det()));
    if (dn == 0.0) return kPi;
    const double c = std::abs(u.trace()) / (2.0 * dn);
    return 2.0 * std::acos(std::min(1.0, c));
}

// Operator distance min_phase ||A - e^{i phase} B||_F for 2x2.
inline double unitary_distance(const Mat2& a, const Mat2& b) {
    const Mat2 d = a.dagger() * b;
    const cplx tr = d.trace();
    const double ph = (std::abs(tr) > 0) ? std::arg(tr) : 0.0;
    const cplx f = std::polar(1.0, -ph);
    double s = 0.0;
    s += std::norm(f * d.m00 - 1.0);
    s += std::norm(f * d.m01);
    s += std::norm(f * d.m10);
    s += std::norm(f * d.m11 - 1.0);
    return std::sqrt(s);
}

struct Mat3 {
    std::array<cplx, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    cplx& at(int r, int c) { return m[3 * r + c]; }
    const cplx& at(int r, int c) const { return m[3 * r + c]; }

    Mat3 operator*(const Mat3& b) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r.at(i, j) = at(i, 0) * b.at(0, j) + at(i, 1) * b.at(1, j) + at(i, 2) * b.at(2, j);
        return r;
    }

    // Embed a 2x2 acting on basis indices (i, j) of {0:|0>, 1:|1>, 2:|aux>}.
    static Mat3 embed(const Mat2& u, int i, int j) {
        Mat3 r;
        r.at(i, i) = u.m00;
        r.at(i, j) = u.m01;
        r.at(j, i) = u.m10;
        r.at(j, j) = u.m11;
        return r;
    }

    Mat2 qubit_block() const { return {at(0, 0), at(0, 1), at(1, 0), at(1, 1)}; }
};

}  // namespace latgate
