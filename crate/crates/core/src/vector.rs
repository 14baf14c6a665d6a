//! Small fixed-size vector helpers for real and complex 3-vectors.

use num_complex::Complex64;

/// Alias for a real spatial three-vector.
pub type Vec3 = [f64; 3];

/// Alias for a complex three-vector (one Fourier coefficient of a vector field).
pub type CVec3 = [Complex64; 3];

pub const ZERO3: Vec3 = [0.0; 3];
pub const CZERO3: CVec3 = [Complex64 { re: 0.0, im: 0.0 }; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// Real-vector by complex-vector cross product, `k × c`.
#[inline]
pub fn rcross(k: &Vec3, c: &CVec3) -> CVec3 {
    [
        c[2] * k[1] - c[1] * k[2],
        c[0] * k[2] - c[2] * k[0],
        c[1] * k[0] - c[0] * k[1],
    ]
}

/// `k · c` for a real `k` and complex `c`.
#[inline]
pub fn rdot(k: &Vec3, c: &CVec3) -> Complex64 {
    c[0] * k[0] + c[1] * k[1] + c[2] * k[2]
}

/// Hermitian pairing `a · conj(b)`.
#[inline]
pub fn cdot_conj(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}

#[inline]
pub fn cnorm_sqr(a: &CVec3) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()
}

#[inline]
pub fn cnorm(a: &CVec3) -> f64 {
    cnorm_sqr(a).sqrt()
}

#[inline]
pub fn cconj(a: &CVec3) -> CVec3 {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

#[inline]
pub fn cscale(s: Complex64, a: &CVec3) -> CVec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn to_complex(a: &Vec3) -> CVec3 {
    [a[0].into(), a[1].into(), a[2].into()]
}
