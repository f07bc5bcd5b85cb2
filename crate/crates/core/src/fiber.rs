//! Fiber algebra for the rank-3 oriented bundle in its global oriented
//! orthonormal frame: vectors, 3x3 matrices and the cross product.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO: Vec3 = [0.0; 3];
pub const MAT_ZERO: Mat3 = [[0.0; 3]; 3];
pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Unit frame vector `e_{axis+1}`.
pub fn unit(axis: usize) -> Vec3 {
    let mut v = ZERO;
    v[axis] = 1.0;
    v
}

/// Oriented cross product, component by component.
#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - b[1] * a[2],
        b[0] * a[2] - a[0] * b[2],
        a[0] * b[1] - b[0] * a[1],
    ]
}

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm_sq(a: &Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    norm_sq(a).sqrt()
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

/// `y + s * x`
#[inline]
pub fn axpy(s: f64, x: &Vec3, y: &Vec3) -> Vec3 {
    [y[0] + s * x[0], y[1] + s * x[1], y[2] + s * x[2]]
}

#[inline]
pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = MAT_ZERO;
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat_add(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = *a;
    for (row, brow) in out.iter_mut().zip(b) {
        for (x, y) in row.iter_mut().zip(brow) {
            *x += y;
        }
    }
    out
}

pub fn mat_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = *a;
    for (row, brow) in out.iter_mut().zip(b) {
        for (x, y) in row.iter_mut().zip(brow) {
            *x -= y;
        }
    }
    out
}

pub fn mat_scale(s: f64, a: &Mat3) -> Mat3 {
    a.map(|row| row.map(|x| s * x))
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = MAT_ZERO;
    for (i, row) in a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            out[j][i] = *x;
        }
    }
    out
}

/// `[a, b] = ab - ba`
pub fn commutator(a: &Mat3, b: &Mat3) -> Mat3 {
    mat_sub(&mat_mul(a, b), &mat_mul(b, a))
}

/// Frobenius norm.
pub fn mat_norm(a: &Mat3) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn is_skew(a: &Mat3, tol: f64) -> bool {
    (0..3).all(|i| (0..3).all(|j| (a[i][j] + a[j][i]).abs() <= tol))
}

/// Infinitesimal rotation about `e_{axis+1}`: `generator(a) v = e_{a+1} x v`.
pub fn generator(axis: usize) -> Mat3 {
    let e = unit(axis);
    let mut out = MAT_ZERO;
    for j in 0..3 {
        let col = cross(&e, &unit(j));
        for i in 0..3 {
            out[i][j] = col[i];
        }
    }
    out
}

/// Rotation by `angle` about the unit axis `e_{axis+1}`.
pub fn rotation(axis: usize, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    let j = generator(axis);
    let j2 = mat_mul(&j, &j);
    // Rodrigues: I + sin J + (1 - cos) J^2
    mat_add(&mat_add(&IDENTITY, &mat_scale(s, &j)), &mat_scale(1.0 - c, &j2))
}
