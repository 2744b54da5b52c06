//! Small fixed-size tensors for spacetime indices. Arrays are sized for the
//! maximum dimension (3 = 1 time + 2 space); loops always run to `dim`.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
/// Christoffel-shaped array, indexed [upper][lower][lower].
pub type Ten3 = [[[f64; 3]; 3]; 3];

pub fn mat_zero() -> Mat3 {
    [[0.0; 3]; 3]
}

pub fn ten_zero() -> Ten3 {
    [[[0.0; 3]; 3]; 3]
}

pub fn mat_from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Mat3 {
    let mut m = mat_zero();
    for a in 0..dim {
        for b in 0..dim {
            m[a][b] = f(a, b);
        }
    }
    m
}

pub fn ten_from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Ten3 {
    let mut t = ten_zero();
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                t[a][b][c] = f(a, b, c);
            }
        }
    }
    t
}

pub fn sum(dim: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        s += f(a);
    }
    s
}

pub fn sum2(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            s += f(a, b);
        }
    }
    s
}

/// Inverse of the upper-left `dim` x `dim` block. Returns `None` when the
/// block is numerically singular.
pub fn invert(dim: usize, m: &Mat3) -> Option<Mat3> {
    let mut inv = mat_zero();
    match dim {
        1 => {
            if m[0][0] == 0.0 {
                return None;
            }
            inv[0][0] = 1.0 / m[0][0];
        }
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let inv_det = 1.0 / det;
            inv[0][0] = m[1][1] * inv_det;
            inv[1][1] = m[0][0] * inv_det;
            inv[0][1] = -m[0][1] * inv_det;
            inv[1][0] = -m[1][0] * inv_det;
        }
        3 => {
            let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
            let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
            let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
            let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let inv_det = 1.0 / det;
            inv[0][0] = c00 * inv_det;
            inv[1][0] = c01 * inv_det;
            inv[2][0] = c02 * inv_det;
            inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
            inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
            inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
            inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
            inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
            inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
        }
        _ => return None,
    }
    Some(inv)
}

pub fn det(dim: usize, m: &Mat3) -> f64 {
    match dim {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => f64::NAN,
    }
}

/// Smallest eigenvalue of a symmetric `dim` x `dim` block (dim <= 2).
pub fn min_eigenvalue_sym(dim: usize, m: &Mat3) -> f64 {
    match dim {
        1 => m[0][0],
        2 => {
            let tr = m[0][0] + m[1][1];
            let dt = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let disc = (tr * tr / 4.0 - dt).max(0.0).sqrt();
            tr / 2.0 - disc
        }
        _ => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invert_round_trip() {
        let m: Mat3 = [[2.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 4.0]];
        for dim in 1..=3 {
            let inv = invert(dim, &m).unwrap();
            for a in 0..dim {
                for b in 0..dim {
                    let entry = sum(dim, |c| m[a][c] * inv[c][b]);
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((entry - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let m: Mat3 = [[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(invert(2, &m).is_none());
    }

    #[test]
    fn determinants() {
        let m: Mat3 = [[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 5.0]];
        assert_eq!(det(1, &m), 2.0);
        assert_eq!(det(2, &m), 6.0);
        assert_eq!(det(3, &m), 30.0);
    }

    #[test]
    fn min_eigenvalue_of_symmetric_block() {
        let m: Mat3 = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0; 3]];
        assert!((min_eigenvalue_sym(2, &m) - 1.0).abs() < 1e-14);
        assert_eq!(min_eigenvalue_sym(1, &m), 2.0);
    }
}
