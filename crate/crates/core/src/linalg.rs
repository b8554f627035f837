//! Fixed-size linear algebra for d <= 3.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Vec3 = [0.0; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: &Vec3, t: f64) -> Vec3 {
    [a[0] * t, a[1] * t, a[2] * t]
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

pub fn mat_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        out[i] = sub(&a[i], &b[i]);
    }
    out
}

/// `Aᵀ A` for the matrix whose columns are `cols`.
pub fn gram(cols: &[Vec3]) -> Mat3 {
    let mut g = [[0.0; 3]; 3];
    for (i, a) in cols.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            g[i][j] = dot(a, b);
        }
    }
    g
}

/// Eigenvalues of the leading `d × d` block of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Mat3, d: usize) -> Vec<f64> {
    let mut ev = match d {
        1 => vec![m[0][0]],
        2 => {
            let mean = 0.5 * (m[0][0] + m[1][1]);
            let half = 0.5 * (m[0][0] - m[1][1]);
            let r = half.hypot(m[0][1]);
            vec![mean - r, mean + r]
        }
        _ => jacobi3(*m).to_vec(),
    };
    ev.sort_by(f64::total_cmp);
    ev
}

/// Cyclic Jacobi sweeps on a symmetric 3×3 matrix.
fn jacobi3(mut a: Mat3) -> [f64; 3] {
    for _ in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A <- Jᵀ A J with J the rotation in the (p, q) plane
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    [a[0][0], a[1][1], a[2][2]]
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_operator_norm(m: &Mat3, d: usize) -> f64 {
    symmetric_eigenvalues(m, d)
        .into_iter()
        .fold(0.0, |acc, e| acc.max(e.abs()))
}

/// Smallest singular value of the `d × d` matrix with columns `cols`.
pub fn smallest_singular_value(cols: &[Vec3], d: usize) -> f64 {
    let g = gram(cols);
    symmetric_eigenvalues(&g, d)[0].max(0.0).sqrt()
}
