//! Small dense complex linear algebra: matrix exponential, LU solve,
//! Kronecker products and a few norms.
//!
//! Everything here works on `ndarray` matrices of `Complex64`. The
//! dimensions handled by this crate are tiny (at most a few hundred), so
//! plain dense kernels are the right tool.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Largest entrywise modulus of `a - a†`.
pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Operator 1-norm (maximum absolute column sum).
pub fn norm1(a: &Array2<C64>) -> f64 {
    a.axis_iter(Axis(1)).map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().iter().sum()
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Solves `a x = b` for square `a` by LU decomposition with partial pivoting.
///
/// Returns `None` when a pivot underflows, i.e. `a` is numerically singular.
pub fn lu_solve(a: &Array2<C64>, b: &Array2<C64>) -> Option<Array2<C64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = x.ncols();

    for k in 0..n {
        let (piv, pmax) = (k..n).map(|i| (i, lu[[i, k]].norm())).fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= f64::MIN_POSITIVE {
            return None;
        }
        if piv != k {
            for j in 0..n {
                lu.swap([k, j], [piv, j]);
            }
            for j in 0..m {
                x.swap([k, j], [piv, j]);
            }
        }
        let d = lu[[k, k]];
        for i in (k + 1)..n {
            let f = lu[[i, k]] / d;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            lu[[i, k]] = f;
            for j in (k + 1)..n {
                let u = lu[[k, j]];
                lu[[i, j]] -= f * u;
            }
            for j in 0..m {
                let u = x[[k, j]];
                x[[i, j]] -= f * u;
            }
        }
    }
    for k in (0..n).rev() {
        let d = lu[[k, k]];
        for j in 0..m {
            let mut s = x[[k, j]];
            for l in (k + 1)..n {
                s -= lu[[k, l]] * x[[l, j]];
            }
            x[[k, j]] = s / d;
        }
    }
    Some(x)
}

const THETA: [(usize, f64); 4] =
    [(3, 1.495_585_217_958_292e-2), (5, 2.539_398_330_063_23e-1), (7, 9.504_178_996_162_932e-1), (9, 2.097_847_961_257_068e0)];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17_297_280.0, 8_648_640.0, 1_995_840.0, 277_200.0, 25_200.0, 1_512.0, 56.0, 1.0];
const B9: [f64; 10] =
    [17_643_225_600.0, 8_821_612_800.0, 2_075_673_600.0, 302_702_400.0, 30_270_240.0, 2_162_160.0, 110_880.0, 3_960.0, 90.0, 1.0];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn scaled(a: &Array2<C64>, s: f64) -> Array2<C64> {
    a.mapv(|z| z * s)
}

fn pade_low(a: &Array2<C64>, b: &[f64]) -> (Array2<C64>, Array2<C64>) {
    let n = a.nrows();
    let a2 = a.dot(a);
    let mut u = identity(n) * C64::from(b[1]);
    let mut v = identity(n) * C64::from(b[0]);
    let mut pow = identity(n);
    for k in 1..(b.len() / 2) {
        pow = pow.dot(&a2);
        u = u + scaled(&pow, b[2 * k + 1]);
        v = v + scaled(&pow, b[2 * k]);
    }
    (a.dot(&u), v)
}

fn pade_13(a: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let n = a.nrows();
    let b = &B13;
    let id = identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u = a6.dot(&inner_u) + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(&id, b[1]);
    let u = a.dot(&u);
    let inner_v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = a6.dot(&inner_v) + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&id, b[0]);
    (u, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé core
/// (degree 3, 5, 7, 9 or 13 chosen from the 1-norm).
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "expm needs a square matrix");
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    let norm = norm1(a);
    if norm == 0.0 {
        return identity(n);
    }
    let (u, v, squarings) = match THETA.iter().find(|(_, theta)| norm <= *theta) {
        Some(&(m, _)) => {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, b);
            (u, v, 0)
        }
        None => {
            let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
            let a_s = scaled(a, 0.5f64.powi(s));
            let (u, v) = pade_13(&a_s);
            (u, v, s)
        }
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = lu_solve(&q, &p).expect("Padé denominator is singular");
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    r
}

/// `exp(-i h t)` for a Hermitian `h`.
pub fn unitary_step(h: &Array2<C64>, t: f64) -> Array2<C64> {
    expm(&h.mapv(|z| z * C64::new(0.0, -t)))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &Array2<C64>) -> Vec<f64> {
    let n = a.nrows();
    // Symmetrize so round-off asymmetry cannot leak into the solver.
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]].conj()));
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}
