//! Small dense real matrices.
//!
//! Everything here targets the handful-of-states systems the rest of the crate
//! deals with (m ≤ 16): row-major storage, no blocking, no external BLAS.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};

/// Square matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.n.max(1)).collect();
        f.debug_struct("Matrix").field("n", &self.n).field("rows", &rows).finish()
    }
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from a flat row-major slice whose length must be a perfect square.
    pub fn from_row_major(data: &[f64]) -> Result<Self> {
        let n = (data.len() as f64).sqrt().round() as usize;
        if n * n != data.len() || n == 0 {
            return Err(Error::Dimension(format!(
                "{} entries do not form a non-empty square matrix",
                data.len()
            )));
        }
        let m = Matrix { n, data: data.to_vec() };
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows do not form a square matrix".into()));
        }
        Self::from_row_major(&rows.concat())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        Matrix { n: self.n, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `y += self * x`
    pub fn mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        for (row, yi) in self.data.chunks(self.n).zip(y.iter_mut()) {
            *yi += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Non-negative integer power by repeated squaring.
    pub fn pow(&self, mut e: u64) -> Self {
        let mut result = Self::identity(self.n);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "matrix dimensions differ");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "matrix dimensions differ");
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "matrix dimensions differ");
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

/// Euclidean norm of a vector.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance between two vectors.
pub fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

fn lu_decompose(m: &Matrix) -> Lu {
    let n = m.n;
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut singular = false;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| lu[(a, col)].abs().total_cmp(&lu[(b, col)].abs()))
            .unwrap_or(col);
        if lu[(pivot, col)] == 0.0 {
            singular = true;
            continue;
        }
        if pivot != col {
            for j in 0..n {
                lu.data.swap(pivot * n + j, col * n + j);
            }
            perm.swap(pivot, col);
            sign = -sign;
        }
        let p = lu[(col, col)];
        for i in col + 1..n {
            let factor = lu[(i, col)] / p;
            lu[(i, col)] = factor;
            if factor != 0.0 {
                for j in col + 1..n {
                    let v = lu[(col, j)];
                    lu[(i, j)] -= factor * v;
                }
            }
        }
    }
    Lu { lu, perm, sign, singular }
}

impl Lu {
    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.lu.n;
        let permuted: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * b[j]).sum();
            b[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * b[j]).sum();
            b[i] = (b[i] - s) / self.lu[(i, i)];
        }
    }
}

/// Determinant by LU with partial pivoting.
pub fn det(m: &Matrix) -> f64 {
    let lu = lu_decompose(m);
    if lu.singular {
        return 0.0;
    }
    (0..m.n).map(|i| lu.lu[(i, i)]).product::<f64>() * lu.sign
}

/// Solves `lhs · X = rhs` for a square `X`.
pub fn solve(lhs: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let lu = lu_decompose(lhs);
    if lu.singular {
        return Err(Error::Singular);
    }
    let n = lhs.n;
    let mut out = Matrix::zeros(n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = rhs[(i, j)];
        }
        lu.solve_in_place(&mut col);
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

// Padé degrees and 1-norm thresholds for the scaling-and-squaring exponential.
const PADE_THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring around a diagonal Padé approximant.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.n;
    let norm = m.norm_1();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let ident = Matrix::identity(n);
    let a2 = m * m;

    for &(deg, theta) in &PADE_THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            // Even powers I, A², A⁴, ...
            let mut powers = vec![ident.clone(), a2.clone()];
            while powers.len() <= deg / 2 {
                let next = powers.last().unwrap() * &a2;
                powers.push(next);
            }
            let mut u_inner = Matrix::zeros(n);
            let mut v = Matrix::zeros(n);
            for (j, p) in powers.iter().enumerate() {
                u_inner = &u_inner + &p.scale(coeffs[2 * j + 1]);
                v = &v + &p.scale(coeffs[2 * j]);
            }
            let u = m * &u_inner;
            return solve(&(&v - &u), &(&v + &u));
        }
    }

    let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scaled = m.scale(0.5f64.powi(s));
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let u_hi = &(&a6.scale(b[13]) + &a4.scale(b[11])) + &a2.scale(b[9]);
    let u_inner = &(&(&(&a6 * &u_hi) + &a6.scale(b[7])) + &(&a4.scale(b[5]) + &a2.scale(b[3])))
        + &ident.scale(b[1]);
    let u = &scaled * &u_inner;
    let v_hi = &(&a6.scale(b[12]) + &a4.scale(b[10])) + &a2.scale(b[8]);
    let v = &(&(&(&a6 * &v_hi) + &a6.scale(b[6])) + &(&a4.scale(b[4]) + &a2.scale(b[2])))
        + &ident.scale(b[0]);
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Spectral radius.
///
/// Closed form for m ≤ 2. Otherwise the Gelfand limit ‖Mᵏ‖^{1/k} along
/// k = 2ʲ, renormalizing after every squaring so nothing overflows.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    match m.n {
        0 => Ok(0.0),
        1 => Ok(m[(0, 0)].abs()),
        2 => {
            let tr = m.trace();
            let d = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = tr * tr / 4.0 - d;
            if disc < 0.0 {
                // complex pair, |λ|² = det
                Ok(d.sqrt())
            } else {
                let r = disc.sqrt();
                Ok((tr / 2.0 + r).abs().max((tr / 2.0 - r).abs()))
            }
        }
        _ => gelfand_radius(m),
    }
}

fn gelfand_radius(m: &Matrix) -> Result<f64> {
    const MAX_SQUARINGS: u32 = 60;
    let norm = m.norm_frobenius();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut p = m.scale(1.0 / norm);
    // log ‖M^(2^j)‖ = log_scale + log ‖p‖ with log_scale tracked separately.
    let mut log_scale = norm.ln();
    let mut exponent = 1.0f64;
    let mut previous = norm;
    for _ in 0..MAX_SQUARINGS {
        p = &p * &p;
        log_scale *= 2.0;
        exponent *= 2.0;
        let pn = p.norm_frobenius();
        if pn == 0.0 || !pn.is_finite() {
            // nilpotent up to rounding
            return Ok(0.0);
        }
        log_scale += pn.ln();
        p = p.scale(1.0 / pn);
        let estimate = (log_scale / exponent).exp();
        if (estimate - previous).abs() <= 1e-8 * estimate {
            return Ok(estimate);
        }
        previous = estimate;
    }
    Err(Error::NoConvergence("spectral radius"))
}

/// Largest singular value.
///
/// Closed form for m ≤ 2, power iteration on MᵀM otherwise.
pub fn spectral_norm(m: &Matrix) -> f64 {
    match m.n {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        2 => {
            let g = &m.transpose() * m;
            let (a, b, c) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
            let half = (a - c) / 2.0;
            let top = (a + c) / 2.0 + (half * half + b * b).sqrt();
            top.max(0.0).sqrt()
        }
        n => {
            let g = &m.transpose() * m;
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 1.0 / (i as f64 + 2.0)).collect();
            let mut estimate = 0.0;
            for _ in 0..10_000 {
                let y = g.mul_vec(&x);
                let ny = norm2(&y);
                if ny == 0.0 {
                    return 0.0;
                }
                let nx = norm2(&x);
                let next = ny / nx;
                x = y.iter().map(|v| v / ny).collect();
                if (next - estimate).abs() <= 1e-10 * next {
                    estimate = next;
                    break;
                }
                estimate = next;
            }
            estimate.sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_a() -> Matrix {
        Matrix::from_rows(&[vec![-0.4, 0.2], vec![-0.2, -0.4]]).unwrap()
    }

    #[test]
    fn expm_of_zero_is_identity() {
        assert_eq!(expm(&Matrix::zeros(3)).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn expm_diagonal() {
        for &(a, b) in &[(0.001, -0.002), (0.3, -0.7), (2.0, -1.5), (10.0, -40.0), (50.0, 0.0)] {
            let e = expm(&Matrix::diag(&[a, b])).unwrap();
            assert!((e[(0, 0)] - a.exp()).abs() <= 1e-13 * a.exp());
            assert!((e[(1, 1)] - b.exp()).abs() <= 1e-13 * b.exp().max(1e-300));
            assert_eq!(e[(0, 1)], 0.0);
        }
    }

    #[test]
    fn expm_rotation_scaling_closed_form() {
        // 5A = -2I + J with J a unit rotation generator
        let e = expm(&example_a().scale(5.0)).unwrap();
        let s = (-2.0f64).exp();
        let expected = [s * 1f64.cos(), s * 1f64.sin(), -s * 1f64.sin(), s * 1f64.cos()];
        for (got, want) in e.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn expm_large_norm_relative_accuracy() {
        // aI + bJ: e^a (cos b I + sin b J)
        for &(a, b) in &[(3.0, 40.0), (-20.0, 30.0), (35.0, -35.0)] {
            let m = Matrix::from_rows(&[vec![a, b], vec![-b, a]]).unwrap();
            let e = expm(&m).unwrap();
            let scale = a.exp();
            let want = [scale * b.cos(), scale * b.sin(), -scale * b.sin(), scale * b.cos()];
            for (got, w) in e.as_slice().iter().zip(want) {
                assert!((got - w).abs() <= 1e-12 * scale, "a={a} b={b}: {got} vs {w}");
            }
        }
    }

    #[test]
    fn expm_rejects_non_finite() {
        let m = Matrix::diag(&[f64::NAN, 1.0]);
        assert_eq!(expm(&m), Err(Error::NonFinite));
    }

    #[test]
    fn determinants() {
        assert_eq!(det(&Matrix::identity(4)), 1.0);
        let i_plus = &Matrix::identity(2) + &example_a().scale(3.0);
        assert!((det(&i_plus) - 0.4).abs() < 1e-15);
        let rank_one = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(det(&rank_one), 0.0);
        let perm = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(det(&perm), -1.0);
    }

    #[test]
    fn spectral_radius_cases() {
        assert_eq!(spectral_radius(&Matrix::diag(&[0.5, -0.25])).unwrap(), 0.5);
        let a = example_a();
        let b = &expm(&a.scale(5.0)).unwrap() * &(&Matrix::identity(2) + &a.scale(3.0));
        let want = (-2.0f64).exp() * 0.4f64.sqrt();
        assert!((spectral_radius(&b).unwrap() - want).abs() < 1e-15);
        let (c, s) = ((std::f64::consts::PI / 3.0).cos(), (std::f64::consts::PI / 3.0).sin());
        let rot = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        assert!((spectral_radius(&rot).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gelfand_agrees_with_block_diagonal() {
        // 3x3 block diag(rotation-scaling 0.7, -0.3): radius 0.7
        let c = 0.7 * 0.4f64.cos();
        let s = 0.7 * 0.4f64.sin();
        let m = Matrix::from_rows(&[vec![c, -s, 0.0], vec![s, c, 0.0], vec![0.0, 0.0, -0.3]])
            .unwrap();
        assert!((spectral_radius(&m).unwrap() - 0.7).abs() < 1e-7);
        // non-normal upper-triangular
        let t = Matrix::from_rows(&[vec![0.5, 10.0, 0.0], vec![0.0, 0.4, 5.0], vec![0.0, 0.0, 0.2]])
            .unwrap();
        assert!((spectral_radius(&t).unwrap() - 0.5).abs() < 5e-7);
        let nil = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0; 3]])
            .unwrap();
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_cases() {
        assert!((spectral_norm(&Matrix::identity(2)) - 1.0).abs() < 1e-15);
        assert!((spectral_norm(&Matrix::diag(&[3.0, -4.0])) - 4.0).abs() < 1e-15);
        let e = expm(&example_a().scale(5.0)).unwrap();
        assert!((spectral_norm(&e) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((spectral_norm(&Matrix::diag(&[3.0, -4.0, 1.0])) - 4.0).abs() < 1e-9);
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.5]])
            .unwrap();
        // singular values of [[1,2],[0,1]] are 1 ± sqrt2
        assert!((spectral_norm(&m) - (1.0 + 2f64.sqrt())).abs() < 1e-8);
    }

    #[test]
    fn integer_power() {
        let a = example_a();
        let p = a.pow(5);
        let mut q = Matrix::identity(2);
        for _ in 0..5 {
            q = &q * &a;
        }
        assert!(p.max_abs_diff(&q) < 1e-16);
        assert_eq!(a.pow(0), Matrix::identity(2));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        /// Square matrices of size 2..=5 with Frobenius norm at most `max_norm`.
        fn matrix(max_norm: f64) -> impl Strategy<Value = Matrix> {
            (2usize..=5).prop_flat_map(move |n: usize| {
                (prop::collection::vec(-1.0f64..1.0, n * n), 0.0..max_norm).prop_map(move |(v, r)| {
                    let m = Matrix::from_row_major(&v).unwrap();
                    let f = m.norm_frobenius();
                    if f > 0.0 { m.scale(r / f) } else { m }
                })
            })
        }

        proptest! {
            #[test]
            fn expm_inverse(m in matrix(5.0)) {
                let prod = &expm(&m).unwrap() * &expm(&m.scale(-1.0)).unwrap();
                prop_assert!(prod.max_abs_diff(&Matrix::identity(m.dim())) <= 1e-10);
            }

            #[test]
            fn expm_commuting_sum(m in matrix(5.0), a in -0.5f64..0.5, b in -0.5f64..0.5, c in -0.5f64..0.5) {
                let n = &(&Matrix::identity(m.dim()).scale(a) + &m.scale(b)) + &(&m * &m).scale(c / 5.0);
                let lhs = expm(&(&m + &n)).unwrap();
                let rhs = &expm(&m).unwrap() * &expm(&n).unwrap();
                let scale = lhs.as_slice().iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
                prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * scale);
            }

            #[test]
            fn radius_below_norm(m in matrix(5.0)) {
                prop_assert!(spectral_radius(&m).unwrap() <= spectral_norm(&m) * (1.0 + 1e-7) + 1e-12);
            }

            #[test]
            fn det_of_exponential(m in matrix(5.0)) {
                let want = m.trace().exp();
                prop_assert!((det(&expm(&m).unwrap()) - want).abs() <= 1e-8 * want);
            }
        }
    }
}
