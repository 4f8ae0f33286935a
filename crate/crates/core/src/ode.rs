//! Classical fixed-step RK4 for x' = Ax + h(t) on a smooth stretch.

use crate::matrixkit::Matrix;

/// Advances `x` from `t0` to `t1` in `n` equal steps, calling `record` after
/// each step with the new abscissa and state.
pub(crate) fn rk4_linear<H, R>(a: &Matrix, x: &mut [f64], t0: f64, t1: f64, n: usize, forcing: H, mut record: R)
where
    H: Fn(f64, &mut [f64]),
    R: FnMut(f64, &[f64]),
{
    let m = x.len();
    let h = (t1 - t0) / n as f64;
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        forcing(t, out);
        a.mul_vec_add(y, out);
    };
    for i in 0..n {
        let t = t0 + i as f64 * h;
        rhs(t, x, &mut k1);
        for j in 0..m {
            tmp[j] = x[j] + 0.5 * h * k1[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..m {
            tmp[j] = x[j] + 0.5 * h * k2[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..m {
            tmp[j] = x[j] + h * k3[j];
        }
        rhs(t + h, &tmp, &mut k4);
        for j in 0..m {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let t_next = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
        record(t_next, x);
    }
}

/// Number of steps of size at most `step` covering a stretch of length `len`.
pub(crate) fn step_count(len: f64, step: f64) -> usize {
    ((len / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}
