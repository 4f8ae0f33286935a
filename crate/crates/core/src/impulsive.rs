//! The impulsive system obtained from the dynamic equation by s = ψ(t):
//!
//! ```text
//! x'(s) = A x(s) + f(ψ⁻¹(s)) + g(ψ⁻¹(s)),            s ≠ sₖ
//! x(sₖ+) − x(sₖ) = δ (A x(sₖ) + f(ψ⁻¹(sₖ)) + γₖ)
//! ```
//!
//! Solutions are left-continuous: x(sₖ) is the value before the jump.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcing::{sup_norm_f, PoissonSequence, TrigForcing};
use crate::matrixkit::{det, expm, norm2, spectral_norm, spectral_radius, Matrix};
use crate::ode::{rk4_linear, step_count};
use crate::timescale::{tie_tolerance, TimeScaleSpec};

/// Which forcing terms a solution is driven by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    /// f and g
    Full,
    /// f only (φ₁, ϑ₁)
    Periodic,
    /// g only (φ₂, ϑ₂)
    Poisson,
}

impl Part {
    fn uses_f(self) -> bool {
        !matches!(self, Part::Poisson)
    }

    fn uses_gamma(self) -> bool {
        !matches!(self, Part::Periodic)
    }
}

#[derive(Debug, Clone)]
pub struct ImpulsiveModel {
    a: Matrix,
    ts: TimeScaleSpec,
    f: TrigForcing,
    gamma: PoissonSequence,
    jump: Matrix,
    m_f: f64,
}

impl ImpulsiveModel {
    pub fn new(a: Matrix, ts: TimeScaleSpec, f: TrigForcing, gamma: PoissonSequence) -> Result<Self> {
        let m = a.dim();
        if f.dim() != m || gamma.dim() != m {
            return Err(Error::Dimension(format!(
                "A is {m}×{m}, f has {} components, γ has {}",
                f.dim(),
                gamma.dim()
            )));
        }
        if !a.is_finite() {
            return Err(Error::NonFinite);
        }
        if (f.omega() - ts.omega()).abs() > 1e-12 * ts.omega() {
            return Err(Error::InvalidArgument(format!(
                "forcing period {} differs from time scale period {}",
                f.omega(),
                ts.omega()
            )));
        }
        let jump = &Matrix::identity(m) + &a.scale(ts.delta());
        let m_f = sup_norm_f(&f, &ts);
        Ok(ImpulsiveModel { a, ts, f, gamma, jump, m_f })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn timescale(&self) -> &TimeScaleSpec {
        &self.ts
    }

    pub fn forcing(&self) -> &TrigForcing {
        &self.f
    }

    pub fn gamma(&self) -> &PoissonSequence {
        &self.gamma
    }

    /// I + δA
    pub fn jump_matrix(&self) -> &Matrix {
        &self.jump
    }

    /// M_f
    pub fn m_f(&self) -> f64 {
        self.m_f
    }

    /// Certified ceiling for M_γ.
    pub fn m_gamma(&self) -> f64 {
        self.gamma.norm_ceiling()
    }

    /// One-period transition B = e^{(ω−δ)A}(I + δA).
    pub fn monodromy(&self) -> Result<Matrix> {
        Ok(&expm(&self.a.scale(self.ts.impulse_period()))? * &self.jump)
    }

    /// Inhomogeneity at abscissa `s` on the branch of interval k, i.e. for
    /// sₖ₋₁ < s ≤ sₖ (the left end is taken as a right limit).
    pub(crate) fn forcing_on_branch(&self, k: i64, s: f64, part: Part, out: &mut [f64]) -> Result<()> {
        self.forcing_at_time(k, s + k as f64 * self.ts.delta(), part, out)
    }

    /// f(t) + γₖ at time-scale abscissa t of interval k.
    pub(crate) fn forcing_at_time(&self, k: i64, t: f64, part: Part, out: &mut [f64]) -> Result<()> {
        if part.uses_gamma() {
            self.gamma.gamma_into(k, out)?;
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
        if part.uses_f() {
            let mut fv = vec![0.0; out.len()];
            self.f.eval_into(t, &mut fv);
            out.iter_mut().zip(fv).for_each(|(o, v)| *o += v);
        }
        Ok(())
    }

    /// x(sₖ+) from x(sₖ): x + δ(Ax + f(θ₂ₖ) + γₖ).
    pub fn apply_jump(&self, k: i64, x: &[f64], part: Part) -> Result<Vec<f64>> {
        let mut h = vec![0.0; x.len()];
        self.forcing_at_time(k, self.ts.interval_end(k), part, &mut h)?;
        let mut out = self.jump.mul_vec(x);
        let delta = self.ts.delta();
        out.iter_mut().zip(h).for_each(|(o, v)| *o += delta * v);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub pass: bool,
    pub value: f64,
}

/// det(I + δA) ≠ 0
pub fn check_a1(model: &ImpulsiveModel) -> AssumptionCheck {
    let value = det(model.jump_matrix());
    AssumptionCheck { pass: value.abs() > 1e-10, value }
}

/// ρ(e^{(ω−δ)A}(I + δA)) < 1
pub fn check_a2(model: &ImpulsiveModel) -> Result<AssumptionCheck> {
    let value = spectral_radius(&model.monodromy()?)?;
    Ok(AssumptionCheck { pass: value < 1.0 - 1e-10, value })
}

/// Certified exponential decay of the matriciant: ‖U(s, r)‖ ≤ N e^{−λ(s−r)}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityCert {
    /// Spectral radius of the one-period transition matrix.
    pub rho: f64,
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub grid_resolution: usize,
    /// Raw grid maximum of ‖U(s, r)‖e^{λ(s−r)} before the margins.
    pub grid_max: f64,
}

impl StabilityCert {
    pub fn bound(&self, span: f64) -> f64 {
        self.n * (-self.lambda * span).exp()
    }
}

pub const DEFAULT_CERT_GRID: usize = 200;
const LAMBDA_SAFETY: f64 = 0.9;

/// Certifies (N, λ) for the model.
///
/// λ is 0.9 of the Floquet rate −ln ρ/(ω−δ). N is the maximum of
/// ‖U(r+h, r)‖e^{λh} over a grid of r in one period and h ∈ [0, 2(ω−δ)],
/// inflated by the Lipschitz factor e^{(‖A‖+λ)Δh} to cover off-grid h, and by
/// K = supₙ ‖(B e^{λ(ω−δ)})ⁿ‖ to cover whole periods (U(r+h+n(ω−δ), r) =
/// U(r+h, r)Bⁿ).
pub fn certify(model: &ImpulsiveModel, grid_resolution: usize) -> Result<StabilityCert> {
    let a1 = check_a1(model);
    if !a1.pass {
        return Err(Error::AssumptionFailed { name: "A1", value: a1.value });
    }
    let a2 = check_a2(model)?;
    if !a2.pass {
        return Err(Error::AssumptionFailed { name: "A2", value: a2.value });
    }
    if grid_resolution < 2 {
        return Err(Error::InvalidArgument("certification grid needs ≥ 2 points".into()));
    }
    let ts = model.timescale();
    let p = ts.impulse_period();
    let rho = a2.value;
    // ρ = 0 happens for nilpotent-like B; any rate works then, cap it.
    let floquet_rate = if rho > 0.0 { -rho.ln() / p } else { 50.0 / p };
    let lambda = LAMBDA_SAFETY * floquet_rate;

    let dh = 2.0 * p / (grid_resolution - 1) as f64;
    let hs: Vec<f64> = (0..grid_resolution).map(|j| j as f64 * dh).collect();
    let exps: Vec<Matrix> =
        hs.iter().map(|&h| expm(&model.a().scale(h))).collect::<Result<_>>()?;
    let jump_powers: Vec<Matrix> = (0..4).map(|i| model.jump_matrix().pow(i)).collect();

    let s0 = ts.impulse_point(0);
    let mut grid_max = 0.0f64;
    for i in 0..grid_resolution {
        let r = s0 + p * i as f64 / grid_resolution as f64;
        for (h, e) in hs.iter().zip(&exps) {
            let count = ts.count_impulses(r, r + h)? as usize;
            let u = e * &jump_powers[count];
            grid_max = grid_max.max(spectral_norm(&u) * (lambda * h).exp());
        }
    }

    let norm_a = spectral_norm(model.a());
    let lipschitz = ((norm_a + lambda) * dh).exp();

    let scaled_b = model.monodromy()?.scale((lambda * p).exp());
    let mut power = Matrix::identity(model.dim());
    let mut period_factor = 1.0f64;
    let mut converged = false;
    for _ in 0..100_000 {
        power = &power * &scaled_b;
        let nrm = spectral_norm(&power);
        if nrm < 1.0 {
            converged = true;
            break;
        }
        period_factor = period_factor.max(nrm);
    }
    if !converged {
        return Err(Error::NoConvergence("period factor of the decay certificate"));
    }

    let n = (grid_max * lipschitz * period_factor).max(1.0);
    Ok(StabilityCert { rho, lambda, n, grid_resolution, grid_max })
}

/// Number of certification-grid pairs with ‖U(s, r)‖ > N e^{−λ(s−r)}.
pub fn decay_violations(model: &ImpulsiveModel, cert: &StabilityCert, resolution: usize) -> Result<usize> {
    let ts = model.timescale();
    let p = ts.impulse_period();
    let s0 = ts.impulse_point(0);
    let mut violations = 0;
    for i in 0..resolution {
        let r = s0 + p * i as f64 / resolution as f64;
        for j in 0..resolution {
            let h = 2.0 * p * j as f64 / (resolution - 1).max(1) as f64;
            let u = matriciant(model, r + h, r)?;
            if spectral_norm(&u) > cert.bound(h) {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

/// U(s, r) = e^{A(s−r)}(I + δA)^{i([r, s))}
pub fn matriciant(model: &ImpulsiveModel, s: f64, r: f64) -> Result<Matrix> {
    if s < r {
        return Err(Error::InvalidRange(format!("matriciant needs s ≥ r, got s = {s}, r = {r}")));
    }
    let count = model.timescale().count_impulses(r, s)?;
    Ok(&expm(&model.a().scale(s - r))? * &model.jump_matrix().pow(count))
}

/// U(s, r+): the jump at r itself is excluded.
pub fn matriciant_right(model: &ImpulsiveModel, s: f64, r: f64) -> Result<Matrix> {
    if s < r {
        return Err(Error::InvalidRange(format!("matriciant needs s ≥ r, got s = {s}, r = {r}")));
    }
    let count = model.timescale().count_impulses_open(r, s)?;
    Ok(&expm(&model.a().scale(s - r))? * &model.jump_matrix().pow(count))
}

/// N(M_f + M_γ)(1/λ + δ/(1 − e^{−λ(ω−δ)})): the sup-norm bound on the bounded solution.
pub fn solution_bound(cert: &StabilityCert, ts: &TimeScaleSpec, m_f: f64, m_gamma: f64) -> f64 {
    cert.n * (m_f + m_gamma) * decay_sum(cert.lambda, ts)
}

fn decay_sum(lambda: f64, ts: &TimeScaleSpec) -> f64 {
    1.0 / lambda + ts.delta() / (1.0 - (-lambda * ts.impulse_period()).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRecord {
    pub k: i64,
    pub s: f64,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

/// Samples at mesh points (pre-jump values at the sₖ) plus one record per jump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, Vec<f64>)>,
    pub jumps: Vec<JumpRecord>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        &self.samples.last().expect("trajectory has at least one sample").1
    }
}

fn integrate_impl(
    model: &ImpulsiveModel,
    x0: &[f64],
    s0: f64,
    s1: f64,
    step: f64,
    part: Part,
    mut sample: impl FnMut(f64, &[f64]),
    mut on_jump: impl FnMut(JumpRecord),
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if !(s0 <= s1) {
        return Err(Error::InvalidRange(format!("integration needs s0 ≤ s1, got [{s0}, {s1}]")));
    }
    if x0.len() != model.dim() {
        return Err(Error::Dimension(format!("initial state has {} entries", x0.len())));
    }
    let ts = model.timescale();
    let mut x = x0.to_vec();
    sample(s0, &x);
    let mut cur = s0;
    let k_first = ts.impulse_ceil(s0);
    let k_end = if s1 > s0 { ts.impulse_ceil(s1) } else { k_first };
    let failure = std::cell::RefCell::new(None);

    let advance = |x: &mut Vec<f64>, from: f64, to: f64, k: i64, sample: &mut dyn FnMut(f64, &[f64])| -> Result<()> {
        if to <= from {
            return Ok(());
        }
        // validate γₖ once; the closure below cannot return errors
        if part.uses_gamma() {
            model.gamma().gamma(k)?;
        }
        rk4_linear(
            model.a(),
            x,
            from,
            to,
            step_count(to - from, step),
            |s, out| {
                if let Err(e) = model.forcing_on_branch(k, s, part, out) {
                    failure.borrow_mut().get_or_insert(e);
                }
            },
            |s, y| sample(s, y),
        );
        Ok(())
    };

    for k in k_first..k_end {
        let sk = ts.impulse_point(k);
        advance(&mut x, cur, sk, k, &mut sample)?;
        let after = model.apply_jump(k, &x, part)?;
        on_jump(JumpRecord { k, s: sk, before: x.clone(), after: after.clone() });
        x = after;
        cur = sk;
    }
    advance(&mut x, cur, s1, k_end, &mut sample)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(x)
}

/// RK4 on each impulse-free stretch with the mesh split at every sₖ in [s0, s1).
/// Returns x(s1) as a left limit.
pub fn integrate(model: &ImpulsiveModel, x0: &[f64], s0: f64, s1: f64, step: f64) -> Result<Trajectory> {
    integrate_part(model, x0, s0, s1, step, Part::Full)
}

pub fn integrate_part(
    model: &ImpulsiveModel,
    x0: &[f64],
    s0: f64,
    s1: f64,
    step: f64,
    part: Part,
) -> Result<Trajectory> {
    let mut samples = Vec::new();
    let mut jumps = Vec::new();
    integrate_impl(
        model,
        x0,
        s0,
        s1,
        step,
        part,
        |s, x| samples.push((s, x.to_vec())),
        |j| jumps.push(j),
    )?;
    Ok(Trajectory { samples, jumps })
}

/// Same as [`integrate_part`] but only returns the final state.
pub fn integrate_endpoint(
    model: &ImpulsiveModel,
    x0: &[f64],
    s0: f64,
    s1: f64,
    step: f64,
    part: Part,
) -> Result<Vec<f64>> {
    integrate_impl(model, x0, s0, s1, step, part, |_, _| {}, |_| {})
}

struct FullSegment {
    propagator: Matrix,
    gamma_weight: Matrix,
    f_term: Vec<f64>,
}

/// Evaluator for the bounded solution
///
/// ```text
/// φ(s) = ∫_{−∞}^{s} U(s,r) (f(ψ⁻¹(r)) + g(ψ⁻¹(r))) dr + δ Σ_{sₖ<s} U(s,sₖ+) (f(ψ⁻¹(sₖ)) + γₖ)
/// ```
///
/// and its parts φ₁ (f only) and φ₂ (g only).
///
/// The lower limit is truncated at s − T, where the exponential tail bound
/// drops below tol/2. The integral is composite Simpson on each impulse-free
/// stretch; U(s, r) is factored through the stretch ends by the cocycle
/// property, so full stretches (all congruent modulo ω − δ) reuse one
/// precomputed propagator and weight matrix.
pub struct BoundedSolution<'m> {
    model: &'m ImpulsiveModel,
    tol: f64,
    horizon: f64,
    max_step: f64,
    full: FullSegment,
}

const SIMPSON_PANEL_CAP: f64 = 0.1;

fn simpson_coefficient(j: usize, n: usize) -> f64 {
    if j == 0 || j == n {
        1.0
    } else if j % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

fn even_count(len: f64, max_step: f64) -> usize {
    let n = step_count(len, max_step).max(2);
    n + n % 2
}

impl<'m> BoundedSolution<'m> {
    pub fn new(model: &'m ImpulsiveModel, cert: &StabilityCert, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let ts = model.timescale();
        let p = ts.impulse_period();
        let forcing_bound = model.m_f() + model.m_gamma();
        let tail = cert.n * forcing_bound * decay_sum(cert.lambda, ts);
        let horizon = if tail > 0.0 { ((2.0 * tail / tol).ln() / cert.lambda).max(0.0) } else { 0.0 };

        // Composite Simpson error ≤ h⁴/180 · N/λ · sup‖∂⁴(e^{A(b−r)}h(r))‖.
        let norm_a = spectral_norm(model.a());
        let h_bounds: Vec<f64> = (0..=4)
            .map(|j| if j == 0 { forcing_bound } else { model.forcing().derivative_bound(j) })
            .collect();
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        let d4: f64 = (0..=4).map(|i| binom[i] * norm_a.powi(i as i32) * h_bounds[4 - i]).sum();
        let cap = SIMPSON_PANEL_CAP.min(p / 50.0);
        let max_step = if d4 > 0.0 {
            (0.5 * tol * 180.0 * cert.lambda / (cert.n * d4)).powf(0.25).min(cap)
        } else {
            cap
        };

        let n = even_count(p, max_step);
        let dx = p / n as f64;
        let e_dx = expm(&model.a().scale(dx))?;
        let m = model.dim();
        let lo = ts.impulse_point(-1);
        let mut f_acc = vec![0.0; m];
        let mut w_acc = Matrix::zeros(m);
        let mut fv = vec![0.0; m];
        for j in 0..=n {
            let c = simpson_coefficient(j, n);
            f_acc = e_dx.mul_vec(&f_acc);
            w_acc = &e_dx * &w_acc;
            model.forcing().eval_into(lo + j as f64 * dx, &mut fv);
            f_acc.iter_mut().zip(&fv).for_each(|(a, v)| *a += c * v);
            for i in 0..m {
                w_acc[(i, i)] += c;
            }
        }
        let full = FullSegment {
            propagator: expm(&model.a().scale(p))?,
            gamma_weight: w_acc.scale(dx / 3.0),
            f_term: f_acc.iter().map(|v| v * dx / 3.0).collect(),
        };
        Ok(BoundedSolution { model, tol, horizon, max_step, full })
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Truncation depth T.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Simpson subinterval width bound.
    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    pub fn model(&self) -> &ImpulsiveModel {
        self.model
    }

    fn propagate(&self, z: &mut Vec<f64>, lo: f64, hi: f64, k: i64, full: bool, part: Part) -> Result<()> {
        let len = hi - lo;
        if len <= 0.0 {
            return Ok(());
        }
        let model = self.model;
        if full {
            let mut next = self.full.propagator.mul_vec(z);
            if part.uses_f() {
                next.iter_mut().zip(&self.full.f_term).for_each(|(a, b)| *a += b);
            }
            if part.uses_gamma() {
                let g = model.gamma().gamma(k)?;
                self.full.gamma_weight.mul_vec_add(&g, &mut next);
            }
            *z = next;
            return Ok(());
        }
        let n = even_count(len, self.max_step);
        let dx = len / n as f64;
        let e_dx = expm(&model.a().scale(dx))?;
        let mut acc = vec![0.0; z.len()];
        let mut h = vec![0.0; z.len()];
        for j in 0..=n {
            let r = if j == n { hi } else { lo + j as f64 * dx };
            acc = e_dx.mul_vec(&acc);
            model.forcing_on_branch(k, r, part, &mut h)?;
            let c = simpson_coefficient(j, n);
            acc.iter_mut().zip(&h).for_each(|(a, v)| *a += c * v);
        }
        let mut next = expm(&model.a().scale(len))?.mul_vec(z);
        next.iter_mut().zip(&acc).for_each(|(a, v)| *a += v * dx / 3.0);
        *z = next;
        Ok(())
    }

    /// Left value φ(s) (jumps strictly before s only).
    pub fn eval(&self, s: f64, part: Part) -> Result<Vec<f64>> {
        let model = self.model;
        let ts = model.timescale();
        let mut z = vec![0.0; model.dim()];
        if self.horizon == 0.0 {
            return Ok(z);
        }
        let start = s - self.horizon;
        let k_first = ts.impulse_ceil(start);
        let k_end = ts.impulse_ceil(s);
        if part.uses_gamma() {
            let seed = model.gamma().first_index();
            if k_first < seed {
                return Err(Error::TruncationBeyondSeed { needed: k_first, k_min: seed });
            }
            if let Some(last) = model.gamma().last_index() {
                if k_end > last {
                    return Err(Error::GammaUndefined { k: k_end });
                }
            }
        }
        let mut cur = start;
        for k in k_first..k_end {
            let sk = ts.impulse_point(k);
            self.propagate(&mut z, cur, sk, k, k > k_first, part)?;
            z = model.apply_jump(k, &z, part)?;
            cur = sk;
        }
        self.propagate(&mut z, cur, s, k_end, false, part)?;
        Ok(z)
    }

    /// Right limit φ(s+); differs from [`eval`](Self::eval) only at impulse moments.
    pub fn eval_right(&self, s: f64, part: Part) -> Result<Vec<f64>> {
        let ts = self.model.timescale();
        let k = ts.impulse_ceil(s);
        let left = self.eval(s, part)?;
        if (s - ts.impulse_point(k)).abs() <= tie_tolerance(s) {
            self.model.apply_jump(k, &left, part)
        } else {
            Ok(left)
        }
    }

    pub fn phi(&self, s: f64) -> Result<Vec<f64>> {
        self.eval(s, Part::Full)
    }

    pub fn phi1(&self, s: f64) -> Result<Vec<f64>> {
        self.eval(s, Part::Periodic)
    }

    pub fn phi2(&self, s: f64) -> Result<Vec<f64>> {
        self.eval(s, Part::Poisson)
    }
}

/// φ(s) of the bounded solution.
pub fn bounded_solution(model: &ImpulsiveModel, cert: &StabilityCert, s: f64, tol: f64) -> Result<Vec<f64>> {
    BoundedSolution::new(model, cert, tol)?.phi(s)
}

/// φ₁(s): the f-driven part.
pub fn phi1(model: &ImpulsiveModel, cert: &StabilityCert, s: f64, tol: f64) -> Result<Vec<f64>> {
    BoundedSolution::new(model, cert, tol)?.phi1(s)
}

/// φ₂(s): the g-driven part.
pub fn phi2(model: &ImpulsiveModel, cert: &StabilityCert, s: f64, tol: f64) -> Result<Vec<f64>> {
    BoundedSolution::new(model, cert, tol)?.phi2(s)
}

/// Max over the given abscissae of ‖φ(s)‖.
pub fn sampled_sup(eval: &BoundedSolution<'_>, points: &[f64]) -> Result<f64> {
    points.iter().try_fold(0.0f64, |acc, &s| Ok(acc.max(norm2(&eval.phi(s)?))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{Harmonic, TrigComponent};
    use crate::matrixkit::dist2;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn ts() -> TimeScaleSpec {
        TimeScaleSpec::new(1.0, 8.0, 3.0).unwrap()
    }

    fn example_a() -> Matrix {
        Matrix::from_rows(&[vec![-0.4, 0.2], vec![-0.2, -0.4]]).unwrap()
    }

    fn example_f() -> TrigForcing {
        TrigForcing::new(
            8.0,
            vec![
                TrigComponent { constant: 0.0, harmonics: vec![Harmonic { n: 1, cos: 1.0, sin: 0.0 }] },
                TrigComponent { constant: 0.0, harmonics: vec![Harmonic { n: 2, cos: 0.0, sin: 1.0 }] },
            ],
        )
        .unwrap()
    }

    fn zero_gamma(m: usize) -> PoissonSequence {
        PoissonSequence::logistic(3.9, 0.4, -2000, vec![0.0; m]).unwrap()
    }

    fn example_model() -> ImpulsiveModel {
        let g = PoissonSequence::logistic(3.9, 0.4, -2000, vec![1.0, 2.0]).unwrap();
        ImpulsiveModel::new(example_a(), ts(), example_f(), g).unwrap()
    }

    fn unforced(a: Matrix) -> ImpulsiveModel {
        let m = a.dim();
        ImpulsiveModel::new(a, ts(), TrigForcing::zero(8.0, m).unwrap(), zero_gamma(m)).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(ImpulsiveModel::new(example_a(), ts(), TrigForcing::zero(8.0, 3).unwrap(), zero_gamma(2)).is_err());
        assert!(ImpulsiveModel::new(example_a(), ts(), example_f(), zero_gamma(1)).is_err());
        assert!(ImpulsiveModel::new(example_a(), ts(), TrigForcing::zero(6.0, 2).unwrap(), zero_gamma(2)).is_err());
    }

    #[test]
    fn assumption_a1() {
        let c = check_a1(&example_model());
        assert!(c.pass);
        assert!((c.value - 0.4).abs() < 1e-12);
        let c = check_a1(&unforced(Matrix::identity(2).scale(-1.0 / 3.0)));
        assert!(!c.pass);
        assert!(c.value.abs() < 1e-15);
        let c = check_a1(&unforced(Matrix::zeros(2)));
        assert!(c.pass);
        assert_eq!(c.value, 1.0);
    }

    #[test]
    fn assumption_a2() {
        let c = check_a2(&example_model()).unwrap();
        assert!(c.pass);
        assert!((c.value - (-2.0f64).exp() * 0.4f64.sqrt()).abs() < 1e-8);
        let c = check_a2(&unforced(Matrix::zeros(2))).unwrap();
        assert!(!c.pass);
        assert!((c.value - 1.0).abs() < 1e-12);
        let c = check_a2(&unforced(Matrix::diag(&[-1.0, -1.0]))).unwrap();
        assert!(c.pass);
        assert!((c.value - 2.0 * (-5.0f64).exp()).abs() < 1e-12);
        assert!(matches!(
            certify(&unforced(Matrix::zeros(2)), 50),
            Err(Error::AssumptionFailed { name: "A2", .. })
        ));
    }

    #[test]
    fn certificate_for_example() {
        let model = example_model();
        let cert = certify(&model, DEFAULT_CERT_GRID).unwrap();
        let rate = -((-2.0f64).exp() * 0.4f64.sqrt()).ln() / 5.0;
        assert!((cert.lambda - 0.9 * rate).abs() < 1e-8);
        assert!((cert.lambda - 0.4424).abs() < 1e-4);
        assert!(cert.n >= 1.0 && cert.n >= cert.grid_max);
        assert_eq!(decay_violations(&model, &cert, DEFAULT_CERT_GRID).unwrap(), 0);
    }

    #[test]
    fn scalar_certificate_matches_closed_form() {
        // x' = ax with jumps x ↦ (1 + δa)x; between jumps ‖U‖e^{λh} = e^{(a+λ)h}|1+δa|^i.
        let a = -0.5;
        let model = unforced(Matrix::from_rows(&[vec![a]]).unwrap());
        let resolution = 400;
        let cert = certify(&model, resolution).unwrap();
        let p = 5.0;
        let rho = (a * p).exp() * (1.0 + 3.0 * a).abs();
        let lambda = 0.9 * -rho.ln() / p;
        assert!((cert.lambda - lambda).abs() < 1e-12);
        let growth = a + lambda;
        assert!(growth > 0.0);
        let dh = 2.0 * p / (resolution - 1) as f64;
        // sup over one impulse-free stretch, approached from just after a jump
        let sup = (0..=2)
            .map(|i| (growth * (i + 1) as f64 * p).exp() * (1.0 + 3.0 * a).abs().powi(i))
            .fold(1.0, f64::max);
        assert!(cert.grid_max <= sup * (1.0 + 1e-12));
        assert!(cert.grid_max >= sup * (-2.0 * growth * dh - growth * p / resolution as f64).exp());
    }

    #[test]
    fn matriciant_values() {
        let model = example_model();
        assert!(matriciant(&model, 2.5, 2.5).unwrap().max_abs_diff(&Matrix::identity(2)) == 0.0);
        let expected = &expm(&example_a().scale(6.0)).unwrap() * model.jump_matrix();
        assert!(matriciant(&model, 6.0, 0.0).unwrap().max_abs_diff(&expected) < 1e-15);
        let no_jump = expm(&example_a().scale(3.5)).unwrap();
        assert!(matriciant(&model, 5.5, 2.0).unwrap().max_abs_diff(&no_jump) < 1e-15);
        // right limit at an impulse excludes that impulse
        let right = matriciant_right(&model, 3.0, 1.0).unwrap();
        assert!(right.max_abs_diff(&expm(&example_a().scale(2.0)).unwrap()) < 1e-15);
        assert!(matriciant(&model, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn cocycle(r in -20.0f64..20.0, a in 0.0f64..15.0, b in 0.0f64..15.0) {
            let model = example_model();
            let (q, s) = (r + a, r + a + b);
            let lhs = matriciant(&model, s, r).unwrap();
            let rhs = &matriciant(&model, s, q).unwrap() * &matriciant(&model, q, r).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
        }

        #[test]
        fn period_shift(r in -20.0f64..20.0, h in 0.0f64..20.0) {
            let model = example_model();
            let u = matriciant(&model, r + h, r).unwrap();
            let shifted = matriciant(&model, r + h + 5.0, r + 5.0).unwrap();
            prop_assert!(u.max_abs_diff(&shifted) <= 1e-10);
        }
    }

    #[test]
    fn integration_matches_matriciant() {
        let model = unforced(example_a());
        let x0 = [1.0, -2.0];
        let traj = integrate(&model, &[0.0, 0.0], -3.0, 12.0, 1e-3).unwrap();
        assert!(traj.samples.iter().all(|(_, x)| x == &[0.0, 0.0]));
        let no_jump = integrate(&model, &x0, 1.5, 5.5, 1e-3).unwrap();
        let e = expm(&example_a().scale(4.0)).unwrap().mul_vec(&x0);
        assert!(dist2(no_jump.last(), &e) < 1e-8);
        for &(s0, s1) in &[(-3.0, 12.0), (1.0, 11.0), (0.3, 21.0), (-7.2, 6.0)] {
            let traj = integrate(&model, &x0, s0, s1, 1e-3).unwrap();
            let oracle = matriciant(&model, s1, s0).unwrap().mul_vec(&x0);
            assert!(dist2(traj.last(), &oracle) < 1e-8, "[{s0}, {s1}]");
        }
    }

    #[test]
    fn integration_records_jumps() {
        let model = example_model();
        let traj = integrate(&model, &[0.2, 0.1], -2.0, 17.0, 1e-2).unwrap();
        assert_eq!(traj.jumps.iter().map(|j| j.k).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        for j in &traj.jumps {
            let f = model.forcing().eval(ts().psi_inv(j.s));
            let g = model.gamma().gamma(j.k).unwrap();
            let ax = model.a().mul_vec(&j.before);
            for i in 0..2 {
                let expected = j.before[i] + 3.0 * (ax[i] + f[i] + g[i]);
                assert!((j.after[i] - expected).abs() <= 1e-14 * expected.abs().max(1.0));
            }
        }
        assert!(traj.samples.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(integrate(&model, &[0.0, 0.0], 0.0, 1.0, 0.0).is_err());
        assert!(integrate(&model, &[0.0, 0.0], 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn zero_forcing_gives_zero_solution() {
        let model = unforced(example_a());
        let cert = certify(&model, 100).unwrap();
        for s in [-3.0, 0.0, 1.0, 7.7] {
            assert_eq!(bounded_solution(&model, &cert, s, 1e-8).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn scalar_bounded_solution_closed_form() {
        // x' = ax + bₖ on (sₖ₋₁, sₖ] with bₖ = c + γₖ, then x ↦ x + δ(ax + bₖ).
        // Exact flow per stretch, composed from the deep past.
        let (a, c, delta, p) = (-0.5, 0.7, 3.0, 5.0);
        let gamma = |k: i64| if k.rem_euclid(2) == 0 { 0.9 } else { -0.4 };
        let table: BTreeMap<i64, Vec<f64>> = (-300..300).map(|k| (k, vec![gamma(k)])).collect();
        let model = ImpulsiveModel::new(
            Matrix::from_rows(&[vec![a]]).unwrap(),
            ts(),
            TrigForcing::constant(8.0, &[c]).unwrap(),
            PoissonSequence::table(table).unwrap(),
        )
        .unwrap();
        let cert = certify(&model, 200).unwrap();
        let e = (a * p).exp();
        let after_jump = |k_last: i64| {
            let mut u = 0.0;
            for k in -250..=k_last {
                let b = c + gamma(k);
                let x = -b / a + (u + b / a) * e;
                u = x + delta * (a * x + b);
            }
            u
        };
        let oracle = |s: f64| {
            let k = ((s - 1.0) / p).ceil() as i64;
            let b = c + gamma(k);
            let start = 1.0 + (k - 1) as f64 * p;
            -b / a + (after_jump(k - 1) + b / a) * (a * (s - start)).exp()
        };
        let eval = BoundedSolution::new(&model, &cert, 1e-10).unwrap();
        for s in [-4.0, 0.0, 1.0, 1.5, 3.3, 6.0, 9.99, 20.0] {
            let phi = eval.phi(s).unwrap()[0];
            assert!((phi - oracle(s)).abs() < 1e-9, "s = {s}: {phi} vs {}", oracle(s));
        }
        let right = eval.eval_right(6.0, Part::Full).unwrap()[0];
        assert!((right - after_jump(1)).abs() < 1e-9);
    }

    #[test]
    fn bounded_solution_matches_deep_past_integration() {
        let model = example_model();
        let cert = certify(&model, DEFAULT_CERT_GRID).unwrap();
        let eval = BoundedSolution::new(&model, &cert, 1e-8).unwrap();
        for s in [-2.0, 1.0, 4.4, 10.0, 13.7] {
            let deep = integrate_endpoint(&model, &[0.0, 0.0], s - 70.0, s, 2e-3, Part::Full).unwrap();
            assert!(dist2(&eval.phi(s).unwrap(), &deep) < 1e-6, "s = {s}");
        }
    }

    #[test]
    fn parts_and_periodicity() {
        let model = example_model();
        let cert = certify(&model, 100).unwrap();
        let tol = 1e-8;
        let eval = BoundedSolution::new(&model, &cert, tol).unwrap();
        for i in 0..40 {
            let s = -3.0 + 0.37 * i as f64;
            let full = eval.phi(s).unwrap();
            let (p1, p2) = (eval.phi1(s).unwrap(), eval.phi2(s).unwrap());
            let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
            assert!(dist2(&full, &sum) <= 2.0 * tol);
            assert!(dist2(&p1, &eval.phi1(s + 5.0).unwrap()) < 1e-6);
        }
        let periodic_only = ImpulsiveModel::new(example_a(), ts(), example_f(), zero_gamma(2)).unwrap();
        let e = BoundedSolution::new(&periodic_only, &cert, tol).unwrap();
        assert_eq!(e.phi2(3.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(e.phi1(3.0).unwrap(), e.phi(3.0).unwrap());
        let g = PoissonSequence::logistic(3.9, 0.4, -2000, vec![1.0, 2.0]).unwrap();
        let poisson_only = ImpulsiveModel::new(example_a(), ts(), TrigForcing::zero(8.0, 2).unwrap(), g).unwrap();
        let e = BoundedSolution::new(&poisson_only, &cert, tol).unwrap();
        assert_eq!(e.phi1(3.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn bounded_solution_solves_the_system() {
        let model = example_model();
        let cert = certify(&model, 100).unwrap();
        let tol = 1e-10;
        let eval = BoundedSolution::new(&model, &cert, tol).unwrap();
        let h = 1e-3;
        for s in [-2.3, 0.4, 2.5, 7.9, 12.2] {
            let (lo, hi) = (eval.phi(s - h).unwrap(), eval.phi(s + h).unwrap());
            let x = eval.phi(s).unwrap();
            let k = ts().impulse_ceil(s);
            let mut rhs = vec![0.0; 2];
            model.forcing_on_branch(k, s, Part::Full, &mut rhs).unwrap();
            model.a().mul_vec_add(&x, &mut rhs);
            let fd: Vec<f64> = hi.iter().zip(&lo).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            assert!(dist2(&fd, &rhs) < 1e-4, "s = {s}");
        }
        for k in 0..3 {
            let sk = ts().impulse_point(k);
            let left = eval.phi(sk).unwrap();
            let right = eval.phi(sk + 1e-9).unwrap();
            let expected = model.apply_jump(k, &left, Part::Full).unwrap();
            assert!(dist2(&right, &expected) < 1e-8);
        }
    }

    #[test]
    fn sup_bound_holds() {
        let model = example_model();
        let cert = certify(&model, DEFAULT_CERT_GRID).unwrap();
        let eval = BoundedSolution::new(&model, &cert, 1e-8).unwrap();
        let points: Vec<f64> = (0..400).map(|i| -5.0 + 0.1 * i as f64).collect();
        let sup = sampled_sup(&eval, &points).unwrap();
        assert!(sup <= solution_bound(&cert, model.timescale(), model.m_f(), model.m_gamma()));
    }

    #[test]
    fn truncation_before_seed_is_reported() {
        let g = PoissonSequence::logistic(3.9, 0.4, 0, vec![1.0, 2.0]).unwrap();
        let model = ImpulsiveModel::new(example_a(), ts(), example_f(), g).unwrap();
        let cert = certify(&model, 100).unwrap();
        assert!(matches!(
            bounded_solution(&model, &cert, 5.0, 1e-8),
            Err(Error::TruncationBeyondSeed { .. })
        ));
    }
}
