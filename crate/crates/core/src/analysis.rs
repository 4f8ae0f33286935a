//! Numerical verdicts on the bounded solution: periodicity of ϑ₁, Poisson
//! recurrence of ϑ₂, the sup-norm bound, exponential stability and the
//! aggregate MPPS report.

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::dynamic::{simulate_dynamic, TimeScaleSolution};
use crate::error::{Error, Result};
use crate::forcing::ReturnTimeSet;
use crate::impulsive::{solution_bound, ImpulsiveModel, StabilityCert};
use crate::matrixkit::dist2;
use crate::timescale::{Position, TimeScaleSpec};

/// Samples with ‖ya − yb‖ below this are left out of the decay fit.
pub const DECAY_FLOOR: f64 = 1e-12;
/// Allowed relative growth between consecutive Dₙ.
pub const DEFAULT_POISSON_SLACK: f64 = 0.1;
/// Minimum stability horizon, in periods.
pub const MIN_STABILITY_PERIODS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Periodicity,
    Poisson,
    Bound,
    Stability,
    Mpps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub kind: ReportKind,
    pub metrics: Vec<Metric>,
    pub pass: bool,
    pub parameters: Map<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn new(kind: ReportKind) -> Self {
        VerificationReport { kind, metrics: Vec::new(), pass: false, parameters: Map::new(), notes: Vec::new() }
    }

    fn push(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push(Metric { name: name.into(), value });
    }

    fn param(&mut self, name: &str, value: Value) {
        self.parameters.insert(name.to_string(), value);
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    /// Values of all metrics whose name starts with `prefix`, in order.
    pub fn series(&self, prefix: &str) -> Vec<f64> {
        self.metrics.iter().filter(|m| m.name.starts_with(prefix)).map(|m| m.value).collect()
    }
}

/// max over G of ‖ϑ₁(t+ω) − ϑ₁(t)‖, where G is every stored point whose
/// shift by ω is also stored.
pub fn verify_periodic(theta1: &TimeScaleSolution, ts: &TimeScaleSpec, tol: f64) -> Result<VerificationReport> {
    let omega = ts.omega();
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    for (t, y, _) in theta1.rows(ts) {
        if let Some(shifted) = theta1.value_at(ts, t + omega) {
            worst = worst.max(dist2(y, shifted));
            pairs += 1;
        }
    }
    if pairs == 0 {
        let t = theta1.rows(ts).first().map_or(f64::NAN, |r| r.0 + omega);
        return Err(Error::MissingSample { t });
    }
    let mut report = VerificationReport::new(ReportKind::Periodicity);
    report.push("max_shift_deviation", worst);
    report.push("pairs", pairs as f64);
    report.param("omega", json!(omega));
    report.param("tol", json!(tol));
    report.pass = worst < tol;
    Ok(report)
}

/// Thresholds of the Poisson verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonThresholds {
    pub eps: f64,
    pub slack: f64,
}

impl PoissonThresholds {
    pub fn new(eps: f64) -> Self {
        PoissonThresholds { eps, slack: DEFAULT_POISSON_SLACK }
    }
}

/// The gridded compact set C = [lo, hi] ∩ T₀, θ endpoints included.
pub fn compact_grid(ts: &TimeScaleSpec, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    let grid = ts.grid(lo, hi, step)?;
    if grid.is_empty() {
        return Err(Error::InvalidRange(format!("[{lo}, {hi}] does not meet the time scale")));
    }
    Ok(grid)
}

/// Dₙ = sup over the gridded C of ‖ϑ(t + ωζₙ) − ϑ(t)‖ for every mined ζₙ.
pub fn poisson_sups(
    theta_eval: &dyn Fn(f64) -> Result<Vec<f64>>,
    ts: &TimeScaleSpec,
    returns: &ReturnTimeSet,
    compact_lo: f64,
    compact_hi: f64,
    grid_step: f64,
) -> Result<Vec<f64>> {
    let grid = compact_grid(ts, compact_lo, compact_hi, grid_step)?;
    let base = grid.iter().map(|&t| theta_eval(t)).collect::<Result<Vec<_>>>()?;
    returns
        .entries
        .iter()
        .map(|e| {
            let eta = ts.omega() * e.zeta as f64;
            grid.iter().zip(&base).try_fold(0.0f64, |acc, (&t, y)| Ok(acc.max(dist2(&theta_eval(t + eta)?, y))))
        })
        .collect()
}

/// Poisson verdict: Dₙ non-increasing within the slack and the last Dₙ below ε.
pub fn verify_poisson(
    theta2_eval: &dyn Fn(f64) -> Result<Vec<f64>>,
    ts: &TimeScaleSpec,
    returns: &ReturnTimeSet,
    compact_lo: f64,
    compact_hi: f64,
    grid_step: f64,
    thresholds: PoissonThresholds,
) -> Result<VerificationReport> {
    if returns.entries.is_empty() {
        return Err(Error::InvalidArgument("no return times to verify".into()));
    }
    let sups = poisson_sups(theta2_eval, ts, returns, compact_lo, compact_hi, grid_step)?;
    Ok(poisson_report(&sups, ts, returns, compact_lo, compact_hi, grid_step, thresholds))
}

fn poisson_report(
    sups: &[f64],
    ts: &TimeScaleSpec,
    returns: &ReturnTimeSet,
    compact_lo: f64,
    compact_hi: f64,
    grid_step: f64,
    thresholds: PoissonThresholds,
) -> VerificationReport {
    let mut report = VerificationReport::new(ReportKind::Poisson);
    for (e, d) in returns.entries.iter().zip(sups) {
        report.push(format!("D[zeta={}]", e.zeta), *d);
    }
    let monotone = sups.windows(2).all(|w| w[1] <= (1.0 + thresholds.slack) * w[0]);
    let last = *sups.last().unwrap_or(&f64::INFINITY);
    report.push("final_D", last);
    report.push("final_defect", returns.entries.last().map_or(f64::NAN, |e| e.defect));
    report.push("monotone_within_slack", if monotone { 1.0 } else { 0.0 });
    report.param("eps", json!(thresholds.eps));
    report.param("slack", json!(thresholds.slack));
    report.param("compact", json!([compact_lo, compact_hi]));
    report.param("grid_step", json!(grid_step));
    report.param("return_window", json!([returns.k_lo, returns.k_hi]));
    report.param("zetas", json!(returns.entries.iter().map(|e| e.zeta).collect::<Vec<_>>()));
    report.param("etas", json!(returns.entries.iter().map(|e| ts.omega() * e.zeta as f64).collect::<Vec<_>>()));
    report.pass = monotone && last < thresholds.eps;
    report
}

/// Return window [α − j + 1, β] with depth j = ⌈ln(1/(τ₀ε))/(λ(ω−δ))⌉,
/// where C ⊆ [θ₂α, θ₂β] and τ₀ = 1/(2N(1 + 2M_γ)(1/λ + δ/(1 − e^{−λ(ω−δ)}))).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PaddedWindow {
    pub k_lo: i64,
    pub k_hi: i64,
    pub depth: i64,
}

pub fn padded_return_window(
    ts: &TimeScaleSpec,
    cert: &StabilityCert,
    m_gamma: f64,
    compact_lo: f64,
    compact_hi: f64,
    eps: f64,
) -> Result<PaddedWindow> {
    if !(compact_lo <= compact_hi) || !(eps > 0.0) {
        return Err(Error::InvalidArgument("padded window needs lo ≤ hi and ε > 0".into()));
    }
    let alpha = ((compact_lo - ts.theta()) / ts.omega()).floor() as i64;
    let beta = (((compact_hi - ts.theta()) / ts.omega()).ceil() as i64).max(alpha + 1);
    let tau0 = 1.0 / (solution_bound(cert, ts, 1.0, 2.0 * m_gamma) * 2.0);
    let depth = ((1.0 / (tau0 * eps)).ln() / (cert.lambda * ts.impulse_period())).ceil().max(1.0) as i64;
    Ok(PaddedWindow { k_lo: alpha - depth + 1, k_hi: beta, depth })
}

/// Sampled sup-norm of ϑ against N(M_f + M_γ)(1/λ + δ/(1 − e^{−λ(ω−δ)})).
pub fn verify_bound(
    theta: &TimeScaleSolution,
    cert: &StabilityCert,
    ts: &TimeScaleSpec,
    m_f: f64,
    m_gamma: f64,
) -> VerificationReport {
    let bound = solution_bound(cert, ts, m_f, m_gamma);
    let max = theta.sup_norm();
    let mut report = VerificationReport::new(ReportKind::Bound);
    report.push("max_norm", max);
    report.push("bound", bound);
    report.push("samples", theta.len() as f64);
    report.param("M_f", json!(m_f));
    report.param("M_gamma", json!(m_gamma));
    report.param("N", json!(cert.n));
    report.param("lambda", json!(cert.lambda));
    report.pass = max <= bound;
    report
}

/// Least-squares slope of ys against xs.
fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Simulates from `y0a` and `y0b`, fits the slope of ln‖ya − yb‖ against ψ(t)
/// and checks the envelope N‖y0a − y0b‖e^{−λ(ψ(t)−ψ(t0))} at every sample.
#[allow(clippy::too_many_arguments)]
pub fn verify_stability(
    model: &ImpulsiveModel,
    cert: &StabilityCert,
    y0a: &[f64],
    y0b: &[f64],
    t0: f64,
    horizon: f64,
    step: f64,
) -> Result<VerificationReport> {
    let ts = model.timescale();
    let s0 = ts.psi(t0)?;
    if !(horizon >= MIN_STABILITY_PERIODS * ts.omega()) {
        return Err(Error::InvalidArgument(format!(
            "stability horizon {horizon} is shorter than {MIN_STABILITY_PERIODS} periods"
        )));
    }
    let target = t0 + horizon;
    let loc = ts.locate(target)?;
    let t_end = if loc.position == Position::Gap { ts.interval_end(loc.k - 1) } else { target };
    let a = simulate_dynamic(model, y0a, t0, t_end, step)?;
    let b = simulate_dynamic(model, y0b, t0, t_end, step)?;

    let mut points: Vec<(f64, f64)> = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(p, q)| Ok((ts.psi(p.0)?, dist2(&p.1, &q.1))))
        .collect::<Result<_>>()?;
    points.extend(a.endpoints.iter().map(|(k, v)| (ts.impulse_point(*k), dist2(v, &b.endpoints[k]))));
    points.sort_by(|x, y| x.0.total_cmp(&y.0));

    let gap0 = dist2(y0a, y0b);
    let mut violations = 0usize;
    let mut worst_ratio = 0.0f64;
    for &(s, d) in &points {
        let envelope = cert.n * gap0 * (-cert.lambda * (s - s0)).exp();
        if d > envelope {
            violations += 1;
        }
        if envelope > 0.0 {
            worst_ratio = worst_ratio.max(d / envelope);
        }
    }
    let fit: Vec<(f64, f64)> =
        points.iter().take_while(|p| p.1 >= DECAY_FLOOR).map(|&(s, d)| (s, d.ln())).collect();

    let mut report = VerificationReport::new(ReportKind::Stability);
    report.push("initial_distance", gap0);
    report.push("envelope_violations", violations as f64);
    report.push("max_envelope_ratio", worst_ratio);
    report.push("fit_points", fit.len() as f64);
    report.param("t0", json!(t0));
    report.param("t_end", json!(t_end));
    report.param("step", json!(step));
    report.param("lambda", json!(cert.lambda));
    report.param("N", json!(cert.n));
    report.param("y0a", json!(y0a));
    report.param("y0b", json!(y0b));
    if gap0 == 0.0 {
        report.notes.push("identical initial states; difference vanishes identically".into());
        report.pass = violations == 0;
        return Ok(report);
    }
    let slope_ok = if fit.len() >= 2 {
        let xs: Vec<f64> = fit.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fit.iter().map(|p| p.1).collect();
        let slope = ls_slope(&xs, &ys);
        report.push("fitted_slope", slope);
        slope <= -cert.lambda
    } else {
        report.notes.push("difference fell below the floor before two samples".into());
        true
    };
    report.pass = slope_ok && violations == 0;
    Ok(report)
}

/// Component reports feeding the MPPS verdict.
#[derive(Debug, Clone, Copy)]
pub struct MppsInputs<'a> {
    pub periodic: &'a VerificationReport,
    pub poisson: &'a VerificationReport,
    pub bound: &'a VerificationReport,
    pub stability: &'a VerificationReport,
    /// The Poisson report recomputed on the full ϑ.
    pub poisson_full: &'a VerificationReport,
    pub eval_tol: f64,
}

/// Conjunction of the component verdicts plus the identity
/// sup‖ϑ(t+ηₙ) − ϑ(t)‖ = sup‖ϑ₂(t+ηₙ) − ϑ₂(t)‖ within 2·tol.
pub fn mpps_report(inputs: MppsInputs<'_>) -> VerificationReport {
    let d2 = inputs.poisson.series("D[");
    let d_full = inputs.poisson_full.series("D[");
    let gap = if d2.len() == d_full.len() {
        d2.iter().zip(&d_full).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let identity = gap <= 2.0 * inputs.eval_tol;
    let mut report = VerificationReport::new(ReportKind::Mpps);
    let parts = [
        ("periodicity", inputs.periodic.pass),
        ("poisson", inputs.poisson.pass),
        ("bound", inputs.bound.pass),
        ("stability", inputs.stability.pass),
        ("recurrence_identity", identity),
    ];
    for (name, pass) in parts {
        report.push(format!("{name}_pass"), if pass { 1.0 } else { 0.0 });
    }
    report.push("recurrence_identity_gap", gap);
    report.param("eval_tol", json!(inputs.eval_tol));
    report.pass = parts.iter().all(|p| p.1);
    report
}
