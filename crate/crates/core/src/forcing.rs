//! The ω-periodic forcing f and the piecewise-constant sequence forcing g.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::RwLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrixkit::{dist2, norm2};
use crate::timescale::TimeScaleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Harmonic {
    pub n: u32,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrigComponent {
    pub constant: f64,
    pub harmonics: Vec<Harmonic>,
}

/// f(t) = c + Σ aₙ cos(2πnt/ω) + bₙ sin(2πnt/ω), componentwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigForcing {
    omega: f64,
    components: Vec<TrigComponent>,
}

impl TrigForcing {
    pub fn new(omega: f64, components: Vec<TrigComponent>) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidArgument(format!("forcing period {omega} must be positive")));
        }
        if components.is_empty() {
            return Err(Error::Dimension("forcing needs at least one component".into()));
        }
        for c in &components {
            if !c.constant.is_finite() {
                return Err(Error::InvalidArgument("non-finite forcing constant".into()));
            }
            for h in &c.harmonics {
                if h.n == 0 {
                    return Err(Error::InvalidArgument("harmonic order must be ≥ 1".into()));
                }
                if !(h.cos.is_finite() && h.sin.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite harmonic coefficient".into()));
                }
            }
        }
        Ok(TrigForcing { omega, components })
    }

    pub fn zero(omega: f64, dim: usize) -> Result<Self> {
        Self::new(omega, vec![TrigComponent::default(); dim])
    }

    pub fn constant(omega: f64, c: &[f64]) -> Result<Self> {
        Self::new(
            omega,
            c.iter().map(|&v| TrigComponent { constant: v, harmonics: vec![] }).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn components(&self) -> &[TrigComponent] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.constant == 0.0 && c.harmonics.iter().all(|h| h.cos == 0.0 && h.sin == 0.0))
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.components.len()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        // Reduce modulo ω first so periodicity holds to rounding.
        let phase = t.rem_euclid(self.omega) / self.omega * TAU;
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.constant
                + c.harmonics
                    .iter()
                    .map(|h| {
                        let (s, co) = (h.n as f64 * phase).sin_cos();
                        h.cos * co + h.sin * s
                    })
                    .sum::<f64>();
        }
    }

    /// Componentwise bound on the j-th derivative, combined in the Euclidean norm.
    pub fn derivative_bound(&self, j: i32) -> f64 {
        let per: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let base = if j == 0 { c.constant.abs() } else { 0.0 };
                base + c
                    .harmonics
                    .iter()
                    .map(|h| h.cos.hypot(h.sin) * (TAU * h.n as f64 / self.omega).powi(j))
                    .sum::<f64>()
            })
            .collect();
        norm2(&per)
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// M_f = sup over T₀ of ‖f(t)‖.
///
/// Dense grid over one period of the time scale, then a golden-section polish
/// around the best local maxima.
pub fn sup_norm_f(forcing: &TrigForcing, ts: &TimeScaleSpec) -> f64 {
    const GRID: usize = 20_000;
    let lo = ts.interval_start(0);
    let hi = ts.interval_end(0);
    let h = (hi - lo) / GRID as f64;
    let sq = |t: f64| {
        let v = forcing.eval(t);
        v.iter().map(|x| x * x).sum::<f64>()
    };
    let values: Vec<f64> = (0..=GRID).map(|i| sq(lo + i as f64 * h)).collect();
    let mut best = values.iter().cloned().fold(0.0, f64::max);

    let mut peaks: Vec<usize> = (0..=GRID)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
            let right = if i == GRID { f64::NEG_INFINITY } else { values[i + 1] };
            values[i] >= left && values[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    for &i in peaks.iter().take(8) {
        let a = lo + i.saturating_sub(1) as f64 * h;
        let b = lo + (i + 1).min(GRID) as f64 * h;
        let (_, v) = golden_max(sq, a, b);
        best = best.max(v);
    }
    best.sqrt()
}

/// Source of the Poisson sequence γₖ.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonSequenceSpec {
    /// γₖ = C·zₖ with zₖ₊₁ = r zₖ(1 − zₖ), z_{k_min} = z0.
    Logistic { r: f64, z0: f64, k_min: i64, output: Vec<f64> },
    Table { table: BTreeMap<i64, Vec<f64>> },
}

pub const DEFAULT_K_MIN: i64 = -2000;
pub const DEFAULT_Z0: f64 = 0.4;

/// The sequence γₖ with a memoized logistic orbit.
///
/// The orbit cache is append-only behind a lock, so shared references can be
/// queried from several threads.
#[derive(Debug)]
pub struct PoissonSequence {
    spec: PoissonSequenceSpec,
    orbit: RwLock<Vec<f64>>,
}

impl Clone for PoissonSequence {
    fn clone(&self) -> Self {
        let orbit = self.orbit.read().unwrap_or_else(|e| e.into_inner()).clone();
        PoissonSequence { spec: self.spec.clone(), orbit: RwLock::new(orbit) }
    }
}

/// Iterates the logistic map `count` times from z0.
pub fn logistic_orbit(r: f64, z0: f64, count: usize) -> Result<Vec<f64>> {
    validate_logistic(r, z0)?;
    if count == 0 {
        return Err(Error::InvalidArgument("orbit length must be ≥ 1".into()));
    }
    let mut z = Vec::with_capacity(count);
    z.push(z0);
    for i in 1..count {
        let prev = z[i - 1];
        z.push(r * prev * (1.0 - prev));
    }
    Ok(z)
}

fn validate_logistic(r: f64, z0: f64) -> Result<()> {
    if !(r > 0.0 && r <= 4.0) {
        return Err(Error::InvalidArgument(format!("logistic parameter r = {r} outside (0, 4]")));
    }
    if !(z0 > 0.0 && z0 < 1.0) {
        return Err(Error::InvalidArgument(format!("logistic seed z0 = {z0} outside (0, 1)")));
    }
    Ok(())
}

impl PoissonSequence {
    pub fn new(spec: PoissonSequenceSpec) -> Result<Self> {
        match &spec {
            PoissonSequenceSpec::Logistic { r, z0, output, .. } => {
                validate_logistic(*r, *z0)?;
                if output.is_empty() || output.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("logistic output map must be finite".into()));
                }
            }
            PoissonSequenceSpec::Table { table } => {
                let dim = table
                    .values()
                    .next()
                    .map(Vec::len)
                    .ok_or_else(|| Error::InvalidArgument("empty gamma table".into()))?;
                if table.values().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
                    return Err(Error::Dimension("gamma table entries differ in length".into()));
                }
            }
        }
        Ok(PoissonSequence { spec, orbit: RwLock::new(Vec::new()) })
    }

    pub fn logistic(r: f64, z0: f64, k_min: i64, output: Vec<f64>) -> Result<Self> {
        Self::new(PoissonSequenceSpec::Logistic { r, z0, k_min, output })
    }

    pub fn table(table: BTreeMap<i64, Vec<f64>>) -> Result<Self> {
        Self::new(PoissonSequenceSpec::Table { table })
    }

    pub fn spec(&self) -> &PoissonSequenceSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        match &self.spec {
            PoissonSequenceSpec::Logistic { output, .. } => output.len(),
            PoissonSequenceSpec::Table { table } => table.values().next().map_or(0, Vec::len),
        }
    }

    /// Smallest index at which γ is defined.
    pub fn first_index(&self) -> i64 {
        match &self.spec {
            PoissonSequenceSpec::Logistic { k_min, .. } => *k_min,
            PoissonSequenceSpec::Table { table } => *table.keys().next().unwrap_or(&0),
        }
    }

    /// Largest index at which γ is defined, if bounded.
    pub fn last_index(&self) -> Option<i64> {
        match &self.spec {
            PoissonSequenceSpec::Logistic { .. } => None,
            PoissonSequenceSpec::Table { table } => table.keys().next_back().copied(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.spec {
            PoissonSequenceSpec::Logistic { output, .. } => output.iter().all(|&c| c == 0.0),
            PoissonSequenceSpec::Table { table } => table.values().flatten().all(|&v| v == 0.0),
        }
    }

    fn orbit_value(&self, r: f64, z0: f64, idx: usize) -> f64 {
        {
            let cache = self.orbit.read().unwrap_or_else(|e| e.into_inner());
            if let Some(&z) = cache.get(idx) {
                return z;
            }
        }
        let mut cache = self.orbit.write().unwrap_or_else(|e| e.into_inner());
        if cache.is_empty() {
            cache.push(z0);
        }
        while cache.len() <= idx {
            let z = *cache.last().unwrap();
            cache.push(r * z * (1.0 - z));
        }
        cache[idx]
    }

    /// Orbit value z*ₖ of the logistic variant.
    pub fn orbit_at(&self, k: i64) -> Result<f64> {
        match &self.spec {
            PoissonSequenceSpec::Logistic { r, z0, k_min, .. } => {
                if k < *k_min {
                    return Err(Error::GammaUndefined { k });
                }
                Ok(self.orbit_value(*r, *z0, (k - k_min) as usize))
            }
            PoissonSequenceSpec::Table { .. } => {
                Err(Error::InvalidArgument("table sequences have no underlying orbit".into()))
            }
        }
    }

    /// γₖ
    pub fn gamma(&self, k: i64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.gamma_into(k, &mut out)?;
        Ok(out)
    }

    pub fn gamma_into(&self, k: i64, out: &mut [f64]) -> Result<()> {
        match &self.spec {
            PoissonSequenceSpec::Logistic { output, .. } => {
                let z = self.orbit_at(k)?;
                for (o, c) in out.iter_mut().zip(output) {
                    *o = c * z;
                }
            }
            PoissonSequenceSpec::Table { table } => {
                let v = table.get(&k).ok_or(Error::GammaUndefined { k })?;
                out.copy_from_slice(v);
            }
        }
        Ok(())
    }

    /// g(t) = γₖ for t in [θ₂ₖ₋₁, θ₂ₖ].
    pub fn eval_g(&self, ts: &TimeScaleSpec, t: f64) -> Result<Vec<f64>> {
        self.gamma(ts.interval_index(t)?)
    }

    /// Analytic ceiling for sup ‖γₖ‖: ‖C‖ for the logistic variant (orbit in
    /// [0, 1]), the exact table maximum otherwise.
    pub fn norm_ceiling(&self) -> f64 {
        match &self.spec {
            PoissonSequenceSpec::Logistic { output, .. } => norm2(output),
            PoissonSequenceSpec::Table { table } => {
                table.values().map(|v| norm2(v)).fold(0.0, f64::max)
            }
        }
    }

    /// Observed max ‖γₖ‖ over `k_lo..=k_hi`, plus the analytic ceiling.
    pub fn sup_norm(&self, k_lo: i64, k_hi: i64) -> Result<GammaBound> {
        if k_lo > k_hi {
            return Err(Error::InvalidRange(format!("empty index range [{k_lo}, {k_hi}]")));
        }
        let mut buf = vec![0.0; self.dim()];
        let mut observed = 0.0f64;
        for k in k_lo..=k_hi {
            self.gamma_into(k, &mut buf)?;
            observed = observed.max(norm2(&buf));
        }
        Ok(GammaBound { observed, ceiling: self.norm_ceiling() })
    }

    /// d(ζ) = max over the window of ‖γₖ₊ζ − γₖ‖.
    pub fn recurrence_defect(&self, k_lo: i64, k_hi: i64, zeta: i64) -> Result<f64> {
        let (mut a, mut b) = (vec![0.0; self.dim()], vec![0.0; self.dim()]);
        let mut d = 0.0f64;
        for k in k_lo..=k_hi {
            self.gamma_into(k, &mut a)?;
            self.gamma_into(k + zeta, &mut b)?;
            d = d.max(dist2(&a, &b));
        }
        Ok(d)
    }

    /// Record-based return-time mining.
    ///
    /// Scans ζ = 1..=zeta_max and records every ζ whose defect strictly beats
    /// all earlier ones. The most recent `max_count` records are kept.
    pub fn find_return_times(
        &self,
        k_lo: i64,
        k_hi: i64,
        zeta_max: i64,
        max_count: usize,
    ) -> Result<ReturnTimeSet> {
        if k_lo > k_hi {
            return Err(Error::InvalidRange(format!("empty return window [{k_lo}, {k_hi}]")));
        }
        if zeta_max < 1 || max_count == 0 {
            return Err(Error::InvalidArgument("zeta_max and max_count must be positive".into()));
        }
        if k_lo < self.first_index() {
            return Err(Error::GammaUndefined { k: k_lo });
        }
        if let Some(last) = self.last_index() {
            if k_hi + zeta_max > last {
                return Err(Error::GammaUndefined { k: k_hi + zeta_max });
            }
        }
        let dim = self.dim();
        let width = (k_hi - k_lo + 1) as usize;
        let mut window = vec![0.0; width * dim];
        for (i, chunk) in window.chunks_mut(dim).enumerate() {
            self.gamma_into(k_lo + i as i64, chunk)?;
        }
        // Sliding copy of γ over [k_lo + ζ, k_hi + ζ].
        let mut shifted: Vec<f64> = Vec::with_capacity(width * dim);
        let mut buf = vec![0.0; dim];
        for i in 1..=width as i64 {
            self.gamma_into(k_lo + i, &mut buf)?;
            shifted.extend_from_slice(&buf);
        }
        let mut head = 0usize;
        let mut entries: Vec<ReturnEntry> = Vec::new();
        let mut best = f64::INFINITY;
        for zeta in 1..=zeta_max {
            if zeta > 1 {
                self.gamma_into(k_hi + zeta, &mut buf)?;
                shifted[head * dim..(head + 1) * dim].copy_from_slice(&buf);
                head = (head + 1) % width;
            }
            let mut d = 0.0f64;
            for i in 0..width {
                let j = (head + i) % width;
                let e = dist2(&window[i * dim..(i + 1) * dim], &shifted[j * dim..(j + 1) * dim]);
                if e > d {
                    d = e;
                    if d >= best {
                        break;
                    }
                }
            }
            if d < best {
                best = d;
                entries.push(ReturnEntry { zeta, defect: d });
                if d == 0.0 {
                    break;
                }
            }
        }
        if entries.len() > max_count {
            entries.drain(..entries.len() - max_count);
        }
        Ok(ReturnTimeSet { k_lo, k_hi, entries })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaBound {
    pub observed: f64,
    pub ceiling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnEntry {
    pub zeta: i64,
    pub defect: f64,
}

/// Mined return times ζₙ with their recurrence defects over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnTimeSet {
    pub k_lo: i64,
    pub k_hi: i64,
    pub entries: Vec<ReturnEntry>,
}

impl ReturnTimeSet {
    pub fn is_monotone(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[0].zeta < w[1].zeta && w[0].defect > w[1].defect)
    }
}
