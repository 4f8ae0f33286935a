//! The periodic time scale T₀ = ⋃ₖ [θ₂ₖ₋₁, θ₂ₖ] and the ψ-substitution that
//! collapses its gaps.
//!
//! Interval k is [θ₂ₖ₋₁, θ₂ₖ] = [θ + δ + (k−1)ω, θ + kω]; the gap after it has
//! length δ. ψ(t) = t − kδ on θ₂ₖ₋₁ < t ≤ θ₂ₖ maps T₀′ (T₀ without the left
//! endpoints) onto ℝ, sending θ₂ₖ to the impulse moment sₖ = θ + k(ω − δ).

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest interval index we accept; keeps θₖ exactly representable.
pub const MAX_INDEX: i64 = 1 << 52;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeScaleSpec {
    theta: f64,
    omega: f64,
    delta: f64,
}

/// Where a real number falls relative to the time scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    /// θ₂ₖ₋₁: left-scattered, right-dense, outside T₀′.
    LeftEnd,
    /// θ₂ₖ₋₁ < t < θ₂ₖ
    Interior,
    /// θ₂ₖ: left-dense, right-scattered.
    RightEnd,
    /// θ₂ₖ₋₂ < t < θ₂ₖ₋₁, not in T₀.
    Gap,
}

/// `k` is the interval index for points of T₀; for gap points it is the index
/// of the interval that follows the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub k: i64,
    pub position: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PointClass {
    pub right_dense: bool,
    pub right_scattered: bool,
    pub left_dense: bool,
    pub left_scattered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpInfo {
    pub sigma: f64,
    pub rho: f64,
    pub class: PointClass,
}

/// Boundary tie tolerance: points this close to an endpoint are that endpoint.
#[inline]
pub fn tie_tolerance(t: f64) -> f64 {
    // 2^-40
    9.094947017729282e-13 * t.abs().max(1.0)
}

fn checked_index(q: f64) -> Result<i64> {
    if !q.is_finite() || q.abs() > MAX_INDEX as f64 {
        return Err(Error::InvalidArgument(format!("index {q} exceeds the supported range")));
    }
    Ok(q as i64)
}

impl TimeScaleSpec {
    /// Validates 0 < δ < ω and the normalization θ₋₁ < 0 ≤ θ₀.
    pub fn new(theta: f64, omega: f64, delta: f64) -> Result<Self> {
        if !(theta.is_finite() && omega.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidTimeScale("parameters must be finite".into()));
        }
        if delta <= 0.0 {
            return Err(Error::InvalidTimeScale("δ > 0 violated".into()));
        }
        if omega <= delta {
            return Err(Error::InvalidTimeScale("ω > δ violated".into()));
        }
        if !(theta + delta - omega < 0.0 && 0.0 <= theta) {
            return Err(Error::InvalidTimeScale("θ₋₁ < 0 ≤ θ₀ violated".into()));
        }
        Ok(TimeScaleSpec { theta, omega, delta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Spacing ω − δ of the impulse moments.
    pub fn impulse_period(&self) -> f64 {
        self.omega - self.delta
    }

    /// θₖ
    pub fn theta_point(&self, k: i64) -> f64 {
        let half = k.div_euclid(2);
        if k.rem_euclid(2) == 0 {
            self.theta + half as f64 * self.omega
        } else {
            // k = 2j - 1 with j = half + 1
            self.theta + self.delta + half as f64 * self.omega
        }
    }

    /// Left endpoint θ₂ₖ₋₁ of interval k.
    pub fn interval_start(&self, k: i64) -> f64 {
        self.theta_point(2 * k - 1)
    }

    /// Right endpoint θ₂ₖ of interval k.
    pub fn interval_end(&self, k: i64) -> f64 {
        self.theta_point(2 * k)
    }

    pub fn locate(&self, t: f64) -> Result<Location> {
        let tol = tie_tolerance(t);
        let q = (t - self.theta) / self.omega;
        let nearest = checked_index(q.round())?;
        if (t - self.interval_end(nearest)).abs() <= tol {
            return Ok(Location { k: nearest, position: Position::RightEnd });
        }
        let k = checked_index(q.ceil())?;
        let left = self.interval_start(k);
        let position = if (t - left).abs() <= tol {
            Position::LeftEnd
        } else if t > left {
            Position::Interior
        } else {
            Position::Gap
        };
        Ok(Location { k, position })
    }

    pub fn contains(&self, t: f64) -> bool {
        matches!(self.locate(t), Ok(loc) if loc.position != Position::Gap)
    }

    /// Interval index of a point of T₀.
    pub fn interval_index(&self, t: f64) -> Result<i64> {
        let loc = self.locate(t)?;
        if loc.position == Position::Gap {
            return Err(Error::NotInTimeScale { t });
        }
        Ok(loc.k)
    }

    /// σ, ρ and the density class of a point of T₀.
    pub fn jump_operators(&self, t: f64) -> Result<JumpInfo> {
        let loc = self.locate(t)?;
        let dense = PointClass {
            right_dense: true,
            right_scattered: false,
            left_dense: true,
            left_scattered: false,
        };
        match loc.position {
            Position::Gap => Err(Error::NotInTimeScale { t }),
            Position::Interior => Ok(JumpInfo { sigma: t, rho: t, class: dense }),
            Position::RightEnd => Ok(JumpInfo {
                sigma: self.theta_point(2 * loc.k + 1),
                rho: t,
                class: PointClass { right_dense: false, right_scattered: true, ..dense },
            }),
            Position::LeftEnd => Ok(JumpInfo {
                sigma: t,
                rho: self.theta_point(2 * loc.k - 2),
                class: PointClass { left_dense: false, left_scattered: true, ..dense },
            }),
        }
    }

    /// ψ(t) = t − kδ for θ₂ₖ₋₁ < t ≤ θ₂ₖ.
    pub fn psi(&self, t: f64) -> Result<f64> {
        let loc = self.locate(t)?;
        match loc.position {
            Position::Interior | Position::RightEnd => Ok(t - loc.k as f64 * self.delta),
            Position::LeftEnd => Err(Error::PsiUndefined { t, k: loc.k }),
            Position::Gap => Err(Error::NotInTimeScale { t }),
        }
    }

    /// ψ⁻¹(s) = s + kδ for sₖ₋₁ < s ≤ sₖ. Left-continuous, jumps by δ after each sₖ.
    pub fn psi_inv(&self, s: f64) -> f64 {
        s + self.impulse_ceil(s) as f64 * self.delta
    }

    /// Impulse moment sₖ = θ + k(ω − δ).
    pub fn impulse_point(&self, k: i64) -> f64 {
        self.theta + k as f64 * self.impulse_period()
    }

    /// Smallest k with sₖ ≥ x (ties snapped).
    pub fn impulse_ceil(&self, x: f64) -> i64 {
        let q = (x - self.theta) / self.impulse_period();
        let nearest = q.round().clamp(-(MAX_INDEX as f64), MAX_INDEX as f64) as i64;
        if (x - self.impulse_point(nearest)).abs() <= tie_tolerance(x) {
            nearest
        } else {
            q.ceil().clamp(-(MAX_INDEX as f64), MAX_INDEX as f64) as i64
        }
    }

    /// Largest k with sₖ ≤ x (ties snapped).
    pub fn impulse_floor(&self, x: f64) -> i64 {
        let k = self.impulse_ceil(x);
        if (x - self.impulse_point(k)).abs() <= tie_tolerance(x) {
            k
        } else {
            k - 1
        }
    }

    /// i([r, s)): the number of impulse moments r ≤ sₖ < s.
    pub fn count_impulses(&self, r: f64, s: f64) -> Result<u64> {
        if r > s {
            return Err(Error::InvalidRange(format!("count_impulses needs r ≤ s, got [{r}, {s})")));
        }
        Ok((self.impulse_ceil(s) - self.impulse_ceil(r)).max(0) as u64)
    }

    /// i((r, s)): impulse moments with r < sₖ < s.
    pub fn count_impulses_open(&self, r: f64, s: f64) -> Result<u64> {
        if r > s {
            return Err(Error::InvalidRange(format!("count_impulses needs r ≤ s, got ({r}, {s})")));
        }
        Ok((self.impulse_ceil(s) - self.impulse_floor(r) - 1).max(0) as u64)
    }

    /// Points lo, lo + step, … of T₀ ∩ [lo, hi] together with every θ endpoint
    /// in that range, sorted and deduplicated.
    pub fn grid(&self, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
        if !(step > 0.0) || !(lo <= hi) {
            return Err(Error::InvalidRange(format!("grid [{lo}, {hi}] with step {step}")));
        }
        let k_lo = self.locate(lo)?.k;
        let k_hi = self.locate(hi)?.k;
        let mut endpoints = Vec::new();
        for k in k_lo..=k_hi {
            for e in [self.interval_start(k), self.interval_end(k)] {
                if e >= lo - tie_tolerance(e) && e <= hi + tie_tolerance(e) {
                    endpoints.push(e);
                }
            }
        }
        let n = ((hi - lo) / step + 1e-9).floor() as i64;
        let mut pts: Vec<f64> = (0..=n)
            .map(|j| lo + j as f64 * step)
            .filter(|&t| self.contains(t))
            .filter(|&t| endpoints.iter().all(|&e| (t - e).abs() > 1e-9 * t.abs().max(1.0)))
            .collect();
        pts.extend(endpoints);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(pts)
    }
}
