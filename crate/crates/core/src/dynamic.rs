//! Solutions on the time scale itself: direct simulation of
//! y^Δ = Ay + f + g, lifting of impulsive solutions through ψ, and
//! delta-derivative residuals.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::impulsive::{BoundedSolution, ImpulsiveModel, Part, StabilityCert};
use crate::matrixkit::{dist2, norm2};
use crate::ode::{rk4_linear, step_count};
use crate::timescale::{tie_tolerance, Position, TimeScaleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    Lifted,
}

/// Row kind when a solution is flattened for output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// A point of T₀′.
    Interior,
    /// y(θ₂ₖ₊₁), the right limit carried across the gap.
    RightEndpointValue,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Interior => "interior",
            Branch::RightEndpointValue => "right_endpoint_value",
        }
    }
}

/// Values of a solution on T₀.
///
/// `samples` holds points of T₀′ in increasing order. The values at the left
/// endpoints θ₂ₖ₊₁ (where ψ is undefined) live in `endpoints`, keyed by k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeScaleSolution {
    pub samples: Vec<(f64, Vec<f64>)>,
    pub endpoints: BTreeMap<i64, Vec<f64>>,
    pub provenance: Provenance,
}

fn match_tolerance(t: f64) -> f64 {
    1e-9 * t.abs().max(1.0)
}

impl TimeScaleSolution {
    fn empty(provenance: Provenance) -> Self {
        TimeScaleSolution { samples: Vec::new(), endpoints: BTreeMap::new(), provenance }
    }

    fn sample_index(&self, t: f64) -> Option<usize> {
        let tol = match_tolerance(t);
        let i = self.samples.partition_point(|(x, _)| *x < t - tol);
        (i < self.samples.len() && (self.samples[i].0 - t).abs() <= tol).then_some(i)
    }

    /// Value at a point of T₀, if sampled.
    pub fn value_at(&self, ts: &TimeScaleSpec, t: f64) -> Option<&[f64]> {
        let loc = ts.locate(t).ok()?;
        match loc.position {
            Position::LeftEnd => self.endpoints.get(&(loc.k - 1)).map(Vec::as_slice),
            Position::Gap => None,
            _ => self.sample_index(t).map(|i| self.samples[i].1.as_slice()),
        }
    }

    /// All stored values as (t, y, branch), sorted by t.
    pub fn rows(&self, ts: &TimeScaleSpec) -> Vec<(f64, &[f64], Branch)> {
        let mut rows: Vec<(f64, &[f64], Branch)> = self
            .samples
            .iter()
            .map(|(t, y)| (*t, y.as_slice(), Branch::Interior))
            .chain(
                self.endpoints
                    .iter()
                    .map(|(k, y)| (ts.interval_start(k + 1), y.as_slice(), Branch::RightEndpointValue)),
            )
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows
    }

    pub fn len(&self) -> usize {
        self.samples.len() + self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest ‖y‖ over every stored value.
    pub fn sup_norm(&self) -> f64 {
        self.samples
            .iter()
            .map(|(_, y)| y)
            .chain(self.endpoints.values())
            .map(|y| norm2(y))
            .fold(0.0, f64::max)
    }

    /// Pointwise sum with another solution stored on the same abscissae.
    pub fn try_add(&self, other: &TimeScaleSolution) -> Result<TimeScaleSolution> {
        let same_grid = self.samples.len() == other.samples.len()
            && self.samples.iter().zip(&other.samples).all(|(a, b)| a.0 == b.0)
            && self.endpoints.keys().eq(other.endpoints.keys());
        if !same_grid {
            return Err(Error::InvalidArgument("solutions are sampled on different grids".into()));
        }
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f64>>();
        Ok(TimeScaleSolution {
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| (a.0, add(&a.1, &b.1))).collect(),
            endpoints: self
                .endpoints
                .iter()
                .map(|(k, v)| (*k, add(v, &other.endpoints[k])))
                .collect(),
            provenance: self.provenance,
        })
    }

    /// Max pointwise distance to another solution on the same abscissae.
    pub fn max_distance(&self, other: &TimeScaleSolution) -> Result<f64> {
        if self.samples.len() != other.samples.len() || !self.endpoints.keys().eq(other.endpoints.keys()) {
            return Err(Error::InvalidArgument("solutions are sampled on different grids".into()));
        }
        let s = self.samples.iter().zip(&other.samples).map(|(a, b)| dist2(&a.1, &b.1));
        let e = self.endpoints.iter().map(|(k, v)| dist2(v, &other.endpoints[k]));
        Ok(s.chain(e).fold(0.0, f64::max))
    }
}

/// Integrates y' = Ay + f(t) + γₖ on each interval of T₀ by RK4 and applies
/// y(θ₂ₖ₊₁) = y(θ₂ₖ) + δ(Ay(θ₂ₖ) + f(θ₂ₖ) + γₖ) across every gap.
///
/// When `t0` is a left endpoint, `y0` is taken as the value there.
pub fn simulate_dynamic(
    model: &ImpulsiveModel,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    step: f64,
) -> Result<TimeScaleSolution> {
    let ts = model.timescale();
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if y0.len() != model.dim() {
        return Err(Error::Dimension(format!("initial state has {} entries", y0.len())));
    }
    let start = ts.locate(t0)?;
    if start.position == Position::Gap {
        return Err(Error::NotInTimeScale { t: t0 });
    }
    if !ts.contains(t_end) {
        return Err(Error::NotInTimeScale { t: t_end });
    }
    if !(t0 < t_end) {
        return Err(Error::InvalidRange(format!("simulation needs t0 < t_end, got [{t0}, {t_end}]")));
    }

    let mut sol = TimeScaleSolution::empty(Provenance::Simulated);
    let mut k = start.k;
    let mut y = y0.to_vec();
    if start.position == Position::LeftEnd {
        sol.endpoints.insert(k - 1, y.clone());
    } else {
        sol.samples.push((t0, y.clone()));
    }
    let mut cur = t0;
    loop {
        let end = ts.interval_end(k);
        let stop = end.min(t_end);
        if stop > cur {
            model.gamma().gamma(k)?;
            rk4_linear(
                model.a(),
                &mut y,
                cur,
                stop,
                step_count(stop - cur, step),
                |t, out| {
                    // γₖ validated above
                    let _ = model.forcing_at_time(k, t, Part::Full, out);
                },
                |t, v| sol.samples.push((t, v.to_vec())),
            );
        }
        if t_end <= end + tie_tolerance(end) {
            break;
        }
        y = model.apply_jump(k, &y, Part::Full)?;
        sol.endpoints.insert(k, y.clone());
        k += 1;
        cur = ts.interval_start(k);
        if (t_end - cur).abs() <= tie_tolerance(cur) {
            break;
        }
    }
    Ok(sol)
}

/// Value at one point of T₀ of the lift of an impulsive-side function.
///
/// For t ∈ T₀′ this is `phi_eval(ψ(t))`; at θ₂ₖ₊₁ it is the jump image of
/// `phi_eval(sₖ)` under the forcing terms selected by `part`.
pub fn lift_point(
    model: &ImpulsiveModel,
    part: Part,
    phi_eval: &dyn Fn(f64) -> Result<Vec<f64>>,
    t: f64,
) -> Result<Vec<f64>> {
    let ts = model.timescale();
    let loc = ts.locate(t)?;
    match loc.position {
        Position::Gap => Err(Error::NotInTimeScale { t }),
        Position::LeftEnd => {
            let k = loc.k - 1;
            let left = phi_eval(ts.impulse_point(k))?;
            model.apply_jump(k, &left, part)
        }
        _ => phi_eval(ts.psi(t)?),
    }
}

/// ϑ(t) = φ(ψ(t)) on a grid of T₀, with right limits at the left endpoints.
pub fn lift(
    model: &ImpulsiveModel,
    part: Part,
    phi_eval: &dyn Fn(f64) -> Result<Vec<f64>>,
    t_grid: &[f64],
) -> Result<TimeScaleSolution> {
    let ts = model.timescale();
    let mut grid = t_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut sol = TimeScaleSolution::empty(Provenance::Lifted);
    for t in grid {
        let loc = ts.locate(t)?;
        let value = lift_point(model, part, phi_eval, t)?;
        if loc.position == Position::LeftEnd {
            sol.endpoints.insert(loc.k - 1, value);
        } else if sol.samples.last().is_none_or(|(x, _)| t - x > match_tolerance(t)) {
            sol.samples.push((t, value));
        }
    }
    Ok(sol)
}

/// Lift of the bounded solution (or one of its parts) evaluated by `eval`.
pub fn lift_bounded(eval: &BoundedSolution<'_>, part: Part, t_grid: &[f64]) -> Result<TimeScaleSolution> {
    lift(eval.model(), part, &|s| eval.eval(s, part), t_grid)
}

/// Residual of y^Δ = Ay + f + g at t.
///
/// Exact difference quotient across the gap at right-scattered θ₂ₖ; a
/// forward difference to the next stored sample at right-dense points.
pub fn delta_residual(model: &ImpulsiveModel, sol: &TimeScaleSolution, t: f64) -> Result<f64> {
    let ts = model.timescale();
    let loc = ts.locate(t)?;
    let (y, y_next, gap) = match loc.position {
        Position::Gap => return Err(Error::NotInTimeScale { t }),
        Position::RightEnd => {
            let y = sol.value_at(ts, t).ok_or(Error::MissingSample { t })?;
            let next_t = ts.interval_start(loc.k + 1);
            let next = sol.endpoints.get(&loc.k).ok_or(Error::MissingSample { t: next_t })?;
            (y, next.as_slice(), ts.delta())
        }
        Position::Interior | Position::LeftEnd => {
            let y = sol.value_at(ts, t).ok_or(Error::MissingSample { t })?;
            let end = ts.interval_end(loc.k);
            let i = sol.samples.partition_point(|(x, _)| *x <= t + match_tolerance(t));
            match sol.samples.get(i) {
                Some((x, v)) if *x <= end + tie_tolerance(end) => (y, v.as_slice(), x - t),
                _ => return Err(Error::MissingSample { t }),
            }
        }
    };
    let mut rhs = vec![0.0; y.len()];
    model.forcing_at_time(loc.k, t, Part::Full, &mut rhs)?;
    model.a().mul_vec_add(y, &mut rhs);
    let diff: Vec<f64> = y_next.iter().zip(y).zip(&rhs).map(|((n, c), r)| (n - c) / gap - r).collect();
    Ok(norm2(&diff))
}

/// ϑ₁ and ϑ₂ on a grid: the lifts of φ₁ and φ₂.
pub fn decompose(
    model: &ImpulsiveModel,
    cert: &StabilityCert,
    t_grid: &[f64],
    tol: f64,
) -> Result<(TimeScaleSolution, TimeScaleSolution)> {
    decompose_with(&BoundedSolution::new(model, cert, tol)?, t_grid)
}

/// [`decompose`] with an existing evaluator.
pub fn decompose_with(eval: &BoundedSolution<'_>, t_grid: &[f64]) -> Result<(TimeScaleSolution, TimeScaleSolution)> {
    Ok((lift_bounded(eval, Part::Periodic, t_grid)?, lift_bounded(eval, Part::Poisson, t_grid)?))
}
