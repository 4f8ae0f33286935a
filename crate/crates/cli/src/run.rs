//! Subcommand orchestration.

use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;

use tsdyn_core::analysis::{
    mpps_report, padded_return_window, verify_bound, verify_periodic, verify_poisson, verify_stability, MppsInputs,
    PoissonThresholds, VerificationReport,
};
use tsdyn_core::dynamic::{decompose_with, lift_bounded, lift_point, simulate_dynamic};
use tsdyn_core::impulsive::{certify, check_a1, check_a2, integrate, AssumptionCheck};
use tsdyn_core::{BoundedSolution, Part, ReturnTimeSet, StabilityCert};

use crate::config::Scenario;
use crate::output::{write_json, write_solution_csv, write_trajectory_csv};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Assumption checks and the decay certificate
    Check,
    /// Direct simulation on the time scale
    Simulate,
    /// Samples of the bounded solution
    Bounded,
    /// Periodic and Poisson parts of the bounded solution
    Decompose,
    /// Return times of the impulse sequence
    Returns,
    /// All verification reports
    Verify,
    /// The bundled scenario end to end
    Example,
}

/// Result of a successful run: overall verdict and files written.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub a1: AssumptionCheck,
    pub a2: AssumptionCheck,
    pub cert: Option<StabilityCert>,
    pub m_f: f64,
    pub m_gamma: f64,
    pub pass: bool,
}

struct Run<'a> {
    scenario: &'a Scenario,
    out: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.files.push(p.clone());
        p
    }

    fn check(&mut self) -> Result<CheckReport, CliError> {
        let model = &self.scenario.model;
        let a1 = check_a1(model);
        let a2 = check_a2(model)?;
        let cert = if a1.pass && a2.pass {
            Some(certify(model, self.scenario.config.stability.cert_grid)?)
        } else {
            None
        };
        let report =
            CheckReport { a1, a2, cert, m_f: model.m_f(), m_gamma: model.m_gamma(), pass: a1.pass && a2.pass };
        let p = self.path("check.json");
        write_json(&p, &report)?;
        Ok(report)
    }

    fn cert(&mut self) -> Result<Option<StabilityCert>, CliError> {
        Ok(self.check()?.cert)
    }

    fn sample_grid(&self) -> Result<Vec<f64>, CliError> {
        let w = &self.scenario.config.windows;
        Ok(self.scenario.timescale().grid(w.sim_t0, w.sim_t_end, self.scenario.config.tolerances.grid_step)?)
    }

    fn simulate(&mut self) -> Result<(), CliError> {
        let cfg = &self.scenario.config;
        let w = &cfg.windows;
        let model = &self.scenario.model;
        let y0 = w.sim_y0.clone().unwrap_or_else(|| vec![0.0; model.dim()]);
        let sol = simulate_dynamic(model, &y0, w.sim_t0, w.sim_t_end, cfg.tolerances.rk_step)?;
        let p = self.path("trajectory.csv");
        write_solution_csv(&p, &sol, model.timescale())?;
        let ts = model.timescale();
        // a left endpoint θ₂ₖ₊₁ corresponds to sₖ on the impulsive side
        let s_end = match ts.psi(w.sim_t_end) {
            Ok(s) => s,
            Err(_) => ts.impulse_point(ts.interval_index(w.sim_t_end)? - 1),
        };
        let traj = integrate(model, &y0, ts.psi(w.sim_t0)?, s_end, cfg.tolerances.rk_step)?;
        let p = self.path("trajectory_impulsive.csv");
        write_trajectory_csv(&p, &traj)?;
        Ok(())
    }

    fn bounded(&mut self, cert: &StabilityCert) -> Result<(), CliError> {
        let eval = BoundedSolution::new(&self.scenario.model, cert, self.scenario.config.tolerances.eval_tol)?;
        let sol = lift_bounded(&eval, Part::Full, &self.sample_grid()?)?;
        let p = self.path("bounded.csv");
        write_solution_csv(&p, &sol, self.scenario.timescale())?;
        Ok(())
    }

    fn decompose(&mut self, cert: &StabilityCert) -> Result<(), CliError> {
        let eval = BoundedSolution::new(&self.scenario.model, cert, self.scenario.config.tolerances.eval_tol)?;
        let (t1, t2) = decompose_with(&eval, &self.sample_grid()?)?;
        let ts = self.scenario.timescale();
        let p = self.path("theta1.csv");
        write_solution_csv(&p, &t1, ts)?;
        let p = self.path("theta2.csv");
        write_solution_csv(&p, &t2, ts)?;
        Ok(())
    }

    fn returns(&mut self, cert: &StabilityCert) -> Result<ReturnTimeSet, CliError> {
        let cfg = &self.scenario.config;
        let w = &cfg.windows;
        let (k_lo, k_hi, depth) = match w.return_window {
            Some([lo, hi]) => (lo, hi, None),
            None => {
                let p = padded_return_window(
                    self.scenario.timescale(),
                    cert,
                    self.scenario.model.m_gamma(),
                    w.compact_lo,
                    w.compact_hi,
                    cfg.tolerances.poisson_eps,
                )?;
                (p.k_lo, p.k_hi, Some(p.depth))
            }
        };
        let set = self.scenario.model.gamma().find_return_times(k_lo, k_hi, w.zeta_max, w.max_returns)?;
        let p = self.path("returns.json");
        write_json(&p, &json!({ "returns": set, "padding_depth": depth, "zeta_max": w.zeta_max }))?;
        Ok(set)
    }

    fn verify(&mut self, cert: &StabilityCert) -> Result<bool, CliError> {
        let returns = self.returns(cert)?;
        let scenario = self.scenario;
        let cfg = &scenario.config;
        let model = &scenario.model;
        let ts = model.timescale();
        let tol = cfg.tolerances;
        let w = &cfg.windows;
        let eval = BoundedSolution::new(model, cert, tol.eval_tol)?;

        let grid = self.sample_grid()?;
        let theta1 = lift_bounded(&eval, Part::Periodic, &grid)?;
        let periodic = verify_periodic(&theta1, ts, tol.period_tol)?;

        let thresholds = PoissonThresholds::new(tol.poisson_eps);
        let eval_ref = &eval;
        let lifted = |part: Part| move |t: f64| lift_point(model, part, &|s| eval_ref.eval(s, part), t);
        let (poisson, poisson_full) = if returns.entries.is_empty() {
            let mut r = VerificationReport {
                kind: tsdyn_core::ReportKind::Poisson,
                metrics: vec![],
                pass: model.gamma().is_zero(),
                parameters: Default::default(),
                notes: vec!["no return times found".into()],
            };
            r.parameters.insert("return_window".into(), json!([returns.k_lo, returns.k_hi]));
            (r.clone(), r)
        } else {
            let run = |part| {
                verify_poisson(&lifted(part), ts, &returns, w.compact_lo, w.compact_hi, tol.grid_step, thresholds)
            };
            (run(Part::Poisson)?, run(Part::Full)?)
        };

        let theta = lift_bounded(&eval, Part::Full, &grid)?;
        let bound = verify_bound(&theta, cert, ts, model.m_f(), model.m_gamma());

        let st = cfg.stability;
        let mut rng = StdRng::seed_from_u64(st.seed);
        let mut draw = || (0..model.dim()).map(|_| rng.gen_range(-st.spread..=st.spread)).collect::<Vec<f64>>();
        let (ya, yb) = (draw(), draw());
        let stability = verify_stability(model, cert, &ya, &yb, w.sim_t0, st.periods * ts.omega(), tol.rk_step)?;

        let mpps = mpps_report(MppsInputs {
            periodic: &periodic,
            poisson: &poisson,
            bound: &bound,
            stability: &stability,
            poisson_full: &poisson_full,
            eval_tol: tol.eval_tol,
        });
        let pass = mpps.pass;
        let p = self.path("verify.json");
        write_json(
            &p,
            &json!({
                "periodicity": periodic,
                "poisson": poisson,
                "poisson_full": poisson_full,
                "bound": bound,
                "stability": stability,
                "mpps": mpps,
            }),
        )?;
        Ok(pass)
    }
}

/// Runs one subcommand against a validated scenario, writing into `out`.
pub fn run(command: Command, scenario: &Scenario, out: &Path) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut r = Run { scenario, out, files: Vec::new() };
    let pass = match command {
        Command::Check => r.check()?.pass,
        Command::Simulate => {
            r.simulate()?;
            true
        }
        Command::Bounded | Command::Decompose | Command::Returns | Command::Verify | Command::Example => {
            let Some(cert) = r.cert()? else {
                return Ok(Outcome { pass: false, files: r.files });
            };
            match command {
                Command::Bounded => r.bounded(&cert)?,
                Command::Decompose => r.decompose(&cert)?,
                Command::Returns => {
                    r.returns(&cert)?;
                }
                Command::Verify => {
                    return Ok(Outcome { pass: r.verify(&cert)?, files: r.files });
                }
                _ => {
                    r.bounded(&cert)?;
                    r.decompose(&cert)?;
                    return Ok(Outcome { pass: r.verify(&cert)?, files: r.files });
                }
            }
            true
        }
    };
    Ok(Outcome { pass, files: r.files })
}
