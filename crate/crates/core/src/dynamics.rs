//! IMEX pseudo-spectral time stepping of the coupled system.
//!
//! Fractional diffusion is implicit (diagonal in Fourier space); chemotactic
//! transport and the logistic source are explicit. `v` and `w` are recomputed
//! from `u` after every step.

use std::io::Write;

use num_complex::Complex64;

use crate::comparison::{equilibrium, Equilibrium};
use crate::error::{Error, Result};
pub use crate::params::Params;
use crate::spectral::{Field, Grid, Spectral};
use crate::spreading::level_radius;

pub const BLOWUP_THRESHOLD: f64 = 1e6;
const NEGATIVE_INPUT_SLACK: f64 = 1e-12;
const TAIL_WARNING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// First-order IMEX Euler.
    ImexEuler,
    /// Third-order, stiffly accurate IMEX Runge–Kutta ARS(4,4,3).
    Ars443,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    /// Floor used inside non-integer powers of `u`.
    pub positivity_floor: f64,
    pub scheme: Scheme,
    /// `C₀` of an asserted boundedness regime; exceeding `10·C₀` is recorded.
    pub asserted_bound: Option<f64>,
    /// Level for the `R_level` column; `u*/2` when absent.
    pub level: Option<f64>,
    /// Halve the step when the stability bound is violated.
    pub adaptive: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            dt: 0.01,
            t_end: 1.0,
            snapshot_stride: 1,
            positivity_floor: 1e-12,
            scheme: Scheme::ImexEuler,
            asserted_bound: None,
            level: None,
            adaptive: true,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!(
                "stepper.dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Parameter(format!(
                "stepper.t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Parameter(
                "stepper.snapshot_stride must be positive".into(),
            ));
        }
        if !(self.positivity_floor >= 0.0) {
            return Err(Error::Parameter(format!(
                "stepper.positivity_floor must be nonnegative, got {}",
                self.positivity_floor
            )));
        }
        Ok(())
    }
}

// ARS(4,4,3): explicit rows over stages 0..i, implicit rows over stages 1..=i
const ARS_EXPLICIT: [&[f64]; 4] = [
    &[0.5],
    &[11.0 / 18.0, 1.0 / 18.0],
    &[5.0 / 6.0, -5.0 / 6.0, 0.5],
    &[0.25, 1.75, 0.75, -1.75],
];
const ARS_IMPLICIT: [&[f64]; 4] = [
    &[0.5],
    &[1.0 / 6.0, 0.5],
    &[-0.5, 0.5, 0.5],
    &[1.5, -1.5, 0.5, 0.5],
];

/// Cached spectral context and coefficients for one parameter set and grid.
#[derive(Debug, Clone)]
pub struct Integrator {
    p: Params,
    sp: Spectral,
    floor: f64,
    /// `|ξ|^{2α}` per mode.
    diffusion: Vec<f64>,
    /// `χ₂μ₂/(λ₂+|ξ|²) − χ₁μ₁/(λ₁+|ξ|²)`: maps `û^k` to the potential `ψ̂`.
    potential: Vec<f64>,
}

fn is_small_int(e: f64) -> bool {
    e.fract() == 0.0 && (0.0..=16.0).contains(&e)
}

impl Integrator {
    pub fn new(p: Params, grid: Grid, positivity_floor: f64) -> Result<Self> {
        if p.dim != grid.dim() {
            return Err(Error::Grid(format!(
                "params have dim {}, grid has dim {}",
                p.dim,
                grid.dim()
            )));
        }
        if !(p.alpha > 0.0 && p.alpha <= 1.0) {
            return Err(Error::Parameter(format!(
                "alpha must lie in (0, 1], got {}",
                p.alpha
            )));
        }
        for (name, v) in [
            ("lambda1", p.lambda1),
            ("lambda2", p.lambda2),
            ("mu1", p.mu1),
            ("mu2", p.mu2),
        ] {
            if !(v > 0.0) {
                return Err(Error::Parameter(format!("{name} > 0 required, got {v}")));
            }
        }
        let sp = Spectral::new(grid);
        let diffusion = sp.ksq().iter().map(|&k2| k2.powf(p.alpha)).collect();
        let potential = sp
            .ksq()
            .iter()
            .map(|&k2| p.repulsion() / (p.lambda2 + k2) - p.attraction() / (p.lambda1 + k2))
            .collect();
        Ok(Integrator {
            p,
            sp,
            floor: positivity_floor,
            diffusion,
            potential,
        })
    }

    pub fn params(&self) -> &Params {
        &self.p
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    fn power(&self, u: f64, e: f64) -> f64 {
        if is_small_int(e) {
            u.max(0.0).powi(e as i32)
        } else {
            (e * u.max(self.floor).ln()).exp()
        }
    }

    fn powered(&self, u: &[f64], e: f64) -> Vec<f64> {
        u.iter().map(|&x| self.power(x, e)).collect()
    }

    /// Solves both screened Poisson equations for `u`.
    pub fn elliptic(&self, u: &Field) -> Result<(Field, Field)> {
        if *u.grid() != *self.sp.grid() {
            return Err(Error::Grid(
                "field grid differs from integrator grid".into(),
            ));
        }
        u.check_finite()?;
        let min = u.inf();
        if min < -NEGATIVE_INPUT_SLACK {
            return Err(Error::Positivity(min));
        }
        let uk = Field::from_raw(*u.grid(), self.powered(u.values(), self.p.k));
        let v = self.sp.helmholtz_solve(&uk, self.p.lambda1, self.p.mu1)?;
        let w = self.sp.helmholtz_solve(&uk, self.p.lambda2, self.p.mu2)?;
        Ok((v, w))
    }

    /// Explicit right-hand side in Fourier space given `û` and `ψ̂ = χ₂ŵ − χ₁v̂`.
    fn explicit_hat(
        &self,
        u: &[f64],
        u_hat: &[Complex64],
        psi_hat: &[Complex64],
    ) -> Vec<Complex64> {
        let p = &self.p;
        let keep = self.sp.keep_mask();
        let ug = self.powered(u, p.gamma);
        let ug_hat = self.sp.forward_real(&ug);
        let mut out: Vec<Complex64> = u_hat
            .iter()
            .zip(&ug_hat)
            .zip(keep)
            .map(|((&uh, &gh), &kp)| if kp { p.a * uh - p.b * gh } else { p.a * uh })
            .collect();
        if p.chi1 == 0.0 && p.chi2 == 0.0 {
            return out;
        }
        for axis in 0..self.sp.grid().dim() {
            let kd = self.sp.kderiv(axis);
            let grad: Vec<Complex64> = psi_hat
                .iter()
                .zip(kd)
                .map(|(c, &k)| c * Complex64::new(0.0, k))
                .collect();
            let g = self.sp.inverse_real(grad);
            let flux: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a * b).collect();
            let flux_hat = self.sp.forward_real(&flux);
            for (idx, o) in out.iter_mut().enumerate() {
                if keep[idx] {
                    *o += flux_hat[idx] * Complex64::new(0.0, kd[idx]);
                }
            }
        }
        out
    }

    fn psi_hat_from_u(&self, u: &[f64]) -> Vec<Complex64> {
        let uk_hat = self.sp.forward_real(&self.powered(u, self.p.k));
        uk_hat
            .iter()
            .zip(&self.potential)
            .map(|(c, m)| c * *m)
            .collect()
    }

    /// `−χ₁∇·(u∇v) + χ₂∇·(u∇w) + a u − b u^γ` using the `v`, `w` stored in `state`.
    pub fn rhs(&self, state: &State) -> Result<Field> {
        for f in [&state.u, &state.v, &state.w] {
            if *f.grid() != *self.sp.grid() {
                return Err(Error::Grid(
                    "state grid differs from integrator grid".into(),
                ));
            }
            f.check_finite()?;
        }
        let psi: Vec<f64> = state
            .w
            .values()
            .iter()
            .zip(state.v.values())
            .map(|(w, v)| self.p.chi2 * w - self.p.chi1 * v)
            .collect();
        let psi_hat = self.sp.forward_real(&psi);
        let u_hat = self.sp.forward(&state.u);
        let out = self.explicit_hat(state.u.values(), &u_hat, &psi_hat);
        let f = self.sp.inverse(out);
        if let Err(e) = f.check_finite() {
            log::error!("non-finite right-hand side: {e}");
            return Err(Error::BlowUp {
                t: state.t,
                last_valid: Box::new(state.clone()),
            });
        }
        Ok(f)
    }

    /// The chemotactic flux `u∇(χ₂w − χ₁v)`, one field per axis.
    pub fn chemotactic_flux(&self, state: &State) -> Result<Vec<Field>> {
        let psi = Field::from_raw(
            *state.u.grid(),
            state
                .w
                .values()
                .iter()
                .zip(state.v.values())
                .map(|(w, v)| self.p.chi2 * w - self.p.chi1 * v)
                .collect(),
        );
        let grad = self.sp.gradient(&psi)?;
        Ok(grad
            .into_iter()
            .map(|g| {
                Field::from_raw(
                    *g.grid(),
                    g.values()
                        .iter()
                        .zip(state.u.values())
                        .map(|(a, b)| a * b)
                        .collect(),
                )
            })
            .collect())
    }

    /// Largest advection speed `|∇ψ|` for the current `u`.
    pub fn max_speed(&self, u: &Field) -> f64 {
        if self.p.chi1 == 0.0 && self.p.chi2 == 0.0 {
            return 0.0;
        }
        let psi_hat = self.psi_hat_from_u(u.values());
        let mut speed2 = vec![0.0; u.values().len()];
        for axis in 0..self.sp.grid().dim() {
            let grad: Vec<Complex64> = psi_hat
                .iter()
                .zip(self.sp.kderiv(axis))
                .map(|(c, &k)| c * Complex64::new(0.0, k))
                .collect();
            for (s, g) in speed2.iter_mut().zip(self.sp.inverse_real(grad)) {
                *s += g * g;
            }
        }
        speed2.into_iter().fold(0.0, f64::max).sqrt()
    }

    /// `min(0.5 h / V_max, 0.2 / (a + b C₀^{γ−1} + |χ₁μ₁ − χ₂μ₂| C₀^k))`.
    pub fn stable_dt(&self, u: &Field, c0: f64) -> f64 {
        let p = &self.p;
        let h = self.sp.grid().spacing();
        let vmax = self.max_speed(u);
        let transport = if vmax > 0.0 {
            0.5 * h / vmax
        } else {
            f64::INFINITY
        };
        let rate = p.a
            + p.b * c0.powf(p.gamma - 1.0)
            + (p.attraction() - p.repulsion()).abs() * c0.powf(p.k);
        let reaction = if rate > 0.0 {
            0.2 / rate
        } else {
            f64::INFINITY
        };
        transport.min(reaction)
    }

    /// Advances `u` by `dt`; returns the new (unprojected) values.
    fn advance(&self, u: &Field, dt: f64, scheme: Scheme) -> Vec<f64> {
        let u_hat = self.sp.forward(u);
        match scheme {
            Scheme::ImexEuler => {
                let psi_hat = self.psi_hat_from_u(u.values());
                let n_hat = self.explicit_hat(u.values(), &u_hat, &psi_hat);
                let next: Vec<Complex64> = u_hat
                    .iter()
                    .zip(&n_hat)
                    .zip(&self.diffusion)
                    .map(|((&uh, &nh), &d)| (uh + dt * nh) / (1.0 + dt * d))
                    .collect();
                self.sp.inverse_real(next)
            }
            Scheme::Ars443 => {
                let mut stages_hat: Vec<Vec<Complex64>> = vec![u_hat.clone()];
                let mut stages_n: Vec<Vec<Complex64>> = Vec::with_capacity(4);
                let mut current = u.values().to_vec();
                for i in 0..4 {
                    let prev_hat = stages_hat.last().expect("stage 0 present");
                    let psi_hat = self.psi_hat_from_u(&current);
                    stages_n.push(self.explicit_hat(&current, prev_hat, &psi_hat));
                    let ex = ARS_EXPLICIT[i];
                    let im = ARS_IMPLICIT[i];
                    let diag = im[i];
                    let next: Vec<Complex64> = (0..u_hat.len())
                        .map(|m| {
                            let d = self.diffusion[m];
                            let mut acc = u_hat[m];
                            for (j, &c) in ex.iter().enumerate() {
                                acc += dt * c * stages_n[j][m];
                            }
                            for (j, &c) in im[..i].iter().enumerate() {
                                acc -= dt * c * d * stages_hat[j + 1][m];
                            }
                            acc / (1.0 + dt * diag * d)
                        })
                        .collect();
                    current = self.sp.inverse_real(next.clone());
                    stages_hat.push(next);
                }
                current
            }
        }
    }

    /// One step of size `dt`: advance, project onto `u >= 0`, re-solve `v`, `w`.
    /// Returns the new state and the clipped mass.
    pub fn step(&self, state: &State, dt: f64, scheme: Scheme) -> Result<(State, f64)> {
        let t = state.t + dt;
        let blown = || Error::BlowUp {
            t,
            last_valid: Box::new(state.clone()),
        };
        let values = self.advance(&state.u, dt, scheme);
        let mut u = Field::from_raw(*state.u.grid(), values);
        if u.check_finite().is_err() || u.sup_abs() > BLOWUP_THRESHOLD {
            return Err(blown());
        }
        let clipped = u.project_nonnegative();
        let (v, w) = self.elliptic(&u)?;
        Ok((State { u, v, w, t }, clipped))
    }

    pub fn initial_state(&self, u0: Field) -> Result<State> {
        let (v, w) = self.elliptic(&u0)?;
        Ok(State {
            u: u0,
            v,
            w,
            t: 0.0,
        })
    }
}

pub fn elliptic_update(u: &Field, p: &Params) -> Result<(Field, Field)> {
    Integrator::new(*p, *u.grid(), 1e-12)?.elliptic(u)
}

pub fn rhs_explicit(state: &State, p: &Params) -> Result<Field> {
    Integrator::new(*p, *state.u.grid(), 1e-12)?.rhs(state)
}

/// One IMEX Euler step; see [`Integrator::step`].
pub fn step_imex(state: &State, p: &Params, dt: f64) -> Result<State> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    Integrator::new(*p, *state.u.grid(), 1e-12)?
        .step(state, dt, Scheme::ImexEuler)
        .map(|s| s.0)
}

/// One row of the run record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub sup_u: f64,
    pub inf_u: f64,
    pub dist_u: f64,
    pub dist_v: f64,
    pub dist_w: f64,
    pub r_level: f64,
    pub clipped_mass: f64,
    pub tail_fraction: f64,
}

pub const SAMPLE_CSV_HEADER: &str =
    "t,sup_u,inf_u,dist_u,dist_v,dist_w,R_level,clipped_mass,tail_fraction";

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: State,
    pub equilibrium: Equilibrium,
    /// Time of blow-up detection, if any.
    pub blew_up: Option<f64>,
    /// Snapshot times at which `sup u > 10·C₀` in an asserted regime.
    pub regime_violations: Vec<f64>,
    /// Some snapshot had more than 10% of its energy in dealiased modes.
    pub resolution_warning: bool,
    pub clipped_total: f64,
    pub steps: usize,
    pub substeps: usize,
}

impl Trajectory {
    pub fn sup_over_time(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.sup_u)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SAMPLE_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                s.t,
                s.sup_u,
                s.inf_u,
                s.dist_u,
                s.dist_v,
                s.dist_w,
                s.r_level,
                s.clipped_mass,
                s.tail_fraction
            )?;
        }
        Ok(())
    }
}

fn sample(integ: &Integrator, state: &State, eq: &Equilibrium, level: f64, clipped: f64) -> Sample {
    Sample {
        t: state.t,
        sup_u: state.u.sup(),
        inf_u: state.u.inf(),
        dist_u: state.u.dist_to_const(eq.u),
        dist_v: state.v.dist_to_const(eq.v),
        dist_w: state.w.dist_to_const(eq.w),
        r_level: level_radius(&state.u, level),
        clipped_mass: clipped,
        tail_fraction: integ.spectral().tail_fraction(&state.u),
    }
}

pub fn simulate(u0: &Field, p: &Params, cfg: &StepperConfig) -> Result<Trajectory> {
    simulate_observed(u0, p, cfg, |_| Ok(()))
}

/// Like [`simulate`], calling `observer` on every recorded state.
pub fn simulate_observed(
    u0: &Field,
    p: &Params,
    cfg: &StepperConfig,
    mut observer: impl FnMut(&State) -> Result<()>,
) -> Result<Trajectory> {
    p.validate()?;
    cfg.validate()?;
    u0.check_finite()?;
    if u0.inf() < 0.0 {
        return Err(Error::Positivity(u0.inf()));
    }
    let integ = Integrator::new(*p, *u0.grid(), cfg.positivity_floor)?;
    let eq = equilibrium(p);
    let level = cfg.level.unwrap_or(0.5 * eq.u);
    let mut state = integ.initial_state(u0.clone())?;
    let mut traj = Trajectory {
        samples: vec![sample(&integ, &state, &eq, level, 0.0)],
        final_state: state.clone(),
        equilibrium: eq,
        blew_up: None,
        regime_violations: Vec::new(),
        resolution_warning: false,
        clipped_total: 0.0,
        steps: 0,
        substeps: 0,
    };
    observer(&state)?;
    let mut clipped_since = 0.0;
    let eps = 1e-12 * cfg.t_end;
    while state.t < cfg.t_end - eps {
        let dt = cfg.dt.min(cfg.t_end - state.t);
        let mut parts = 1usize;
        if cfg.adaptive {
            let c0 = cfg.asserted_bound.unwrap_or(1.0).max(state.u.sup());
            let bound = integ.stable_dt(&state.u, c0);
            while dt / parts as f64 > bound && parts < (1 << 20) {
                parts *= 2;
            }
        }
        let sub = dt / parts as f64;
        let mut next = state.clone();
        for _ in 0..parts {
            match integ.step(&next, sub, cfg.scheme) {
                Ok((s, clipped)) => {
                    clipped_since += clipped;
                    traj.clipped_total += clipped;
                    next = s;
                }
                Err(Error::BlowUp { t, last_valid }) => {
                    log::warn!("blow-up detected at t = {t}");
                    traj.blew_up = Some(t);
                    traj.final_state = *last_valid;
                    return Ok(traj);
                }
                Err(e) => return Err(e),
            }
        }
        traj.substeps += parts;
        traj.steps += 1;
        state = next;
        // recompute from the step count so sample times do not drift
        state.t = (traj.steps as f64 * cfg.dt).min(cfg.t_end);
        let last = state.t >= cfg.t_end - eps;
        if last {
            state.t = cfg.t_end;
        }
        if traj.steps.is_multiple_of(cfg.snapshot_stride) || last {
            let s = sample(&integ, &state, &eq, level, clipped_since);
            clipped_since = 0.0;
            if s.tail_fraction > TAIL_WARNING && !traj.resolution_warning {
                log::warn!(
                    "spectral tail fraction {} at t = {} exceeds {TAIL_WARNING}: under-resolved",
                    s.tail_fraction,
                    s.t
                );
                traj.resolution_warning = true;
            }
            if let Some(c0) = cfg.asserted_bound {
                if s.sup_u > 10.0 * c0 {
                    log::warn!(
                        "sup u = {} exceeds 10·C0 = {} at t = {}",
                        s.sup_u,
                        10.0 * c0,
                        s.t
                    );
                    traj.regime_violations.push(s.t);
                }
            }
            traj.samples.push(s);
            observer(&state)?;
        }
    }
    traj.final_state = state;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::sample_params;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(1, 2.0 * PI, n).unwrap()
    }

    #[test]
    fn elliptic_examples() {
        let g = grid(32);
        let p = Params {
            mu1: 2.0,
            lambda1: 4.0,
            mu2: 3.0,
            lambda2: 0.5,
            k: 2.0,
            ..sample_params()
        };
        let (v, w) = elliptic_update(&Field::constant(g, 1.5), &p).unwrap();
        assert!(v.dist_to_const(2.0 * 2.25 / 4.0) < 1e-14);
        assert!(w.dist_to_const(3.0 * 2.25 / 0.5) < 1e-13);
        let p = sample_params();
        let u = Field::from_fn(g, |[x, _]| 1.0 + 0.1 * x.cos());
        let (v, _) = elliptic_update(&u, &p).unwrap();
        assert!(v.linf_distance(&Field::from_fn(g, |[x, _]| 1.0 + 0.05 * x.cos())) < 1e-14);
        let mut bad = Field::constant(g, 1.0);
        bad.values_mut()[0] = -1e-6;
        assert!(matches!(
            elliptic_update(&bad, &p),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let g = grid(32);
        let p = Params {
            a: 2.0,
            b: 0.7,
            gamma: 2.6,
            k: 1.5,
            chi2: 0.3,
            ..sample_params()
        };
        let eq = equilibrium(&p);
        let integ = Integrator::new(p, g, 1e-12).unwrap();
        let s = integ.initial_state(Field::constant(g, eq.u)).unwrap();
        assert!(integ.rhs(&s).unwrap().sup_abs() < 1e-12);
        let (s1, _) = integ.step(&s, 0.01, Scheme::ImexEuler).unwrap();
        assert!(s1.u.dist_to_const(eq.u) < 1e-12);
        let (s2, _) = integ.step(&s, 0.01, Scheme::Ars443).unwrap();
        assert!(s2.u.dist_to_const(eq.u) < 1e-12);
    }

    #[test]
    fn pure_ode_rhs() {
        let g = grid(16);
        let p = Params {
            chi1: 0.0,
            chi2: 0.0,
            gamma: 3.0,
            a: 1.5,
            b: 0.5,
            ..sample_params()
        };
        let s = Integrator::new(p, g, 0.0)
            .unwrap()
            .initial_state(Field::constant(g, 2.0))
            .unwrap();
        let r = rhs_explicit(&s, &p).unwrap();
        assert!(r.dist_to_const(1.5 * 2.0 - 0.5 * 8.0) < 1e-13);
    }

    #[test]
    fn balanced_fluxes_cancel() {
        let g = Grid::new(2, 2.0 * PI, 32).unwrap();
        let p = Params {
            dim: 2,
            chi1: 2.0,
            mu1: 0.75,
            chi2: 1.5,
            mu2: 1.0,
            gamma: 2.5,
            ..sample_params()
        };
        let u = Field::from_fn(g, |[x, y]| 1.0 + 0.4 * x.cos() * (2.0 * y).sin());
        let integ = Integrator::new(p, g, 1e-12).unwrap();
        let s = integ.initial_state(u.clone()).unwrap();
        let flux = integ.chemotactic_flux(&s).unwrap();
        let gv = integ.spectral().gradient(&s.v).unwrap();
        let scale = u.sup_abs() * gv.iter().map(|f| f.sup_abs()).fold(0.0, f64::max);
        assert!(flux.iter().all(|f| f.sup_abs() <= 1e-12 * scale));
        let r = integ.rhs(&s).unwrap();
        let reaction = Integrator::new(
            Params {
                chi1: 0.0,
                chi2: 0.0,
                ..p
            },
            g,
            1e-12,
        )
        .unwrap()
        .rhs(&s)
        .unwrap();
        assert!(r.linf_distance(&reaction) < 1e-12);
    }

    #[test]
    fn single_mode_implicit_euler() {
        let g = grid(32);
        let p = Params {
            chi1: 0.0,
            chi2: 0.0,
            a: 0.0,
            b: 0.0,
            ..sample_params()
        };
        let integ = Integrator::new(p, g, 1e-12).unwrap();
        let s = integ
            .initial_state(Field::from_fn(g, |[x, _]| x.cos() + 2.0))
            .unwrap();
        let dt = 0.1;
        let s1 = step_imex(&s, &p, dt).unwrap();
        let expected = Field::from_fn(g, |[x, _]| 2.0 + x.cos() / (1.0 + dt));
        assert!(s1.u.linf_distance(&expected) < 1e-14);
        assert!((s1.t - dt).abs() < 1e-16);
    }

    #[test]
    fn homogeneous_logistic_recurrence() {
        let g = grid(16);
        let p = Params {
            chi1: 0.0,
            chi2: 0.0,
            ..sample_params()
        };
        let integ = Integrator::new(p, g, 1e-12).unwrap();
        let mut s = integ.initial_state(Field::constant(g, 0.5)).unwrap();
        let (dt, mut u) = (0.05, 0.5f64);
        for _ in 0..40 {
            s = step_imex(&s, &p, dt).unwrap();
            u += dt * (u - u * u);
            assert!(s.u.dist_to_const(u) < 1e-14);
        }
    }

    #[test]
    fn ars443_is_third_order_on_logistic() {
        let g = grid(8);
        let p = Params {
            chi1: 0.0,
            chi2: 0.0,
            gamma: 3.0,
            a: 1.0,
            b: 1.0,
            ..sample_params()
        };
        let integ = Integrator::new(p, g, 1e-12).unwrap();
        let exact = crate::comparison::reaction_ode(&p, 2.0, &[2.0]).unwrap()[0];
        let err = |dt: f64| {
            let mut s = integ.initial_state(Field::constant(g, 2.0)).unwrap();
            for _ in 0..(2.0 / dt).round() as usize {
                s = integ.step(&s, dt, Scheme::Ars443).unwrap().0;
            }
            s.u.dist_to_const(exact)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!(order > 2.7, "observed order {order}");
    }

    #[test]
    fn blowup_returns_last_state() {
        let g = grid(16);
        let p = Params {
            chi1: 0.0,
            chi2: 0.0,
            a: 0.0,
            b: -1.0,
            gamma: 2.0,
            ..sample_params()
        };
        let integ = Integrator::new(p, g, 1e-12).unwrap();
        let s = integ.initial_state(Field::constant(g, 1e4)).unwrap();
        match integ.step(&s, 0.1, Scheme::ImexEuler) {
            Err(Error::BlowUp { t, last_valid }) => {
                assert!((t - 0.1).abs() < 1e-15);
                assert_eq!(last_valid.u, s.u);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn simulate_from_equilibrium_stays_put() {
        let g = grid(32);
        let p = Params {
            chi2: 0.8,
            gamma: 2.5,
            b: 2.0,
            ..sample_params()
        };
        let eq = equilibrium(&p);
        let cfg = StepperConfig {
            dt: 0.05,
            t_end: 2.0,
            snapshot_stride: 5,
            ..Default::default()
        };
        let traj = simulate(&Field::constant(g, eq.u), &p, &cfg).unwrap();
        assert!(traj.blew_up.is_none());
        assert_eq!(traj.samples.len(), 9);
        for s in &traj.samples {
            assert!(s.dist_u <= 1e-10 && s.dist_v <= 1e-10 && s.dist_w <= 1e-10);
        }
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(SAMPLE_CSV_HEADER));
        assert_eq!(text.lines().count(), 10);
    }
}
