//! Experiment configuration, single runs with checks, and parameter sweeps.
//!
//! Config files are flat `section.key = value` text with the header line
//! `fracchemo-config v1`. Every physics parameter is required and unknown keys
//! are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dynamics::{simulate_observed, Sample, Scheme, StepperConfig, SAMPLE_CSV_HEADER};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::regime::{classify, RegimeVerdict};
use crate::spectral::{Field, Grid};
use crate::spreading::{self, fit_rate, FrontTrace, RateFit, SandwichProbe, SANDWICH_CSV_HEADER};

pub const CONFIG_HEADER: &str = "fracchemo-config v1";

const PARAM_KEYS: [&str; 12] = [
    "dim", "alpha", "chi1", "chi2", "lambda1", "lambda2", "mu1", "mu2", "a", "b", "gamma", "k",
];

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// `u*(1 + amplitude·cos(mode·2πx/L))` (times the same factor in `y` in 2D).
    PerturbedEquilibrium {
        amplitude: f64,
        mode: f64,
    },
    Bump {
        radius: f64,
        height: f64,
        floor: f64,
    },
    X0 {
        c_star: f64,
        floor: f64,
    },
}

impl InitialCondition {
    fn kind(&self) -> &'static str {
        match self {
            InitialCondition::Constant { .. } => "constant",
            InitialCondition::PerturbedEquilibrium { .. } => "perturbed_equilibrium",
            InitialCondition::Bump { .. } => "bump",
            InitialCondition::X0 { .. } => "x0",
        }
    }

    fn fields(&self) -> Vec<(&'static str, f64)> {
        match *self {
            InitialCondition::Constant { value } => vec![("value", value)],
            InitialCondition::PerturbedEquilibrium { amplitude, mode } => {
                vec![("amplitude", amplitude), ("mode", mode)]
            }
            InitialCondition::Bump {
                radius,
                height,
                floor,
            } => {
                vec![("radius", radius), ("height", height), ("floor", floor)]
            }
            InitialCondition::X0 { c_star, floor } => vec![("c_star", c_star), ("floor", floor)],
        }
    }

    /// Build the field; `noise > 0` multiplies every point by `1 + noise·U(−1, 1)`
    /// drawn from a ChaCha stream seeded with `seed`.
    pub fn build(&self, grid: Grid, p: &Params, noise: f64, seed: u64) -> Result<Field> {
        let mut u = match *self {
            InitialCondition::Constant { value } => Field::constant(grid, value),
            InitialCondition::PerturbedEquilibrium { amplitude, mode } => {
                let us = crate::comparison::equilibrium(p).u;
                let w = 2.0 * std::f64::consts::PI * mode / grid.extent();
                let dim = grid.dim();
                Field::from_fn(grid, |[x, y]| {
                    let c = if dim == 1 {
                        (w * x).cos()
                    } else {
                        (w * x).cos() * (w * y).cos()
                    };
                    us * (1.0 + amplitude * c)
                })
            }
            InitialCondition::Bump {
                radius,
                height,
                floor,
            } => spreading::make_bump_initial(grid, radius, height, floor)?,
            InitialCondition::X0 { c_star, floor } => {
                spreading::make_x0_initial(grid, c_star, p.alpha, floor)
            }
        };
        if noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in u.values_mut() {
                *v *= 1.0 + noise * rng.random_range(-1.0..1.0);
            }
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    Boundedness,
    Asymptotics,
    Speed,
    Sandwich,
}

impl CheckKind {
    pub fn parse(s: &str) -> Option<CheckKind> {
        match s {
            "boundedness" => Some(CheckKind::Boundedness),
            "asymptotics" => Some(CheckKind::Asymptotics),
            "speed" => Some(CheckKind::Speed),
            "sandwich" => Some(CheckKind::Sandwich),
            _ => None,
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::Boundedness => "boundedness",
            CheckKind::Asymptotics => "asymptotics",
            CheckKind::Speed => "speed",
            CheckKind::Sandwich => "sandwich",
        })
    }
}

/// Tolerances and windows for the checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    /// Asymptotic distance tolerance for `u`, `v`, `w`.
    pub tolerance: f64,
    /// Allowed factor over `C₀` for boundedness.
    pub bound_slack: f64,
    /// Relative slack of the rate bracket: `[lower·(1−s), upper·(1+s)]`.
    pub rate_slack: f64,
    pub fit_start: f64,
    pub fit_end: f64,
    /// `ε = inner_eps_fraction · lower` for the inner probe.
    pub inner_eps_fraction: f64,
    /// `ε` of the outer probe.
    pub outer_eps: f64,
    /// Inner persistence level; `u*/10` when absent.
    pub delta: Option<f64>,
    pub outer_threshold: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tolerance: 1e-3,
            bound_slack: 1.05,
            rate_slack: 0.2,
            fit_start: 0.0,
            fit_end: f64::INFINITY,
            inner_eps_fraction: 0.25,
            outer_eps: 0.1,
            delta: None,
            outer_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: Params,
    pub grid: Grid,
    pub stepper: StepperConfig,
    pub initial: InitialCondition,
    pub noise: f64,
    pub checks: Vec<CheckKind>,
    pub options: CheckOptions,
    pub seed: u64,
}

type KeyMap = BTreeMap<String, (usize, String)>;

fn parse_lines(text: &str) -> Result<KeyMap> {
    let mut header = false;
    let mut map = KeyMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !header {
            if content != CONFIG_HEADER {
                return Err(Error::config(
                    line,
                    format!("expected header `{CONFIG_HEADER}`, found `{content}`"),
                ));
            }
            header = true;
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(Error::config(
                line,
                format!("expected `key = value`, found `{content}`"),
            ));
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if map.insert(k.clone(), (line, v)).is_some() {
            return Err(Error::config(line, format!("duplicate key `{k}`")));
        }
    }
    if !header {
        return Err(Error::config(
            0,
            format!("missing header `{CONFIG_HEADER}`"),
        ));
    }
    Ok(map)
}

struct Reader {
    map: KeyMap,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn num(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::config(line, format!("`{key}`: `{v}` is not a number"))),
        }
    }

    fn req(&mut self, key: &str) -> Result<f64> {
        self.num(key)?
            .ok_or_else(|| Error::config(0, format!("missing required key `{key}`")))
    }

    fn int(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<u64>().map(Some).map_err(|_| {
                Error::config(line, format!("`{key}`: `{v}` is not a nonnegative integer"))
            }),
        }
    }

    fn flag(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(Error::config(
                    line,
                    format!("`{key}`: expected true or false, found `{v}`"),
                )),
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader {
            map: parse_lines(text)?,
        };
        let mut v = [0.0; 12];
        for (slot, key) in v.iter_mut().zip(PARAM_KEYS) {
            *slot = r.req(&format!("params.{key}"))?;
        }
        if v[0] != 1.0 && v[0] != 2.0 {
            return Err(Error::Parameter(format!(
                "dim ∈ {{1, 2}} required, got {}",
                v[0]
            )));
        }
        let params = Params {
            dim: v[0] as usize,
            alpha: v[1],
            chi1: v[2],
            chi2: v[3],
            lambda1: v[4],
            lambda2: v[5],
            mu1: v[6],
            mu2: v[7],
            a: v[8],
            b: v[9],
            gamma: v[10],
            k: v[11],
        };
        params.validate()?;

        let extent = r.req("grid.extent")?;
        let n = r
            .int("grid.n")?
            .ok_or_else(|| Error::config(0, "missing required key `grid.n`"))?;
        let grid = Grid::new(params.dim, extent, n as usize)?;

        let mut stepper = StepperConfig {
            dt: r.req("stepper.dt")?,
            t_end: r.req("stepper.t_end")?,
            ..StepperConfig::default()
        };
        if let Some(s) = r.int("stepper.snapshot_stride")? {
            stepper.snapshot_stride = s as usize;
        }
        if let Some(f) = r.num("stepper.positivity_floor")? {
            stepper.positivity_floor = f;
        }
        if let Some((line, s)) = r.take("stepper.scheme") {
            stepper.scheme = match s.as_str() {
                "imex_euler" => Scheme::ImexEuler,
                "ars443" => Scheme::Ars443,
                _ => {
                    return Err(Error::config(
                        line,
                        format!("unknown scheme `{s}` (imex_euler, ars443)"),
                    ))
                }
            };
        }
        if let Some(a) = r.flag("stepper.adaptive")? {
            stepper.adaptive = a;
        }
        stepper.level = r.num("stepper.level")?;
        stepper.validate()?;

        let (kline, kind) = r
            .take("initial.kind")
            .ok_or_else(|| Error::config(0, "missing required key `initial.kind`"))?;
        let initial =
            match kind.as_str() {
                "constant" => InitialCondition::Constant {
                    value: r.req("initial.value")?,
                },
                "perturbed_equilibrium" => InitialCondition::PerturbedEquilibrium {
                    amplitude: r.req("initial.amplitude")?,
                    mode: r.num("initial.mode")?.unwrap_or(1.0),
                },
                "bump" => InitialCondition::Bump {
                    radius: r.req("initial.radius")?,
                    height: r.req("initial.height")?,
                    floor: r.num("initial.floor")?.unwrap_or(0.0),
                },
                "x0" => InitialCondition::X0 {
                    c_star: r.req("initial.c_star")?,
                    floor: r.num("initial.floor")?.unwrap_or(1e-9),
                },
                _ => return Err(Error::config(
                    kline,
                    format!(
                        "unknown initial.kind `{kind}` (constant, perturbed_equilibrium, bump, x0)"
                    ),
                )),
            };
        let noise = r.num("initial.noise")?.unwrap_or(0.0);
        if !(0.0..1.0).contains(&noise) {
            return Err(Error::Parameter(format!(
                "initial.noise ∈ [0, 1) required, got {noise}"
            )));
        }

        let mut checks = Vec::new();
        if let Some((line, list)) = r.take("checks.run") {
            for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let c = CheckKind::parse(item).ok_or_else(|| {
                    Error::config(
                        line,
                        format!(
                            "unknown check `{item}` (boundedness, asymptotics, speed, sandwich)"
                        ),
                    )
                })?;
                if !checks.contains(&c) {
                    checks.push(c);
                }
            }
        }
        let d = CheckOptions::default();
        let options = CheckOptions {
            tolerance: r.num("checks.tolerance")?.unwrap_or(d.tolerance),
            bound_slack: r.num("checks.bound_slack")?.unwrap_or(d.bound_slack),
            rate_slack: r.num("checks.rate_slack")?.unwrap_or(d.rate_slack),
            fit_start: r.num("checks.fit_start")?.unwrap_or(d.fit_start),
            fit_end: r.num("checks.fit_end")?.unwrap_or(stepper.t_end),
            inner_eps_fraction: r
                .num("checks.inner_eps_fraction")?
                .unwrap_or(d.inner_eps_fraction),
            outer_eps: r.num("checks.outer_eps")?.unwrap_or(d.outer_eps),
            delta: r.num("checks.delta")?,
            outer_threshold: r
                .num("checks.outer_threshold")?
                .unwrap_or(d.outer_threshold),
        };
        let seed = r.int("seed")?.unwrap_or(0);

        if let Some((key, (line, _))) = r.map.iter().next() {
            return Err(Error::config(*line, format!("unknown key `{key}`")));
        }
        let cfg = ExperimentConfig {
            params,
            grid,
            stepper,
            initial,
            noise,
            checks,
            options,
            seed,
        };
        cfg.validate_checks()?;
        Ok(cfg)
    }

    fn validate_checks(&self) -> Result<()> {
        let o = &self.options;
        let fits = self
            .checks
            .iter()
            .any(|c| matches!(c, CheckKind::Speed | CheckKind::Sandwich));
        if fits
            && !(o.fit_start >= 0.0 && o.fit_start < o.fit_end && o.fit_end <= self.stepper.t_end)
        {
            return Err(Error::Parameter(format!(
                "checks.fit_start < checks.fit_end ≤ stepper.t_end required, got [{}, {}] with t_end {}",
                o.fit_start, o.fit_end, self.stepper.t_end
            )));
        }
        if !(o.tolerance > 0.0 && o.bound_slack >= 1.0 && (0.0..1.0).contains(&o.rate_slack)) {
            return Err(Error::Parameter(
                "checks.tolerance > 0, checks.bound_slack ≥ 1 and checks.rate_slack ∈ [0, 1) required".into(),
            ));
        }
        if o.delta.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Parameter("checks.delta > 0 required".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let vals = [
            p.dim as f64,
            p.alpha,
            p.chi1,
            p.chi2,
            p.lambda1,
            p.lambda2,
            p.mu1,
            p.mu2,
            p.a,
            p.b,
            p.gamma,
            p.k,
        ];
        let mut s = format!("{CONFIG_HEADER}\n");
        for (k, v) in PARAM_KEYS.iter().zip(vals) {
            s.push_str(&format!("params.{k} = {v}\n"));
        }
        s.push_str(&format!("grid.extent = {}\n", self.grid.extent()));
        s.push_str(&format!("grid.n = {}\n", self.grid.points_per_axis()));
        let st = &self.stepper;
        s.push_str(&format!("stepper.dt = {}\n", st.dt));
        s.push_str(&format!("stepper.t_end = {}\n", st.t_end));
        s.push_str(&format!(
            "stepper.snapshot_stride = {}\n",
            st.snapshot_stride
        ));
        s.push_str(&format!(
            "stepper.positivity_floor = {}\n",
            st.positivity_floor
        ));
        let scheme = match st.scheme {
            Scheme::ImexEuler => "imex_euler",
            Scheme::Ars443 => "ars443",
        };
        s.push_str(&format!("stepper.scheme = {scheme}\n"));
        s.push_str(&format!("stepper.adaptive = {}\n", st.adaptive));
        if let Some(l) = st.level {
            s.push_str(&format!("stepper.level = {l}\n"));
        }
        s.push_str(&format!("initial.kind = {}\n", self.initial.kind()));
        for (k, v) in self.initial.fields() {
            s.push_str(&format!("initial.{k} = {v}\n"));
        }
        s.push_str(&format!("initial.noise = {}\n", self.noise));
        let list: Vec<String> = self.checks.iter().map(|c| c.to_string()).collect();
        s.push_str(&format!("checks.run = {}\n", list.join(", ")));
        let o = &self.options;
        s.push_str(&format!("checks.tolerance = {}\n", o.tolerance));
        s.push_str(&format!("checks.bound_slack = {}\n", o.bound_slack));
        s.push_str(&format!("checks.rate_slack = {}\n", o.rate_slack));
        s.push_str(&format!("checks.fit_start = {}\n", o.fit_start));
        s.push_str(&format!("checks.fit_end = {}\n", o.fit_end));
        s.push_str(&format!(
            "checks.inner_eps_fraction = {}\n",
            o.inner_eps_fraction
        ));
        s.push_str(&format!("checks.outer_eps = {}\n", o.outer_eps));
        if let Some(d) = o.delta {
            s.push_str(&format!("checks.delta = {d}\n"));
        }
        s.push_str(&format!("checks.outer_threshold = {}\n", o.outer_threshold));
        s.push_str(&format!("seed = {}\n", self.seed));
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Copy with one key replaced. `key` may omit the `params.` prefix.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let key = if PARAM_KEYS.contains(&key) {
            format!("params.{key}")
        } else {
            key.to_string()
        };
        let mut text = String::new();
        let mut found = false;
        for line in self.to_text().lines() {
            match line.split_once(" = ") {
                Some((k, _)) if k == key => {
                    text.push_str(&format!("{key} = {value}\n"));
                    found = true;
                }
                _ => {
                    text.push_str(line);
                    text.push('\n');
                }
            }
        }
        if !found {
            text.push_str(&format!("{key} = {value}\n"));
        }
        Self::from_text(&text)
    }

    pub fn initial_field(&self) -> Result<Field> {
        self.initial
            .build(self.grid, &self.params, self.noise, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    BlewUp,
    /// Non-finite samples or recorded regime violations.
    Unstable,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Ok => "ok",
            Outcome::BlewUp => "blew_up",
            Outcome::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Precondition unmet; nothing was asserted.
    Skipped,
    /// Recorded without a claim to check against.
    Info,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skipped => "skipped",
            CheckStatus::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub kind: CheckKind,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub hash: String,
    pub verdict: RegimeVerdict,
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
    pub wall_time: f64,
    pub checks: Vec<CheckOutcome>,
    pub fit: Option<RateFit>,
    pub probes: Vec<SandwichProbe>,
}

impl RunRecord {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn sup_u(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.sup_u)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn series_csv(&self) -> String {
        let mut s = format!("{SAMPLE_CSV_HEADER}\n");
        for x in &self.samples {
            s.push_str(&sample_row(x));
            s.push('\n');
        }
        s
    }

    pub fn checks_csv(&self) -> String {
        let mut s = String::from("check,status,detail\n");
        for c in &self.checks {
            s.push_str(&format!(
                "{},{},\"{}\"\n",
                c.kind,
                c.status,
                c.detail.replace('"', "'")
            ));
        }
        s
    }

    pub fn report(&self) -> String {
        let mut s = format!("config {}\noutcome = {}\n", self.hash, self.outcome);
        s.push_str(&format!("wall_time = {:.3} s\n", self.wall_time));
        s.push_str(&self.verdict.render_text());
        if let Some(last) = self.samples.last() {
            s.push_str(&format!(
                "final t = {}: sup u = {}, |u − u*| = {:e}, |v − v*| = {:e}, |w − w*| = {:e}\n",
                last.t, last.sup_u, last.dist_u, last.dist_v, last.dist_w
            ));
        }
        s.push_str(&format!("sup_t |u| = {}\n", self.sup_u()));
        for c in &self.checks {
            s.push_str(&format!("{}: {} ({})\n", c.kind, c.status, c.detail));
        }
        s
    }

    /// Write `series.csv`, `verdict.csv`, `checks.csv`, `report.txt` and,
    /// when present, `trace.csv` and `sandwich.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("series.csv"), self.series_csv())?;
        fs::write(dir.join("verdict.csv"), self.verdict.render_csv())?;
        fs::write(dir.join("checks.csv"), self.checks_csv())?;
        fs::write(dir.join("report.txt"), self.report())?;
        if let Some(f) = &self.fit {
            let mut s = String::from("t,R,level\n");
            let level = self.verdict.asymptotics.equilibrium.u / 2.0;
            for x in &self.samples {
                s.push_str(&format!("{},{},{}\n", x.t, x.r_level, level));
            }
            s.push_str("rate,r2,lower,upper\n");
            s.push_str(&format!(
                "{},{},{},{}\n",
                f.rate, f.r2, self.verdict.speed_lower, self.verdict.speed_upper
            ));
            fs::write(dir.join("trace.csv"), s)?;
        }
        if !self.probes.is_empty() {
            let mut s = format!("{SANDWICH_CSV_HEADER}\n");
            for p in &self.probes {
                s.push_str(&p.csv_row());
                s.push('\n');
            }
            fs::write(dir.join("sandwich.csv"), s)?;
        }
        Ok(())
    }
}

fn sample_row(x: &Sample) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        x.t,
        x.sup_u,
        x.inf_u,
        x.dist_u,
        x.dist_v,
        x.dist_w,
        x.r_level,
        x.clipped_mass,
        x.tail_fraction
    )
}

fn parse_sample(line: &str) -> Result<Sample> {
    let v: Vec<f64> = line
        .split(',')
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}` in series row")))
        })
        .collect::<Result<_>>()?;
    if v.len() != 9 {
        return Err(Error::Parse(format!(
            "series row has {} columns, expected 9",
            v.len()
        )));
    }
    Ok(Sample {
        t: v[0],
        sup_u: v[1],
        inf_u: v[2],
        dist_u: v[3],
        dist_v: v[4],
        dist_w: v[5],
        r_level: v[6],
        clipped_mass: v[7],
        tail_fraction: v[8],
    })
}

fn check(kind: CheckKind, status: CheckStatus, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        kind,
        status,
        detail: detail.into(),
    }
}

fn pass_fail(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Classify, simulate, then evaluate the requested checks in order. Writes
/// outputs into `out` when given. Unmet check preconditions are reported as
/// skipped.
pub fn run_suite(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunRecord> {
    let start = Instant::now();
    let u0 = cfg.initial_field()?;
    let verdict = classify(&cfg.params, u0.sup(), false);
    let eq = verdict.asymptotics.equilibrium;
    let o = &cfg.options;

    let mut stepper = cfg.stepper.clone();
    if cfg.checks.contains(&CheckKind::Boundedness) {
        stepper.asserted_bound = verdict.c0();
    }
    let sandwich = cfg.checks.contains(&CheckKind::Sandwich) && verdict.speed_upper.is_finite();
    let (lower, upper) = (verdict.speed_lower, verdict.speed_upper);
    let eps_in = o.inner_eps_fraction * lower;
    let mut probes = Vec::new();
    let traj = simulate_observed(&u0, &cfg.params, &stepper, |s| {
        if sandwich {
            probes.push(spreading::sandwich_probe(
                &s.u,
                s.t,
                lower,
                upper,
                eps_in,
                o.outer_eps,
            ));
        }
        Ok(())
    })?;

    let finite = traj.samples.iter().all(|s| {
        [
            s.t, s.sup_u, s.inf_u, s.dist_u, s.dist_v, s.dist_w, s.r_level,
        ]
        .iter()
        .all(|v| v.is_finite())
    });
    let outcome = if traj.blew_up.is_some() {
        Outcome::BlewUp
    } else if !finite || !traj.regime_violations.is_empty() {
        Outcome::Unstable
    } else {
        Outcome::Ok
    };

    let mut checks = Vec::new();
    let mut fit = None;
    for &kind in &cfg.checks {
        let c = match kind {
            CheckKind::Boundedness => {
                let sup = traj.sup_over_time();
                match verdict.c0() {
                    None => check(
                        kind,
                        CheckStatus::Info,
                        format!("no boundedness case holds; sup_t |u| = {sup} (outcome {outcome})"),
                    ),
                    Some(c0) => check(
                        kind,
                        pass_fail(outcome != Outcome::BlewUp && sup <= o.bound_slack * c0),
                        format!(
                            "sup_t |u| = {sup} vs {}·C0 = {}",
                            o.bound_slack,
                            o.bound_slack * c0
                        ),
                    ),
                }
            }
            CheckKind::Asymptotics => match verdict.asymptotics.case {
                None => check(kind, CheckStatus::Skipped, "no asymptotic case holds"),
                Some(case) => {
                    let last = traj.samples.last().expect("at least the initial sample");
                    let worst = last.dist_u.max(last.dist_v).max(last.dist_w);
                    check(
                        kind,
                        pass_fail(outcome == Outcome::Ok && worst <= o.tolerance),
                        format!(
                            "case {case}: final |u − u*| = {:e}, |v − v*| = {:e}, |w − w*| = {:e} vs {:e}",
                            last.dist_u, last.dist_v, last.dist_w, o.tolerance
                        ),
                    )
                }
            },
            CheckKind::Speed => {
                if !verdict.speed_upper.is_finite() {
                    check(kind, CheckStatus::Skipped, "no spreading case holds")
                } else {
                    let trace = FrontTrace {
                        times: traj.samples.iter().map(|s| s.t).collect(),
                        radii: traj.samples.iter().map(|s| s.r_level).collect(),
                        level: stepper.level.unwrap_or(0.5 * eq.u),
                        fit_window: (o.fit_start, o.fit_end),
                        extent: cfg.grid.extent(),
                    };
                    match fit_rate(&trace) {
                        Err(e) => check(kind, CheckStatus::Fail, format!("fit failed: {e}")),
                        Ok(f) => {
                            fit = Some(f);
                            let (lo, hi) =
                                ((1.0 - o.rate_slack) * lower, (1.0 + o.rate_slack) * upper);
                            check(
                                kind,
                                pass_fail(f.rate >= lo && f.rate <= hi),
                                format!(
                                    "rate {} (r2 {}, {} points{}) vs [{lo}, {hi}]",
                                    f.rate,
                                    f.r2,
                                    f.points,
                                    if f.truncated { ", truncated" } else { "" }
                                ),
                            )
                        }
                    }
                }
            }
            CheckKind::Sandwich => {
                if !sandwich {
                    check(kind, CheckStatus::Skipped, "no spreading case holds")
                } else {
                    let delta = o.delta.unwrap_or(0.1 * eq.u);
                    let inner = spreading::inner_persistence(&probes, o.fit_start, delta);
                    let outer = spreading::outer_decay(&probes, o.fit_start, o.outer_threshold);
                    match (inner, outer) {
                        (Ok((iok, m)), Ok((ook, last))) => check(
                            kind,
                            pass_fail(iok && ook),
                            format!(
                                "inner min {m} vs delta {delta}; outer max {last:e} vs {:e}, monotone decay {}",
                                o.outer_threshold,
                                if ook { "holds" } else { "fails" }
                            ),
                        ),
                        (Err(e), _) | (_, Err(e)) => check(kind, CheckStatus::Fail, format!("{e}")),
                    }
                }
            }
        };
        checks.push(c);
    }

    let record = RunRecord {
        hash: cfg.hash(),
        verdict,
        samples: traj.samples,
        outcome,
        wall_time: start.elapsed().as_secs_f64(),
        checks,
        fit,
        probes,
    };
    if let Some(dir) = out {
        record.write_to(dir)?;
    }
    Ok(record)
}

const DONE_MARKER: &str = "done";

fn load_record(cfg: &ExperimentConfig, dir: &Path) -> Result<RunRecord> {
    let mut samples = Vec::new();
    let f = BufReader::new(fs::File::open(dir.join("series.csv"))?);
    for line in f.lines().skip(1) {
        samples.push(parse_sample(&line?)?);
    }
    let mut checks = Vec::new();
    for line in fs::read_to_string(dir.join("checks.csv"))?.lines().skip(1) {
        let mut parts = line.splitn(3, ',');
        let (Some(k), Some(s), Some(d)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("bad checks row `{line}`")));
        };
        let kind =
            CheckKind::parse(k).ok_or_else(|| Error::Parse(format!("unknown check `{k}`")))?;
        let status = match s {
            "pass" => CheckStatus::Pass,
            "fail" => CheckStatus::Fail,
            "skipped" => CheckStatus::Skipped,
            "info" => CheckStatus::Info,
            _ => return Err(Error::Parse(format!("unknown status `{s}`"))),
        };
        checks.push(check(kind, status, d.trim_matches('"')));
    }
    let outcome = match fs::read_to_string(dir.join(DONE_MARKER))?.trim() {
        "ok" => Outcome::Ok,
        "blew_up" => Outcome::BlewUp,
        "unstable" => Outcome::Unstable,
        other => return Err(Error::Parse(format!("unknown outcome `{other}`"))),
    };
    let u0 = cfg.initial_field()?;
    Ok(RunRecord {
        hash: cfg.hash(),
        verdict: classify(&cfg.params, u0.sup(), false),
        samples,
        outcome,
        wall_time: 0.0,
        checks,
        fit: None,
        probes: Vec::new(),
    })
}

/// One point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub value: String,
    pub record: RunRecord,
    /// Loaded from a previous run instead of recomputed.
    pub reused: bool,
}

pub const SWEEP_CSV_HEADER: &str =
    "value,hash,outcome,boundedness_case,c0,speed_lower,speed_upper,sup_u,final_dist_u,checks_passed";

/// Run one simulation per value of `axis`, concurrently on up to `workers`
/// threads. With `out`, every run is persisted under `out/runs/<hash>/` and
/// runs with a completion marker are loaded instead of recomputed; a merged
/// `summary.csv` is written last.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: &str,
    values: &[String],
    out: Option<&Path>,
    workers: usize,
) -> Result<Vec<SweepEntry>> {
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|v| cfg.with_override(axis, v))
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build worker pool: {e}")))?;
    let results: Vec<Result<SweepEntry>> = pool.install(|| {
        configs
            .par_iter()
            .zip(values.par_iter())
            .map(|(c, v)| {
                let dir: Option<PathBuf> = out.map(|o| o.join("runs").join(c.hash()));
                if let Some(d) = &dir {
                    if d.join(DONE_MARKER).exists() {
                        return Ok(SweepEntry {
                            value: v.clone(),
                            record: load_record(c, d)?,
                            reused: true,
                        });
                    }
                }
                let record = run_suite(c, dir.as_deref())?;
                if let Some(d) = &dir {
                    fs::write(d.join("config.txt"), c.to_text())?;
                    fs::write(d.join(DONE_MARKER), format!("{}\n", record.outcome))?;
                }
                Ok(SweepEntry {
                    value: v.clone(),
                    record,
                    reused: false,
                })
            })
            .collect()
    });
    let entries: Vec<SweepEntry> = results.into_iter().collect::<Result<_>>()?;
    if let Some(o) = out {
        fs::create_dir_all(o)?;
        let mut f = fs::File::create(o.join("summary.csv"))?;
        f.write_all(sweep_summary(&entries).as_bytes())?;
    }
    Ok(entries)
}

pub fn sweep_summary(entries: &[SweepEntry]) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for e in entries {
        let r = &e.record;
        let case = r
            .verdict
            .boundedness_case()
            .map_or("none".to_string(), |c| c.to_string());
        let c0 = r.verdict.c0().map_or(String::new(), |c| c.to_string());
        let dist = r.samples.last().map_or(f64::NAN, |x| x.dist_u);
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            e.value,
            r.hash,
            r.outcome,
            case,
            c0,
            r.verdict.speed_lower,
            r.verdict.speed_upper,
            r.sup_u(),
            dist,
            r.all_passed()
        ));
    }
    s
}
