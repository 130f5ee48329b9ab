//! Periodic grids, sampled fields and Fourier-multiplier operators.
//!
//! The domain is the box `[-L/2, L/2)^dim` with `n` points per axis. Fields are
//! stored row-major: in 2D the value at `(i, j)` lives at `i * n + j`, with `i`
//! indexing the first coordinate.
//!
//! Transform normalization: the forward transform is unscaled and the inverse
//! carries the `1/size` factor, so `inverse(forward(f)) == f`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    extent: f64,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, extent: f64, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Grid(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Grid(format!(
                "extent must be positive, got {extent}"
            )));
        }
        if points_per_axis < 8 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::Grid(format!(
                "points_per_axis must be even and >= 8, got {points_per_axis}"
            )));
        }
        Ok(Grid {
            dim,
            extent,
            n: points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.n as f64
    }

    /// Total number of samples, `n^dim`.
    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of sample `i` along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -0.5 * self.extent + i as f64 * self.spacing()
    }

    /// Axis indices of flat sample `idx`; the second entry is 0 in 1D.
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    /// Physical coordinates of flat sample `idx`; the second entry is 0 in 1D.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.axis_indices(idx);
        match self.dim {
            1 => [self.axis_coord(i), 0.0],
            _ => [self.axis_coord(i), self.axis_coord(j)],
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let [x, y] = self.point(idx);
        x.hypot(y)
    }

    /// Signed mode index of FFT bin `i` (`-n/2` for the Nyquist bin).
    pub fn signed_mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Wave number of FFT bin `i`, an integer multiple of `2π/extent`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI / self.extent * self.signed_mode(i) as f64
    }

    /// Highest mode index kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::Grid(format!(
                "field has {} values but grid expects {}",
                values.len(),
                grid.size()
            )));
        }
        let f = Field { grid, values };
        f.check_finite()?;
        Ok(f)
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.size());
        Field { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.size()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every grid point; `f` receives `[x, y]` (y = 0 in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.size()).map(|idx| f(grid.point(idx))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::CorruptedField(format!(
                "non-finite value {} at index {i}",
                self.values[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// L∞ distance to the constant `c`.
    pub fn dist_to_const(&self, c: f64) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max((v - c).abs()))
    }

    pub fn linf_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Riemann sum over the periodic box (spectrally accurate for smooth data).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Clips negative values to zero and returns the clipped mass.
    pub fn project_nonnegative(&mut self) -> f64 {
        let mut clipped = 0.0;
        for v in &mut self.values {
            if *v < 0.0 {
                clipped -= *v;
                *v = 0.0;
            }
        }
        clipped * self.grid.cell_volume()
    }

    fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Grid(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// Precomputed transforms and mode tables for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// |ξ|² per mode.
    ksq: Vec<f64>,
    /// ξ_j per mode with the Nyquist bin of axis j zeroed (odd derivatives).
    kderiv: [Vec<f64>; 2],
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.points_per_axis();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let size = grid.size();
        let cutoff = grid.dealias_cutoff() as i64;
        let mut ksq = Vec::with_capacity(size);
        let mut kd0 = Vec::with_capacity(size);
        let mut kd1 = Vec::with_capacity(size);
        let mut keep = Vec::with_capacity(size);
        let deriv = |i: usize| {
            if i == n / 2 {
                0.0
            } else {
                grid.wavenumber(i)
            }
        };
        for idx in 0..size {
            let [i, j] = grid.axis_indices(idx);
            let (k0, k1) = match grid.dim() {
                1 => (grid.wavenumber(i), 0.0),
                _ => (grid.wavenumber(i), grid.wavenumber(j)),
            };
            ksq.push(k0 * k0 + k1 * k1);
            kd0.push(deriv(i));
            kd1.push(if grid.dim() == 2 { deriv(j) } else { 0.0 });
            let m0 = grid.signed_mode(i).abs();
            let m1 = if grid.dim() == 2 {
                grid.signed_mode(j).abs()
            } else {
                0
            };
            keep.push(m0 <= cutoff && m1 <= cutoff);
        }
        Spectral {
            grid,
            forward,
            inverse,
            ksq,
            kderiv: [kd0, kd1],
            keep,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// |ξ|² for every mode in FFT order.
    pub fn ksq(&self) -> &[f64] {
        &self.ksq
    }

    /// Derivative wave numbers (Nyquist zeroed) along `axis`.
    pub fn kderiv(&self, axis: usize) -> &[f64] {
        &self.kderiv[axis]
    }

    /// Dealiasing mask: `true` for modes kept by the 2/3 rule.
    pub fn keep_mask(&self) -> &[bool] {
        &self.keep
    }

    fn transform(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points_per_axis();
        fft.process(buf);
        if self.grid.dim() == 2 {
            transpose_square(buf, n);
            fft.process(buf);
            transpose_square(buf, n);
        }
    }

    /// Unscaled forward transform of real samples.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        buf
    }

    /// Inverse transform scaled by `1/size`; returns the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, &self.inverse);
        let scale = 1.0 / self.grid.size() as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    pub fn forward(&self, f: &Field) -> Vec<Complex64> {
        self.forward_real(&f.values)
    }

    pub fn inverse(&self, spec: Vec<Complex64>) -> Field {
        Field::from_raw(self.grid, self.inverse_real(spec))
    }

    fn check(&self, f: &Field) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(Error::Grid(
                "field grid differs from spectral context".into(),
            ));
        }
        f.check_finite()
    }

    fn apply_real_multiplier(&self, f: &Field, m: impl Fn(usize) -> f64) -> Result<Field> {
        self.check(f)?;
        let mut spec = self.forward(f);
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= m(idx);
        }
        Ok(self.inverse(spec))
    }

    /// Multiplier `|ξ|^{2α}`; the zero mode maps to zero.
    pub fn fractional_laplacian(&self, f: &Field, alpha: f64) -> Result<Field> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        self.apply_real_multiplier(f, |idx| self.ksq[idx].powf(alpha))
    }

    /// Spectral (negative semi-definite) Laplacian, multiplier `-|ξ|²`.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.apply_real_multiplier(f, |idx| -self.ksq[idx])
    }

    /// Solves `λ g − Δg = μ f`.
    pub fn helmholtz_solve(&self, f: &Field, lambda: f64, mu: f64) -> Result<Field> {
        check_helmholtz(lambda, mu)?;
        self.apply_real_multiplier(f, |idx| mu / (lambda + self.ksq[idx]))
    }

    pub fn gradient(&self, f: &Field) -> Result<Vec<Field>> {
        self.check(f)?;
        let spec = self.forward(f);
        Ok(self.gradient_from_spectrum(&spec))
    }

    pub(crate) fn gradient_from_spectrum(&self, spec: &[Complex64]) -> Vec<Field> {
        (0..self.grid.dim())
            .map(|axis| {
                let comp: Vec<Complex64> = spec
                    .iter()
                    .zip(&self.kderiv[axis])
                    .map(|(c, &k)| c * Complex64::new(0.0, k))
                    .collect();
                self.inverse(comp)
            })
            .collect()
    }

    pub fn divergence(&self, vec: &[Field]) -> Result<Field> {
        if vec.len() != self.grid.dim() {
            return Err(Error::Grid(format!(
                "divergence expects {} components, got {}",
                self.grid.dim(),
                vec.len()
            )));
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.size()];
        for (axis, comp) in vec.iter().enumerate() {
            self.check(comp)?;
            let spec = self.forward(comp);
            for ((a, c), &k) in acc.iter_mut().zip(spec).zip(&self.kderiv[axis]) {
                *a += c * Complex64::new(0.0, k);
            }
        }
        Ok(self.inverse(acc))
    }

    /// Zeroes every mode with a mode index above `n/3` on any axis.
    pub fn dealias(&self, f: &Field) -> Result<Field> {
        self.apply_real_multiplier(f, |idx| if self.keep[idx] { 1.0 } else { 0.0 })
    }

    /// Fraction of spectral energy in modes removed by the 2/3 rule.
    pub fn tail_fraction(&self, f: &Field) -> f64 {
        let spec = self.forward(f);
        let (mut tail, mut total) = (0.0, 0.0);
        for (c, &keep) in spec.iter().zip(&self.keep) {
            let e = c.norm_sqr();
            total += e;
            if !keep {
                tail += e;
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }
}

fn check_helmholtz(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!(
            "screened Poisson solve needs lambda > 0, got {lambda}"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::Parameter(format!(
            "screened Poisson solve needs mu > 0, got {mu}"
        )));
    }
    Ok(())
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

pub fn fractional_laplacian(f: &Field, alpha: f64) -> Result<Field> {
    Spectral::new(*f.grid()).fractional_laplacian(f, alpha)
}

pub fn helmholtz_solve(f: &Field, lambda: f64, mu: f64) -> Result<Field> {
    check_helmholtz(lambda, mu)?;
    Spectral::new(*f.grid()).helmholtz_solve(f, lambda, mu)
}

pub fn gradient(f: &Field) -> Result<Vec<Field>> {
    Spectral::new(*f.grid()).gradient(f)
}

pub fn divergence(vec: &[Field]) -> Result<Field> {
    let first = vec
        .first()
        .ok_or_else(|| Error::Grid("divergence of an empty vector field".into()))?;
    for comp in &vec[1..] {
        first.same_grid(comp)?;
    }
    Spectral::new(*first.grid()).divergence(vec)
}

pub fn dealias(f: &Field) -> Result<Field> {
    Spectral::new(*f.grid()).dealias(f)
}

const SNAPSHOT_MAGIC: &str = "fracchemo-field v1";

/// Writes `fracchemo-field v1 dim=<d> n=<n> extent=<L>` followed by one value per line.
pub fn write_snapshot<W: Write>(mut w: W, f: &Field) -> Result<()> {
    let g = f.grid();
    writeln!(
        w,
        "{SNAPSHOT_MAGIC} dim={} n={} extent={}",
        g.dim(),
        g.points_per_axis(),
        g.extent()
    )?;
    for v in f.values() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<Field> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty snapshot".into()))??;
    let rest = header
        .strip_prefix(SNAPSHOT_MAGIC)
        .ok_or_else(|| Error::Parse(format!("bad snapshot header: {header}")))?;
    let (mut dim, mut n, mut extent) = (None, None, None);
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token {tok}")))?;
        let bad = |_| Error::Parse(format!("bad value in header token {tok}"));
        match key {
            "dim" => dim = Some(val.parse::<usize>().map_err(bad)?),
            "n" => n = Some(val.parse::<usize>().map_err(bad)?),
            "extent" => extent = Some(val.parse::<f64>().map_err(|_| Error::Parse(tok.into()))?),
            _ => return Err(Error::Parse(format!("unknown header key {key}"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("snapshot header lacks {k}"));
    let grid = Grid::new(
        dim.ok_or_else(|| missing("dim"))?,
        extent.ok_or_else(|| missing("extent"))?,
        n.ok_or_else(|| missing("n"))?,
    )?;
    let mut values = Vec::with_capacity(grid.size());
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad value {t}: {e}")))?,
        );
    }
    Field::new(grid, values)
}
