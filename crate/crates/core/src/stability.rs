//! Linear analysis on the damped oscillator `x'' = -kappa x - mu x'`.
//!
//! All matrices are assembled with `dt = 1`, so `kappa` and `mu` below stand for
//! `dt kappa` and `dt mu`. Vectors are stacked as `(X_0..X_M, V_0..V_M)`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, SdcError};
use crate::harness::output::fmt_real;
use crate::preconditioner::build_preconditioner;
use crate::quadrature::QuadratureRule;

/// Slack on `rho <= 1` used when locating stability limits. Free-flight modes sit
/// exactly on the unit circle, so rounding can push them just past it.
pub const MARGINAL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanKind {
    /// `rho(R)` after K SDC iterations.
    SdcStability(usize),
    /// `rho(K_sdc)`.
    SdcConvergence,
    /// `rho(R)` after K Picard iterations.
    PicardStability(usize),
    /// `rho(K_picard)`.
    PicardConvergence,
    /// Amplification matrix of classical RK4 on the companion system.
    Rkn4,
    /// Fully converged collocation step.
    Collocation,
}

impl ScanKind {
    pub fn name(self) -> String {
        match self {
            ScanKind::SdcStability(k) => format!("sdc-stability-k{k}"),
            ScanKind::SdcConvergence => "sdc-convergence".into(),
            ScanKind::PicardStability(k) => format!("picard-stability-k{k}"),
            ScanKind::PicardConvergence => "picard-convergence".into(),
            ScanKind::Rkn4 => "rkn4".into(),
            ScanKind::Collocation => "collocation".into(),
        }
    }
}

impl fmt::Display for ScanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ScanKind {
    type Err = SdcError;

    fn from_str(s: &str) -> Result<Self> {
        let k_of = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| SdcError::InvalidArgument(format!("bad iteration count in '{s}'")))
        };
        match s {
            "sdc-convergence" => Ok(ScanKind::SdcConvergence),
            "picard-convergence" => Ok(ScanKind::PicardConvergence),
            "rkn4" => Ok(ScanKind::Rkn4),
            "collocation" => Ok(ScanKind::Collocation),
            _ => {
                if let Some(rest) = s.strip_prefix("sdc-stability-k") {
                    Ok(ScanKind::SdcStability(k_of(rest)?))
                } else if let Some(rest) = s.strip_prefix("picard-stability-k") {
                    Ok(ScanKind::PicardStability(k_of(rest)?))
                } else {
                    Err(SdcError::InvalidArgument(format!("unknown scan kind '{s}'")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Precond {
    Verlet,
    None,
}

fn analysis_err(kappa: f64, mu: f64, reason: impl Into<String>) -> SdcError {
    SdcError::Analysis {
        dt_kappa: kappa,
        dt_mu: mu,
        reason: reason.into(),
    }
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (n, n)).copy_from(b);
    out
}

/// Linear force operator: both block rows hold `-kappa X - mu V`.
fn force_operator(kappa: f64, mu: f64, n: usize) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(2 * n, 2 * n);
    for block in 0..2 {
        for i in 0..n {
            f[(block * n + i, i)] = -kappa;
            f[(block * n + i, n + i)] = -mu;
        }
    }
    f
}

fn c_coll(rule: &QuadratureRule) -> DMatrix<f64> {
    let n = rule.num_nodes() + 1;
    let mut c = DMatrix::identity(2 * n, 2 * n);
    c.view_mut((0, n), (n, n)).copy_from(&rule.q);
    c
}

fn q_coll(rule: &QuadratureRule) -> DMatrix<f64> {
    block_diag(&rule.qq, &rule.q)
}

/// Iteration matrix and `M^{-1} C_coll` for the given preconditioner.
fn iteration_parts(kappa: f64, mu: f64, rule: &QuadratureRule, precond: Precond) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = rule.num_nodes() + 1;
    let f = force_operator(kappa, mu, n);
    let qc = q_coll(rule);
    let cc = c_coll(rule);
    match precond {
        Precond::None => Ok((qc * f, cc)),
        Precond::Verlet => {
            let pre = build_preconditioner(rule);
            let qvv = block_diag(&pre.qx, &pre.qt);
            let mvv = DMatrix::identity(2 * n, 2 * n) - &qvv * &f;
            let lu = mvv.lu();
            let k = lu
                .solve(&((qc - qvv) * f))
                .ok_or_else(|| analysis_err(kappa, mu, "singular Verlet operator"))?;
            let b = lu.solve(&cc).ok_or_else(|| analysis_err(kappa, mu, "singular Verlet operator"))?;
            Ok((k, b))
        }
    }
}

/// `K_sdc = M_vv^{-1} (Q_coll - Q_vv) F`.
pub fn build_k_sdc(dt_kappa: f64, dt_mu: f64, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    iteration_parts(dt_kappa, dt_mu, rule, Precond::Verlet).map(|(k, _)| k)
}

/// `K_picard = Q_coll F`.
pub fn build_k_picard(dt_kappa: f64, dt_mu: f64, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    iteration_parts(dt_kappa, dt_mu, rule, Precond::None).map(|(k, _)| k)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(matrix: &DMatrix<f64>) -> Result<f64> {
    if !matrix.is_square() {
        return Err(analysis_err(f64::NAN, f64::NAN, "spectral radius of a non-square matrix"));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(analysis_err(f64::NAN, f64::NAN, "non-finite matrix entry"));
    }
    if matrix.nrows() == 0 {
        return Ok(0.0);
    }
    let schur = matrix
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| analysis_err(f64::NAN, f64::NAN, "eigenvalue iteration did not converge"))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Propagator `U_0 -> U^k`: `K^k + (I - K^k)(I - K)^{-1} M_vv^{-1} C_coll`.
pub fn build_p_sdc(dt_kappa: f64, dt_mu: f64, rule: &QuadratureRule, k: usize) -> Result<DMatrix<f64>> {
    let (kmat, b) = iteration_parts(dt_kappa, dt_mu, rule, Precond::Verlet)?;
    let n = kmat.nrows();
    let id = DMatrix::identity(n, n);
    let kk = matrix_power(&kmat, k);
    let fixed = (&id - &kmat)
        .lu()
        .solve(&b)
        .ok_or_else(|| analysis_err(dt_kappa, dt_mu, "I - K_sdc is singular"))?;
    Ok(&kk + (id - &kk) * fixed)
}

fn matrix_power(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = a * out;
    }
    out
}

/// `P^k` by the recurrence `P^{j+1} = K P^j + M^{-1} C_coll`, `P^0 = I`.
fn propagator(kappa: f64, mu: f64, rule: &QuadratureRule, k: usize, precond: Precond) -> Result<DMatrix<f64>> {
    let (kmat, b) = iteration_parts(kappa, mu, rule, precond)?;
    let mut p = DMatrix::identity(kmat.nrows(), kmat.ncols());
    for _ in 0..k {
        p = &kmat * p + &b;
    }
    Ok(p)
}

/// `[[1, 1], [0, 1]] + W F P 1bar` where `W` holds the `qQ` and `q` rows.
fn amplification(kappa: f64, mu: f64, rule: &QuadratureRule, p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rule.num_nodes() + 1;
    let f = force_operator(kappa, mu, n);
    let mut w = DMatrix::zeros(2, 2 * n);
    let mut spread = DMatrix::zeros(2 * n, 2);
    for j in 0..n {
        w[(0, j)] = rule.weights_q[j];
        w[(1, n + j)] = rule.weights[j];
        spread[(j, 0)] = 1.0;
        spread[(n + j, 1)] = 1.0;
    }
    let mut r = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    r += w * f * p * spread;
    r
}

/// One-step amplification matrix of SDC with `k` sweeps from a copied start.
pub fn stability_function(dt_kappa: f64, dt_mu: f64, rule: &QuadratureRule, k: usize) -> Result<DMatrix<f64>> {
    let p = propagator(dt_kappa, dt_mu, rule, k, Precond::Verlet)?;
    Ok(amplification(dt_kappa, dt_mu, rule, &p))
}

/// As [`stability_function`] with Picard iterations.
pub fn picard_stability_function(dt_kappa: f64, dt_mu: f64, rule: &QuadratureRule, k: usize) -> Result<DMatrix<f64>> {
    let p = propagator(dt_kappa, dt_mu, rule, k, Precond::None)?;
    Ok(amplification(dt_kappa, dt_mu, rule, &p))
}

/// Amplification matrix of the collocation method itself.
pub fn collocation_stability_function(dt_kappa: f64, dt_mu: f64, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    let n = rule.num_nodes() + 1;
    let f = force_operator(dt_kappa, dt_mu, n);
    let m = DMatrix::identity(2 * n, 2 * n) - q_coll(rule) * f;
    let p = m
        .lu()
        .solve(&c_coll(rule))
        .ok_or_else(|| analysis_err(dt_kappa, dt_mu, "singular collocation operator"))?;
    Ok(amplification(dt_kappa, dt_mu, rule, &p))
}

/// Classical RK4 on `(x, v)' = [[0, 1], [-kappa, -mu]] (x, v)`: `sum_{j<=4} A^j / j!`.
pub fn rkn4_stability_function(dt_kappa: f64, dt_mu: f64) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -dt_kappa, -dt_mu]);
    let mut term = DMatrix::identity(2, 2);
    let mut r = term.clone();
    for j in 1..=4 {
        term = &term * &a / j as f64;
        r += &term;
    }
    r
}

/// Spectral radius of the matrix that `kind` classifies.
pub fn rho(kind: ScanKind, dt_kappa: f64, dt_mu: f64, rule: &QuadratureRule) -> Result<f64> {
    let m = match kind {
        ScanKind::SdcStability(k) => stability_function(dt_kappa, dt_mu, rule, k)?,
        ScanKind::SdcConvergence => build_k_sdc(dt_kappa, dt_mu, rule)?,
        ScanKind::PicardStability(k) => picard_stability_function(dt_kappa, dt_mu, rule, k)?,
        ScanKind::PicardConvergence => build_k_picard(dt_kappa, dt_mu, rule)?,
        ScanKind::Rkn4 => rkn4_stability_function(dt_kappa, dt_mu),
        ScanKind::Collocation => collocation_stability_function(dt_kappa, dt_mu, rule)?,
    };
    spectral_radius(&m).map_err(|e| match e {
        SdcError::Analysis { reason, .. } => analysis_err(dt_kappa, dt_mu, reason),
        other => other,
    })
}

/// A cell-centred axis: `cells` cells of equal width on `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, cells: usize) -> Result<Self> {
        if !(min >= 0.0 && max > min && cells > 0) {
            return Err(SdcError::InvalidArgument(format!(
                "axis needs 0 <= min < max and cells > 0, got [{min}, {max}] with {cells}"
            )));
        }
        Ok(Self { min, max, cells })
    }

    pub fn centre(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * (self.max - self.min) / self.cells as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGrid {
    pub kappa: Axis,
    pub mu: Axis,
}

impl Default for ScanGrid {
    fn default() -> Self {
        let axis = Axis {
            min: 0.0,
            max: 20.0,
            cells: 200,
        };
        Self { kappa: axis, mu: axis }
    }
}

impl ScanGrid {
    pub fn square(max: f64, cells: usize) -> Result<Self> {
        let axis = Axis::new(0.0, max, cells)?;
        Ok(Self { kappa: axis, mu: axis })
    }
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub kind: ScanKind,
    pub grid: ScanGrid,
    /// Row-major over (kappa cell, mu cell); NaN marks failed cells.
    pub rho: Vec<f64>,
    /// Cells whose assembly failed.
    pub failures: Vec<(f64, f64, String)>,
}

impl ScanResult {
    pub fn rho_at(&self, i_kappa: usize, j_mu: usize) -> f64 {
        self.rho[i_kappa * self.grid.mu.cells + j_mu]
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let g = self.grid;
        (0..g.kappa.cells).flat_map(move |i| (0..g.mu.cells).map(move |j| (g.kappa.centre(i), g.mu.centre(j), self.rho_at(i, j))))
    }

    /// Per-cell `rho < 1 + tol`; failed cells count as unstable.
    pub fn classify(&self, tol: f64) -> Vec<bool> {
        self.rho.iter().map(|&r| r < 1.0 + tol).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["dt_kappa", "dt_mu", "rho", "stable"])?;
        for (k, m, r) in self.cells() {
            w.write_record([fmt_real(k), fmt_real(m), fmt_real(r), u8::from(r < 1.0).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain text raster: one line per mu cell (largest mu first), `#` stable, `.` unstable, `?` failed.
    pub fn write_text_grid(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# {} dt_kappa [{}, {}] x dt_mu [{}, {}]", self.kind, self.grid.kappa.min, self.grid.kappa.max, self.grid.mu.min, self.grid.mu.max)?;
        for j in (0..self.grid.mu.cells).rev() {
            let line: String = (0..self.grid.kappa.cells)
                .map(|i| match self.rho_at(i, j) {
                    r if r.is_nan() => '?',
                    r if r < 1.0 => '#',
                    _ => '.',
                })
                .collect();
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Evaluates `kind` at every cell centre of `grid`, in parallel.
pub fn scan_domain(kind: ScanKind, rule: &QuadratureRule, grid: ScanGrid) -> ScanResult {
    let cells = grid.kappa.cells * grid.mu.cells;
    let results: Vec<std::result::Result<f64, String>> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / grid.mu.cells, c % grid.mu.cells);
            rho(kind, grid.kappa.centre(i), grid.mu.centre(j), rule).map_err(|e| e.to_string())
        })
        .collect();
    let mut failures = Vec::new();
    let rho = results
        .into_iter()
        .enumerate()
        .map(|(c, r)| {
            r.unwrap_or_else(|e| {
                let (i, j) = (c / grid.mu.cells, c % grid.mu.cells);
                failures.push((grid.kappa.centre(i), grid.mu.centre(j), e));
                f64::NAN
            })
        })
        .collect();
    ScanResult {
        kind,
        grid,
        rho,
        failures,
    }
}

const LIMIT_STEP: f64 = 0.1;
const LIMIT_MAX: f64 = 100.0;
const LIMIT_RESOLUTION: f64 = 0.01;

/// Largest `dt kappa` on the `mu = 0` axis with `rho <= 1 + MARGINAL_TOL`: coarse
/// scan in steps of 0.1, then bisection to 0.01. Returns 0 when the first probe is
/// already unstable and 100 when nothing up to 100 is.
pub fn stability_limit(kind: ScanKind, rule: &QuadratureRule) -> f64 {
    let stable = |k: f64| rho(kind, k, 0.0, rule).map(|r| r <= 1.0 + MARGINAL_TOL).unwrap_or(false);
    let probes = (LIMIT_MAX / LIMIT_STEP).round() as usize;
    let mut last_stable = None;
    for i in 1..=probes {
        let k = i as f64 * LIMIT_STEP;
        if stable(k) {
            last_stable = Some(k);
            continue;
        }
        let Some(mut lo) = last_stable else {
            return 0.0;
        };
        let mut hi = k;
        while hi - lo > LIMIT_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if stable(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return lo;
    }
    LIMIT_MAX
}
