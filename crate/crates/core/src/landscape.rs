//! Energy landscape of VISA at frozen gain `γ` and penalty `P`.
//!
//! Critical points are found by multistart Newton iteration on `∇H = 0` and
//! classified by their Hessian spectrum. Minima are labelled by the Ising
//! energy of their readout, compared with the `S0` and `S1` reference states.
//! The same machinery runs on the scalar CIM energy so both landscapes can be
//! compared point by point.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::graph::CouplingMatrix;
use crate::ising::{
    energy_unchecked, reference_state, vector_readout, ReferenceFamily, SpinConfig, VectorState,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::solvers::{cim_energy, cim_rhs, visa_rhs_flat};

/// Analytic Hessian of `H_VISA` at `x`, as a `3n × 3n` matrix indexed
/// `(3i + a, 3k + b)`.
pub fn visa_hessian(
    x: &VectorState,
    gamma: &[f64],
    p: f64,
    alpha: f64,
    j: &CouplingMatrix,
) -> Result<DMatrix<f64>> {
    let n = j.n();
    for got in [x.len(), gamma.len()] {
        if got != n {
            return Err(Error::Dimension { expected: n, got });
        }
    }
    Ok(hessian_flat(&x.to_flat(), gamma, p, alpha, j))
}

fn hessian_flat(x: &[f64], gamma: &[f64], p: f64, alpha: f64, j: &CouplingMatrix) -> DMatrix<f64> {
    let n = j.n();
    let mut h = DMatrix::<f64>::zeros(3 * n, 3 * n);
    let mut s = 0.0;
    let mut m = [[0.0; 3]; 3];
    for v in x.chunks_exact(3) {
        s += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += v[a] * v[b];
            }
        }
    }
    for i in 0..n {
        let xi = &x[3 * i..3 * i + 3];
        let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        for a in 0..3 {
            for b in 0..3 {
                let delta = if a == b { 1.0 } else { 0.0 };
                let mut v = -alpha * (gamma[i] - r2) * delta + 2.0 * alpha * xi[a] * xi[b];
                v += 2.0 * p * ((s - r2) * delta + xi[a] * xi[b] - m[a][b]);
                h[(3 * i + a, 3 * i + b)] = v;
            }
        }
        for k in 0..n {
            if k == i {
                continue;
            }
            let xk = &x[3 * k..3 * k + 3];
            let dot = xi[0] * xk[0] + xi[1] * xk[1] + xi[2] * xk[2];
            let w = j.get(i, k);
            for a in 0..3 {
                for b in 0..3 {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    h[(3 * i + a, 3 * k + b)] =
                        -w * delta + 2.0 * p * (2.0 * xi[a] * xk[b] - dot * delta - xk[a] * xi[b]);
                }
            }
        }
    }
    h
}

/// Hessian of the CIM energy `1/4 Σ (p - x_i²)² - α/2 Σ J_ij x_i x_j`.
pub fn cim_hessian(x: &[f64], p: f64, alpha: f64, j: &CouplingMatrix) -> DMatrix<f64> {
    let n = j.n();
    DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            3.0 * x[a] * x[a] - p
        } else {
            -alpha * j.get(a, b)
        }
    })
}

/// A smooth energy surface with analytic derivatives.
trait Surface: Sync {
    fn dim(&self) -> usize;
    fn spins(&self) -> usize;
    fn energy(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
    /// Binary readout, `None` at the origin.
    fn readout(&self, x: &[f64]) -> Option<SpinConfig>;
    fn embed(&self, x: &[f64]) -> VectorState;
    /// Flat state with spin `i` of amplitude `scale * s_i` along `axis`.
    fn template(&self, s: &SpinConfig, scale: f64, axis: [f64; 3]) -> Vec<f64>;
}

struct VisaSurface<'a> {
    j: &'a CouplingMatrix,
    gamma: Vec<f64>,
    p: f64,
    alpha: f64,
}

impl Surface for VisaSurface<'_> {
    fn dim(&self) -> usize {
        3 * self.j.n()
    }
    fn spins(&self) -> usize {
        self.j.n()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        crate::solvers::visa_energy_flat(x, &self.gamma, self.p, self.alpha, self.j)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        visa_rhs_flat(x, &self.gamma, self.p, self.alpha, self.j, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        hessian_flat(x, &self.gamma, self.p, self.alpha, self.j)
    }
    fn readout(&self, x: &[f64]) -> Option<SpinConfig> {
        vector_readout(&VectorState::from_flat(x)).ok().map(|(s, _)| s)
    }
    fn embed(&self, x: &[f64]) -> VectorState {
        VectorState::from_flat(x)
    }
    fn template(&self, s: &SpinConfig, scale: f64, axis: [f64; 3]) -> Vec<f64> {
        (0..s.len()).flat_map(|i| axis.map(|a| s.get(i) * scale * a)).collect()
    }
}

struct CimSurface<'a> {
    j: &'a CouplingMatrix,
    p: f64,
    alpha: f64,
}

impl Surface for CimSurface<'_> {
    fn dim(&self) -> usize {
        self.j.n()
    }
    fn spins(&self) -> usize {
        self.j.n()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        cim_energy(x, self.p, self.alpha, self.j)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        cim_rhs(x, self.p, self.alpha, self.j, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        cim_hessian(x, self.p, self.alpha, self.j)
    }
    fn readout(&self, x: &[f64]) -> Option<SpinConfig> {
        x.iter()
            .any(|&v| v != 0.0)
            .then(|| SpinConfig::from_signs(x.iter().copied()))
    }
    fn embed(&self, x: &[f64]) -> VectorState {
        VectorState(x.iter().map(|&v| [v, 0.0, 0.0]).collect())
    }
    fn template(&self, s: &SpinConfig, scale: f64, _axis: [f64; 3]) -> Vec<f64> {
        (0..s.len()).map(|i| s.get(i) * scale).collect()
    }
}

/// Numerical settings of the landscape searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub max_iter: usize,
    /// A point is critical once `‖∇H‖ <` this.
    pub grad_tol: f64,
    /// Newton steps longer than this are shortened.
    pub max_step: f64,
    /// Starts whose iterate leaves `[-escape, escape]^d` are dropped.
    pub escape: f64,
    /// Points closer than this are the same point.
    pub dedup_tol: f64,
    /// Hessian eigenvalues smaller in magnitude are zero modes.
    pub zero_tol: f64,
    /// Distances are `‖x‖ / divisor`; `None` uses the spin count.
    pub distance_divisor: Option<f64>,
    /// Starts are uniform in `[-start_range, start_range]^d`.
    pub start_range: f64,
    /// Also descend from scaled copies of every S0 and S1 configuration so
    /// the two competing minima are found even when their basins are small.
    pub reference_seeds: bool,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            max_iter: 200,
            grad_tol: 1e-10,
            max_step: 0.5,
            escape: 10.0,
            dedup_tol: 1e-6,
            zero_tol: 1e-8,
            distance_divisor: None,
            start_range: 1.0,
            reference_seeds: true,
        }
    }
}

impl LandscapeConfig {
    fn divisor(&self, spins: usize) -> f64 {
        self.distance_divisor.unwrap_or(spins as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointLabel {
    #[serde(rename = "S0_min")]
    S0Min,
    #[serde(rename = "S1_min")]
    S1Min,
    #[serde(rename = "other_min")]
    OtherMin,
    #[serde(rename = "saddle")]
    Saddle,
    #[serde(rename = "maximum")]
    Maximum,
}

impl PointLabel {
    pub fn is_minimum(self) -> bool {
        matches!(self, PointLabel::S0Min | PointLabel::S1Min | PointLabel::OtherMin)
    }

    pub fn name(self) -> &'static str {
        match self {
            PointLabel::S0Min => "S0_min",
            PointLabel::S1Min => "S1_min",
            PointLabel::OtherMin => "other_min",
            PointLabel::Saddle => "saddle",
            PointLabel::Maximum => "maximum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Scalar landscapes are embedded as the first vector component.
    pub coordinates: VectorState,
    pub energy: f64,
    /// Number of Hessian eigenvalues below `-zero_tol`.
    pub hessian_index: usize,
    pub zero_modes: usize,
    pub distance: f64,
    pub label: PointLabel,
    /// Gradient norm at `coordinates`.
    pub residual: f64,
}

/// Outcome of a multistart critical-point search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSearch {
    /// Distinct points, sorted by energy.
    pub points: Vec<CriticalPoint>,
    pub failed_starts: usize,
    /// Points left after identifying global rotations and reflections.
    pub orbit_count: usize,
    pub distance_divisor: f64,
}

impl CriticalSearch {
    pub fn minima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|p| p.label.is_minimum())
    }

    pub fn lowest(&self, label: PointLabel) -> Option<&CriticalPoint> {
        self.points.iter().find(|p| p.label == label)
    }

    pub fn saddle_path_distance(&self) -> Result<f64> {
        saddle_path_distance(&self.points, self.distance_divisor)
    }
}

/// Ising energies of the `S0` and `S1` references on `j`.
fn reference_energies(j: &CouplingMatrix) -> Result<(f64, f64)> {
    let n = j.n();
    let e0 = energy_unchecked(j, reference_state(n, ReferenceFamily::S0)?.as_slice());
    let e1 = energy_unchecked(j, reference_state(n, ReferenceFamily::S1)?.as_slice());
    Ok((e0, e1))
}

struct Labeller {
    e_s0: f64,
    e_s1: f64,
}

impl Labeller {
    const ENERGY_TOL: f64 = 1e-9;
    /// Below this normalised distance a minimum counts as the origin.
    const ORIGIN_TOL: f64 = 1e-6;

    fn minimum<S: Surface>(&self, surface: &S, j: &CouplingMatrix, x: &[f64], distance: f64) -> PointLabel {
        if distance < Self::ORIGIN_TOL {
            return PointLabel::OtherMin;
        }
        match surface.readout(x) {
            Some(s) => {
                let e = energy_unchecked(j, s.as_slice());
                if (e - self.e_s0).abs() < Self::ENERGY_TOL {
                    PointLabel::S0Min
                } else if (e - self.e_s1).abs() < Self::ENERGY_TOL {
                    PointLabel::S1Min
                } else {
                    PointLabel::OtherMin
                }
            }
            None => PointLabel::OtherMin,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Newton step `-H⁺ g` where the pseudo-inverse drops eigenvalues below
/// `zero_tol` in magnitude.
fn newton_direction(eig: &SymmetricEigen<f64, nalgebra::Dyn>, g: &[f64], zero_tol: f64) -> Vec<f64> {
    let g = DVector::from_column_slice(g);
    let mut d = DVector::zeros(g.len());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > zero_tol {
            let v = eig.eigenvectors.column(k);
            d -= v * (v.dot(&g) / lambda);
        }
    }
    d.as_slice().to_vec()
}

/// Newton step on `|H|`: always a descent direction, quadratic near a
/// minimum and pushed downhill along negative curvature. Near-flat modes
/// fall back to a unit-curvature gradient step.
fn saddle_free_direction(eig: &SymmetricEigen<f64, nalgebra::Dyn>, g: &[f64]) -> Vec<f64> {
    const FLAT: f64 = 1e-6;
    let g = DVector::from_column_slice(g);
    let mut d = DVector::zeros(g.len());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let curvature = if lambda.abs() < FLAT { 1.0 } else { lambda.abs() };
        d -= v * (v.dot(&g) / curvature);
    }
    d.as_slice().to_vec()
}

/// Plain Newton iteration towards any critical point.
fn newton_critical<S: Surface>(surface: &S, mut x: Vec<f64>, cfg: &LandscapeConfig) -> Option<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    for _ in 0..cfg.max_iter {
        surface.gradient(&x, &mut g);
        if norm(&g) < cfg.grad_tol {
            return Some(x);
        }
        let eig = SymmetricEigen::new(surface.hessian(&x));
        let mut d = newton_direction(&eig, &g, cfg.zero_tol);
        let len = norm(&d);
        if !len.is_finite() || len == 0.0 {
            return None;
        }
        if len > cfg.max_step {
            d.iter_mut().for_each(|v| *v *= cfg.max_step / len);
        }
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        if x.iter().any(|v| v.abs() > cfg.escape) {
            return None;
        }
    }
    surface.gradient(&x, &mut g);
    (norm(&g) < cfg.grad_tol).then_some(x)
}

/// Safeguarded descent: saddle-free Newton steps with Armijo backtracking,
/// polished by plain Newton once the gradient is small.
fn descend<S: Surface>(surface: &S, mut x: Vec<f64>, cfg: &LandscapeConfig) -> Option<Vec<f64>> {
    const ARMIJO: f64 = 1e-4;
    const POLISH: f64 = 1e-6;
    let iters = cfg.max_iter * 10;
    let mut g = vec![0.0; x.len()];
    let mut trial = vec![0.0; x.len()];
    let mut f = surface.energy(&x);
    for _ in 0..iters {
        surface.gradient(&x, &mut g);
        let gnorm = norm(&g);
        if gnorm < cfg.grad_tol {
            return Some(x);
        }
        // energy differences stop resolving near the bottom; finish on the
        // gradient with Newton
        if gnorm < POLISH {
            if let Some(y) = newton_critical(surface, x.clone(), cfg) {
                if distance_between(&x, &y) < 1e-3 {
                    return Some(y);
                }
            }
        }
        let eig = SymmetricEigen::new(surface.hessian(&x));
        let mut d = saddle_free_direction(&eig, &g);
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let len = norm(&d);
        let mut step = if len > cfg.max_step { cfg.max_step / len } else { 1.0 };
        loop {
            for k in 0..x.len() {
                trial[k] = x[k] + step * d[k];
            }
            let f_try = surface.energy(&trial);
            if f_try <= f + ARMIJO * step * slope {
                f = f_try;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                // no decrease representable: accept if already stationary to
                // rounding, fail otherwise
                return (gnorm < cfg.grad_tol * 100.0).then_some(x);
            }
        }
        std::mem::swap(&mut x, &mut trial);
        if x.iter().any(|v| v.abs() > cfg.escape) {
            return None;
        }
    }
    None
}

fn classify<S: Surface>(
    surface: &S,
    j: &CouplingMatrix,
    x: Vec<f64>,
    labeller: &Labeller,
    cfg: &LandscapeConfig,
) -> CriticalPoint {
    let eig = SymmetricEigen::new(surface.hessian(&x));
    let negative = eig.eigenvalues.iter().filter(|&&l| l < -cfg.zero_tol).count();
    let zero = eig.eigenvalues.iter().filter(|&&l| l.abs() <= cfg.zero_tol).count();
    let distance = norm(&x) / cfg.divisor(surface.spins());
    let label = if negative == 0 {
        labeller.minimum(surface, j, &x, distance)
    } else if negative + zero == x.len() {
        PointLabel::Maximum
    } else {
        PointLabel::Saddle
    };
    let mut g = vec![0.0; x.len()];
    surface.gradient(&x, &mut g);
    CriticalPoint {
        energy: surface.energy(&x),
        coordinates: surface.embed(&x),
        hessian_index: negative,
        zero_modes: zero,
        distance,
        label,
        residual: norm(&g),
    }
}

fn random_start(seed: u64, start: usize, dim: usize, range: f64) -> Vec<f64> {
    let mut rng = rng_from_seed(derive_seed(seed, start as u64, 0, 0));
    (0..dim).map(|_| rng.random_range(-range..=range)).collect()
}

fn flat(p: &CriticalPoint) -> Vec<f64> {
    p.coordinates.to_flat()
}

fn distance_between(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Sorts by energy and drops points within `tol` of an earlier one.
fn dedup(mut points: Vec<CriticalPoint>, tol: f64) -> Vec<CriticalPoint> {
    points.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut kept: Vec<(CriticalPoint, Vec<f64>)> = Vec::new();
    for p in points {
        let x = flat(&p);
        // H is Lipschitz on the search box, so coincident points have close
        // energies and the scan can stop early
        let duplicate = kept
            .iter()
            .rev()
            .take_while(|(q, _)| p.energy - q.energy < 1e-6)
            .any(|(_, y)| distance_between(&x, y) < tol);
        if !duplicate {
            kept.push((p, x));
        }
    }
    kept.into_iter().map(|(p, _)| p).collect()
}

/// Gram matrix `x_i · x_k`, invariant under global rotations and
/// reflections.
fn gram(x: &VectorState) -> Vec<f64> {
    let v = &x.0;
    let mut out = Vec::with_capacity(v.len() * v.len());
    for a in v {
        for b in v {
            out.push(a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
        }
    }
    out
}

fn orbit_count(points: &[CriticalPoint], tol: f64) -> usize {
    let mut reps: Vec<(f64, Vec<f64>)> = Vec::new();
    for p in points {
        let g = gram(&p.coordinates);
        let seen = reps
            .iter()
            .rev()
            .take_while(|(e, _)| p.energy - e < 1e-6)
            .any(|(_, h)| distance_between(&g, h) < tol);
        if !seen {
            reps.push((p.energy, g));
        }
    }
    reps.len()
}

fn search<S: Surface>(
    surface: &S,
    j: &CouplingMatrix,
    n_starts: usize,
    seed: u64,
    cfg: &LandscapeConfig,
) -> Result<CriticalSearch> {
    ensure(n_starts >= 1, || "at least one start is required".to_string())?;
    let (e_s0, e_s1) = reference_energies(j)?;
    let labeller = Labeller { e_s0, e_s1 };
    let dim = surface.dim();
    let found: Vec<Option<CriticalPoint>> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let x0 = random_start(seed, k, dim, cfg.start_range);
            newton_critical(surface, x0, cfg).map(|x| classify(surface, j, x, &labeller, cfg))
        })
        .collect();
    let failed_starts = found.iter().filter(|p| p.is_none()).count();
    let mut found: Vec<CriticalPoint> = found.into_iter().flatten().collect();
    if cfg.reference_seeds {
        let seeded: Vec<Option<CriticalPoint>> = template_starts(surface, j.n(), seed)?
            .into_par_iter()
            .map(|x0| {
                descend(surface, x0, cfg)
                    .map(|x| newton_critical(surface, x.clone(), cfg).unwrap_or(x))
                    .map(|x| classify(surface, j, x, &labeller, cfg))
            })
            .collect();
        found.extend(seeded.into_iter().flatten());
    }
    let points = dedup(found, cfg.dedup_tol);
    Ok(CriticalSearch {
        orbit_count: orbit_count(&points, cfg.dedup_tol),
        points,
        failed_starts,
        distance_divisor: cfg.divisor(surface.spins()),
    })
}

fn check_params(j: &CouplingMatrix, values: &[f64]) -> Result<()> {
    ensure(j.n() >= 4 && j.n() % 2 == 0, || {
        format!("landscape labelling needs an even number of spins >= 4, got {}", j.n())
    })?;
    ensure(values.iter().all(|v| v.is_finite()), || "landscape parameters must be finite".to_string())
}

/// Critical points of `H_VISA` with uniform gain `γ` and penalty `P`, from
/// `n_starts` uniform starts, with default numerical settings.
pub fn find_critical_points(
    j: &CouplingMatrix,
    gamma: f64,
    p: f64,
    alpha: f64,
    n_starts: usize,
    seed: u64,
) -> Result<CriticalSearch> {
    find_critical_points_with(j, gamma, p, alpha, n_starts, seed, &LandscapeConfig::default())
}

pub fn find_critical_points_with(
    j: &CouplingMatrix,
    gamma: f64,
    p: f64,
    alpha: f64,
    n_starts: usize,
    seed: u64,
    cfg: &LandscapeConfig,
) -> Result<CriticalSearch> {
    check_params(j, &[gamma, p, alpha])?;
    let surface = VisaSurface {
        j,
        gamma: vec![gamma; j.n()],
        p,
        alpha,
    };
    search(&surface, j, n_starts, seed, cfg)
}

/// Critical points of the scalar CIM energy at pump `p`.
pub fn find_cim_critical_points(
    j: &CouplingMatrix,
    p: f64,
    alpha: f64,
    n_starts: usize,
    seed: u64,
    cfg: &LandscapeConfig,
) -> Result<CriticalSearch> {
    check_params(j, &[p, alpha])?;
    search(&CimSurface { j, p, alpha }, j, n_starts, seed, cfg)
}

/// Euclidean distance between two vector states after the best global
/// orthogonal transformation of the first. `H_VISA` is invariant under O(3),
/// so every transformed copy of a critical point is again critical.
pub fn aligned_distance(a: &VectorState, b: &VectorState) -> f64 {
    let mut cross = nalgebra::Matrix3::<f64>::zeros();
    let mut sq = 0.0;
    for (u, v) in a.0.iter().zip(&b.0) {
        let (u, v) = (nalgebra::Vector3::from(*u), nalgebra::Vector3::from(*v));
        cross += v * u.transpose();
        sq += u.norm_squared() + v.norm_squared();
    }
    // min over orthogonal R of |Ra - b|² = |a|² + |b|² - 2 * nuclear norm
    let nuclear: f64 = cross.singular_values().iter().sum();
    (sq - 2.0 * nuclear).max(0.0).sqrt()
}

/// Shortest `S1 → saddle → S0` route through an index-1 saddle. Each leg is
/// measured with [`aligned_distance`] and the sum is divided by `divisor`.
pub fn saddle_path_distance(points: &[CriticalPoint], divisor: f64) -> Result<f64> {
    let of = |label: PointLabel| -> Vec<&VectorState> {
        points.iter().filter(|p| p.label == label).map(|p| &p.coordinates).collect()
    };
    let s0 = of(PointLabel::S0Min);
    let s1 = of(PointLabel::S1Min);
    let saddles: Vec<&VectorState> = points
        .iter()
        .filter(|p| p.label == PointLabel::Saddle && p.hessian_index == 1)
        .map(|p| &p.coordinates)
        .collect();
    ensure(!s0.is_empty(), || "no S0 minimum among the critical points".to_string())?;
    ensure(!s1.is_empty(), || "no S1 minimum among the critical points".to_string())?;
    ensure(!saddles.is_empty(), || "no index-1 saddle among the critical points".to_string())?;
    let nearest = |x: &VectorState, set: &[&VectorState]| {
        set.iter().map(|y| aligned_distance(y, x)).fold(f64::INFINITY, f64::min)
    };
    let best = saddles
        .iter()
        .map(|sp| nearest(sp, &s1) + nearest(sp, &s0))
        .fold(f64::INFINITY, f64::min);
    Ok(best / divisor)
}

/// Writes `energy,distance,label,hessian_index,zero_modes` rows.
pub fn write_critical_csv<W: Write>(points: &[CriticalPoint], mut out: W) -> Result<()> {
    writeln!(out, "energy,distance,label,hessian_index,zero_modes")?;
    for p in points {
        writeln!(
            out,
            "{:?},{:?},{},{},{}",
            p.energy,
            p.distance,
            p.label.name(),
            p.hessian_index,
            p.zero_modes
        )?;
    }
    Ok(())
}

/// `|m|` and `|X_corr|` of a vector state. The correlation is `None` when
/// some axis has zero variance.
pub fn magnetization_and_correlation(x: &VectorState) -> (f64, Option<f64>) {
    let n = x.len();
    let mut m2 = 0.0;
    let mut c2 = 0.0;
    let mut defined = true;
    for p in 0..3 {
        let mean = x.0.iter().map(|v| v[p]).sum::<f64>() / n as f64;
        m2 += mean * mean;
        let dev: Vec<f64> = x.0.iter().map(|v| v[p] - mean).collect();
        let var: f64 = dev.iter().map(|d| d * d).sum();
        if var <= 1e-24 {
            defined = false;
            continue;
        }
        let lag: f64 = (0..n).map(|i| dev[i] * dev[(i + 1) % n]).sum();
        c2 += (lag / var).powi(2);
    }
    (m2.sqrt(), defined.then(|| c2.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinPoint {
    /// Position of the start in the input list.
    pub index: usize,
    pub start: VectorState,
    pub label: PointLabel,
    /// `H_VISA` at the minimum reached.
    pub energy: f64,
    pub magnetization: f64,
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinSurvey {
    /// In start order; failed descents are absent.
    pub points: Vec<BasinPoint>,
    pub failures: usize,
}

impl BasinSurvey {
    pub fn fraction(&self, label: PointLabel) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().filter(|p| p.label == label).count() as f64 / self.points.len() as f64
    }
}

/// Descends from `n_starts` uniform starts in `[-1, 1]^{3n}` and records
/// which minimum each reaches. `|m|` and `|X_corr|` describe the minimum.
pub fn basins(
    j: &CouplingMatrix,
    gamma: f64,
    p: f64,
    alpha: f64,
    n_starts: usize,
    seed: u64,
) -> Result<BasinSurvey> {
    let cfg = LandscapeConfig::default();
    let starts: Vec<Vec<f64>> = (0..n_starts)
        .map(|k| random_start(seed, k, 3 * j.n(), cfg.start_range))
        .collect();
    basins_from(j, gamma, p, alpha, &starts, &cfg)
}

/// [`basins`] from explicit flat starts.
pub fn basins_from(
    j: &CouplingMatrix,
    gamma: f64,
    p: f64,
    alpha: f64,
    starts: &[Vec<f64>],
    cfg: &LandscapeConfig,
) -> Result<BasinSurvey> {
    check_params(j, &[gamma, p, alpha])?;
    ensure(!starts.is_empty(), || "at least one start is required".to_string())?;
    for s in starts {
        if s.len() != 3 * j.n() {
            return Err(Error::Dimension {
                expected: 3 * j.n(),
                got: s.len(),
            });
        }
    }
    let (e_s0, e_s1) = reference_energies(j)?;
    let labeller = Labeller { e_s0, e_s1 };
    let surface = VisaSurface {
        j,
        gamma: vec![gamma; j.n()],
        p,
        alpha,
    };
    let reached: Vec<Option<BasinPoint>> = starts
        .par_iter()
        .enumerate()
        .map(|(index, x0)| {
            let x = descend(&surface, x0.clone(), cfg)?;
            let point = classify(&surface, j, x, &labeller, cfg);
            if !point.label.is_minimum() {
                return None;
            }
            let (magnetization, correlation) = magnetization_and_correlation(&point.coordinates);
            Some(BasinPoint {
                index,
                start: VectorState::from_flat(x0),
                label: point.label,
                energy: point.energy,
                magnetization,
                correlation,
            })
        })
        .collect();
    let failures = reached.iter().filter(|r| r.is_none()).count();
    Ok(BasinSurvey {
        points: reached.into_iter().flatten().collect(),
        failures,
    })
}

/// Writes `start,label,energy,m_abs,x_corr_abs` rows; an undefined
/// correlation is written as `nan`.
pub fn write_basins_csv<W: Write>(survey: &BasinSurvey, mut out: W) -> Result<()> {
    writeln!(out, "start,label,energy,m_abs,x_corr_abs")?;
    for p in &survey.points {
        let corr = p.correlation.map_or("nan".to_string(), |c| format!("{c:?}"));
        writeln!(out, "{},{},{:?},{:?},{corr}", p.index, p.label.name(), p.energy, p.magnetization)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseLabel {
    S0,
    S1,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub gamma: f64,
    pub p: f64,
    pub label: PhaseLabel,
    pub lowest_energy: f64,
    /// Lowest S0- and S1-labelled minima, when found.
    pub e_s0: Option<f64>,
    pub e_s1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub schema: u32,
    pub alpha: f64,
    pub gammas: Vec<f64>,
    pub penalties: Vec<f64>,
    /// Row-major: all `γ` for the first `P`, then the next `P`.
    pub cells: Vec<PhaseCell>,
    /// `(γ, P)` points where `E_S0 - E_S1` changes sign, interpolated
    /// linearly between neighbouring cells.
    pub boundary: Vec<(f64, f64)>,
}

impl PhaseMap {
    pub fn cell(&self, gamma_index: usize, p_index: usize) -> &PhaseCell {
        &self.cells[p_index * self.gammas.len() + gamma_index]
    }
}

/// Scaled copies of every S0 and S1 configuration in the ring orbit, each
/// along a random axis with a small random perturbation.
fn template_starts<S: Surface>(surface: &S, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng_from_seed(derive_seed(seed, u64::MAX, 0, 0));
    let mut starts = Vec::new();
    for family in [ReferenceFamily::S0, ReferenceFamily::S1] {
        for s in reference_state(n, family)?.ring_orbit() {
            for scale in [0.5, 1.0, 1.5] {
                let axis = loop {
                    let v = [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ];
                    let len = norm(&v);
                    if len > 0.1 {
                        break v.map(|a| a / len);
                    }
                };
                let mut x = surface.template(&s, scale, axis);
                x.iter_mut().for_each(|v| *v += rng.random_range(-1e-3..1e-3));
                starts.push(x);
            }
        }
    }
    Ok(starts)
}

/// Global-minimum label over a `(γ, P)` grid, from a critical-point search
/// in every cell.
pub fn phase_map(
    j: &CouplingMatrix,
    gammas: &[f64],
    penalties: &[f64],
    alpha: f64,
    n_starts: usize,
    seed: u64,
) -> Result<PhaseMap> {
    ensure(!gammas.is_empty() && !penalties.is_empty(), || "phase grid is empty".to_string())?;
    check_params(j, gammas)?;
    check_params(j, penalties)?;
    let cfg = LandscapeConfig::default();
    let grid: Vec<(f64, f64)> = penalties
        .iter()
        .flat_map(|&p| gammas.iter().map(move |&g| (g, p)))
        .collect();
    let cells = grid
        .iter()
        .map(|&(gamma, p)| {
            let search = find_critical_points_with(j, gamma, p, alpha, n_starts, seed, &cfg)?;
            let minima: Vec<(PointLabel, f64)> = search.minima().map(|m| (m.label, m.energy)).collect();
            let lowest_of = |label: PointLabel| {
                minima
                    .iter()
                    .filter(|(l, _)| *l == label)
                    .map(|&(_, e)| e)
                    .min_by(f64::total_cmp)
            };
            let (lowest_label, lowest_energy) = minima
                .iter()
                .copied()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or_else(|| Error::Divergence(format!("no minimum found at gamma = {gamma}, P = {p}")))?;
            let label = match lowest_label {
                PointLabel::S0Min => PhaseLabel::S0,
                PointLabel::S1Min => PhaseLabel::S1,
                _ => PhaseLabel::Other,
            };
            Ok(PhaseCell {
                gamma,
                p,
                label,
                lowest_energy,
                e_s0: lowest_of(PointLabel::S0Min),
                e_s1: lowest_of(PointLabel::S1Min),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut map = PhaseMap {
        schema: 1,
        alpha,
        gammas: gammas.to_vec(),
        penalties: penalties.to_vec(),
        cells,
        boundary: Vec::new(),
    };
    map.boundary = boundary_points(&map);
    Ok(map)
}

fn boundary_points(map: &PhaseMap) -> Vec<(f64, f64)> {
    let gap = |c: &PhaseCell| match (c.e_s0, c.e_s1) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    let crossing = |a: &PhaseCell, b: &PhaseCell| -> Option<(f64, f64)> {
        let (da, db) = (gap(a)?, gap(b)?);
        if da == 0.0 {
            return Some((a.gamma, a.p));
        }
        if da * db >= 0.0 {
            return None;
        }
        let t = da / (da - db);
        Some((a.gamma + t * (b.gamma - a.gamma), a.p + t * (b.p - a.p)))
    };
    let (ng, np) = (map.gammas.len(), map.penalties.len());
    let mut out = Vec::new();
    for pi in 0..np {
        for gi in 0..ng {
            let here = map.cell(gi, pi);
            if gi + 1 < ng {
                out.extend(crossing(here, map.cell(gi + 1, pi)));
            }
            if pi + 1 < np {
                out.extend(crossing(here, map.cell(gi, pi + 1)));
            }
        }
        if ng == 1 && np == 1 {
            out.extend(crossing(map.cell(0, 0), map.cell(0, 0)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::mobius_ladder;
    use crate::solvers::visa_energy_flat;

    fn random_state(seed: u64, n: usize) -> Vec<f64> {
        random_start(seed, 0, 3 * n, 1.0)
    }

    #[test]
    fn hessian_at_origin_is_shifted_coupling() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let (gamma, alpha) = (-0.5, 4.0);
        let h = visa_hessian(&VectorState::zeros(8), &[gamma; 8], 0.0, alpha, &j).unwrap();
        let mut got: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = j
            .spectrum()
            .iter()
            .flat_map(|l| [-alpha * gamma - l; 3])
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn hessian_is_exactly_symmetric() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let x = random_state(3, 8);
        let h = hessian_flat(&x, &[0.2; 8], 0.7, 4.0, &j);
        assert_eq!(h.clone(), h.transpose());
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let gamma = [0.3; 8];
        let (p, alpha) = (0.5, 4.0);
        let surface = VisaSurface { j: &j, gamma: gamma.to_vec(), p, alpha };
        for seed in 0..20 {
            let x = random_state(seed, 8);
            let v = random_state(seed + 100, 8);
            let hv = hessian_flat(&x, &gamma, p, alpha, &j) * DVector::from_column_slice(&v);
            let h = 1e-5;
            let shifted = |s: f64| {
                let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + s * b).collect();
                let mut g = vec![0.0; 24];
                surface.gradient(&y, &mut g);
                g
            };
            let (up, dn) = (shifted(h), shifted(-h));
            let fd: Vec<f64> = up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let err = distance_between(hv.as_slice(), &fd) / norm(&fd);
            assert!(err < 1e-5, "relative error {err}");
        }
        // energy and gradient agree as well
        let x = random_state(9, 8);
        let mut g = vec![0.0; 24];
        surface.gradient(&x, &mut g);
        let mut y = x.clone();
        y[4] += 1e-6;
        let fd = (visa_energy_flat(&y, &gamma, p, alpha, &j) - surface.energy(&x)) / 1e-6;
        assert!((fd - g[4]).abs() < 1e-4);
    }

    #[test]
    fn cim_hessian_matches_gradient_differences() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let surface = CimSurface { j: &j, p: 0.2, alpha: 1.0 };
        let x: Vec<f64> = (0..8).map(|i| (i as f64).cos()).collect();
        let h = cim_hessian(&x, 0.2, 1.0, &j);
        for c in 0..8 {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[c] += 1e-6;
            dn[c] -= 1e-6;
            let (mut gu, mut gd) = (vec![0.0; 8], vec![0.0; 8]);
            surface.gradient(&up, &mut gu);
            surface.gradient(&dn, &mut gd);
            for r in 0..8 {
                assert!((h[(r, c)] - (gu[r] - gd[r]) / 2e-6).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn convex_regime_has_only_the_origin() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let found = find_critical_points(&j, -0.5, 0.0, 4.0, 40, 1).unwrap();
        assert_eq!(found.points.len(), 1);
        let origin = &found.points[0];
        assert_eq!(origin.label, PointLabel::OtherMin);
        assert!(origin.distance < 1e-9, "{:?}", origin);
        assert_eq!(found.failed_starts, 0);
    }

    #[test]
    fn reported_points_are_critical() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let found = find_critical_points(&j, 0.25, 0.5, 4.0, 60, 2).unwrap();
        assert!(!found.points.is_empty());
        let surface = VisaSurface { j: &j, gamma: vec![0.25; 8], p: 0.5, alpha: 4.0 };
        for p in &found.points {
            let mut g = vec![0.0; 24];
            surface.gradient(&p.coordinates.to_flat(), &mut g);
            assert!(norm(&g) < 1e-10);
            assert_eq!(p.hessian_index == 0, p.label.is_minimum());
        }
        assert!(found.orbit_count <= found.points.len());
    }

    fn point(x: Vec<f64>, label: PointLabel, index: usize) -> CriticalPoint {
        CriticalPoint {
            coordinates: VectorState::from_flat(&x),
            energy: 0.0,
            hessian_index: index,
            zero_modes: 0,
            distance: 0.0,
            label,
            residual: 0.0,
        }
    }

    #[test]
    fn saddle_distance_obeys_triangle_inequality() {
        let a = vec![1.0, 0.0, 0.0, -1.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 0.0, 0.0, -1.0, 0.0];
        let sp = vec![0.7, 0.7, 0.0, -0.7, -0.7, 0.0];
        let pts = vec![
            point(a.clone(), PointLabel::S1Min, 0),
            point(b.clone(), PointLabel::S0Min, 0),
            point(sp, PointLabel::Saddle, 1),
        ];
        let d = saddle_path_distance(&pts, 2.0).unwrap();
        let aligned = aligned_distance(&VectorState::from_flat(&a), &VectorState::from_flat(&b));
        assert!(d >= aligned / 2.0 - 1e-15);

        let same = vec![
            point(a.clone(), PointLabel::S1Min, 0),
            point(a.clone(), PointLabel::S0Min, 0),
            point(a, PointLabel::Saddle, 1),
        ];
        assert_eq!(saddle_path_distance(&same, 2.0).unwrap(), 0.0);
        assert!(saddle_path_distance(&pts[..2], 2.0).is_err());
    }

    #[test]
    fn aligned_distance_ignores_rotation() {
        let a = VectorState::from_flat(&random_state(4, 8));
        // rotation by 0.7 rad about z followed by a reflection through xy
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let b = VectorState(a.0.iter().map(|v| [c * v[0] - s * v[1], s * v[0] + c * v[1], -v[2]]).collect());
        assert!(aligned_distance(&a, &b) < 1e-7);
        assert!(aligned_distance(&a, &VectorState::zeros(8)) > 0.5);
    }

    #[test]
    fn uniform_state_has_undefined_correlation() {
        let x = VectorState(vec![[0.5, -0.2, 0.1]; 8]);
        let (m, c) = magnetization_and_correlation(&x);
        assert!((m - (0.25f64 + 0.04 + 0.01).sqrt()).abs() < 1e-12);
        assert_eq!(c, None);
    }

    #[test]
    fn alternating_state_is_anticorrelated() {
        let x = VectorState((0..8).map(|i| if i % 2 == 0 { [1.0, 0.5, -0.2] } else { [-1.0, -0.5, 0.2] }).collect());
        let (m, c) = magnetization_and_correlation(&x);
        assert!(m < 1e-15);
        assert!((c.unwrap() - 3f64.sqrt()).abs() < 1e-12);
    }
}
