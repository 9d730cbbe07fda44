use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Eigenvalues of a symmetric circulant matrix from its first row.
///
/// Entry `m - 1` of the result is `λ_m = Σ_j row[j] cos(2π m j / n)` for
/// `m = 1..=n`, so the last entry is the `m = n` (uniform) mode.
pub fn circulant_eigenvalues(first_row: &[f64]) -> Vec<f64> {
    let n = first_row.len();
    (1..=n)
        .map(|m| {
            first_row
                .iter()
                .enumerate()
                .map(|(j, &w)| w * (2.0 * PI * (m * j) as f64 / n as f64).cos())
                .sum()
        })
        .collect()
}

/// Closed-form `λ_m` of the J-G cyclic graph; `k = None` gives the plain
/// J-Möbius ladder.
pub fn jg_closed_form_eigenvalue(n: usize, j: f64, g: f64, k: Option<usize>, m: usize) -> f64 {
    let nf = n as f64;
    let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
    let ring = -2.0 * (2.0 * PI * m as f64 / nf).cos() - j * parity;
    match k {
        Some(k) => ring - 2.0 * g * (2.0 * PI * (k * m) as f64 / nf).cos(),
        None => ring,
    }
}

fn require_half_even(n: usize) -> Result<()> {
    ensure(n >= 4 && n % 4 == 0, || {
        format!("closed forms require n/2 even, got n = {n}")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusThresholds {
    /// Cross coupling where the leading eigenvalue switches.
    pub j_e: f64,
    /// Cross coupling where the ground state switches from S0 to S1.
    pub j_crit: f64,
}

pub fn mobius_thresholds(n: usize) -> Result<MobiusThresholds> {
    require_half_even(n)?;
    let nf = n as f64;
    Ok(MobiusThresholds {
        j_e: 1.0 - (2.0 * PI / nf).cos(),
        j_crit: 4.0 / nf,
    })
}

/// `Δ = 2cos(2π/n) + 2J - 2`, positive exactly when `J > J_e`.
pub fn eigenvalue_gap(n: usize, j: f64) -> Result<f64> {
    require_half_even(n)?;
    Ok(2.0 * (2.0 * PI / n as f64).cos() + 2.0 * j - 2.0)
}

/// Energies of the four reference states S0..S3 of a J-G cyclic graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEnergies {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

impl ReferenceEnergies {
    pub fn as_array(&self) -> [f64; 4] {
        [self.e0, self.e1, self.e2, self.e3]
    }
}

pub fn jg_reference_energies(n: usize, j: f64, g: f64, k: usize) -> Result<ReferenceEnergies> {
    require_half_even(n)?;
    ensure(k > 1 && 2 * k < n, || {
        format!("k must satisfy 1 < k < n/2 (n = {n}), got {k}")
    })?;
    let nf = n as f64;
    let kf = k as f64;
    let sign = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
    let d = if k % 2 == 0 { k / 2 } else { 0 };
    Ok(ReferenceEnergies {
        e0: (j - 2.0 - 2.0 * g * sign(k + 1)) * nf / 2.0,
        e1: 4.0 - (j + 2.0) * nf / 2.0 + sign(k) * (nf - 4.0 * kf) * g,
        e2: (sign(n / 4) * j + (1.0 + sign(k)) * sign(d) * g) * nf / 2.0,
        e3: 4.0 - nf + (2.0 - nf / 2.0) * j + sign(k) * (nf - 4.0 * kf) * g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Two reference-state energies `E_a = E_b`.
    Energy,
    /// Two closed-form eigenvalues `λ_a = λ_b`.
    Eigenvalue,
}

/// Line `coef_j * J + coef_g * G = rhs` in the (J, G) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLine {
    pub kind: BoundaryKind,
    pub coef_j: f64,
    pub coef_g: f64,
    pub rhs: f64,
    /// Reference-state indices (energy lines) or eigenvalue indices `m`
    /// (eigenvalue lines) that are equal on the line.
    pub between: (usize, usize),
}

impl BoundaryLine {
    fn new(kind: BoundaryKind, coef_j: f64, coef_g: f64, rhs: f64, between: (usize, usize)) -> Self {
        Self {
            kind,
            coef_j,
            coef_g,
            rhs,
            between,
        }
    }

    /// Signed residual `coef_j * J + coef_g * G - rhs`.
    pub fn residual(&self, j: f64, g: f64) -> f64 {
        self.coef_j * j + self.coef_g * g - self.rhs
    }

    /// J coordinate of the line at fixed G, if the line is not vertical in J.
    pub fn j_at(&self, g: f64) -> Option<f64> {
        (self.coef_j != 0.0).then(|| (self.rhs - self.coef_g * g) / self.coef_j)
    }

    /// G coordinate of the line at fixed J.
    pub fn g_at(&self, j: f64) -> Option<f64> {
        (self.coef_g != 0.0).then(|| (self.rhs - self.coef_j * j) / self.coef_g)
    }
}

/// Energy and leading-eigenvalue boundaries of the n = 8 J-G cyclic graph for
/// `k ∈ {2, 3}`.
pub fn jg_boundaries(k: usize) -> Result<Vec<BoundaryLine>> {
    use BoundaryKind::{Eigenvalue, Energy};
    let inv_sqrt2 = 1.0 / SQRT_2;
    match k {
        2 => Ok(vec![
            BoundaryLine::new(Energy, 1.0, 1.0, 0.5, (0, 1)),
            BoundaryLine::new(Energy, 1.0, -1.0, -0.5, (1, 2)),
            BoundaryLine::new(Energy, 0.0, 1.0, 0.5, (0, 2)),
            BoundaryLine::new(Eigenvalue, 1.0, 1.0, 1.0 - inv_sqrt2, (4, 5)),
            BoundaryLine::new(Eigenvalue, 1.0, -1.0, -inv_sqrt2, (5, 6)),
            BoundaryLine::new(Eigenvalue, 0.0, 1.0, 0.5, (4, 6)),
        ]),
        3 => Ok(vec![
            BoundaryLine::new(Energy, 1.0, -1.5, 0.5, (0, 1)),
            BoundaryLine::new(Energy, 1.0, -2.0, 2.0 / 3.0, (0, 3)),
            BoundaryLine::new(Energy, 1.0, 0.0, 0.0, (1, 3)),
            BoundaryLine::new(Eigenvalue, 1.0, -(1.0 + inv_sqrt2), 1.0 - inv_sqrt2, (4, 5)),
        ]),
        _ => Err(Error::validation(format!(
            "boundaries are only available for k = 2 or 3, got {k}"
        ))),
    }
}
