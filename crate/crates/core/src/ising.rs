//! Ising energies, exhaustive ground states and spin readout.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::graph::{mobius_ladder, CouplingMatrix};

/// Binary spin configuration with entries in {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        ensure(spins.iter().all(|&s| s == 1 || s == -1), || {
            "spin entries must be +1 or -1".to_string()
        })?;
        Ok(Self(spins))
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Sign of each value with `sign(0) = +1`.
    pub fn from_signs(values: impl IntoIterator<Item = f64>) -> Self {
        Self(values.into_iter().map(sign).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|&s| -s).collect())
    }

    /// Spin `i` as a float.
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    /// Configuration `s'_i = s_{(i + shift) mod n}`.
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.len();
        Self((0..n).map(|i| self.0[(i + shift) % n]).collect())
    }

    /// Ring reflection `s'_i = s_{(n - i) mod n}`.
    pub fn reflected(&self) -> Self {
        let n = self.len();
        Self((0..n).map(|i| self.0[(n - i) % n]).collect())
    }

    /// Orbit under ring rotations, reflections and the global flip. These are
    /// automorphisms of every circulant graph, so the whole orbit shares one
    /// zero-field Ising energy.
    pub fn ring_orbit(&self) -> Vec<SpinConfig> {
        let mut orbit = Vec::with_capacity(4 * self.len());
        for base in [self.clone(), self.reflected()] {
            for shift in 0..self.len() {
                let r = base.rotated(shift);
                orbit.push(r.flipped());
                orbit.push(r);
            }
        }
        orbit.sort();
        orbit.dedup();
        orbit
    }

    pub fn in_ring_orbit_of(&self, other: &SpinConfig) -> bool {
        self.len() == other.len() && other.ring_orbit().contains(self)
    }
}

impl TryFrom<Vec<i8>> for SpinConfig {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpinConfig> for Vec<i8> {
    fn from(s: SpinConfig) -> Self {
        s.0
    }
}

#[inline]
pub(crate) fn sign(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// N three-component soft spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorState(pub Vec<[f64; 3]>);

impl VectorState {
    pub fn zeros(n: usize) -> Self {
        Self(vec![[0.0; 3]; n])
    }

    /// Reinterprets a flat `[x_0, y_0, z_0, x_1, ...]` slice.
    pub fn from_flat(flat: &[f64]) -> Self {
        Self(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

/// `H = -Σ_{i<j} J_ij s_i s_j - Σ_i h_i s_i`: each unordered pair counts once.
pub fn ising_energy(j: &CouplingMatrix, s: &SpinConfig) -> Result<f64> {
    if j.n() != s.len() {
        return Err(Error::Dimension {
            expected: j.n(),
            got: s.len(),
        });
    }
    Ok(energy_unchecked(j, s.as_slice()))
}

pub(crate) fn energy_unchecked(j: &CouplingMatrix, s: &[i8]) -> f64 {
    let n = j.n();
    let mut pair = 0.0;
    for i in 0..n {
        let row = j.row(i);
        let si = f64::from(s[i]);
        let mut acc = 0.0;
        for (jj, &w) in row.iter().enumerate().skip(i + 1) {
            acc += w * f64::from(s[jj]);
        }
        pair += si * acc;
    }
    let field: f64 = j
        .field()
        .iter()
        .zip(s)
        .map(|(&h, &si)| h * f64::from(si))
        .sum();
    -pair - field
}

/// Largest instance [`brute_force_ground`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Exhaustive minimum of the Ising energy.
///
/// Enumerates configurations in Gray-code order with incremental local
/// fields. With zero field the first spin is pinned to `+1`. Among
/// configurations whose energies agree to `1e-9` the lexicographically
/// smallest (with `-1 < +1`) is returned, and its energy is recomputed
/// directly.
pub fn brute_force_ground(j: &CouplingMatrix) -> Result<(SpinConfig, f64)> {
    let n = j.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    ensure(n > 0, || "empty coupling matrix".to_string())?;
    const TIE: f64 = 1e-9;

    let pinned = !j.has_field();
    // free spins are the last `free` indices
    let free = if pinned { n - 1 } else { n };
    let offset = n - free;

    let mut s = vec![-1i8; n];
    if pinned {
        s[0] = 1;
    }
    let mut local: Vec<f64> = (0..n)
        .map(|i| {
            j.row(i)
                .iter()
                .zip(&s)
                .map(|(&w, &sj)| w * f64::from(sj))
                .sum()
        })
        .collect();
    let field = j.field();
    let mut energy = energy_unchecked(j, &s);
    let mut best = s.clone();
    let mut best_energy = energy;

    let total: u64 = 1u64 << free;
    for step in 1..total {
        let bit = step.trailing_zeros() as usize;
        let k = offset + free - 1 - bit;
        let sk = f64::from(s[k]);
        energy += 2.0 * sk * (local[k] + field[k]);
        s[k] = -s[k];
        let delta = -2.0 * sk;
        for (l, &w) in local.iter_mut().zip(j.row(k)) {
            *l += w * delta;
        }
        if energy < best_energy - TIE || (energy <= best_energy + TIE && s < best) {
            best_energy = energy.min(best_energy);
            best.copy_from_slice(&s);
        }
        if step & 0xffff == 0 {
            energy = energy_unchecked(j, &s);
        }
    }
    let exact = energy_unchecked(j, &best);
    Ok((SpinConfig(best), exact))
}

/// Spins from a vector state by projection on its dominant axis.
///
/// The axis is the leading eigenvector of `M = Σ_i x_i x_iᵀ`, signed so that
/// its largest-magnitude component is positive. Spins are `sign(x_i · k)`
/// with `sign(0) = +1`.
pub fn vector_readout(x: &VectorState) -> Result<(SpinConfig, [f64; 3])> {
    let mut m = Matrix3::<f64>::zeros();
    for v in &x.0 {
        let v = Vector3::from(*v);
        m += v * v.transpose();
    }
    ensure(m.iter().any(|&e| e != 0.0), || {
        "vector readout of an all-zero state has no orientation".to_string()
    })?;
    let eig = SymmetricEigen::new(m);
    let lead = eig.eigenvalues.imax();
    let mut axis: Vector3<f64> = eig.eigenvectors.column(lead).into_owned();
    let dominant = axis.iamax();
    if axis[dominant] < 0.0 {
        axis = -axis;
    }
    let spins = SpinConfig::from_signs(x.0.iter().map(|v| Vector3::from(*v).dot(&axis)));
    Ok((spins, [axis[0], axis[1], axis[2]]))
}

pub fn nearest_hypercube_corner(v: &[f64]) -> SpinConfig {
    SpinConfig::from_signs(v.iter().copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceFamily {
    S0,
    S1,
    S2,
    S3,
}

/// Named reference configurations of the cyclic benchmark graphs.
///
/// - `S0`: alternating around the ring, any even `n`.
/// - `S1`: alternating except for frustrated ring edges at the opposite
///   points `(1, 2)` and `(n/2 + 1, n/2 + 2)`; any even `n >= 4`. For `n = 8`
///   this is the representative the exhaustive search returns for the
///   uniform (`J = 1`) Möbius ladder.
/// - `S2`, `S3`: the two extra J-G ground states, defined for `n = 8` only.
pub fn reference_state(n: usize, family: ReferenceFamily) -> Result<SpinConfig> {
    let alternating = |i: usize| if i % 2 == 0 { 1i8 } else { -1 };
    match family {
        ReferenceFamily::S0 => {
            ensure(n >= 2 && n % 2 == 0, || format!("S0 needs even n, got {n}"))?;
            Ok(SpinConfig((0..n).map(alternating).collect()))
        }
        ReferenceFamily::S1 => {
            ensure(n >= 4 && n % 2 == 0, || format!("S1 needs even n >= 4, got {n}"))?;
            Ok(SpinConfig(
                (0..n)
                    .map(|i| {
                        if (2..=n / 2 + 1).contains(&i) {
                            -alternating(i)
                        } else {
                            alternating(i)
                        }
                    })
                    .collect(),
            ))
        }
        ReferenceFamily::S2 => {
            ensure(n == 8, || format!("S2 is defined for n = 8 only, got {n}"))?;
            Ok(SpinConfig(vec![1, 1, -1, -1, 1, 1, -1, -1]))
        }
        ReferenceFamily::S3 => {
            ensure(n == 8, || format!("S3 is defined for n = 8 only, got {n}"))?;
            Ok(SpinConfig(vec![1, 1, -1, 1, 1, -1, 1, -1]))
        }
    }
}

/// Canonical S1 recomputed from the oracle: exhaustive minimiser of the
/// uniform Möbius ladder on `n` spins.
pub fn s1_from_oracle(n: usize) -> Result<SpinConfig> {
    Ok(brute_force_ground(&mobius_ladder(n, 1.0)?)?.0)
}
