//! Benchmark coupling matrices and circulant-graph analytics.
//!
//! Couplings follow the sign convention of the benchmark families: ring edges
//! carry weight `-1`, cross-ring edges `-J` and distance-`k` edges `-G`. All
//! indices are 0-based.

mod circulant;
mod io;

pub use circulant::{
    circulant_eigenvalues, eigenvalue_gap, jg_boundaries, jg_closed_form_eigenvalue,
    jg_reference_energies, mobius_thresholds, BoundaryKind, BoundaryLine, MobiusThresholds,
    ReferenceEnergies,
};
pub use io::{read_matrix, read_matrix_file, write_matrix, write_matrix_file};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::rng_from_seed;

/// Symmetric interaction matrix with zero diagonal plus an optional field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    n: usize,
    /// Row-major `n * n` weights.
    weights: Vec<f64>,
    field: Vec<f64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            weights: vec![0.0; n * n],
            field: vec![0.0; n],
        }
    }

    /// Builds a matrix from row-major weights, rejecting asymmetric input or a
    /// nonzero diagonal.
    pub fn from_dense(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: weights.len(),
            });
        }
        for i in 0..n {
            ensure(weights[i * n + i] == 0.0, || {
                format!("diagonal entry J[{i}][{i}] must be zero")
            })?;
            for j in (i + 1)..n {
                ensure(weights[i * n + j] == weights[j * n + i], || {
                    format!("J[{i}][{j}] != J[{j}][{i}]")
                })?;
            }
        }
        Ok(Self {
            n,
            weights,
            field: vec![0.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn has_field(&self) -> bool {
        self.field.iter().any(|&h| h != 0.0)
    }

    /// Sets `J_ij = J_ji = w`. Self-couplings are rejected.
    pub fn set(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        ensure(i < self.n && j < self.n, || {
            format!("edge ({i}, {j}) out of range for n = {}", self.n)
        })?;
        ensure(i != j, || format!("self-coupling on vertex {i}"))?;
        self.weights[i * self.n + j] = w;
        self.weights[j * self.n + i] = w;
        Ok(())
    }

    pub fn set_field(&mut self, i: usize, h: f64) -> Result<()> {
        ensure(i < self.n, || format!("field index {i} out of range"))?;
        self.field[i] = h;
        Ok(())
    }

    /// Nonzero upper-triangle edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let w = self.get(i, j);
                (w != 0.0).then_some((i, j, w))
            })
        })
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&w| w != 0.0).count()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.get(i, i) == 0.0 && ((i + 1)..self.n).all(|j| self.get(i, j) == self.get(j, i))
        })
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.weights)
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.spectrum().last().copied().unwrap_or(0.0)
    }

    /// Largest absolute eigenvalue; zero for the empty coupling.
    pub fn spectral_radius(&self) -> f64 {
        self.spectrum().iter().fold(0.0f64, |m, &l| m.max(l.abs()))
    }

    /// Same graph with every weight multiplied by `factor`; the field is kept.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            weights: self.weights.iter().map(|w| w * factor).collect(),
            field: self.field.clone(),
        }
    }
}

fn check_ladder_size(n: usize, min: usize) -> Result<()> {
    ensure(n % 2 == 0, || format!("n must be even, got {n}"))?;
    ensure(n >= min, || format!("n must be at least {min}, got {n}"))
}

/// J-Möbius ladder: ring couplings `-1` between `i` and `i ± 1`, cross
/// couplings `-J` between `i` and `i + n/2`.
pub fn mobius_ladder(n: usize, j: f64) -> Result<CouplingMatrix> {
    check_ladder_size(n, 4)?;
    let mut m = CouplingMatrix::zeros(n);
    for i in 0..n {
        m.set(i, (i + 1) % n, -1.0)?;
    }
    if j != 0.0 {
        for i in 0..n / 2 {
            m.set(i, i + n / 2, -j)?;
        }
    }
    Ok(m)
}

/// J-G cyclic graph: the J-Möbius ladder plus couplings `-G` between `i` and
/// `i ± k`, with `1 < k < n/2`.
pub fn jg_cyclic(n: usize, j: f64, g: f64, k: usize) -> Result<CouplingMatrix> {
    check_ladder_size(n, 8)?;
    ensure(k > 1 && 2 * k < n, || {
        format!("k must satisfy 1 < k < n/2 (n = {n}), got {k}")
    })?;
    let mut m = mobius_ladder(n, j)?;
    if g != 0.0 {
        for i in 0..n {
            m.set(i, (i + k) % n, -g)?;
        }
    }
    Ok(m)
}

/// Sherrington-Kirkpatrick instance with i.i.d. standard normal couplings.
pub fn sk_instance(n: usize, seed: u64) -> Result<CouplingMatrix> {
    ensure(n >= 2, || format!("SK instance needs n >= 2, got {n}"))?;
    let mut rng = rng_from_seed(seed);
    let mut m = CouplingMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w: f64 = StandardNormal.sample(&mut rng);
            m.set(i, j, w)?;
        }
    }
    Ok(m)
}

pub const DEFAULT_PAIRING_RETRIES: usize = 10_000;

/// Weighted random 3-regular graph with standard normal edge weights.
pub fn three_regular_instance(n: usize, seed: u64) -> Result<CouplingMatrix> {
    three_regular_instance_with_retries(n, seed, DEFAULT_PAIRING_RETRIES)
}

/// Pairing-model sampler: `3n` stubs are shuffled and paired, and the whole
/// pairing is redrawn whenever it produces a self-loop or a repeated edge.
pub fn three_regular_instance_with_retries(
    n: usize,
    seed: u64,
    max_retries: usize,
) -> Result<CouplingMatrix> {
    check_ladder_size(n, 4)?;
    let mut rng = rng_from_seed(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();
    for _ in 0..max_retries.max(1) {
        stubs.shuffle(&mut rng);
        let mut adjacency = vec![false; n * n];
        let simple = stubs.chunks_exact(2).all(|pair| {
            let (a, b) = (pair[0], pair[1]);
            if a == b || adjacency[a * n + b] {
                return false;
            }
            adjacency[a * n + b] = true;
            adjacency[b * n + a] = true;
            true
        });
        if !simple {
            continue;
        }
        let mut edges: Vec<(usize, usize)> = stubs
            .chunks_exact(2)
            .map(|p| (p[0].min(p[1]), p[0].max(p[1])))
            .collect();
        // weights are drawn in edge order, not pairing order
        edges.sort_unstable();
        let mut m = CouplingMatrix::zeros(n);
        for (a, b) in edges {
            let w: f64 = StandardNormal.sample(&mut rng);
            m.set(a, b, w)?;
        }
        return Ok(m);
    }
    Err(Error::validation(format!(
        "no simple 3-regular pairing for n = {n} after {max_retries} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mobius_row_structure() {
        let m = mobius_ladder(8, 0.4).unwrap();
        let row = m.row(0);
        for (col, &w) in row.iter().enumerate() {
            let expected = match col {
                1 | 7 => -1.0,
                4 => -0.4,
                _ => 0.0,
            };
            assert_eq!(w, expected, "column {col}");
        }
        assert!(m.is_symmetric());
        assert_eq!(m.edges().count(), 12);
    }

    #[test]
    fn mobius_without_cross_edges_is_a_cycle() {
        let m = mobius_ladder(4, 0.0).unwrap();
        assert_eq!(m.edges().count(), 4);
        assert!(m.edges().all(|(_, _, w)| w == -1.0));
        assert!((0..4).all(|i| m.degree(i) == 2));
    }

    #[test]
    fn uniform_mobius_is_cubic() {
        let m = mobius_ladder(8, 1.0).unwrap();
        assert!((0..8).all(|i| m.degree(i) == 3));
        assert!(m.edges().all(|(_, _, w)| w == -1.0));
    }

    #[test]
    fn mobius_rejects_bad_sizes() {
        assert!(matches!(mobius_ladder(7, 0.4), Err(Error::Validation(_))));
        assert!(matches!(mobius_ladder(2, 0.4), Err(Error::Validation(_))));
    }

    #[test]
    fn jg_adjacency_of_vertex_zero() {
        let m = jg_cyclic(8, 0.5, 0.5, 2).unwrap();
        let row = m.row(0);
        assert_eq!((row[1], row[7]), (-1.0, -1.0));
        assert_eq!((row[2], row[6]), (-0.5, -0.5));
        assert_eq!(row[4], -0.5);
        assert_eq!((row[3], row[5]), (0.0, 0.0));
        assert!((0..8).all(|i| m.degree(i) == 5));
    }

    #[test]
    fn jg_k3_colour_pattern() {
        let (j, g) = (0.3, 0.7);
        let m = jg_cyclic(8, j, g, 3).unwrap();
        for i in 0..8 {
            for c in 0..8 {
                let d = (c + 8 - i) % 8;
                let expected = match d {
                    1 | 7 => -1.0,
                    4 => -j,
                    3 | 5 => -g,
                    _ => 0.0,
                };
                assert_eq!(m.get(i, c), expected, "({i}, {c})");
            }
        }
    }

    #[test]
    fn jg_with_zero_g_is_mobius() {
        assert_eq!(
            jg_cyclic(8, 0.4, 0.0, 2).unwrap(),
            mobius_ladder(8, 0.4).unwrap()
        );
    }

    #[test]
    fn jg_rejects_k_out_of_range() {
        assert!(jg_cyclic(8, 0.4, 0.5, 4).is_err());
        assert!(jg_cyclic(8, 0.4, 0.5, 5).is_err());
        assert!(jg_cyclic(8, 0.4, 0.5, 1).is_err());
    }

    #[test]
    fn sk_is_seeded_and_symmetric() {
        let a = sk_instance(100, 11).unwrap();
        let b = sk_instance(100, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.is_symmetric());
        assert_ne!(a, sk_instance(100, 12).unwrap());
    }

    #[test]
    fn sk_sample_mean_within_standard_error_bound() {
        let n = 100usize;
        let m = sk_instance(n, 3).unwrap();
        let pairs = (n * (n - 1) / 2) as f64;
        let mean: f64 = m.edges().map(|(_, _, w)| w).sum::<f64>() / pairs;
        assert!(mean.abs() < 4.0 / pairs.sqrt(), "mean {mean}");
    }

    #[test]
    fn sk_two_spins_single_coupling() {
        let m = sk_instance(2, 5).unwrap();
        assert_eq!(m.edges().count(), 1);
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!(sk_instance(1, 5).is_err());
    }

    #[test]
    fn three_regular_degree_and_determinism() {
        let a = three_regular_instance(100, 9).unwrap();
        assert!((0..100).all(|i| a.degree(i) == 3));
        assert!(a.is_symmetric());
        assert_eq!(a, three_regular_instance(100, 9).unwrap());
    }

    #[test]
    fn three_regular_on_four_vertices_is_k4() {
        let m = three_regular_instance(4, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j) != 0.0, i != j);
            }
        }
    }

    #[test]
    fn three_regular_rejects_odd_n() {
        assert!(three_regular_instance(7, 1).is_err());
    }

    #[test]
    fn from_dense_validates() {
        assert!(CouplingMatrix::from_dense(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(CouplingMatrix::from_dense(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(CouplingMatrix::from_dense(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(matches!(
            CouplingMatrix::from_dense(2, vec![0.0; 3]),
            Err(Error::Dimension { .. })
        ));
    }
}
