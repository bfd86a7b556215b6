//! Shrinkage-target subspaces spanned by anchor points.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{unit_q, BetaVector};
use crate::rng::{SeedStream, TAG_ANCHOR};

/// Default relative rank tolerance for [`orthonormalize`].
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of a subspace `L ⊂ ℝᵖ`, stored as the columns of a `p × k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSubspace {
    basis: DMatrix<f64>,
}

impl AnchorSubspace {
    /// The zero subspace of `ℝᵖ`.
    pub fn trivial(p: usize) -> Self {
        Self { basis: DMatrix::zeros(p, 0) }
    }

    /// `span{q}`.
    pub fn span_q(p: usize) -> Self {
        Self { basis: DMatrix::from_columns(&[unit_q(p)]) }
    }

    pub fn p(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projection `Σᵢ (v, uᵢ) uᵢ`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.p(), "projection dimension mismatch");
        if self.dim() == 0 {
            return DVector::zeros(v.len());
        }
        &self.basis * (self.basis.tr_mul(v))
    }

    pub fn vectors(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        self.basis.column_iter().map(|c| c.into_owned())
    }
}

/// Orthonormalize `vectors` in order, dropping any whose residual after
/// projection onto the accumulated basis is below `tol` times its norm.
///
/// Gram–Schmidt with one re-orthogonalization pass.
pub fn orthonormalize(vectors: &[DVector<f64>], tol: f64) -> Result<AnchorSubspace> {
    let Some(first) = vectors.first() else {
        return Err(Error::EmptySpan);
    };
    let p = first.len();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        if v.len() != p {
            return Err(Error::DimensionMismatch { expected: p, actual: v.len() });
        }
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for u in &kept {
                let c = u.dot(&r);
                r.axpy(-c, u, 1.0);
            }
        }
        let rn = r.norm();
        if rn >= tol * norm {
            kept.push(r / rn);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptySpan);
    }
    Ok(AnchorSubspace { basis: DMatrix::from_columns(&kept) })
}

/// `proj_L(v)`; see [`AnchorSubspace::project`].
pub fn project(subspace: &AnchorSubspace, v: &DVector<f64>) -> DVector<f64> {
    subspace.project(v)
}

/// Disjoint nonempty atoms covering `{0, …, p−1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    atoms: Vec<Vec<usize>>,
    p: usize,
}

impl Partition {
    /// Validate and build a partition with at most `p − 1` atoms.
    pub fn new(atoms: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidPartition(m));
        if atoms.is_empty() {
            return bad("no atoms".into());
        }
        if atoms.len() >= p {
            return bad(format!("{} atoms for p = {p}; the induced subspace must be proper", atoms.len()));
        }
        let mut seen = vec![false; p];
        for (a, atom) in atoms.iter().enumerate() {
            if atom.is_empty() {
                return bad(format!("atom {a} is empty"));
            }
            for &i in atom {
                if i >= p {
                    return bad(format!("index {i} out of range for p = {p}"));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return bad(format!("index {i} appears in more than one atom"));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return bad(format!("index {missing} is not covered"));
        }
        Ok(Self { atoms, p })
    }

    /// Group assets with equal labels; atoms follow first appearance order.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut atoms: Vec<Vec<usize>> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            let slot = *index.entry(label.as_ref()).or_insert_with(|| {
                atoms.push(Vec::new());
                atoms.len() - 1
            });
            atoms[slot].push(i);
        }
        Self::new(atoms, labels.len())
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `max |A| ≤ m·p/|𝒫|`.
    pub fn is_semi_uniform(&self, m: f64) -> bool {
        let largest = self.atoms.iter().map(Vec::len).max().unwrap_or(0);
        largest as f64 <= m * self.p as f64 / self.atoms.len() as f64
    }

    /// True when no two atoms interleave in `beta` value.
    pub fn is_beta_ordered(&self, beta: &BetaVector) -> bool {
        let b = beta.as_slice();
        let ranges: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(b[i]), hi.max(b[i]))))
            .collect();
        ranges
            .iter()
            .enumerate()
            .all(|(i, (lo_i, hi_i))| ranges[i + 1..].iter().all(|(lo_j, hi_j)| hi_i <= lo_j || hi_j <= lo_i))
    }

    /// One line per atom, comma-separated zero-based indices.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for atom in &self.atoms {
            let line: Vec<String> = atom.iter().map(usize::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`Partition::to_lines`]; blank lines are skipped.
    pub fn parse_lines(text: &str, p: usize) -> Result<Self> {
        let mut atoms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let atom = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidPartition(format!("line {}: bad index {t:?}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            atoms.push(atom);
        }
        Self::new(atoms, p)
    }
}

/// Subspace `L(𝒫)` spanned by the normalized atom indicators `v^A`.
pub fn partition_subspace(partition: &Partition) -> AnchorSubspace {
    let p = partition.p();
    let mut basis = DMatrix::zeros(p, partition.len());
    for (a, atom) in partition.atoms().iter().enumerate() {
        let w = 1.0 / (atom.len() as f64).sqrt();
        for &i in atom {
            basis[(i, a)] = w;
        }
    }
    AnchorSubspace { basis }
}

/// Sort assets by descending beta and cut into `num_atoms` contiguous groups
/// of `⌊p/num_atoms⌋`; the remainder joins the last (lowest-beta) atom.
pub fn beta_ordered_partition(beta: &BetaVector, num_atoms: usize) -> Result<Partition> {
    let p = beta.len();
    if num_atoms == 0 || num_atoms >= p {
        return Err(Error::InvalidPartition(format!("num_atoms must lie in 1..={}, got {num_atoms}", p - 1)));
    }
    let b = beta.as_slice();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| b[j].total_cmp(&b[i]).then(i.cmp(&j)));
    let size = p / num_atoms;
    let atoms = (0..num_atoms)
        .map(|a| {
            let end = if a + 1 == num_atoms { p } else { (a + 1) * size };
            order[a * size..end].to_vec()
        })
        .collect();
    Partition::new(atoms, p)
}

/// Default atom count `⌈p^{1/3}⌉`.
pub fn default_num_atoms(p: usize) -> usize {
    let c = (p as f64).cbrt();
    // guard against cbrt rounding just above an exact cube
    let r = c.round();
    if (c - r).abs() < 1e-9 {
        r as usize
    } else {
        c.ceil() as usize
    }
}

/// Haar-random `k`-dimensional subspace: orthonormalized columns of a
/// `p × k` standard Gaussian matrix.
pub fn haar_subspace(p: usize, k: usize, seed: u64) -> Result<AnchorSubspace> {
    if k == 0 || k >= p {
        return Err(Error::InvalidParameter(format!("haar subspace needs 1 ≤ k ≤ p−1, got k={k}, p={p}")));
    }
    let root = SeedStream::new(seed).derive(TAG_ANCHOR);
    for attempt in 0..2u64 {
        let mut rng = root.derive(attempt).rng();
        let cols: Vec<DVector<f64>> =
            (0..k).map(|_| DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal))).collect();
        if let Ok(s) = orthonormalize(&cols, RANK_TOL) {
            if s.dim() == k {
                return Ok(s);
            }
        }
    }
    Err(Error::RankDeficient)
}

/// `span{L, q}`.
pub fn augment_with_q(subspace: &AnchorSubspace) -> Result<AnchorSubspace> {
    let p = subspace.p();
    if subspace.dim() + 2 > p {
        return Err(Error::InvalidParameter(format!(
            "cannot add q to a {}-dimensional subspace of R^{p}",
            subspace.dim()
        )));
    }
    let mut vectors: Vec<DVector<f64>> = subspace.vectors().collect();
    vectors.push(unit_q(p));
    orthonormalize(&vectors, RANK_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_vectors(p: usize, k: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k).map(|_| DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal))).collect()
    }

    fn assert_orthonormal(s: &AnchorSubspace) {
        let g = s.basis().tr_mul(s.basis());
        for i in 0..s.dim() {
            assert_abs_diff_eq!(g[(i, i)], 1.0, epsilon = 1e-12);
            for j in 0..s.dim() {
                if i != j {
                    assert!(g[(i, j)].abs() < 1e-10);
                }
            }
        }
    }

    fn projector(s: &AnchorSubspace) -> DMatrix<f64> {
        s.basis() * s.basis().transpose()
    }

    #[test]
    fn q_is_its_own_basis() {
        let q = unit_q(9);
        let s = orthonormalize(std::slice::from_ref(&q), RANK_TOL).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.basis().column(0) - &q).norm() < 1e-15);
        let s = orthonormalize(&[q.clone(), &q * 2.0], RANK_TOL).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn degenerate_inputs_span_nothing() {
        assert!(matches!(orthonormalize(&[], RANK_TOL), Err(Error::EmptySpan)));
        assert!(matches!(orthonormalize(&[DVector::zeros(4)], RANK_TOL), Err(Error::EmptySpan)));
    }

    #[test]
    fn projector_matches_qr_oracle() {
        let vs = gaussian_vectors(50, 5, 1);
        let s = orthonormalize(&vs, RANK_TOL).unwrap();
        assert_eq!(s.dim(), 5);
        assert_orthonormal(&s);
        let a = DMatrix::from_columns(&vs);
        let qr = a.col_piv_qr();
        let q = qr.q();
        let oracle = &q * q.transpose();
        assert!((projector(&s) - oracle).norm() < 1e-10);
    }

    #[test]
    fn dependent_vector_dropped_in_order() {
        let vs = gaussian_vectors(20, 3, 2);
        let combo = &vs[0] * 0.5 - &vs[2] * 1.5;
        let s = orthonormalize(&[vs[0].clone(), combo, vs[1].clone(), vs[2].clone()], RANK_TOL).unwrap();
        assert_eq!(s.dim(), 3);
        // first retained direction is the first input
        assert!((s.basis().column(0) - vs[0].normalize()).norm() < 1e-14);
    }

    #[test]
    fn projection_cases() {
        let p = 7;
        let q = unit_q(p);
        let s = AnchorSubspace::span_q(p);
        let v = DVector::from_fn(p, |i, _| (i as f64).sin() + 0.3);
        assert!((s.project(&v) - &q * v.dot(&q)).norm() < 1e-15);
        assert!((s.project(&q) - &q).norm() < 1e-15);

        let vs = gaussian_vectors(30, 4, 3);
        let s = orthonormalize(&vs, RANK_TOL).unwrap();
        let v = &gaussian_vectors(30, 1, 4)[0];
        let pv = s.project(v);
        assert_abs_diff_eq!(pv.norm_squared() + (v - &pv).norm_squared(), v.norm_squared(), epsilon = 1e-10);
        assert!((s.project(&pv) - &pv).norm() < 1e-10);
        for u in s.vectors() {
            assert!((v - &pv).dot(&u).abs() < 1e-10);
        }
        let u1: DVector<f64> = s.basis().column(0).into_owned();
        assert!((s.project(&u1) - &u1).norm() < 1e-12);
    }

    #[test]
    fn trivial_subspace_projects_to_zero() {
        let s = AnchorSubspace::trivial(4);
        assert_eq!(s.dim(), 0);
        assert_eq!(s.project(&DVector::from_element(4, 1.0)), DVector::zeros(4));
    }

    #[test]
    fn partition_subspace_basis() {
        let part = Partition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let s = partition_subspace(&part);
        let h = 0.5f64.sqrt();
        let expected = DMatrix::from_column_slice(4, 2, &[h, h, 0.0, 0.0, 0.0, 0.0, h, h]);
        assert!((s.basis() - expected).norm() < 1e-15);

        let one = Partition::new(vec![(0..6).collect()], 6).unwrap();
        let s = partition_subspace(&one);
        assert!((s.basis().column(0) - unit_q(6)).norm() < 1e-15);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new((0..4).map(|i| vec![i]).collect(), 4).is_err());
        assert!(Partition::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(Partition::new(vec![vec![0], vec![]], 3).is_err());
        assert!(Partition::new(vec![vec![0], vec![1]], 3).is_err());
        assert!(Partition::new(vec![vec![0, 5]], 3).is_err());
    }

    #[test]
    fn partition_text_round_trip() {
        let part = Partition::new(vec![vec![3, 0], vec![1], vec![2, 4]], 5).unwrap();
        assert_eq!(part.to_lines(), "3,0\n1\n2,4\n");
        assert_eq!(Partition::parse_lines(&part.to_lines(), 5).unwrap(), part);
        assert!(Partition::parse_lines("0,1\nx\n", 3).is_err());
    }

    #[test]
    fn labels_group_into_atoms() {
        let part = Partition::from_labels(&["it", "fin", "it", "util", "fin"]).unwrap();
        assert_eq!(part.atoms(), &[vec![0, 2], vec![1, 4], vec![3]]);
    }

    #[test]
    fn beta_ordered_small_case() {
        let beta = BetaVector::new(vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        let part = beta_ordered_partition(&beta, 2).unwrap();
        assert_eq!(part.atoms(), &[vec![0, 1], vec![2, 3]]);
        assert!(beta_ordered_partition(&beta, 4).is_err());
        assert!(beta_ordered_partition(&beta, 0).is_err());
    }

    #[test]
    fn beta_ordered_sizes_and_ordering() {
        let beta = crate::model::generate_betas(488, 1.0, 0.5, 12).unwrap();
        let part = beta_ordered_partition(&beta, 8).unwrap();
        let sizes: Vec<usize> = part.atoms().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![61; 8]);
        assert!(part.is_beta_ordered(&beta));
        assert!(part.is_semi_uniform(2.0));

        let part = beta_ordered_partition(&beta, 11).unwrap();
        assert_eq!(part.atoms().last().unwrap().len(), 44 + 4);
        assert!(part.is_semi_uniform(2.0));
        // brute-force pairwise ordering check
        let b = beta.as_slice();
        for (i, a) in part.atoms().iter().enumerate() {
            for c in &part.atoms()[i + 1..] {
                let (amin, amax) = a.iter().fold((f64::MAX, f64::MIN), |(l, h), &k| (l.min(b[k]), h.max(b[k])));
                let (cmin, cmax) = c.iter().fold((f64::MAX, f64::MIN), |(l, h), &k| (l.min(b[k]), h.max(b[k])));
                assert!(amax <= cmin || cmax <= amin);
            }
        }
    }

    #[test]
    fn interleaved_partition_not_beta_ordered() {
        let beta = BetaVector::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let part = Partition::new(vec![vec![0, 2], vec![1, 3]], 4).unwrap();
        assert!(!part.is_beta_ordered(&beta));
    }

    #[test]
    fn default_atoms() {
        assert_eq!(default_num_atoms(500), 8);
        assert_eq!(default_num_atoms(512), 8);
        assert_eq!(default_num_atoms(1000), 10);
        assert_eq!(default_num_atoms(2000), 13);
    }

    #[test]
    fn haar_basis_is_orthonormal_and_deterministic() {
        let s = haar_subspace(100, 6, 5).unwrap();
        assert_eq!(s.dim(), 6);
        assert_orthonormal(&s);
        assert_eq!(s, haar_subspace(100, 6, 5).unwrap());
        assert!(haar_subspace(10, 10, 1).is_err());
    }

    #[test]
    fn haar_directions_are_spread_out() {
        let p = 400;
        let q = unit_q(p);
        let inside = (0..1000)
            .filter(|&seed| {
                haar_subspace(p, 1, seed).unwrap().basis().column(0).dot(&q).abs() < 4.0 / (p as f64).sqrt()
            })
            .count();
        assert!(inside >= 990, "{inside}");
    }

    #[test]
    fn haar_projection_energy_is_k_over_p() {
        let (p, k) = (60, 4);
        let mut z = DVector::zeros(p);
        z[3] = 1.0;
        let vals: Vec<f64> = (0..1000).map(|s| haar_subspace(p, k, s).unwrap().project(&z).norm_squared()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        let se = (var / vals.len() as f64).sqrt();
        assert!((mean - k as f64 / p as f64).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn augment_cases() {
        let s = augment_with_q(&AnchorSubspace::span_q(5)).unwrap();
        assert_eq!(s.dim(), 1);

        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let s = augment_with_q(&orthonormalize(std::slice::from_ref(&e1), RANK_TOL).unwrap()).unwrap();
        assert_eq!(s.dim(), 2);
        assert!((s.project(&e1) - &e1).norm() < 1e-14);
        assert!((s.project(&unit_q(3)) - unit_q(3)).norm() < 1e-14);

        for seed in 0..20 {
            let h = haar_subspace(500, 5, seed).unwrap();
            assert_eq!(augment_with_q(&h).unwrap().dim(), 6);
        }
        let full = haar_subspace(4, 3, 0).unwrap();
        assert!(augment_with_q(&full).is_err());
    }

    #[test]
    fn partition_subspace_captures_b_as_atoms_grow() {
        let p = 2000;
        let beta = crate::model::generate_betas(p, 1.0, 0.5, 21).unwrap();
        let part = beta_ordered_partition(&beta, default_num_atoms(p)).unwrap();
        let s = partition_subspace(&part);
        let b = beta.unit();
        let miss = 1.0 - s.project(&b).norm_squared();
        assert!(miss < 0.05, "{miss}");
        let coarse = partition_subspace(&beta_ordered_partition(&beta, 3).unwrap());
        assert!(1.0 - coarse.project(&b).norm_squared() > miss);
    }
}
