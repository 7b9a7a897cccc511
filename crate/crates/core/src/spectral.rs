//! Spectrum, peripheral eigenprojection, fixed-point projection and the
//! attractor/fixed-point bases of a channel.
//!
//! Peripheral eigenvalues of a channel are semisimple, so each peripheral
//! cluster is handled through null spaces of `S - λ` and `(S - λ)†` with
//! dimension equal to the algebraic multiplicity, followed by
//! biorthonormalization. No Jordan structure is ever built.

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::linalg::{
    c, eigenvalues, multiset_distance, null_space, orthonormalize, svd_full, unvec, vec, ComplexMatrix, Tolerances,
    C64, ONE,
};

/// Eigenvalues closer than this are treated as one (numerically split) eigenvalue.
pub const CLUSTER_RADIUS: f64 = 1e-7;

/// All superoperator eigenvalues together with the defects of the three
/// spectral axioms every channel satisfies.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
    /// Distance from 1 to the nearest eigenvalue.
    pub one_defect: f64,
    /// Multiset distance between the spectrum and its complex conjugate.
    pub conjugation_defect: f64,
    pub max_modulus: f64,
}

impl Spectrum {
    pub fn axioms_hold(&self, tol: f64) -> bool {
        self.one_defect <= tol && self.conjugation_defect <= tol && self.max_modulus <= 1.0 + tol
    }
}

pub fn spectrum(ch: &Channel) -> Result<Spectrum> {
    let eigenvalues = eigenvalues(&ch.superop())?;
    Ok(spectrum_from(eigenvalues))
}

pub fn spectrum_from(eigenvalues: Vec<C64>) -> Spectrum {
    let one_defect = eigenvalues.iter().map(|z| (z - ONE).norm()).fold(f64::INFINITY, f64::min);
    let conj: Vec<C64> = eigenvalues.iter().map(|z| z.conj()).collect();
    let conjugation_defect = multiset_distance(&eigenvalues, &conj);
    let max_modulus = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Spectrum { eigenvalues, one_defect, conjugation_defect, max_modulus }
}

/// One peripheral eigenvalue with its (biorthonormal) eigenvector pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PeripheralCluster {
    pub eigenvalue: C64,
    /// Right eigenvectors `X_i`, `Φ(X_i) = λ X_i`, HS-orthonormal.
    pub right: Vec<ComplexMatrix>,
    /// Left eigenvectors `Y_i`, `Φ†(Y_i) = λ̄ Y_i`, with `⟨Y_i, X_j⟩ = δ_ij`.
    pub left: Vec<ComplexMatrix>,
}

/// Peripheral spectrum, eigenvectors and the projector `P_P` onto `Attr(Φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeripheralData {
    pub dim: usize,
    pub clusters: Vec<PeripheralCluster>,
    /// `P_P = Σ_i |vec X_i⟩⟨vec Y_i|`.
    pub projector_superop: ComplexMatrix,
}

impl PeripheralData {
    /// Peripheral eigenvalues with multiplicity.
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.clusters.iter().flat_map(|cl| std::iter::repeat_n(cl.eigenvalue, cl.right.len())).collect()
    }

    pub fn right_vectors(&self) -> Vec<ComplexMatrix> {
        self.clusters.iter().flat_map(|cl| cl.right.iter().cloned()).collect()
    }

    pub fn left_vectors(&self) -> Vec<ComplexMatrix> {
        self.clusters.iter().flat_map(|cl| cl.left.iter().cloned()).collect()
    }

    pub fn fixed_cluster(&self) -> Option<&PeripheralCluster> {
        self.clusters.iter().find(|cl| (cl.eigenvalue - ONE).norm() <= CLUSTER_RADIUS)
    }

    /// The eigenprojection `P` onto `Fix(Φ)`.
    pub fn fixed_projector(&self) -> Result<ComplexMatrix> {
        let cl = self.fixed_cluster().ok_or(Error::NoFixedCluster)?;
        Ok(dyads(&cl.right, &cl.left))
    }

    /// HS-orthonormal basis of `Attr(Φ)`.
    pub fn attractor_basis(&self, tol: f64) -> Vec<ComplexMatrix> {
        orthonormalize(&self.right_vectors(), tol).unwrap_or_default()
    }

    /// HS-orthonormal basis of `Fix(Φ)`.
    pub fn fix_basis(&self, tol: f64) -> Vec<ComplexMatrix> {
        self.fixed_cluster().map(|cl| orthonormalize(&cl.right, tol).unwrap_or_default()).unwrap_or_default()
    }

    /// Applies `P_P` to an operator.
    pub fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        apply_superop(&self.projector_superop, x)
    }
}

fn dyads(right: &[ComplexMatrix], left: &[ComplexMatrix]) -> ComplexMatrix {
    let n = right.first().map(|x| x.len()).unwrap_or(0);
    let mut p = ComplexMatrix::zeros(n, n);
    for (x, y) in right.iter().zip(left) {
        p += vec(x) * vec(y).adjoint();
    }
    p
}

pub fn apply_superop(s: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    unvec((s * vec(x)).as_slice(), x.nrows())
}

/// Groups values closer than `radius` (single linkage), keeping input order inside groups.
pub fn cluster_values(values: &[C64], radius: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, z) in values.iter().enumerate() {
        let hits: Vec<usize> = groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.iter().any(|&j| (values[j] - z).norm() <= radius))
            .map(|(k, _)| k)
            .collect();
        match hits.as_slice() {
            [] => groups.push(vec![i]),
            [first, rest @ ..] => {
                let first = *first;
                for &k in rest.iter().rev() {
                    let moved = groups.remove(k);
                    groups[first].extend(moved);
                }
                groups[first].push(i);
            }
        }
    }
    groups
}

pub fn peripheral_data(ch: &Channel, tol: &Tolerances) -> Result<PeripheralData> {
    peripheral_data_of_superop(ch.dim(), &ch.superop(), tol)
}

pub fn peripheral_data_of_superop(dim: usize, s: &ComplexMatrix, tol: &Tolerances) -> Result<PeripheralData> {
    let n = s.nrows();
    let all = eigenvalues(s)?;
    let peripheral: Vec<C64> = all.iter().copied().filter(|z| (z.norm() - 1.0).abs() <= tol.eig_peripheral).collect();
    let mut clusters = Vec::new();
    for group in cluster_values(&peripheral, CLUSTER_RADIUS) {
        let k = group.len();
        let lambda = group.iter().map(|&i| peripheral[i]).sum::<C64>() / c(k as f64);
        let shifted = s - ComplexMatrix::identity(n, n) * lambda;
        let (right, right_tail) = null_space(&shifted, 0.0, Some(k));
        let (left_raw, left_tail) = null_space(&shifted.adjoint(), 0.0, Some(k));
        let tail = right_tail.iter().chain(&left_tail).fold(0.0_f64, |a, &b| a.max(b));
        let gram = left_raw.adjoint() * &right;
        let (_, gs, _) = svd_full(&gram);
        let min_sv = gs.last().copied().unwrap_or(0.0);
        if min_sv < 1e-6 || tail > 1e-6 * s.norm().max(1.0) {
            return Err(Error::DefectiveCluster { eigenvalue: lambda, defect: min_sv.min(1.0 / tail.max(1e-300)) });
        }
        let inv = gram.try_inverse().ok_or(Error::DefectiveCluster { eigenvalue: lambda, defect: 0.0 })?;
        let left = left_raw * inv.adjoint();
        clusters.push(PeripheralCluster {
            eigenvalue: lambda,
            right: (0..k).map(|j| unvec(right.column(j).as_slice(), dim)).collect(),
            left: (0..k).map(|j| unvec(left.column(j).as_slice(), dim)).collect(),
        });
    }
    // Deterministic order: by eigenphase, with λ = 1 first.
    clusters.sort_by(|a, b| {
        let pa = a.eigenvalue.arg().abs() < CLUSTER_RADIUS;
        let pb = b.eigenvalue.arg().abs() < CLUSTER_RADIUS;
        pb.cmp(&pa).then(a.eigenvalue.arg().total_cmp(&b.eigenvalue.arg()))
    });
    let right: Vec<ComplexMatrix> = clusters.iter().flat_map(|cl| cl.right.clone()).collect();
    let left: Vec<ComplexMatrix> = clusters.iter().flat_map(|cl| cl.left.clone()).collect();
    let projector_superop = if right.is_empty() { ComplexMatrix::zeros(n, n) } else { dyads(&right, &left) };
    Ok(PeripheralData { dim, clusters, projector_superop })
}

/// The spectral projection `P` onto `Fix(Φ)`.
pub fn fixed_point_projection(ch: &Channel, tol: &Tolerances) -> Result<ComplexMatrix> {
    peripheral_data(ch, tol)?.fixed_projector()
}

/// Brute-force Cesàro mean `(1/N) Σ_{n=1}^N S^n`, used only to cross-check `P`.
pub fn cesaro_oracle(ch: &Channel, n: usize) -> ComplexMatrix {
    let s = ch.superop();
    let d2 = s.nrows();
    let mut acc = ComplexMatrix::zeros(d2, d2);
    let mut pow = ComplexMatrix::identity(d2, d2);
    for _ in 0..n.max(1) {
        pow = &pow * &s;
        acc += &pow;
    }
    acc / c(n.max(1) as f64)
}

/// Idempotency and commutation defects of `P_P` with respect to the superoperator `s`.
pub fn projector_defects(pd: &PeripheralData, s: &ComplexMatrix) -> (f64, f64) {
    let p = &pd.projector_superop;
    let idem = crate::linalg::max_abs(&(p * p - p));
    let comm = crate::linalg::max_abs(&(p * s - s * p));
    (idem, comm)
}

/// The peripheral channel `Φ_P = P_P Φ`.
pub fn peripheral_channel(ch: &Channel, tol: &Tolerances) -> Result<Channel> {
    let s = ch.superop();
    let pd = peripheral_data(ch, tol)?;
    let (_, comm) = projector_defects(&pd, &s);
    if comm > tol.equality.max(1e-12) * 10.0 {
        return Err(Error::CommutationDefect { defect: comm });
    }
    Channel::from_superop(ch.dim(), &pd.projector_superop * s)
}

pub fn attractor_basis(ch: &Channel, tol: &Tolerances) -> Result<Vec<ComplexMatrix>> {
    Ok(peripheral_data(ch, tol)?.attractor_basis(tol.equality))
}

pub fn fix_basis(ch: &Channel, tol: &Tolerances) -> Result<Vec<ComplexMatrix>> {
    Ok(peripheral_data(ch, tol)?.fix_basis(tol.equality))
}

/// Smallest `n ≤ n_max` minimizing `max_k |λ_k^n - 1|` over the peripheral
/// eigenvalues; realizes the subsequence along which `Φ^n → P_P`.
/// Returns `(n, max_k |λ_k^n - 1|)`.
pub fn recurrence_time(pd: &PeripheralData, n_max: usize) -> (usize, f64) {
    let eigs: Vec<C64> = pd.clusters.iter().map(|cl| cl.eigenvalue).collect();
    let mut best = (1, f64::INFINITY);
    let mut pows = eigs.clone();
    for n in 1..=n_max.max(1) {
        let worst = pows.iter().map(|z| (z - ONE).norm()).fold(0.0, f64::max);
        if worst < best.1 - 1e-15 {
            best = (n, worst);
        }
        for (p, z) in pows.iter_mut().zip(&eigs) {
            *p *= z;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{contraction, random_kraus_channel, zoo, ZooParams};
    use crate::linalg::{diag, hs_inner, max_abs, pauli, span_distance, ZERO};
    use crate::random::{random_density, random_unitary, Rng};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn identity_spectrum_and_projector() {
        let id = Channel::identity(2);
        let sp = spectrum(&id).unwrap();
        assert!(multiset_distance(&sp.eigenvalues, &[ONE; 4]) < 1e-14);
        let pd = peripheral_data(&id, &tol()).unwrap();
        assert!(max_abs(&(&pd.projector_superop - ComplexMatrix::identity(4, 4))) < 1e-12);
        assert!(max_abs(&(fixed_point_projection(&id, &tol()).unwrap() - ComplexMatrix::identity(4, 4))) < 1e-12);
        assert!(max_abs(&(cesaro_oracle(&id, 17) - ComplexMatrix::identity(4, 4))) < 1e-14);
    }

    #[test]
    fn wolf_and_pauli_spectra() {
        let w = zoo("wolf_indivisible", &ZooParams::default()).unwrap();
        let third = c(1.0 / 3.0);
        let sp = spectrum(&w).unwrap();
        assert!(multiset_distance(&sp.eigenvalues, &[ONE, third, third, -third]) < 1e-12);
        assert!(sp.axioms_hold(1e-8));
        let p = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let sp = spectrum(&p).unwrap();
        assert!(multiset_distance(&sp.eigenvalues, &[ONE, -ONE, ZERO, ZERO]) < 1e-12);
    }

    #[test]
    fn pauli_xz_peripheral_structure() {
        let ch = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let pd = peripheral_data(&ch, &tol()).unwrap();
        assert_eq!(pd.eigenvalues().len(), 2);
        assert_eq!(crate::linalg::rank(&pd.projector_superop, 1e-8), 2);
        let [_, s2, _] = pauli();
        let id = ComplexMatrix::identity(2, 2);
        let want = orthonormalize(&[id.clone(), s2.clone()], 1e-10).unwrap();
        assert!(span_distance(&pd.attractor_basis(1e-8), &want) < 1e-10);
        let fix = pd.fix_basis(1e-8);
        assert!(span_distance(&fix, &orthonormalize(std::slice::from_ref(&id), 1e-10).unwrap()) < 1e-10);
        let p = pd.fixed_projector().unwrap();
        assert_eq!(crate::linalg::rank(&p, 1e-8), 1);
        assert!(max_abs(&(apply_superop(&p, &id) - &id)) < 1e-12);
        // Even Cesàro averages cancel the -1 eigenvalue exactly.
        assert!(max_abs(&(cesaro_oracle(&ch, 10) - &p)) < 1e-12);
        let php = peripheral_channel(&ch, &tol()).unwrap();
        assert!(max_abs(&(php.apply(&s2).unwrap() + &s2)) < 1e-12);
    }

    #[test]
    fn contraction_projector_is_rank_one() {
        let rho = random_density(&mut Rng::seed(2), 3, 3);
        let ch = contraction(&rho).unwrap();
        let pd = peripheral_data(&ch, &tol()).unwrap();
        assert_eq!(pd.eigenvalues().len(), 1);
        let want = vec(&rho) * vec(&ComplexMatrix::identity(3, 3)).adjoint();
        assert!(max_abs(&(&pd.projector_superop - &want)) < 1e-10);
        assert!(max_abs(&(cesaro_oracle(&ch, 1) - &want)) < 1e-12);
        let rb = orthonormalize(std::slice::from_ref(&rho), 1e-10).unwrap();
        assert!(span_distance(&pd.attractor_basis(1e-8), &rb) < 1e-10);
        assert!(span_distance(&pd.fix_basis(1e-8), &rb) < 1e-10);
    }

    #[test]
    fn unitary_channel_attractor_is_everything() {
        let d = diag(&[C64::from_polar(1.0, 0.3), C64::from_polar(1.0, 0.3 * 2f64.sqrt() + 1.0)]);
        let v = random_unitary(&mut Rng::seed(3), 2);
        let u = &v * d * v.adjoint();
        let ch = Channel::from_kraus(vec![u]).unwrap();
        let pd = peripheral_data(&ch, &tol()).unwrap();
        assert_eq!(pd.attractor_basis(1e-8).len(), 4);
        assert_eq!(pd.fix_basis(1e-8).len(), 2);
    }

    #[test]
    fn projector_invariants_on_random_channels() {
        for seed in 0..10 {
            let ch = random_kraus_channel(2 + seed as usize % 3, 1 + seed as usize % 3, seed);
            let s = ch.superop();
            let pd = peripheral_data(&ch, &tol()).unwrap();
            let (idem, comm) = projector_defects(&pd, &s);
            assert!(idem < 1e-8 && comm < 1e-8, "seed {seed}: {idem:e} {comm:e}");
            let pch = Channel::from_superop(ch.dim(), pd.projector_superop.clone()).unwrap();
            assert!(crate::channel::is_cptp(&pch, &tol()).is_cptp());
            let basis = pd.attractor_basis(1e-8);
            let images: Vec<_> = basis.iter().map(|x| ch.apply(x).unwrap()).collect();
            assert!(crate::linalg::span_residual(&images, &basis) < 1e-8);
        }
    }

    #[test]
    fn biorthonormality() {
        let ch = zoo("pinching", &ZooParams { blocks: Some(vec![1, 2]), ..Default::default() }).unwrap();
        let pd = peripheral_data(&ch, &tol()).unwrap();
        let r = pd.right_vectors();
        let l = pd.left_vectors();
        for i in 0..r.len() {
            for j in 0..r.len() {
                let want = if i == j { ONE } else { ZERO };
                assert!((hs_inner(&l[i], &r[j]) - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn recurrence_search_finds_period() {
        let ch = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let pd = peripheral_data(&ch, &tol()).unwrap();
        let (n, defect) = recurrence_time(&pd, 10);
        assert_eq!(n, 2);
        assert!(defect < 1e-12);
    }

    #[test]
    fn clustering_merges_chains() {
        let v = [ONE, c(1.0 + 0.6e-7), c(1.0 + 1.2e-7), c(0.5)];
        let g = cluster_values(&v, 1e-7);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].len(), 3);
    }
}
