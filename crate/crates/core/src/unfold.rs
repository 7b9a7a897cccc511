//! Channels with a prescribed attractor and asymptotic map.
//!
//! Given blocks `(d_k, m_k, ρ_k, U_k)`, a permutation `π` and a transient
//! dimension, [`unfold`] builds `Φ_E = (Φ_0 + Φ_0⊥) ∘ Φ_pinch` on
//! `H = H_0⊥ ⊕ ⨁_k C^{d_k} ⊗ C^{m_k}`. Coordinates are laid out with `H_0⊥`
//! first and the blocks following in order.

use crate::channel::{is_cptp, superop_of_map, Channel};
use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eig, hermiticity_defect, kron, max_abs, orthonormalize, partial_trace, rank, span_distance,
    span_residual, unitarity_defect, unvec, ComplexMatrix, Keep, Subspace, Tolerances,
};
use crate::random::{random_full_rank_density, random_unitary, Rng};
use crate::spectral::peripheral_data;
use crate::structure::{apply_asymptotic, is_permutation, AttractorDecomposition, Block};

#[derive(Debug, Clone, PartialEq)]
pub struct SpecBlock {
    pub d: usize,
    pub m: usize,
    pub rho: ComplexMatrix,
    pub unitary: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldSpec {
    pub dim_h0_perp: usize,
    pub blocks: Vec<SpecBlock>,
    /// `permutation[k] = π(k)`, zero-based.
    pub permutation: Vec<usize>,
    /// State on `H_0` that transient population is sent to; defaults to
    /// `⨁ (I/d_k ⊗ ρ_k) / M`.
    pub sink_state: Option<ComplexMatrix>,
}

impl UnfoldSpec {
    pub fn h0_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.d * b.m).sum()
    }

    pub fn dim(&self) -> usize {
        self.dim_h0_perp + self.h0_dim()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = self.dim_h0_perp;
        self.blocks
            .iter()
            .map(|b| {
                let o = off;
                off += b.d * b.m;
                o
            })
            .collect()
    }

    /// Rejects any spec that violates the hypotheses of the construction.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.blocks.is_empty() {
            return bad("at least one block is required".into());
        }
        if self.permutation.len() != self.blocks.len() || !is_permutation(&self.permutation) {
            return bad("permutation must be a bijection of the block indices".into());
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if b.d == 0 || b.m == 0 {
                return bad(format!("block {k}: dimensions must be positive"));
            }
            if self.blocks[self.permutation[k]].d != b.d {
                return bad(format!("block {k}: d differs from d of block π(k) = {}", self.permutation[k]));
            }
            if b.rho.shape() != (b.m, b.m) || b.unitary.shape() != (b.d, b.d) {
                return bad(format!("block {k}: rho must be {0}x{0} and unitary {1}x{1}", b.m, b.d));
            }
            if hermiticity_defect(&b.rho) > tol.equality || (b.rho.trace().re - 1.0).abs() > tol.equality {
                return bad(format!("block {k}: rho is not a Hermitian trace-one matrix"));
            }
            let (vals, _) = hermitian_eig(&b.rho)?;
            if vals[0] <= tol.psd {
                return bad(format!("block {k}: rho is not full rank (min eigenvalue {:e})", vals[0]));
            }
            let defect = unitarity_defect(&b.unitary);
            if defect > tol.equality {
                return bad(format!("block {k}: unitary defect {defect:e}"));
            }
        }
        if let Some(s) = &self.sink_state {
            let n0 = self.h0_dim();
            if s.shape() != (n0, n0) {
                return bad(format!("sink state must be {n0}x{n0}"));
            }
            let (vals, _) = hermitian_eig(s)?;
            if hermiticity_defect(s) > tol.equality || (s.trace().re - 1.0).abs() > tol.equality || vals[0] < -tol.psd {
                return bad("sink state is not a density matrix".into());
            }
        }
        Ok(())
    }

    pub fn sink(&self) -> ComplexMatrix {
        if let Some(s) = &self.sink_state {
            return s.clone();
        }
        let n0 = self.h0_dim();
        let mut s = ComplexMatrix::zeros(n0, n0);
        let mut off = 0;
        let weight = 1.0 / self.blocks.len() as f64;
        for b in &self.blocks {
            let local = kron(&(ComplexMatrix::identity(b.d, b.d) / c(b.d as f64)), &b.rho) * c(weight);
            s.view_mut((off, off), (b.d * b.m, b.d * b.m)).copy_from(&local);
            off += b.d * b.m;
        }
        s
    }

    fn block_isometry(&self, k: usize) -> ComplexMatrix {
        let n = self.dim();
        let off = self.offsets()[k];
        let w = self.blocks[k].d * self.blocks[k].m;
        ComplexMatrix::from_fn(n, w, |r, col| if r == off + col { c(1.0) } else { c(0.0) })
    }

    fn h0_isometry(&self) -> ComplexMatrix {
        let n = self.dim();
        let p = self.dim_h0_perp;
        ComplexMatrix::from_fn(n, n - p, |r, col| if r == p + col { c(1.0) } else { c(0.0) })
    }

    /// The asymptotic structure the unfolded channel is built to have.
    pub fn to_decomposition(&self) -> AttractorDecomposition {
        AttractorDecomposition {
            h0: Subspace { isometry: self.h0_isometry() },
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(k, b)| Block {
                    d: b.d,
                    m: b.m,
                    isometry: self.block_isometry(k),
                    rho: b.rho.clone(),
                    unitary: b.unitary.clone(),
                })
                .collect(),
            permutation: self.permutation.clone(),
        }
    }
}

/// `Z ↦ Q⊥ Z Q⊥ + Σ_k P_k Z P_k`.
pub fn pinching_channel(spec: &UnfoldSpec) -> Result<Channel> {
    let n = spec.dim();
    let mut ops = Vec::new();
    if spec.dim_h0_perp > 0 {
        let q = ComplexMatrix::from_fn(n, n, |i, j| if i == j && i < spec.dim_h0_perp { c(1.0) } else { c(0.0) });
        ops.push(q);
    }
    for k in 0..spec.blocks.len() {
        let v = spec.block_isometry(k);
        ops.push(&v * v.adjoint());
    }
    Channel::from_kraus(ops)
}

/// Superoperator of `Z ↦ 0 ⊕ tr(Q⊥ Z Q⊥) σ`.
pub fn sink_map(spec: &UnfoldSpec) -> ComplexMatrix {
    let n = spec.dim();
    let p = spec.dim_h0_perp;
    let v = spec.h0_isometry();
    let sigma = &v * spec.sink() * v.adjoint();
    superop_of_map(n, |z| {
        let t: crate::linalg::C64 = (0..p).map(|i| z[(i, i)]).sum();
        &sigma * t
    })
}

/// Superoperator of `Z ↦ ⨁_k U_k tr_2(P_π(k) Z P_π(k)) U_k† ⊗ ρ_k`, checked to be completely positive.
pub fn phi0_map(spec: &UnfoldSpec, tol: &Tolerances) -> Result<ComplexMatrix> {
    let n = spec.dim();
    let isos: Vec<ComplexMatrix> = (0..spec.blocks.len()).map(|k| spec.block_isometry(k)).collect();
    let s = superop_of_map(n, |z| {
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, b) in spec.blocks.iter().enumerate() {
            let src = spec.permutation[k];
            let sb = &spec.blocks[src];
            let local = isos[src].adjoint() * z * &isos[src];
            let x = partial_trace(&local, sb.d, sb.m, Keep::First).expect("block shapes are consistent");
            let y = &b.unitary * x * b.unitary.adjoint();
            out += &isos[k] * kron(&y, &b.rho) * isos[k].adjoint();
        }
        out
    });
    let report = is_cptp(&Channel::from_superop(n, s.clone())?, tol);
    if !report.cp {
        return Err(Error::Stage { stage: "Φ_0 is not completely positive", defect: -report.min_choi_eig });
    }
    Ok(s)
}

/// `Φ_E = (Φ_0 + Φ_0⊥) ∘ Φ_pinch`.
pub fn unfold(spec: &UnfoldSpec, tol: &Tolerances) -> Result<Channel> {
    spec.validate(tol)?;
    let pinch = pinching_channel(spec)?.superop();
    let s = (phi0_map(spec, tol)? + sink_map(spec)) * pinch;
    Channel::from_superop(spec.dim(), s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldReport {
    pub cptp: bool,
    pub min_choi_eig: f64,
    pub tp_defect: f64,
    /// Rank of the superoperator of `Φ_E²`.
    pub collapse_rank: usize,
    /// `Σ_k d_k²`.
    pub expected_rank: usize,
    /// Worst distance of `Φ_E²(E_ij)` from the prescribed attractor.
    pub collapse_residual: f64,
    /// Distance between the spectral attractor span and the prescribed one.
    pub attractor_span: f64,
    /// Worst deviation of `Φ_E` from the prescribed map on the attractor.
    pub action: f64,
    pub tolerance: f64,
}

impl UnfoldReport {
    pub fn passed(&self) -> bool {
        self.cptp
            && self.collapse_rank == self.expected_rank
            && self.collapse_residual <= self.tolerance
            && self.attractor_span <= self.tolerance
            && self.action <= self.tolerance
    }
}

pub fn verify_unfold(spec: &UnfoldSpec, ch: &Channel, tol: &Tolerances) -> Result<UnfoldReport> {
    let n = spec.dim();
    if ch.dim() != n {
        return Err(Error::DimensionMismatch(format!("spec has dimension {n}, channel {}", ch.dim())));
    }
    let cp = is_cptp(ch, tol);
    let dec = spec.to_decomposition();
    let k_basis = dec.attractor_basis();
    let s2 = ch.superop() * ch.superop();
    let images: Vec<ComplexMatrix> = s2.column_iter().map(|col| unvec(col.as_slice(), n)).collect();
    let collapse_residual = images
        .iter()
        .map(|y| span_residual(std::slice::from_ref(y), &k_basis) * crate::linalg::hs_norm(y).min(1.0))
        .fold(0.0, f64::max);
    let pd = peripheral_data(ch, tol)?;
    let spectral = pd.attractor_basis(tol.equality);
    let action = k_basis
        .iter()
        .map(|x| match apply_asymptotic(&dec, x) {
            Ok(want) => max_abs(&(ch.apply(x).expect("dimensions agree") - want)),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    Ok(UnfoldReport {
        cptp: cp.is_cptp(),
        min_choi_eig: cp.min_choi_eig,
        tp_defect: cp.tp_defect,
        collapse_rank: rank(&s2, 1e-9),
        expected_rank: spec.blocks.iter().map(|b| b.d * b.d).sum(),
        collapse_residual,
        attractor_span: span_distance(&orthonormalize(&spectral, 1e-10).unwrap_or_default(), &k_basis),
        action,
        tolerance: tol.equality,
    })
}

/// Block dimensions and permutation of a spec, without the states and unitaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecShape {
    pub dim_h0_perp: usize,
    /// `(d_k, m_k)`.
    pub blocks: Vec<(usize, usize)>,
    pub permutation: Vec<usize>,
}

/// Fills a shape with random full-rank states and Haar unitaries.
pub fn random_spec(shape: &SpecShape, seed: u64) -> UnfoldSpec {
    let mut rng = Rng::seed(seed);
    UnfoldSpec {
        dim_h0_perp: shape.dim_h0_perp,
        blocks: shape
            .blocks
            .iter()
            .map(|&(d, m)| SpecBlock { d, m, rho: random_full_rank_density(&mut rng, m), unitary: random_unitary(&mut rng, d) })
            .collect(),
        permutation: shape.permutation.clone(),
        sink_state: None,
    }
}

/// Random shape of total dimension at most `max_dim` built from random cycles.
pub fn random_shape(seed: u64, max_dim: usize) -> SpecShape {
    let mut rng = Rng::seed(seed ^ 0x9e37_79b9);
    loop {
        let dim_h0_perp = rng.below(2);
        let mut blocks = Vec::new();
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        let mut used = dim_h0_perp;
        let target_cycles = 1 + rng.below(3);
        for _ in 0..target_cycles {
            let len = 1 + rng.below(3);
            let d = 1 + rng.below(2);
            let ms: Vec<usize> = (0..len).map(|_| 1 + rng.below(2)).collect();
            let size: usize = ms.iter().map(|m| d * m).sum();
            if used + size > max_dim {
                continue;
            }
            used += size;
            let start = blocks.len();
            blocks.extend(ms.iter().map(|&m| (d, m)));
            cycles.push((start..start + len).collect());
        }
        if blocks.is_empty() {
            continue;
        }
        let mut permutation = vec![0; blocks.len()];
        for cy in &cycles {
            for (j, &k) in cy.iter().enumerate() {
                permutation[k] = cy[(j + 1) % cy.len()];
            }
        }
        return SpecShape { dim_h0_perp, blocks, permutation };
    }
}
