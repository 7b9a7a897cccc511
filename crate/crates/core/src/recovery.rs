//! Petz recovery map, the `σ^{-1/2}`-weighted inner product, and the two
//! adjoints of the asymptotic map.

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eig, hs_norm, max_abs, multiset_distance, orthonormalize, psd_sqrt_pinv, span_distance,
    ComplexMatrix, Tolerances, C64,
};
use crate::spectral::peripheral_data;
use crate::structure::{max_rank_fixed_state, AttractorDecomposition, ATTRACTOR_RESIDUAL};

/// Reference state for the half product and the Petz map.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfProductContext {
    pub sigma: ComplexMatrix,
    pub sqrt_sigma: ComplexMatrix,
    /// Pseudo-inverse square root, zero on `Ker σ`.
    pub inv_sqrt_sigma: ComplexMatrix,
}

impl HalfProductContext {
    pub fn from_sigma(sigma: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let (sqrt_sigma, inv_sqrt_sigma) = psd_sqrt_pinv(&sigma, tol.equality)?;
        Ok(HalfProductContext { sigma, sqrt_sigma, inv_sqrt_sigma })
    }

    /// Context built from `σ = P(I) / tr P(I)`.
    pub fn for_channel(ch: &Channel, tol: &Tolerances) -> Result<Self> {
        Self::from_sigma(max_rank_fixed_state(ch, tol)?, tol)
    }
}

/// `⟨a, b⟩_{1/2} = tr(a† σ^{-1/2} b σ^{-1/2})`.
pub fn half_inner(ctx: &HalfProductContext, a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    (a.adjoint() * &ctx.inv_sqrt_sigma * b * &ctx.inv_sqrt_sigma).trace()
}

/// `Φ‡(X) = Σ σ^{1/2} A_k† σ^{-1/2} X σ^{-1/2} A_k σ^{1/2}`.
pub fn petz_recovery(ch: &Channel, ctx: &HalfProductContext, tol: &Tolerances) -> Result<Channel> {
    let ops = ch.kraus(tol.psd)?;
    Channel::from_kraus(ops.iter().map(|a| &ctx.sqrt_sigma * a.adjoint() * &ctx.inv_sqrt_sigma).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub sigma: ComplexMatrix,
    /// Worst `‖Φ‡Φ(X) − X‖` over the attractor basis.
    pub petz_after_channel: f64,
    /// Worst `‖ΦΦ‡(X) − X‖` over the attractor basis.
    pub channel_after_petz: f64,
    /// Distance between `Attr(Φ‡)` and `Attr(Φ)`.
    pub attractor_span: f64,
    /// `‖Φ‡†(I) − I‖`; nonzero exactly when the channel is not faithful.
    pub petz_trace_defect: f64,
    pub tolerance: f64,
}

impl RecoveryReport {
    pub fn max_defect(&self) -> f64 {
        self.petz_after_channel.max(self.channel_after_petz)
    }

    pub fn passed(&self) -> bool {
        self.max_defect() <= self.tolerance && self.attractor_span <= self.tolerance
    }
}

pub fn verify_recovery_on_attractor(ch: &Channel, tol: &Tolerances) -> Result<RecoveryReport> {
    let ctx = HalfProductContext::for_channel(ch, tol)?;
    let petz = petz_recovery(ch, &ctx, tol)?;
    let basis = peripheral_data(ch, tol)?.attractor_basis(tol.equality);
    let mut petz_after_channel = 0.0_f64;
    let mut channel_after_petz = 0.0_f64;
    for x in &basis {
        petz_after_channel = petz_after_channel.max(max_abs(&(petz.apply(&ch.apply(x)?)? - x)));
        channel_after_petz = channel_after_petz.max(max_abs(&(ch.apply(&petz.apply(x)?)? - x)));
    }
    let petz_basis = peripheral_data(&petz, tol)?.attractor_basis(tol.equality);
    let d = ch.dim();
    let id = ComplexMatrix::identity(d, d);
    Ok(RecoveryReport {
        sigma: ctx.sigma,
        petz_after_channel,
        channel_after_petz,
        attractor_span: span_distance(&petz_basis, &orthonormalize(&basis, 1e-10).unwrap_or_default()),
        petz_trace_defect: max_abs(&(petz.adjoint().apply(&id)? - id)),
        tolerance: tol.equality,
    })
}

fn checked_components(dec: &AttractorDecomposition, x: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    let (parts, residual) = dec.components(x);
    if residual > ATTRACTOR_RESIDUAL {
        return Err(Error::OutsideAttractor { residual });
    }
    Ok(parts)
}

fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

fn adjoint_map(dec: &AttractorDecomposition, x: &ComplexMatrix, weighted: bool) -> Result<ComplexMatrix> {
    let parts = checked_components(dec, x)?;
    let inv = inverse_permutation(&dec.permutation);
    let images: Vec<ComplexMatrix> = (0..dec.blocks.len())
        .map(|j| {
            let src = inv[j];
            let u = &dec.blocks[src].unitary;
            let w = if weighted { dec.blocks[src].purity() / dec.blocks[j].purity() } else { 1.0 };
            u.adjoint() * &parts[src] * u * c(w)
        })
        .collect();
    Ok(dec.assemble(&images))
}

/// HS adjoint of the asymptotic map on the attractor.
pub fn asymptotic_adjoint_hs(dec: &AttractorDecomposition, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    adjoint_map(dec, x, true)
}

/// Adjoint of the asymptotic map for the half product; its inverse on the attractor.
pub fn asymptotic_adjoint_half(dec: &AttractorDecomposition, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    adjoint_map(dec, x, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsUnitarityReport {
    pub hs_unitary: bool,
    pub unitary_channel: bool,
    /// Worst `|‖ρ_k‖_HS − ‖ρ_π(k)‖_HS|`.
    pub norm_defect: f64,
    /// Worst distance between the sorted spectra of `ρ_k` and `ρ_π(k)`.
    pub spectrum_defect: f64,
}

fn sorted_spectrum(rho: &ComplexMatrix) -> Vec<C64> {
    hermitian_eig(rho).map(|(v, _)| v.into_iter().map(c).collect()).unwrap_or_default()
}

pub fn hs_unitarity_report(dec: &AttractorDecomposition, tol: &Tolerances) -> HsUnitarityReport {
    let mut norm_defect = 0.0_f64;
    let mut spectrum_defect = 0.0_f64;
    for (k, &p) in dec.permutation.iter().enumerate() {
        let (a, b) = (&dec.blocks[k].rho, &dec.blocks[p].rho);
        norm_defect = norm_defect.max((hs_norm(a) - hs_norm(b)).abs());
        spectrum_defect = spectrum_defect.max(multiset_distance(&sorted_spectrum(a), &sorted_spectrum(b)));
    }
    HsUnitarityReport {
        hs_unitary: norm_defect <= tol.equality,
        unitary_channel: spectrum_defect <= tol.equality,
        norm_defect,
        spectrum_defect,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigvecCorrespondence {
    /// `(λ, ‖Φ†(Y) − λ̄ Y‖ / ‖Y‖)` with `Y = σ^{-1/2} X_λ σ^{-1/2}`, one entry per eigenvector.
    pub pairs: Vec<(C64, f64)>,
    pub max_defect: f64,
}

pub fn eigvec_correspondence_check(ch: &Channel, tol: &Tolerances) -> Result<EigvecCorrespondence> {
    let ctx = HalfProductContext::for_channel(ch, tol)?;
    let (vals, _) = hermitian_eig(&ctx.sigma)?;
    let support = vals.iter().filter(|&&v| v > tol.equality * vals[vals.len() - 1]).count();
    if support < ch.dim() {
        return Err(Error::NotFaithful { support, dim: ch.dim() });
    }
    let adj = ch.adjoint();
    let pd = peripheral_data(ch, tol)?;
    let mut pairs = Vec::new();
    for cl in &pd.clusters {
        for x in &cl.right {
            let y = &ctx.inv_sqrt_sigma * x * &ctx.inv_sqrt_sigma;
            let defect = hs_norm(&(adj.apply(&y)? - &y * cl.eigenvalue.conj())) / hs_norm(&y);
            pairs.push((cl.eigenvalue, defect));
        }
    }
    let max_defect = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(EigvecCorrespondence { pairs, max_defect })
}
