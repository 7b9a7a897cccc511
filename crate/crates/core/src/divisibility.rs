//! Irreducibility and primitivity, root relations between a channel and
//! its `n`-th roots, and the absence of permutations for Markovian channels.

use crate::channel::{markovian_channel, Channel, GklsGenerator};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, multiset_distance, rank, span_distance, unitary_mth_root, Tolerances, C64};
use crate::spectral::{peripheral_data, spectrum};
use crate::structure::{max_rank_fixed_state, wolf_decompose, AttractorDecomposition};
use crate::unfold::UnfoldSpec;

/// Tolerance for the spectral and attractor relations between a channel and its root.
pub const ROOT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub irreducible: bool,
    pub primitive: bool,
    pub unital: bool,
    pub permutation_trivial: bool,
    /// Peripheral eigenvalues counted with multiplicity.
    pub peripheral_count: usize,
    pub fix_dim: usize,
    pub notes: Vec<String>,
}

pub fn classify(ch: &Channel, tol: &Tolerances) -> Result<ClassificationReport> {
    let d = ch.dim();
    let pd = peripheral_data(ch, tol)?;
    let fix_dim = pd.fix_basis(tol.equality).len();
    let sigma = max_rank_fixed_state(ch, tol)?;
    let full_rank = rank(&sigma, tol.equality) == d;
    let irreducible = fix_dim == 1 && full_rank;
    let peripheral_count = pd.eigenvalues().len();
    let id = crate::linalg::ComplexMatrix::identity(d, d);
    let unital = max_abs(&(ch.apply(&id)? - &id)) <= tol.equality;
    let mut notes = Vec::new();
    if !full_rank {
        notes.push(format!("maximum-rank fixed state has rank {} < {d}", rank(&sigma, tol.equality)));
    }
    if fix_dim > 1 {
        notes.push(format!("fixed-point space has dimension {fix_dim}"));
    }
    let permutation_trivial = match wolf_decompose(ch, tol) {
        Ok(dec) => dec.permutation.iter().enumerate().all(|(k, &p)| k == p),
        Err(e) => {
            notes.push(format!("decomposition failed: {e}"));
            false
        }
    };
    Ok(ClassificationReport {
        irreducible,
        primitive: irreducible && peripheral_count == 1,
        unital,
        permutation_trivial,
        peripheral_count,
        fix_dim,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootReport {
    /// `‖S_n^n − S‖_max`.
    pub power_defect: f64,
    pub attractor_span: f64,
    /// Multiset distance between `spec(Φ)` and `spec(Φ_n)^n`.
    pub spectrum_defect: f64,
}

impl RootReport {
    pub fn passed(&self) -> bool {
        self.attractor_span <= ROOT_TOL && self.spectrum_defect <= ROOT_TOL
    }
}

/// Checks `Attr(Φ) = Attr(Φ_n)` and `spec(Φ) = spec(Φ_n)^n` for an `n`-th root `Φ_n` of `Φ`.
pub fn root_relations_check(phi: &Channel, phi_n: &Channel, n: usize, tol: &Tolerances) -> Result<RootReport> {
    if phi.dim() != phi_n.dim() {
        return Err(Error::DimensionMismatch("channel and root differ in dimension".into()));
    }
    let power_defect = max_abs(&(phi_n.power(n).superop() - phi.superop()));
    if power_defect > ROOT_TOL {
        return Err(Error::NotARoot { n, defect: power_defect });
    }
    let a = peripheral_data(phi, tol)?.attractor_basis(tol.equality);
    let b = peripheral_data(phi_n, tol)?.attractor_basis(tol.equality);
    let spec = spectrum(phi)?.eigenvalues;
    let powered: Vec<C64> = spectrum(phi_n)?.eigenvalues.iter().map(|z| z.powu(n as u32)).collect();
    Ok(RootReport { power_defect, attractor_span: span_distance(&a, &b), spectrum_defect: multiset_distance(&spec, &powered) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovianReport {
    pub decomposition: AttractorDecomposition,
    pub permutation_trivial: bool,
}

/// Decomposes `e^L` and reports whether its permutation is the identity.
pub fn markovian_permutation_check(g: &GklsGenerator, tol: &Tolerances) -> Result<MarkovianReport> {
    let ch = markovian_channel(g)?;
    let decomposition = wolf_decompose(&ch, tol)?;
    let permutation_trivial = decomposition.permutation.iter().enumerate().all(|(k, &p)| k == p);
    Ok(MarkovianReport { decomposition, permutation_trivial })
}

/// Replaces every `U_k` by its principal `n`-th root; only defined for `π = id`.
pub fn root_asymptotics_witness(spec: &UnfoldSpec, n: usize) -> Result<UnfoldSpec> {
    if spec.permutation.iter().enumerate().any(|(k, &p)| k != p) {
        return Err(Error::NontrivialPermutation);
    }
    let mut out = spec.clone();
    for b in &mut out.blocks {
        b.unitary = unitary_mth_root(&b.unitary, n)?;
    }
    Ok(out)
}
