//! One function per subcommand. Each returns a serializable report whose field
//! order is the declaration order below.

use attractor::channel::{is_cptp, CptpReport};
use attractor::divisibility::{classify, ClassificationReport};
use attractor::linalg::span_distance;
use attractor::recovery::{eigvec_correspondence_check, hs_unitarity_report, verify_recovery_on_attractor, HsUnitarityReport, RecoveryReport};
use attractor::spectral::{peripheral_data, projector_defects, recurrence_time, spectrum, CLUSTER_RADIUS};
use attractor::structure::{
    coarse_grained_unitary, cyclic_normalize, equivalence, fixed_points_from_cycles, verify_decomposition,
    wolf_decompose_seeded, AttractorDecomposition, DecompositionChecks, EquivalenceReport,
};
use attractor::unfold::{unfold, verify_unfold, UnfoldReport, UnfoldSpec};
use attractor::{Channel, ComplexMatrix, Error, Tolerances, C64};
use serde::Serialize;

use crate::error::CliError;
use crate::json::{cxs, mats, one_based, Cx, Mat};

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Settings {
    #[serde(flatten)]
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl Settings {
    pub fn tol(&self) -> Tolerances {
        self.tolerances
    }
}

#[derive(Debug, Serialize)]
pub struct Peripheral {
    pub eigenvalue: Cx,
    pub multiplicity: usize,
}

fn peripheral_list(pd: &attractor::spectral::PeripheralData) -> Vec<Peripheral> {
    pd.clusters.iter().map(|cl| Peripheral { eigenvalue: Cx(cl.eigenvalue), multiplicity: cl.right.len() }).collect()
}

#[derive(Debug, Serialize)]
pub struct SpectrumOut {
    pub command: &'static str,
    pub settings: Settings,
    pub dim: usize,
    /// Sorted by decreasing modulus, then by argument.
    pub eigenvalues: Vec<Cx>,
    pub determinant: Cx,
    pub max_modulus: f64,
    pub one_defect: f64,
    pub conjugation_defect: f64,
    pub axioms_hold: bool,
    pub peripheral: Vec<Peripheral>,
    /// `1 − max |λ|` over the non-peripheral eigenvalues; null when every eigenvalue is peripheral.
    pub spectral_gap: Option<f64>,
}

pub fn spectrum_cmd(ch: &Channel, s: Settings) -> Result<SpectrumOut, CliError> {
    let tol = s.tol();
    let sp = spectrum(ch)?;
    let pd = peripheral_data(ch, &tol)?;
    let mut eigs = sp.eigenvalues.clone();
    eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
    let peripheral = pd.eigenvalues();
    let inner = eigs
        .iter()
        .filter(|z| peripheral.iter().all(|p| (*z - p).norm() > CLUSTER_RADIUS))
        .map(|z| z.norm())
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(SpectrumOut {
        command: "spectrum",
        settings: s,
        dim: ch.dim(),
        eigenvalues: cxs(&eigs),
        determinant: Cx(ch.determinant()),
        max_modulus: sp.max_modulus,
        one_defect: sp.one_defect,
        conjugation_defect: sp.conjugation_defect,
        axioms_hold: sp.axioms_hold(tol.equality),
        peripheral: peripheral_list(&pd),
        spectral_gap: inner.map(|r| 1.0 - r),
    })
}

#[derive(Debug, Serialize)]
pub struct Recurrence {
    pub n: usize,
    pub defect: f64,
    pub n_max: usize,
}

#[derive(Debug, Serialize)]
pub struct AttractorOut {
    pub command: &'static str,
    pub settings: Settings,
    pub dim: usize,
    pub peripheral: Vec<Peripheral>,
    pub attractor_dim: usize,
    pub attractor_basis: Vec<Mat>,
    pub fix_dim: usize,
    pub fix_basis: Vec<Mat>,
    /// Image of the identity under the projection onto the fixed points.
    pub fixed_identity: Mat,
    /// Image of the identity under the peripheral projection.
    pub peripheral_identity: Mat,
    pub projector_idempotency: f64,
    pub projector_commutation: f64,
    pub recurrence: Recurrence,
}

pub fn attractor_cmd(ch: &Channel, s: Settings, n_max: usize) -> Result<AttractorOut, CliError> {
    let tol = s.tol();
    let pd = peripheral_data(ch, &tol)?;
    let id = ComplexMatrix::identity(ch.dim(), ch.dim());
    let attractor = pd.attractor_basis(tol.equality);
    let fix = pd.fix_basis(tol.equality);
    let fixed_identity = attractor::spectral::apply_superop(&pd.fixed_projector()?, &id);
    let (idem, comm) = projector_defects(&pd, &ch.superop());
    let (n, defect) = recurrence_time(&pd, n_max);
    Ok(AttractorOut {
        command: "attractor",
        settings: s,
        dim: ch.dim(),
        peripheral: peripheral_list(&pd),
        attractor_dim: attractor.len(),
        attractor_basis: mats(&attractor),
        fix_dim: fix.len(),
        fix_basis: mats(&fix),
        fixed_identity: Mat(fixed_identity),
        peripheral_identity: Mat(pd.project(&id)),
        projector_idempotency: idem,
        projector_commutation: comm,
        recurrence: Recurrence { n, defect, n_max },
    })
}

#[derive(Debug, Serialize)]
pub struct BlockOut {
    pub d: usize,
    pub m: usize,
    pub rho: Mat,
    pub unitary: Mat,
    /// Columns ordered as `|i⟩⊗|j⟩ ↦ i·m + j`.
    pub isometry: Mat,
}

#[derive(Debug, Serialize)]
pub struct ChecksOut {
    pub attractor_span: f64,
    pub action: f64,
    pub rho_min_eigenvalue: f64,
    pub rho_defect: f64,
    pub permutation_consistent: bool,
    pub unitary_defect: f64,
    pub compression: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl From<&DecompositionChecks> for ChecksOut {
    fn from(c: &DecompositionChecks) -> Self {
        ChecksOut {
            attractor_span: c.attractor_span,
            action: c.action,
            rho_min_eigenvalue: c.rho_min_eigenvalue,
            rho_defect: c.rho_defect,
            permutation_consistent: c.permutation_consistent,
            unitary_defect: c.unitary_defect,
            compression: c.compression,
            tolerance: c.tolerance,
            passed: c.passed(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ClassificationOut {
    pub irreducible: bool,
    pub primitive: bool,
    pub unital: bool,
    pub permutation_trivial: bool,
    pub peripheral_count: usize,
    pub fix_dim: usize,
    pub notes: Vec<String>,
}

impl From<ClassificationReport> for ClassificationOut {
    fn from(c: ClassificationReport) -> Self {
        ClassificationOut {
            irreducible: c.irreducible,
            primitive: c.primitive,
            unital: c.unital,
            permutation_trivial: c.permutation_trivial,
            peripheral_count: c.peripheral_count,
            fix_dim: c.fix_dim,
            notes: c.notes,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EquivalenceOut {
    pub verdict: &'static str,
    /// `matching[k]` is the expected block paired with computed block `k`, one-based.
    pub matching: Option<Vec<usize>>,
    pub dims_match: bool,
    pub permutation_match: bool,
    pub cycle_type_match: bool,
    pub rho_defect: f64,
    pub action_defect: f64,
    pub tolerance: f64,
}

impl From<&EquivalenceReport> for EquivalenceOut {
    fn from(e: &EquivalenceReport) -> Self {
        EquivalenceOut {
            verdict: if e.passed() { "pass" } else { "fail" },
            matching: e.matching.as_deref().map(one_based),
            dims_match: e.dims_match,
            permutation_match: e.permutation_match,
            cycle_type_match: e.cycle_type_match,
            rho_defect: e.rho_defect,
            action_defect: e.action_defect,
            tolerance: e.tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DecomposeOut {
    pub command: &'static str,
    pub settings: Settings,
    pub dim: usize,
    pub h0_dim: usize,
    pub h0_isometry: Mat,
    pub blocks: Vec<BlockOut>,
    /// One-based: block `k` is sent to block `permutation[k]`.
    pub permutation: Vec<usize>,
    pub cycles: Vec<Vec<usize>>,
    pub checks: ChecksOut,
    pub classification: ClassificationOut,
    pub equivalence: Option<EquivalenceOut>,
}

/// Tolerance for comparing a computed decomposition with an expected one.
pub fn equivalence_tolerance(tol: &Tolerances) -> f64 {
    10.0 * tol.equality
}

fn blocks_out(dec: &AttractorDecomposition) -> Vec<BlockOut> {
    dec.blocks
        .iter()
        .map(|b| BlockOut {
            d: b.d,
            m: b.m,
            rho: Mat(b.rho.clone()),
            unitary: Mat(b.unitary.clone()),
            isometry: Mat(b.isometry.clone()),
        })
        .collect()
}

pub fn decompose_cmd(ch: &Channel, s: Settings, expected: Option<&UnfoldSpec>) -> Result<DecomposeOut, CliError> {
    let tol = s.tol();
    let dec = wolf_decompose_seeded(ch, &tol, s.seed)?;
    let checks = verify_decomposition(ch, &dec, &tol)?;
    let equivalence = match expected {
        Some(spec) if spec.dim() != ch.dim() => {
            return Err(CliError::input(format!(
                "expected spec has dimension {} but the channel has dimension {}",
                spec.dim(),
                ch.dim()
            )))
        }
        Some(spec) => Some(EquivalenceOut::from(&equivalence(&dec, &spec.to_decomposition(), equivalence_tolerance(&tol)))),
        None => None,
    };
    Ok(DecomposeOut {
        command: "decompose",
        settings: s,
        dim: ch.dim(),
        h0_dim: dec.h0.dim(),
        h0_isometry: Mat(dec.h0.isometry.clone()),
        blocks: blocks_out(&dec),
        permutation: one_based(&dec.permutation),
        cycles: dec.cycles().iter().map(|c| one_based(c)).collect(),
        checks: ChecksOut::from(&checks),
        classification: classify(ch, &tol)?.into(),
        equivalence,
    })
}

#[derive(Debug, Serialize)]
pub struct CycleOut {
    /// One-based block labels in cycle order.
    pub blocks: Vec<usize>,
    pub d: usize,
    pub uniform_unitary: Mat,
    pub rhos: Vec<Mat>,
    pub local_changes: Vec<Mat>,
    pub isometries: Vec<Mat>,
}

#[derive(Debug, Serialize)]
pub struct CyclesOut {
    pub command: &'static str,
    pub settings: Settings,
    pub dim: usize,
    pub h0_dim: usize,
    pub cycles: Vec<CycleOut>,
    /// Least common multiple of the cycle lengths.
    pub period: usize,
    /// `W` with `Φ^period(X) = W X W†` asymptotically.
    pub coarse_grained_unitary: Mat,
    pub fix_dim_from_cycles: usize,
    pub fix_dim_spectral: usize,
    /// Subspace distance between the two fixed-point spaces.
    pub fix_space_defect: f64,
}

pub fn cycles_cmd(ch: &Channel, s: Settings) -> Result<CyclesOut, CliError> {
    let tol = s.tol();
    let dec = wolf_decompose_seeded(ch, &tol, s.seed)?;
    let cyc = cyclic_normalize(&dec)?;
    let (period, w) = coarse_grained_unitary(&dec);
    let from_cycles = fixed_points_from_cycles(&cyc)?;
    let spectral = peripheral_data(ch, &tol)?.fix_basis(tol.equality);
    Ok(CyclesOut {
        command: "cycles",
        settings: s,
        dim: ch.dim(),
        h0_dim: dec.h0.dim(),
        cycles: cyc
            .cycles
            .iter()
            .map(|cy| CycleOut {
                blocks: one_based(&cy.block_indices),
                d: cy.uniform_unitary.nrows(),
                uniform_unitary: Mat(cy.uniform_unitary.clone()),
                rhos: mats(&cy.rhos),
                local_changes: mats(&cy.local_changes),
                isometries: mats(&cy.isometries),
            })
            .collect(),
        period,
        coarse_grained_unitary: Mat(w),
        fix_dim_from_cycles: from_cycles.len(),
        fix_dim_spectral: spectral.len(),
        fix_space_defect: span_distance(&from_cycles, &spectral),
    })
}

#[derive(Debug, Serialize)]
pub struct RecoveryOut {
    pub sigma: Mat,
    pub petz_after_channel: f64,
    pub channel_after_petz: f64,
    pub attractor_span: f64,
    pub petz_trace_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl From<&RecoveryReport> for RecoveryOut {
    fn from(r: &RecoveryReport) -> Self {
        RecoveryOut {
            sigma: Mat(r.sigma.clone()),
            petz_after_channel: r.petz_after_channel,
            channel_after_petz: r.channel_after_petz,
            attractor_span: r.attractor_span,
            petz_trace_defect: r.petz_trace_defect,
            tolerance: r.tolerance,
            passed: r.passed(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct HsUnitarityOut {
    pub hs_unitary: bool,
    pub unitary_channel: bool,
    pub norm_defect: f64,
    pub spectrum_defect: f64,
}

impl From<HsUnitarityReport> for HsUnitarityOut {
    fn from(h: HsUnitarityReport) -> Self {
        HsUnitarityOut { hs_unitary: h.hs_unitary, unitary_channel: h.unitary_channel, norm_defect: h.norm_defect, spectrum_defect: h.spectrum_defect }
    }
}

#[derive(Debug, Serialize)]
pub struct EigvecPair {
    pub eigenvalue: Cx,
    pub defect: f64,
}

#[derive(Debug, Serialize)]
pub struct EigvecOut {
    pub max_defect: f64,
    pub pairs: Vec<EigvecPair>,
}

#[derive(Debug, Serialize)]
pub struct RecoverOut {
    pub command: &'static str,
    pub settings: Settings,
    pub dim: usize,
    pub faithful: bool,
    pub recovery: RecoveryOut,
    pub hs_unitarity: HsUnitarityOut,
    /// Only defined for faithful channels.
    pub eigvec_correspondence: Option<EigvecOut>,
}

pub fn recover_cmd(ch: &Channel, s: Settings) -> Result<RecoverOut, CliError> {
    let tol = s.tol();
    let recovery = verify_recovery_on_attractor(ch, &tol)?;
    let dec = wolf_decompose_seeded(ch, &tol, s.seed)?;
    let eig = match eigvec_correspondence_check(ch, &tol) {
        Ok(e) => Some(EigvecOut {
            max_defect: e.max_defect,
            pairs: e.pairs.iter().map(|&(z, d): &(C64, f64)| EigvecPair { eigenvalue: Cx(z), defect: d }).collect(),
        }),
        Err(Error::NotFaithful { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(RecoverOut {
        command: "recover",
        settings: s,
        dim: ch.dim(),
        faithful: dec.is_faithful(),
        recovery: RecoveryOut::from(&recovery),
        hs_unitarity: hs_unitarity_report(&dec, &tol).into(),
        eigvec_correspondence: eig,
    })
}

#[derive(Debug, Serialize)]
pub struct ClassifyOut {
    pub command: &'static str,
    pub settings: Settings,
    pub dim: usize,
    #[serde(flatten)]
    pub classification: ClassificationOut,
}

pub fn classify_cmd(ch: &Channel, s: Settings) -> Result<ClassifyOut, CliError> {
    Ok(ClassifyOut { command: "classify", settings: s, dim: ch.dim(), classification: classify(ch, &s.tol())?.into() })
}

/// A channel file in Kraus form, loadable by every other subcommand.
#[derive(Debug, Serialize)]
pub struct KrausFile {
    pub dim: usize,
    pub kraus: Vec<Mat>,
}

#[derive(Debug, Serialize)]
pub struct UnfoldChecksOut {
    pub cptp: bool,
    pub min_choi_eig: f64,
    pub tp_defect: f64,
    pub collapse_rank: usize,
    pub expected_rank: usize,
    pub collapse_residual: f64,
    pub attractor_span: f64,
    pub action: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl From<&UnfoldReport> for UnfoldChecksOut {
    fn from(r: &UnfoldReport) -> Self {
        UnfoldChecksOut {
            cptp: r.cptp,
            min_choi_eig: r.min_choi_eig,
            tp_defect: r.tp_defect,
            collapse_rank: r.collapse_rank,
            expected_rank: r.expected_rank,
            collapse_residual: r.collapse_residual,
            attractor_span: r.attractor_span,
            action: r.action,
            tolerance: r.tolerance,
            passed: r.passed(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct UnfoldOut {
    pub command: &'static str,
    pub settings: Settings,
    pub channel: KrausFile,
    pub checks: UnfoldChecksOut,
}

pub fn unfold_cmd(spec: &UnfoldSpec, s: Settings) -> Result<UnfoldOut, CliError> {
    let tol = s.tol();
    let ch = unfold(spec, &tol)?;
    let report = verify_unfold(spec, &ch, &tol)?;
    let kraus = ch.kraus(tol.equality)?;
    Ok(UnfoldOut {
        command: "unfold",
        settings: s,
        channel: KrausFile { dim: ch.dim(), kraus: mats(&kraus) },
        checks: UnfoldChecksOut::from(&report),
    })
}

#[derive(Debug, Serialize)]
pub struct CptpOut {
    pub cp: bool,
    pub tp: bool,
    pub min_choi_eig: f64,
    pub tp_defect: f64,
    pub choi_hermiticity_defect: f64,
}

impl From<CptpReport> for CptpOut {
    fn from(r: CptpReport) -> Self {
        CptpOut { cp: r.cp, tp: r.tp, min_choi_eig: r.min_choi_eig, tp_defect: r.tp_defect, choi_hermiticity_defect: r.choi_hermiticity_defect }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyOut {
    pub command: &'static str,
    pub settings: Settings,
    pub dim: usize,
    /// `"computed"` when the decomposition was derived here, `"report"` when it was read from a file.
    pub source: &'static str,
    pub cptp: CptpOut,
    pub decomposition: ChecksOut,
    /// Present only when no report is given.
    pub recovery: Option<RecoveryOut>,
    pub worst_defect: f64,
    pub passed: bool,
}

pub fn verify_cmd(ch: &Channel, s: Settings, saved: Option<&AttractorDecomposition>) -> Result<VerifyOut, CliError> {
    let tol = s.tol();
    let (dec, source) = match saved {
        Some(d) => (d.clone(), "report"),
        None => (wolf_decompose_seeded(ch, &tol, s.seed)?, "computed"),
    };
    let checks = verify_decomposition(ch, &dec, &tol)?;
    let recovery = match saved {
        Some(_) => None,
        None => Some(verify_recovery_on_attractor(ch, &tol)?),
    };
    let mut worst = checks.worst_defect();
    let mut passed = checks.passed();
    if let Some(r) = &recovery {
        worst = worst.max(r.max_defect());
        passed &= r.passed();
    }
    Ok(VerifyOut {
        command: "verify",
        settings: s,
        dim: ch.dim(),
        source,
        cptp: is_cptp(ch, &tol).into(),
        decomposition: ChecksOut::from(&checks),
        recovery: recovery.as_ref().map(RecoveryOut::from),
        worst_defect: worst,
        passed,
    })
}
