//! Quantum channels in Kraus, Choi and superoperator form.
//!
//! Conventions: vectorization stacks columns, so a Kraus operator `A`
//! contributes `conj(A) ⊗ A` to the superoperator. The Choi matrix is
//! `C = Σ_ij E_ij ⊗ Φ(E_ij)` with the input factor first, which makes trace
//! preservation the statement `tr_2 C = I`.

use crate::error::{Error, Result};
use crate::linalg::{
    c, check_square, hermitian_eig, hermitian_part, hermiticity_defect, kron, matrix_exp, matrix_unit,
    max_abs, partial_trace, psd_sqrt_pinv, unvec, vec, ComplexMatrix, Keep, Tolerances, C64, I, ONE, ZERO,
};
use crate::random::{ginibre, random_density, random_hermitian, random_unitary, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum Repr {
    Kraus(Vec<ComplexMatrix>),
    Choi(ComplexMatrix),
    SuperOp(ComplexMatrix),
}

/// A linear map on `d x d` matrices, normally CPTP.
///
/// Construction only checks shapes; use [`is_cptp`] to validate. Maps that
/// are deliberately not trace preserving (the Petz map of a non-faithful
/// channel, Heisenberg-picture adjoints) use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    dim: usize,
    repr: Repr,
}

impl Channel {
    pub fn from_kraus(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops.first().ok_or(Error::Empty("Kraus list"))?;
        let d = check_square(first)?;
        if ops.iter().any(|a| a.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        Ok(Channel { dim: d, repr: Repr::Kraus(ops) })
    }

    pub fn from_choi(dim: usize, choi: ComplexMatrix) -> Result<Self> {
        if choi.shape() != (dim * dim, dim * dim) {
            return Err(Error::DimensionMismatch(format!("Choi matrix must be {0}x{0}", dim * dim)));
        }
        Ok(Channel { dim, repr: Repr::Choi(choi) })
    }

    pub fn from_superop(dim: usize, superop: ComplexMatrix) -> Result<Self> {
        if superop.shape() != (dim * dim, dim * dim) {
            return Err(Error::DimensionMismatch(format!("superoperator must be {0}x{0}", dim * dim)));
        }
        Ok(Channel { dim, repr: Repr::SuperOp(superop) })
    }

    /// Builds the superoperator of an arbitrary linear map by applying it to matrix units.
    pub fn from_map(dim: usize, map: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Channel { dim, repr: Repr::SuperOp(superop_of_map(dim, map)) }
    }

    pub fn identity(dim: usize) -> Self {
        Channel { dim, repr: Repr::Kraus(vec![ComplexMatrix::identity(dim, dim)]) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn superop(&self) -> ComplexMatrix {
        match &self.repr {
            Repr::Kraus(ops) => kraus_to_superop(ops),
            Repr::Choi(cm) => choi_to_superop(self.dim, cm),
            Repr::SuperOp(s) => s.clone(),
        }
    }

    pub fn choi(&self) -> ComplexMatrix {
        match &self.repr {
            Repr::Choi(cm) => cm.clone(),
            _ => superop_to_choi(self.dim, &self.superop()),
        }
    }

    /// Kraus operators; extracted from the Choi matrix unless stored directly.
    pub fn kraus(&self, tol: f64) -> Result<Vec<ComplexMatrix>> {
        match &self.repr {
            Repr::Kraus(ops) => Ok(ops.clone()),
            _ => choi_to_kraus(&self.choi(), tol),
        }
    }

    /// Same map, stored as a Kraus list.
    pub fn to_kraus_form(&self, tol: f64) -> Result<Channel> {
        Channel::from_kraus(self.kraus(tol)?)
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim;
        if x.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!("expected {d}x{d} input, got {}x{}", x.nrows(), x.ncols())));
        }
        Ok(match &self.repr {
            Repr::Kraus(ops) => ops.iter().fold(ComplexMatrix::zeros(d, d), |acc, a| acc + a * x * a.adjoint()),
            _ => unvec((self.superop() * vec(x)).as_slice(), d),
        })
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Channel) -> Result<Channel> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("cannot compose dims {} and {}", self.dim, other.dim)));
        }
        if let (Repr::Kraus(a), Repr::Kraus(b)) = (&self.repr, &other.repr) {
            if a.len() * b.len() <= self.dim * self.dim {
                let ops = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
                return Channel::from_kraus(ops);
            }
        }
        Channel::from_superop(self.dim, self.superop() * other.superop())
    }

    pub fn power(&self, n: usize) -> Channel {
        let d2 = self.dim * self.dim;
        let mut result = ComplexMatrix::identity(d2, d2);
        let mut base = self.superop();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        Channel { dim: self.dim, repr: Repr::SuperOp(result) }
    }

    /// Hilbert–Schmidt adjoint (Heisenberg picture). Unital, not TP in general.
    pub fn adjoint(&self) -> Channel {
        match &self.repr {
            Repr::Kraus(ops) => Channel { dim: self.dim, repr: Repr::Kraus(ops.iter().map(|a| a.adjoint()).collect()) },
            _ => Channel { dim: self.dim, repr: Repr::SuperOp(self.superop().adjoint()) },
        }
    }

    pub fn determinant(&self) -> C64 {
        self.superop().determinant()
    }
}

pub fn superop_of_map(dim: usize, map: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    let d2 = dim * dim;
    let mut s = ComplexMatrix::zeros(d2, d2);
    for j in 0..dim {
        for i in 0..dim {
            let out = map(&matrix_unit(dim, i, j));
            s.set_column(i + j * dim, &vec(&out));
        }
    }
    s
}

pub fn kraus_to_superop(ops: &[ComplexMatrix]) -> ComplexMatrix {
    let d = ops.first().map(|a| a.nrows()).unwrap_or(0);
    ops.iter().fold(ComplexMatrix::zeros(d * d, d * d), |acc, a| acc + kron(&a.conjugate(), a))
}

/// `C[i·d+a, j·d+b] = Φ(E_ij)[a,b] = S[a+b·d, i+j·d]`.
pub fn superop_to_choi(dim: usize, s: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim * dim, dim * dim, |r, col| {
        let (i, a) = (r / dim, r % dim);
        let (j, b) = (col / dim, col % dim);
        s[(a + b * dim, i + j * dim)]
    })
}

pub fn choi_to_superop(dim: usize, choi: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim * dim, dim * dim, |r, col| {
        let (a, b) = (r % dim, r / dim);
        let (i, j) = (col % dim, col / dim);
        choi[(i * dim + a, j * dim + b)]
    })
}

/// Kraus operators `A = √λ · unvec(w)` from the eigenpairs of a PSD Choi matrix.
///
/// Eigenvalues at or below `tol` are dropped; an eigenvalue below `-tol`
/// means the map is not completely positive.
pub fn choi_to_kraus(choi: &ComplexMatrix, tol: f64) -> Result<Vec<ComplexMatrix>> {
    let n = check_square(choi)?;
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::DimensionMismatch(format!("Choi dimension {n} is not a square")));
    }
    let herm = hermiticity_defect(choi);
    if herm > tol.max(1e-12) * 10.0 {
        return Err(Error::NotHermitian { defect: herm });
    }
    let (vals, vecs) = hermitian_eig(choi)?;
    if vals[0] < -tol {
        return Err(Error::NotPsd { min_eig: vals[0] });
    }
    let ops: Vec<ComplexMatrix> = vals
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, &lam)| lam > tol)
        .map(|(k, &lam)| {
            let w = vecs.column(k);
            ComplexMatrix::from_fn(d, d, |a, i| w[i * d + a] * c(lam.sqrt()))
        })
        .collect();
    if ops.is_empty() {
        return Ok(vec![ComplexMatrix::zeros(d, d)]);
    }
    Ok(ops)
}

/// Outcome of the complete-positivity / trace-preservation test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    pub cp: bool,
    pub tp: bool,
    pub min_choi_eig: f64,
    pub tp_defect: f64,
    pub choi_hermiticity_defect: f64,
}

impl CptpReport {
    pub fn is_cptp(&self) -> bool {
        self.cp && self.tp
    }
}

pub fn is_cptp(ch: &Channel, tol: &Tolerances) -> CptpReport {
    let d = ch.dim();
    let choi = ch.choi();
    let herm = hermiticity_defect(&choi);
    let min_choi_eig = hermitian_eig(&choi).map(|(v, _)| v[0]).unwrap_or(f64::NEG_INFINITY);
    let reduced = partial_trace(&choi, d, d, Keep::First).expect("Choi shape checked at construction");
    let tp_defect = max_abs(&(reduced - ComplexMatrix::identity(d, d)));
    CptpReport {
        cp: min_choi_eig >= -tol.psd && herm <= tol.equality,
        tp: tp_defect <= tol.equality,
        min_choi_eig,
        tp_defect,
        choi_hermiticity_defect: herm,
    }
}

/// A GKLS generator `L(X) = -i[H,X] + Σ (A X A† - ½{A†A, X})`.
#[derive(Debug, Clone, PartialEq)]
pub struct GklsGenerator {
    pub hamiltonian: ComplexMatrix,
    pub noise_ops: Vec<ComplexMatrix>,
}

impl GklsGenerator {
    pub fn new(hamiltonian: ComplexMatrix, noise_ops: Vec<ComplexMatrix>) -> Result<Self> {
        let d = check_square(&hamiltonian)?;
        if noise_ops.iter().any(|a| a.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("noise operators must match the Hamiltonian".into()));
        }
        let defect = hermiticity_defect(&hamiltonian);
        if defect > 1e-10 * max_abs(&hamiltonian).max(1.0) {
            return Err(Error::NotHermitian { defect });
        }
        Ok(GklsGenerator { hamiltonian, noise_ops })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Random generator: GUE-like Hamiltonian and Ginibre noise operators scaled by `1/√d`.
    pub fn random(dim: usize, num_noise: usize, seed: u64) -> Self {
        let mut rng = Rng::seed(seed);
        let h = random_hermitian(&mut rng, dim);
        let scale = c(1.0 / (dim as f64).sqrt());
        let ops = (0..num_noise).map(|_| ginibre(&mut rng, dim, dim) * scale).collect();
        GklsGenerator { hamiltonian: h, noise_ops: ops }
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let h = &self.hamiltonian;
        let mut out = (h * x - x * h) * (-I);
        for a in &self.noise_ops {
            let ada = a.adjoint() * a;
            out += a * x * a.adjoint() - (&ada * x + x * &ada) * c(0.5);
        }
        out
    }
}

/// Superoperator of the generator under column stacking.
pub fn gkls_superop(g: &GklsGenerator) -> ComplexMatrix {
    let d = g.dim();
    let id = ComplexMatrix::identity(d, d);
    let h = &g.hamiltonian;
    let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * (-I);
    for a in &g.noise_ops {
        let ada = a.adjoint() * a;
        l += kron(&a.conjugate(), a) - (kron(&id, &ada) + kron(&ada.transpose(), &id)) * c(0.5);
    }
    l
}

/// The Markovian channel `e^L`.
pub fn markovian_channel(g: &GklsGenerator) -> Result<Channel> {
    let d = g.dim();
    Channel::from_superop(d, matrix_exp(&gkls_superop(g))?)
}

/// Parameters for the built-in channels. Unused fields are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZooParams {
    pub dim: Option<usize>,
    pub rho: Option<ComplexMatrix>,
    pub unitary: Option<ComplexMatrix>,
    pub rank: Option<usize>,
    pub blocks: Option<Vec<usize>>,
    pub num_kraus: Option<usize>,
    pub num_noise: Option<usize>,
    pub seed: Option<u64>,
}

pub const ZOO_NAMES: [&str; 8] =
    ["identity", "unitary", "contraction", "pauli_xz", "wolf_indivisible", "pinching", "random_kraus", "random_gkls"];

/// Built-in channels.
///
/// * `identity`: `dim` (default 2)
/// * `unitary`: `unitary`, or a Haar-random one from `dim`/`seed`
/// * `contraction`: `X ↦ tr(X) ρ`; `rho`, or random from `dim`/`rank`/`seed`
/// * `pauli_xz`: `½(σ1 X σ1 + σ3 X σ3)`
/// * `wolf_indivisible`: `⅓(Xᵀ + tr(X) I)` on a qubit
/// * `pinching`: `Σ P_k X P_k` for consecutive diagonal blocks of sizes `blocks`
/// * `random_kraus`: `num_kraus` Ginibre operators normalized to be TP
/// * `random_gkls`: `e^L` for a random generator with `num_noise` noise operators
pub fn zoo(name: &str, params: &ZooParams) -> Result<Channel> {
    let seed = params.seed.unwrap_or(0);
    let dim = params.dim.unwrap_or(2);
    if dim == 0 {
        return Err(Error::InvalidParams("dim must be positive".into()));
    }
    match name {
        "identity" => Ok(Channel::identity(dim)),
        "unitary" => {
            let u = match &params.unitary {
                Some(u) => {
                    let defect = crate::linalg::unitarity_defect(u);
                    if defect > 1e-8 {
                        return Err(Error::NotUnitary { defect });
                    }
                    u.clone()
                }
                None => random_unitary(&mut Rng::seed(seed), dim),
            };
            Channel::from_kraus(vec![u])
        }
        "contraction" => {
            let rho = match &params.rho {
                Some(r) => r.clone(),
                None => random_density(&mut Rng::seed(seed), dim, params.rank.unwrap_or(dim).clamp(1, dim)),
            };
            contraction(&rho)
        }
        "pauli_xz" => {
            let [s1, _, s3] = crate::linalg::pauli();
            let h = c(std::f64::consts::FRAC_1_SQRT_2);
            Channel::from_kraus(vec![s1 * h, s3 * h])
        }
        "wolf_indivisible" => Ok(Channel::from_map(2, |x| {
            (x.transpose() + ComplexMatrix::identity(2, 2) * x.trace()) * c(1.0 / 3.0)
        })),
        "pinching" => {
            let blocks = params.blocks.clone().unwrap_or_else(|| vec![1; dim]);
            if blocks.is_empty() || blocks.contains(&0) {
                return Err(Error::InvalidParams("pinching blocks must be positive".into()));
            }
            let n: usize = blocks.iter().sum();
            let mut off = 0;
            let ops = blocks
                .iter()
                .map(|&b| {
                    let p = ComplexMatrix::from_fn(n, n, |i, j| if i == j && i >= off && i < off + b { ONE } else { ZERO });
                    off += b;
                    p
                })
                .collect();
            Channel::from_kraus(ops)
        }
        "random_kraus" => Ok(random_kraus_channel(dim, params.num_kraus.unwrap_or(2).max(1), seed)),
        "random_gkls" => markovian_channel(&GklsGenerator::random(dim, params.num_noise.unwrap_or(2), seed)),
        other => Err(Error::UnknownChannel(other.to_string())),
    }
}

/// `X ↦ tr(X) ρ` with Kraus operators `√p_a |v_a⟩⟨j|`.
pub fn contraction(rho: &ComplexMatrix) -> Result<Channel> {
    let d = check_square(rho)?;
    let (vals, vecs) = hermitian_eig(rho)?;
    if vals[0] < -1e-10 || (rho.trace() - ONE).norm() > 1e-8 {
        return Err(Error::InvalidParams("contraction target must be a density matrix".into()));
    }
    let mut ops = Vec::new();
    for (a, &p) in vals.iter().enumerate() {
        if p <= 1e-15 {
            continue;
        }
        for j in 0..d {
            let mut k = ComplexMatrix::zeros(d, d);
            for r in 0..d {
                k[(r, j)] = vecs[(r, a)] * c(p.sqrt());
            }
            ops.push(k);
        }
    }
    Channel::from_kraus(ops)
}

/// Ginibre Kraus operators normalized by `(Σ A†A)^{-1/2}`, so the result is exactly TP.
pub fn random_kraus_channel(dim: usize, num_kraus: usize, seed: u64) -> Channel {
    let mut rng = Rng::seed(seed);
    let raw: Vec<ComplexMatrix> = (0..num_kraus).map(|_| ginibre(&mut rng, dim, dim)).collect();
    let total = raw.iter().fold(ComplexMatrix::zeros(dim, dim), |acc, a| acc + a.adjoint() * a);
    let (_, inv_sqrt) = psd_sqrt_pinv(&hermitian_part(&total), 1e-14).expect("Gram matrix of Ginibre operators is PD");
    Channel { dim, repr: Repr::Kraus(raw.into_iter().map(|a| a * &inv_sqrt).collect()) }
}
