//! Block decomposition of the attractor subspace.
//!
//! Every channel has an attractor of the form
//! `0 ⊕ ⨁_k B(H_k1) ⊗ C ρ_k`, on which it acts as
//! `x_k ↦ U_k x_π(k) U_k†`. [`wolf_decompose`] recovers `(d_k, m_k, ρ_k, U_k, π)`
//! numerically: it compresses to the support of the maximum-rank fixed state,
//! turns the attractor into a unital *-algebra by `σ^{-1/2} · σ^{-1/2}`
//! conjugation, splits that algebra into full matrix blocks, and reads the
//! remaining data from the channel's action on the blocks.

use crate::channel::{is_cptp, Channel};
use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eig, hermitian_part, hermiticity_defect, hs_inner, hs_norm, kron, matrix_unit, max_abs,
    null_space, orthonormalize, partial_trace, psd_sqrt_pinv, span_distance, span_residual, support_isometry,
    svd_full, unitarity_defect, unitary_mth_root, vec, ComplexMatrix, Keep, Subspace, Tolerances, C64, ONE,
};
use crate::random::Rng;
use crate::spectral::{apply_superop, peripheral_data, peripheral_data_of_superop, PeripheralData};

pub const DEFAULT_SEED: u64 = 0x5eed;

const FACTORIZE_ATTEMPTS: u64 = 5;

/// Tolerance for the internal consistency checks between pipeline stages.
fn stage_tol(tol: &Tolerances) -> f64 {
    tol.equality * 100.0
}

/// One block `H_k1 ⊗ H_k2` of the decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub d: usize,
    pub m: usize,
    /// Isometry `C^d ⊗ C^m → H` (ambient coordinates), column `i·m + j` ↔ `|i⟩ ⊗ |j⟩`.
    pub isometry: ComplexMatrix,
    pub rho: ComplexMatrix,
    pub unitary: ComplexMatrix,
}

impl Block {
    /// `V (x ⊗ ρ) V†`.
    pub fn inject(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &self.isometry * kron(x, &self.rho) * self.isometry.adjoint()
    }

    /// Least-squares inverse of [`Block::inject`]: `tr_2[(I ⊗ ρ) V† Y V] / tr ρ²`.
    pub fn extract(&self, y: &ComplexMatrix) -> ComplexMatrix {
        let inner = self.isometry.adjoint() * y * &self.isometry;
        let weighted = kron(&ComplexMatrix::identity(self.d, self.d), &self.rho) * inner;
        let purity = (&self.rho * &self.rho).trace().re;
        partial_trace(&weighted, self.d, self.m, Keep::First).expect("block shapes are consistent") / c(purity)
    }

    pub fn range_projector(&self) -> ComplexMatrix {
        &self.isometry * self.isometry.adjoint()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorDecomposition {
    /// Support of `P(I)`.
    pub h0: Subspace,
    pub blocks: Vec<Block>,
    /// `permutation[k] = π(k)`, zero-based.
    pub permutation: Vec<usize>,
}

impl AttractorDecomposition {
    pub fn dim(&self) -> usize {
        self.h0.ambient_dim()
    }

    /// Block components `x_k` of an operator, with the relative residual of the reconstruction.
    pub fn components(&self, x: &ComplexMatrix) -> (Vec<ComplexMatrix>, f64) {
        let parts: Vec<ComplexMatrix> = self.blocks.iter().map(|b| b.extract(x)).collect();
        let rebuilt = self.assemble(&parts);
        let residual = hs_norm(&(x - rebuilt)) / hs_norm(x).max(1.0);
        (parts, residual)
    }

    /// `⨁_k x_k ⊗ ρ_k` in ambient coordinates.
    pub fn assemble(&self, parts: &[ComplexMatrix]) -> ComplexMatrix {
        let n = self.dim();
        self.blocks.iter().zip(parts).fold(ComplexMatrix::zeros(n, n), |acc, (b, x)| acc + b.inject(x))
    }

    /// HS-orthonormal basis of the attractor described by the decomposition.
    pub fn attractor_basis(&self) -> Vec<ComplexMatrix> {
        let mut items = Vec::new();
        for b in &self.blocks {
            for i in 0..b.d {
                for j in 0..b.d {
                    items.push(b.inject(&matrix_unit(b.d, i, j)));
                }
            }
        }
        orthonormalize(&items, 1e-10).unwrap_or_default()
    }

    /// `P_P(I)` for a faithful channel: `⨁ m_k I ⊗ ρ_k`.
    pub fn peripheral_identity(&self) -> ComplexMatrix {
        let parts: Vec<ComplexMatrix> =
            self.blocks.iter().map(|b| ComplexMatrix::identity(b.d, b.d) * c(b.m as f64)).collect();
        self.assemble(&parts)
    }

    pub fn is_faithful(&self) -> bool {
        self.h0.dim() == self.dim()
    }

    pub fn cycles(&self) -> Vec<Vec<usize>> {
        permutation_cycles(&self.permutation)
    }
}

/// Disjoint cycles `k → π(k) → π²(k) → …`, each starting at its smallest index.
pub fn permutation_cycles(perm: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            cycle.push(k);
            k = perm[k];
        }
        out.push(cycle);
    }
    out
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter().all(|&p| p < seen.len() && !std::mem::replace(&mut seen[p], true))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm_of(values: impl IntoIterator<Item = usize>) -> usize {
    values.into_iter().fold(1, |acc, v| acc / gcd(acc, v) * v)
}

/// Isometry onto `supp P(I)`.
pub fn support_space(ch: &Channel, tol: &Tolerances) -> Result<Subspace> {
    let pd = peripheral_data(ch, tol)?;
    support_from(&pd, ch.dim(), tol)
}

fn fixed_identity(pd: &PeripheralData, dim: usize) -> Result<ComplexMatrix> {
    let p = pd.fixed_projector()?;
    Ok(hermitian_part(&apply_superop(&p, &ComplexMatrix::identity(dim, dim))))
}

fn support_from(pd: &PeripheralData, dim: usize, tol: &Tolerances) -> Result<Subspace> {
    let p_id = fixed_identity(pd, dim)?;
    Subspace::new(support_isometry(&p_id, tol.equality)?)
}

/// `σ = P(I) / tr P(I)`.
pub fn max_rank_fixed_state(ch: &Channel, tol: &Tolerances) -> Result<ComplexMatrix> {
    let pd = peripheral_data(ch, tol)?;
    let p_id = fixed_identity(&pd, ch.dim())?;
    let t = p_id.trace();
    Ok(p_id / t)
}

/// Superoperator of `y ↦ V† Φ(V y V†) V`.
fn compress_superop(s: &ComplexMatrix, v: &ComplexMatrix) -> ComplexMatrix {
    let left = kron(&v.transpose(), &v.adjoint());
    let right = kron(&v.conjugate(), v);
    left * s * right
}

/// The induced faithful channel on `B(H_0)`.
pub fn induced_faithful(ch: &Channel, tol: &Tolerances) -> Result<Channel> {
    let h0 = support_space(ch, tol)?;
    induced_on(ch, &h0, tol)
}

fn induced_on(ch: &Channel, h0: &Subspace, tol: &Tolerances) -> Result<Channel> {
    let s = compress_superop(&ch.superop(), &h0.isometry);
    let faithful = Channel::from_superop(h0.dim(), s)?;
    let report = is_cptp(&faithful, &Tolerances { equality: stage_tol(tol), psd: stage_tol(tol), ..*tol });
    if !report.tp {
        return Err(Error::Stage { stage: "induced faithful channel is not trace preserving", defect: report.tp_defect });
    }
    Ok(faithful)
}

/// HS-orthonormal basis of `σ^{-1/2} Attr(Φ) σ^{-1/2}`, checked to be a unital *-algebra.
pub fn dagger_attractor_algebra(ch: &Channel, sigma: &ComplexMatrix, tol: &Tolerances) -> Result<Vec<ComplexMatrix>> {
    let pd = peripheral_data(ch, tol)?;
    algebra_from(&pd, sigma, tol)
}

fn algebra_from(pd: &PeripheralData, sigma: &ComplexMatrix, tol: &Tolerances) -> Result<Vec<ComplexMatrix>> {
    let n = sigma.nrows();
    let (_, isq) = psd_sqrt_pinv(sigma, tol.equality)?;
    let distorted: Vec<ComplexMatrix> = pd.right_vectors().iter().map(|x| &isq * x * &isq).collect();
    let basis = orthonormalize(&distorted, tol.equality)?;
    let defect = algebra_defect(&basis, n);
    if defect > stage_tol(tol) {
        return Err(Error::Stage { stage: "attractor algebra closure", defect });
    }
    Ok(basis)
}

/// Worst failure of closure under products and adjoints, and of containing the identity.
pub fn algebra_defect(basis: &[ComplexMatrix], n: usize) -> f64 {
    // Residuals are weighted by the element's norm so that products that
    // vanish up to rounding do not count as escaping the span.
    let residual = |x: &ComplexMatrix| span_residual(std::slice::from_ref(x), basis) * hs_norm(x).min(1.0);
    let mut worst = span_residual(&[ComplexMatrix::identity(n, n)], basis);
    for a in basis {
        worst = worst.max(residual(&a.adjoint()));
        for b in basis {
            worst = worst.max(residual(&(a * b)));
        }
    }
    worst
}

/// One simple factor `B(C^d) ⊗ I_m` of a finite-dimensional *-algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub d: usize,
    pub m: usize,
    /// Column `i·m + j` ↔ `|i⟩ ⊗ |j⟩`; the factor is `V (B(C^d) ⊗ I_m) V†`.
    pub isometry: ComplexMatrix,
}

/// Groups sorted real eigenvalues into clusters separated by more than `gap`.
fn real_clusters(vals: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        match out.last_mut() {
            Some(last) if v - vals[*last.last().unwrap()] <= gap => last.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

fn combination(rng: &mut Rng, basis: &[ComplexMatrix]) -> ComplexMatrix {
    let (r, cc) = basis[0].shape();
    basis
        .iter()
        .fold(ComplexMatrix::zeros(r, cc), |acc, b| acc + b * C64::new(rng.normal(), rng.normal()))
}

fn columns_of(vecs: &ComplexMatrix, idx: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(vecs.nrows(), idx.len(), |r, j| vecs[(r, idx[j])])
}

/// Wedderburn factorization of a unital *-algebra given by an HS-orthonormal basis.
pub fn algebra_factorize(basis: &[ComplexMatrix], tol: &Tolerances, seed: u64) -> Result<Vec<Factor>> {
    let mut last = Error::Factorization("no attempt made".into());
    for attempt in 0..FACTORIZE_ATTEMPTS {
        match factorize_once(basis, tol, &mut Rng::seed(seed.wrapping_add(attempt))) {
            Ok(f) => return Ok(f),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn factorize_once(basis: &[ComplexMatrix], tol: &Tolerances, rng: &mut Rng) -> Result<Vec<Factor>> {
    let first = basis.first().ok_or(Error::Empty("algebra basis"))?;
    let n = first.nrows();
    let cut = stage_tol(tol).sqrt();
    // Center: coefficient vectors c with Σ_j c_j [B_j, B_i] = 0 for all i.
    let nb = basis.len();
    let mut system = ComplexMatrix::zeros(nb * n * n, nb);
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            let comm = bj * bi - bi * bj;
            system.view_mut((i * n * n, j), (n * n, 1)).copy_from(&vec(&comm));
        }
    }
    let (coeffs, _) = null_space(&system, cut, None);
    let center: Vec<ComplexMatrix> = (0..coeffs.ncols())
        .map(|l| basis.iter().enumerate().fold(ComplexMatrix::zeros(n, n), |acc, (j, b)| acc + b * coeffs[(j, l)]))
        .collect();
    if center.is_empty() {
        return Err(Error::Factorization("algebra has trivial center; identity missing".into()));
    }
    let z = hermitian_part(&combination(rng, &center));
    let (vals, vecs) = hermitian_eig(&z)?;
    let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let groups = real_clusters(&vals, cut * scale);
    if groups.len() != center.len() {
        return Err(Error::Factorization(format!(
            "central element has {} eigenvalue clusters, center has dimension {}",
            groups.len(),
            center.len()
        )));
    }
    let mut factors = Vec::new();
    for g in groups {
        let w = columns_of(&vecs, &g);
        let r = g.len();
        let compressed: Vec<ComplexMatrix> = basis.iter().map(|b| w.adjoint() * b * &w).collect();
        let local = orthonormalize(&compressed, cut)?;
        let d = (local.len() as f64).sqrt().round() as usize;
        if d * d != local.len() || d == 0 || r % d != 0 {
            return Err(Error::Factorization(format!("block of rank {r} carries a {}-dimensional algebra", local.len())));
        }
        let m = r / d;
        let h = hermitian_part(&combination(rng, &local));
        let (hv, hvecs) = hermitian_eig(&h)?;
        let hscale = hv.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
        let hg = real_clusters(&hv, cut * hscale);
        if hg.len() != d || hg.iter().any(|x| x.len() != m) {
            return Err(Error::Factorization("generic block element has non-uniform eigenvalue multiplicities".into()));
        }
        let e: Vec<ComplexMatrix> = hg.iter().map(|idx| columns_of(&hvecs, idx)).collect();
        let link = combination(rng, &local);
        let mut iso = ComplexMatrix::zeros(n, d * m);
        for (i, ei) in e.iter().enumerate() {
            let t = ei.adjoint() * &link * &e[0];
            let scale = ((t.adjoint() * &t).trace().re / m as f64).sqrt();
            if scale < cut {
                return Err(Error::Factorization("random algebra element does not link eigenspaces".into()));
            }
            let fi = ei * t / c(scale);
            iso.view_mut((0, i * m), (n, m)).copy_from(&(&w * fi));
        }
        factors.push(Factor { d, m, isometry: iso });
    }
    Ok(factors)
}

/// Unitary nearest to `u` (polar factor), with the first non-negligible entry
/// in row-major order made real and positive.
fn gauge_unitary(u: &ComplexMatrix) -> ComplexMatrix {
    let (a, _, b) = svd_full(u);
    let polar = a * b.adjoint();
    let d = polar.nrows();
    for i in 0..d {
        for j in 0..d {
            let z = polar[(i, j)];
            if z.norm() > 1e-6 {
                return &polar * (z.conj() / c(z.norm()));
            }
        }
    }
    polar
}

/// Unitary `U` from the map `x ↦ U x U†` sampled on matrix units.
fn unitary_from_conjugation(t: impl Fn(&ComplexMatrix) -> ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    let t11 = hermitian_part(&t(&matrix_unit(d, 0, 0)));
    let (vals, vecs) = hermitian_eig(&t11)?;
    let top = vals[d - 1];
    let u1 = vecs.column(d - 1) * c(top.max(0.0).sqrt());
    let mut u = ComplexMatrix::zeros(d, d);
    u.set_column(0, &u1);
    for j in 1..d {
        let col = t(&matrix_unit(d, j, 0)) * &u1;
        u.set_column(j, &col);
    }
    Ok(gauge_unitary(&u))
}

pub fn wolf_decompose(ch: &Channel, tol: &Tolerances) -> Result<AttractorDecomposition> {
    wolf_decompose_seeded(ch, tol, DEFAULT_SEED)
}

pub fn wolf_decompose_seeded(ch: &Channel, tol: &Tolerances, seed: u64) -> Result<AttractorDecomposition> {
    tol.validate()?;
    let pd = peripheral_data(ch, tol)?;
    let h0 = support_from(&pd, ch.dim(), tol)?;
    let v = h0.isometry.clone();
    let n0 = h0.dim();
    let faithful = induced_on(ch, &h0, tol)?;
    let s = faithful.superop();
    let fpd = peripheral_data_of_superop(n0, &s, tol)?;
    let p_id = fixed_identity(&pd, ch.dim())?;
    let sigma = hermitian_part(&(v.adjoint() * &p_id * &v));
    let sigma = &sigma / sigma.trace();

    let fixed_drift = max_abs(&(apply_superop(&s, &sigma) - &sigma));
    if fixed_drift > stage_tol(tol) {
        return Err(Error::Stage { stage: "maximum-rank fixed state", defect: fixed_drift });
    }

    let algebra = algebra_from(&fpd, &sigma, tol)?;
    let factors = if algebra.len() == 1 {
        vec![Factor { d: 1, m: n0, isometry: ComplexMatrix::identity(n0, n0) }]
    } else {
        let mut f = algebra_factorize(&algebra, tol, seed)?;
        f.sort_by(|a, b| block_order_key(&a.isometry).total_cmp(&block_order_key(&b.isometry)));
        f
    };
    let total: usize = factors.iter().map(|f| f.d * f.m).sum();
    if total != n0 {
        return Err(Error::Stage { stage: "block dimensions do not fill the support", defect: (n0 - total) as f64 });
    }

    // ρ_k from P̃_P(I) = ⨁ m_k I ⊗ ρ_k.
    let pp_id = fpd.project(&ComplexMatrix::identity(n0, n0));
    let mut blocks: Vec<Block> = Vec::with_capacity(factors.len());
    for f in &factors {
        let local = hermitian_part(&(f.isometry.adjoint() * &pp_id * &f.isometry));
        let rho = partial_trace(&local, f.d, f.m, Keep::Second)?;
        let rho = hermitian_part(&(&rho / rho.trace()));
        blocks.push(Block {
            d: f.d,
            m: f.m,
            isometry: f.isometry.clone(),
            rho,
            unitary: ComplexMatrix::identity(f.d, f.d),
        });
    }

    // π from Φ̃†(Q_j) = Q_π(j).
    let adj = s.adjoint();
    let projs: Vec<ComplexMatrix> = blocks.iter().map(Block::range_projector).collect();
    let mut permutation = Vec::with_capacity(blocks.len());
    let mut perm_defect = 0.0_f64;
    for q in &projs {
        let image = apply_superop(&adj, q);
        let ni = hs_norm(&image).max(1e-300);
        let best = projs
            .iter()
            .enumerate()
            .map(|(k, p)| (k, hs_inner(p, &image).re / (hs_norm(p) * ni)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one block");
        if best.1 <= 0.5 {
            return Err(Error::Stage { stage: "permutation matching", defect: 1.0 - best.1 });
        }
        perm_defect = perm_defect.max(max_abs(&(image - &projs[best.0])));
        permutation.push(best.0);
    }
    if !is_permutation(&permutation) {
        return Err(Error::Stage { stage: "permutation is not a bijection", defect: 1.0 });
    }
    if perm_defect > stage_tol(tol) {
        return Err(Error::Stage { stage: "permutation matching", defect: perm_defect });
    }
    for (k, &pk) in permutation.iter().enumerate() {
        if blocks[k].d != blocks[pk].d {
            return Err(Error::Stage { stage: "permuted blocks differ in dimension", defect: 1.0 });
        }
    }

    // U_k from T_k(x) = extract_k(Φ̃(inject_π(k)(x))) = U_k x U_k†.
    let mut unitaries = Vec::with_capacity(blocks.len());
    for (k, &pk) in permutation.iter().enumerate() {
        let source = &blocks[pk];
        let target = &blocks[k];
        let t = |x: &ComplexMatrix| target.extract(&apply_superop(&s, &source.inject(x)));
        unitaries.push(unitary_from_conjugation(t, target.d)?);
    }
    for (b, u) in blocks.iter_mut().zip(unitaries) {
        b.unitary = u;
        b.isometry = &v * &b.isometry;
    }
    let dec = AttractorDecomposition { h0, blocks, permutation };

    let action = action_defect(ch, &dec, &pd.attractor_basis(tol.equality));
    if action > stage_tol(tol) {
        return Err(Error::Stage { stage: "asymptotic action", defect: action });
    }
    Ok(dec)
}

/// Orders blocks by the centroid of their range projector's diagonal.
fn block_order_key(iso: &ComplexMatrix) -> f64 {
    let p = iso * iso.adjoint();
    let w: f64 = (0..p.nrows()).map(|i| p[(i, i)].re).sum();
    (0..p.nrows()).map(|i| i as f64 * p[(i, i)].re).sum::<f64>() / w.max(1e-300)
}

fn action_defect(ch: &Channel, dec: &AttractorDecomposition, basis: &[ComplexMatrix]) -> f64 {
    basis
        .iter()
        .map(|x| {
            let want = ch.apply(x).expect("dimensions agree");
            let (parts, residual) = dec.components(x);
            let got = apply_parts(dec, &parts);
            max_abs(&(want - got)).max(residual)
        })
        .fold(0.0, f64::max)
}

fn apply_parts(dec: &AttractorDecomposition, parts: &[ComplexMatrix]) -> ComplexMatrix {
    let images: Vec<ComplexMatrix> = dec
        .blocks
        .iter()
        .zip(&dec.permutation)
        .map(|(b, &pk)| &b.unitary * &parts[pk] * b.unitary.adjoint())
        .collect();
    dec.assemble(&images)
}

/// Relative residual above which an operator is considered outside the attractor.
pub const ATTRACTOR_RESIDUAL: f64 = 1e-6;

/// `Φ̂_P(X) = 0 ⊕ ⨁ U_k x_π(k) U_k† ⊗ ρ_k`.
pub fn apply_asymptotic(dec: &AttractorDecomposition, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = dec.dim();
    if x.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("expected {n}x{n} operator")));
    }
    let (parts, residual) = dec.components(x);
    if residual > ATTRACTOR_RESIDUAL {
        return Err(Error::OutsideAttractor { residual });
    }
    Ok(apply_parts(dec, &parts))
}

/// `(L, W)` where `L` is the lcm of the cycle lengths and `Φ̂_P^L(X) = W X W†` on the attractor.
pub fn coarse_grained_unitary(dec: &AttractorDecomposition) -> (usize, ComplexMatrix) {
    let l = lcm_of(dec.cycles().iter().map(Vec::len));
    let n = dec.dim();
    let mut w = ComplexMatrix::zeros(n, n);
    for (k, b) in dec.blocks.iter().enumerate() {
        let mut prod = ComplexMatrix::identity(b.d, b.d);
        let mut j = k;
        for _ in 0..l {
            prod = &prod * &dec.blocks[j].unitary;
            j = dec.permutation[j];
        }
        w += &b.isometry * kron(&prod, &ComplexMatrix::identity(b.m, b.m)) * b.isometry.adjoint();
    }
    (l, w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    /// Blocks `k_1, …, k_M` with `π(k_j) = k_{j+1}`.
    pub block_indices: Vec<usize>,
    pub uniform_unitary: ComplexMatrix,
    pub rhos: Vec<ComplexMatrix>,
    /// `V_{k_j}` with `V_{k_j} U_{k_j} V_{k_{j+1}}† = uniform_unitary`.
    pub local_changes: Vec<ComplexMatrix>,
    /// Block isometries after the local basis change, `V_k^{old} (V_k† ⊗ I)`.
    pub isometries: Vec<ComplexMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicDecomposition {
    pub h0: Subspace,
    pub cycles: Vec<Cycle>,
    pub permutation: Vec<usize>,
}

impl CyclicDecomposition {
    /// The same asymptotic map written as an [`AttractorDecomposition`] with
    /// one unitary per cycle.
    pub fn to_decomposition(&self) -> AttractorDecomposition {
        let total: usize = self.cycles.iter().map(|cy| cy.block_indices.len()).sum();
        let mut slots: Vec<Option<Block>> = vec![None; total];
        for cy in &self.cycles {
            for (j, &k) in cy.block_indices.iter().enumerate() {
                let d = cy.uniform_unitary.nrows();
                slots[k] = Some(Block {
                    d,
                    m: cy.rhos[j].nrows(),
                    isometry: cy.isometries[j].clone(),
                    rho: cy.rhos[j].clone(),
                    unitary: cy.uniform_unitary.clone(),
                });
            }
        }
        AttractorDecomposition {
            h0: self.h0.clone(),
            blocks: slots.into_iter().map(|b| b.expect("cycles cover every block")).collect(),
            permutation: self.permutation.clone(),
        }
    }
}

pub fn cyclic_normalize(dec: &AttractorDecomposition) -> Result<CyclicDecomposition> {
    let mut cycles = Vec::new();
    for idx in dec.cycles() {
        let d = dec.blocks[idx[0]].d;
        let product = idx.iter().fold(ComplexMatrix::identity(d, d), |acc, &k| acc * &dec.blocks[k].unitary);
        let w = unitary_mth_root(&product, idx.len())?;
        let mut changes = vec![ComplexMatrix::identity(d, d)];
        for j in 0..idx.len() - 1 {
            let next = w.adjoint() * &changes[j] * &dec.blocks[idx[j]].unitary;
            changes.push(next);
        }
        let isometries = idx
            .iter()
            .zip(&changes)
            .map(|(&k, vk)| {
                let b = &dec.blocks[k];
                &b.isometry * kron(&vk.adjoint(), &ComplexMatrix::identity(b.m, b.m))
            })
            .collect();
        cycles.push(Cycle {
            rhos: idx.iter().map(|&k| dec.blocks[k].rho.clone()).collect(),
            block_indices: idx,
            uniform_unitary: w,
            local_changes: changes,
            isometries,
        });
    }
    Ok(CyclicDecomposition { h0: dec.h0.clone(), cycles, permutation: dec.permutation.clone() })
}

/// Basis of `Fix(Φ) = 0 ⊕ ⨁_ℓ {U_ℓ}' ⊗ ρ̃_ℓ`, with `ρ̃_ℓ` the uniform mixture of the cycle's states.
pub fn fixed_points_from_cycles(cyc: &CyclicDecomposition) -> Result<Vec<ComplexMatrix>> {
    let n = cyc.h0.ambient_dim();
    let mut items = Vec::new();
    for cy in &cyc.cycles {
        let len = cy.block_indices.len() as f64;
        let w = &cy.uniform_unitary;
        let d = w.nrows();
        let id = ComplexMatrix::identity(d, d);
        // Commutant of W: null space of y ↦ W y − y W.
        let comm = kron(&id, w) - kron(&w.transpose(), &id);
        let (kernel, _) = null_space(&comm, 1e-7, None);
        for col in kernel.column_iter() {
            let y = crate::linalg::unvec(col.as_slice(), d);
            let mut total = ComplexMatrix::zeros(n, n);
            for (iso, rho) in cy.isometries.iter().zip(&cy.rhos) {
                total += iso * kron(&y, &(rho / c(len))) * iso.adjoint();
            }
            items.push(total);
        }
    }
    orthonormalize(&items, 1e-10)
}

/// Distorted product `a P_P(I)^{-1} b` on the attractor of a faithful channel.
pub fn star_product(dec: &AttractorDecomposition, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !dec.is_faithful() {
        return Err(Error::NotFaithful { support: dec.h0.dim(), dim: dec.dim() });
    }
    for x in [a, b] {
        let (_, residual) = dec.components(x);
        if residual > ATTRACTOR_RESIDUAL {
            return Err(Error::OutsideAttractor { residual });
        }
    }
    let pp = dec.peripheral_identity();
    let inv = pp.pseudo_inverse(1e-12).map_err(|e| Error::Solver(e.to_string()))?;
    Ok(a * inv * b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionChecks {
    /// (a) distance between the decomposition's attractor span and the spectral one.
    pub attractor_span: f64,
    /// (b) worst `‖Φ(X) − Φ̂_P(X)‖` over the spectral attractor basis.
    pub action: f64,
    /// (c) smallest eigenvalue over all `ρ_k`.
    pub rho_min_eigenvalue: f64,
    /// (c) worst trace or Hermiticity defect over all `ρ_k`.
    pub rho_defect: f64,
    /// (d) `π` is a bijection with `d_π(k) = d_k`.
    pub permutation_consistent: bool,
    /// Worst unitarity defect over all `U_k`.
    pub unitary_defect: f64,
    /// (e) distance between `Attr(Φ)` and `0 ⊕ Attr(Φ̃)`.
    pub compression: f64,
    pub tolerance: f64,
}

impl DecompositionChecks {
    pub fn passed(&self) -> bool {
        self.attractor_span <= self.tolerance
            && self.action <= self.tolerance
            && self.rho_min_eigenvalue > 0.0
            && self.rho_defect <= self.tolerance
            && self.permutation_consistent
            && self.unitary_defect <= self.tolerance
            && self.compression <= self.tolerance
    }

    pub fn worst_defect(&self) -> f64 {
        [self.attractor_span, self.action, self.rho_defect, self.unitary_defect, self.compression]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn verify_decomposition(ch: &Channel, dec: &AttractorDecomposition, tol: &Tolerances) -> Result<DecompositionChecks> {
    let pd = peripheral_data(ch, tol)?;
    let spectral = pd.attractor_basis(tol.equality);
    let attractor_span = span_distance(&dec.attractor_basis(), &spectral);
    let action = action_defect(ch, dec, &spectral);
    let mut rho_min_eigenvalue = f64::INFINITY;
    let mut rho_defect = 0.0_f64;
    let mut unitary_defect = 0.0_f64;
    for b in &dec.blocks {
        let (vals, _) = hermitian_eig(&hermitian_part(&b.rho))?;
        rho_min_eigenvalue = rho_min_eigenvalue.min(vals[0]);
        rho_defect = rho_defect.max(hermiticity_defect(&b.rho)).max((b.rho.trace() - ONE).norm());
        unitary_defect = unitary_defect.max(unitarity_defect(&b.unitary));
    }
    let permutation_consistent = dec.permutation.len() == dec.blocks.len()
        && is_permutation(&dec.permutation)
        && dec.permutation.iter().enumerate().all(|(k, &p)| dec.blocks[k].d == dec.blocks[p].d);
    let compression = match induced_on(ch, &dec.h0, tol) {
        Ok(faithful) => {
            let fpd = peripheral_data(&faithful, tol)?;
            let v = &dec.h0.isometry;
            let embedded: Vec<ComplexMatrix> = fpd.right_vectors().iter().map(|y| v * y * v.adjoint()).collect();
            span_distance(&orthonormalize(&embedded, tol.equality).unwrap_or_default(), &spectral)
        }
        Err(_) => f64::INFINITY,
    };
    Ok(DecompositionChecks {
        attractor_span,
        action,
        rho_min_eigenvalue,
        rho_defect,
        permutation_consistent,
        unitary_defect,
        compression,
        tolerance: tol.equality,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    /// `matching[k]` is the block of the second decomposition paired with block `k` of the first.
    pub matching: Option<Vec<usize>>,
    pub dims_match: bool,
    pub permutation_match: bool,
    pub cycle_type_match: bool,
    /// Worst difference of the basis-free block states `V_k (I ⊗ ρ_k) V_k† / d_k`.
    pub rho_defect: f64,
    /// Worst difference of the two asymptotic maps on the first attractor basis.
    pub action_defect: f64,
    pub tolerance: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.matching.is_some()
            && self.dims_match
            && self.permutation_match
            && self.cycle_type_match
            && self.rho_defect <= self.tolerance
            && self.action_defect <= self.tolerance
    }
}

fn cycle_type(perm: &[usize]) -> Vec<usize> {
    let mut t: Vec<usize> = permutation_cycles(perm).iter().map(Vec::len).collect();
    t.sort_unstable();
    t
}

/// Compares two decompositions up to block relabeling, local basis changes and phases.
pub fn equivalence(a: &AttractorDecomposition, b: &AttractorDecomposition, tol: f64) -> EquivalenceReport {
    let mut report = EquivalenceReport {
        matching: None,
        dims_match: false,
        permutation_match: false,
        cycle_type_match: cycle_type(&a.permutation) == cycle_type(&b.permutation),
        rho_defect: f64::INFINITY,
        action_defect: f64::INFINITY,
        tolerance: tol,
    };
    if a.dim() != b.dim() || a.blocks.len() != b.blocks.len() || a.h0.dim() != b.h0.dim() {
        return report;
    }
    let pb: Vec<ComplexMatrix> = b.blocks.iter().map(Block::range_projector).collect();
    let mut matching = Vec::with_capacity(a.blocks.len());
    for blk in &a.blocks {
        let p = blk.range_projector();
        let hit = pb.iter().position(|q| {
            hs_inner(&p, q).re / (hs_norm(&p) * hs_norm(q)).max(1e-300) > 0.5
        });
        match hit {
            Some(l) => matching.push(l),
            None => return report,
        }
    }
    if !is_permutation(&matching) {
        return report;
    }
    report.dims_match =
        a.blocks.iter().zip(&matching).all(|(x, &l)| x.d == b.blocks[l].d && x.m == b.blocks[l].m);
    report.permutation_match = (0..a.blocks.len()).all(|k| matching[a.permutation[k]] == b.permutation[matching[k]]);
    let state = |blk: &Block| {
        &blk.isometry * kron(&ComplexMatrix::identity(blk.d, blk.d), &blk.rho) * blk.isometry.adjoint() / c(blk.d as f64)
    };
    report.rho_defect = a
        .blocks
        .iter()
        .zip(&matching)
        .map(|(x, &l)| max_abs(&(state(x) - state(&b.blocks[l]))))
        .fold(0.0, f64::max);
    report.action_defect = a
        .attractor_basis()
        .iter()
        .map(|x| match (apply_asymptotic(a, x), apply_asymptotic(b, x)) {
            (Ok(u), Ok(v)) => max_abs(&(u - v)),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    report.matching = Some(matching);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{contraction, zoo, ZooParams};
    use crate::linalg::{diag_real, pauli, rank, ZERO};
    use crate::random::{random_density, random_unitary};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn sigma2_eigenbasis() -> ComplexMatrix {
        let (_, vecs) = hermitian_eig(&pauli()[1]).unwrap();
        vecs
    }

    #[test]
    fn pauli_xz_flip() {
        let ch = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let dec = wolf_decompose(&ch, &tol()).unwrap();
        assert_eq!(dec.blocks.len(), 2);
        assert!(dec.blocks.iter().all(|b| b.d == 1 && b.m == 1));
        assert_eq!(dec.permutation, vec![1, 0]);
        let v = sigma2_eigenbasis();
        let (alpha, beta) = (0.7, -0.2);
        let x = &v * diag_real(&[alpha + beta, alpha - beta]) * v.adjoint();
        let want = &v * diag_real(&[alpha - beta, alpha + beta]) * v.adjoint();
        assert!(max_abs(&(apply_asymptotic(&dec, &x).unwrap() - want)) < 1e-10);
        assert!(verify_decomposition(&ch, &dec, &tol()).unwrap().passed());
    }

    #[test]
    fn wrong_permutation_fails_action_check() {
        let ch = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let mut dec = wolf_decompose(&ch, &tol()).unwrap();
        dec.permutation = vec![0, 1];
        let checks = verify_decomposition(&ch, &dec, &tol()).unwrap();
        assert!(checks.action > 0.1);
        assert!(!checks.passed());
    }

    #[test]
    fn wrong_unitary_fails_action_check() {
        let u = random_unitary(&mut Rng::seed(8), 3);
        let ch = Channel::from_kraus(vec![u]).unwrap();
        let mut dec = wolf_decompose(&ch, &tol()).unwrap();
        dec.blocks[0].unitary = random_unitary(&mut Rng::seed(9), 3);
        assert!(verify_decomposition(&ch, &dec, &tol()).unwrap().action > 0.1);
    }

    #[test]
    fn unitary_channel_single_block() {
        let u = random_unitary(&mut Rng::seed(4), 3);
        let ch = Channel::from_kraus(vec![u.clone()]).unwrap();
        let dec = wolf_decompose(&ch, &tol()).unwrap();
        assert_eq!(dec.blocks.len(), 1);
        assert_eq!((dec.blocks[0].d, dec.blocks[0].m), (3, 1));
        assert_eq!(dec.permutation, vec![0]);
        let x = random_density(&mut Rng::seed(5), 3, 3);
        let got = apply_asymptotic(&dec, &x).unwrap();
        assert!(max_abs(&(got - &u * &x * u.adjoint())) < 1e-9);
    }

    #[test]
    fn contraction_support_and_fixed_state() {
        let rho = random_density(&mut Rng::seed(6), 4, 2);
        let ch = contraction(&rho).unwrap();
        let h0 = support_space(&ch, &tol()).unwrap();
        assert_eq!(h0.dim(), 2);
        let sigma = max_rank_fixed_state(&ch, &tol()).unwrap();
        assert!(max_abs(&(sigma - &rho)) < 1e-10);
        let f = induced_faithful(&ch, &tol()).unwrap();
        assert_eq!(f.dim(), 2);
        let dec = wolf_decompose(&ch, &tol()).unwrap();
        assert_eq!(dec.blocks.len(), 1);
        assert_eq!((dec.blocks[0].d, dec.blocks[0].m), (1, 2));
        assert!(verify_decomposition(&ch, &dec, &tol()).unwrap().passed());
    }

    #[test]
    fn unital_channel_fixed_state() {
        let ch = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let sigma = max_rank_fixed_state(&ch, &tol()).unwrap();
        assert!(max_abs(&(sigma - ComplexMatrix::identity(2, 2) * c(0.5))) < 1e-12);
        assert_eq!(support_space(&ch, &tol()).unwrap().dim(), 2);
    }

    #[test]
    fn pauli_algebra_is_commutative_pair() {
        let ch = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let sigma = ComplexMatrix::identity(2, 2) * c(0.5);
        let alg = dagger_attractor_algebra(&ch, &sigma, &tol()).unwrap();
        let [_, s2, _] = pauli();
        let want = orthonormalize(&[ComplexMatrix::identity(2, 2), s2], 1e-10).unwrap();
        assert!(span_distance(&alg, &want) < 1e-10);
    }

    #[test]
    fn factorize_trivial_and_diagonal() {
        let f = algebra_factorize(&[ComplexMatrix::identity(3, 3) / c(3f64.sqrt())], &tol(), 1).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].d, f[0].m), (1, 3));
        let diag = vec![diag_real(&[1.0, 0.0]), diag_real(&[0.0, 1.0])];
        let f = algebra_factorize(&diag, &tol(), 1).unwrap();
        assert_eq!(f.len(), 2);
        assert!(f.iter().all(|x| x.d == 1 && x.m == 1));
    }

    #[test]
    fn factorize_matrix_algebra_times_identity() {
        // B(C^2) ⊗ I_3 rotated into C^6 by a random unitary.
        let w = random_unitary(&mut Rng::seed(12), 6);
        let items: Vec<ComplexMatrix> = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| &w * kron(&matrix_unit(2, i, j), &ComplexMatrix::identity(3, 3)) * w.adjoint())
            .collect();
        let basis = orthonormalize(&items, 1e-10).unwrap();
        let f = algebra_factorize(&basis, &tol(), 3).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].d, f[0].m), (2, 3));
        let v = &f[0].isometry;
        assert!(unitarity_defect(v) < 1e-9);
        for b in &basis {
            let local = v.adjoint() * b * v;
            let x = partial_trace(&local, 2, 3, Keep::First).unwrap() / c(3.0);
            assert!(max_abs(&(local - kron(&x, &ComplexMatrix::identity(3, 3)))) < 1e-9);
        }
    }

    #[test]
    fn algebra_defect_detects_non_algebra() {
        let basis = orthonormalize(&[ComplexMatrix::identity(2, 2), matrix_unit(2, 0, 1)], 1e-10).unwrap();
        assert!(algebra_defect(&basis, 2) > 0.1);
    }

    #[test]
    fn identity_cycles_and_fixed_points() {
        let ch = Channel::identity(3);
        let dec = wolf_decompose(&ch, &tol()).unwrap();
        let cyc = cyclic_normalize(&dec).unwrap();
        assert_eq!(cyc.cycles.len(), 1);
        assert_eq!(fixed_points_from_cycles(&cyc).unwrap().len(), 9);
    }

    #[test]
    fn pauli_cycle_and_fixed_points() {
        let ch = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let dec = wolf_decompose(&ch, &tol()).unwrap();
        let cyc = cyclic_normalize(&dec).unwrap();
        assert_eq!(cyc.cycles.len(), 1);
        assert_eq!(cyc.cycles[0].block_indices.len(), 2);
        let u1u2 = (&dec.blocks[0].unitary * &dec.blocks[1].unitary)[(0, 0)];
        let w = cyc.cycles[0].uniform_unitary[(0, 0)];
        assert!((w * w - u1u2).norm() < 1e-12);
        let fix = fixed_points_from_cycles(&cyc).unwrap();
        let half = orthonormalize(&[ComplexMatrix::identity(2, 2)], 1e-10).unwrap();
        assert!(span_distance(&fix, &half) < 1e-10);
        let normalized = cyc.to_decomposition();
        for x in dec.attractor_basis() {
            let a = apply_asymptotic(&dec, &x).unwrap();
            let b = apply_asymptotic(&normalized, &x).unwrap();
            assert!(max_abs(&(a - b)) < 1e-10);
        }
    }

    #[test]
    fn star_product_examples() {
        let ch = zoo("pauli_xz", &ZooParams::default()).unwrap();
        let dec = wolf_decompose(&ch, &tol()).unwrap();
        let pp = dec.peripheral_identity();
        assert!(max_abs(&(&pp - ComplexMatrix::identity(2, 2))) < 1e-10);
        assert!(max_abs(&(star_product(&dec, &pp, &pp).unwrap() - &pp)) < 1e-10);
        let [_, s2, s1_check] = pauli();
        let _ = s1_check;
        assert!(max_abs(&(star_product(&dec, &s2, &s2).unwrap() - ComplexMatrix::identity(2, 2))) < 1e-10);
        assert!(matches!(star_product(&dec, &pauli()[0], &s2), Err(Error::OutsideAttractor { .. })));
    }

    #[test]
    fn apply_asymptotic_rejects_outside() {
        let rho = random_density(&mut Rng::seed(6), 3, 3);
        let ch = contraction(&rho).unwrap();
        let dec = wolf_decompose(&ch, &tol()).unwrap();
        assert!(max_abs(&(apply_asymptotic(&dec, &rho).unwrap() - &rho)) < 1e-10);
        let mut off = ComplexMatrix::from_element(3, 3, ZERO);
        off[(0, 1)] = ONE;
        assert!(matches!(apply_asymptotic(&dec, &off), Err(Error::OutsideAttractor { .. })));
    }

    #[test]
    fn permutation_helpers() {
        assert_eq!(permutation_cycles(&[1, 2, 0, 3]), vec![vec![0, 1, 2], vec![3]]);
        assert!(is_permutation(&[2, 0, 1]));
        assert!(!is_permutation(&[0, 0]));
        assert_eq!(lcm_of([2, 3, 4]), 12);
    }

    #[test]
    fn pinching_decomposes_into_blocks() {
        let ch = zoo("pinching", &ZooParams { blocks: Some(vec![2, 1]), ..Default::default() }).unwrap();
        let dec = wolf_decompose(&ch, &tol()).unwrap();
        let mut dims: Vec<(usize, usize)> = dec.blocks.iter().map(|b| (b.d, b.m)).collect();
        dims.sort();
        assert_eq!(dims, vec![(1, 1), (2, 1)]);
        assert_eq!(rank(&dec.peripheral_identity(), 1e-8), 3);
        assert!(verify_decomposition(&ch, &dec, &tol()).unwrap().passed());
    }
}
