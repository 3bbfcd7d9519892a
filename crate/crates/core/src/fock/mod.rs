//! Dense linear algebra over truncated multimode Fock spaces.
//!
//! States and operators are stored as flat complex vectors/matrices indexed
//! in row-major number-basis order: for mode dimensions `[d0, d1, ...]` the
//! basis state `|n0, n1, ...⟩` sits at index `n0*d1*d2*... + n1*d2*... + ...`.
//!
//! Everything here is an immutable value after construction; cloning is the
//! sharing model and parallelism happens in the layers above.

pub(crate) mod linalg;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Hermiticity tolerance for density operators (max entrywise |M - M†|).
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Numerical positivity floor for density-operator eigenvalues.
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Trace ceiling slack for (sub)normalized density operators.
pub const TRACE_TOL: f64 = 1e-10;
/// Unitarity tolerance, max entrywise |U†U - I| on the retained subspace.
pub const UNITARITY_TOL: f64 = 1e-9;
/// Norm tolerance for kets not flagged as heralded branches.
pub const KET_NORM_TOL: f64 = 1e-12;

fn product_dim(mode_dims: &[usize]) -> usize {
    mode_dims.iter().product()
}

fn check_same_dims(left: &[usize], right: &[usize]) -> Result<()> {
    if left != right {
        return Err(Error::ModeMismatch {
            left: left.to_vec(),
            right: right.to_vec(),
        });
    }
    Ok(())
}

/// Row-major strides for a list of mode dimensions.
fn strides(mode_dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; mode_dims.len()];
    for i in (0..mode_dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * mode_dims[i + 1];
    }
    s
}

/// Decompose a flat index into per-mode occupations.
fn unravel(index: usize, mode_dims: &[usize]) -> Vec<usize> {
    let s = strides(mode_dims);
    mode_dims
        .iter()
        .zip(s.iter())
        .map(|(&d, &st)| (index / st) % d)
        .collect()
}

// ---------------------------------------------------------------------------
// FockKet
// ---------------------------------------------------------------------------

/// Pure multimode state over a truncated number basis.
#[derive(Debug, Clone)]
pub struct FockKet {
    mode_dims: Vec<usize>,
    amps: Array1<C64>,
    heralded: bool,
}

impl FockKet {
    /// Normalized ket from raw amplitudes. Fails if the length does not match
    /// the mode dimensions or the norm deviates from one by more than
    /// [`KET_NORM_TOL`].
    pub fn new(mode_dims: Vec<usize>, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != product_dim(&mode_dims) {
            return Err(Error::Validation(format!(
                "amplitude vector length {} does not match total dimension {}",
                amps.len(),
                product_dim(&mode_dims)
            )));
        }
        let ket = Self {
            mode_dims,
            amps,
            heralded: false,
        };
        let n = ket.norm();
        if (n - 1.0).abs() > KET_NORM_TOL {
            return Err(Error::Validation(format!(
                "ket norm {n} deviates from 1 beyond tolerance; use new_heralded for subnormalized branches"
            )));
        }
        Ok(ket)
    }

    /// Subnormalized (heralded-branch) ket; norm may be anything in (0, 1].
    pub fn new_heralded(mode_dims: Vec<usize>, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != product_dim(&mode_dims) {
            return Err(Error::Validation(format!(
                "amplitude vector length {} does not match total dimension {}",
                amps.len(),
                product_dim(&mode_dims)
            )));
        }
        Ok(Self {
            mode_dims,
            amps,
            heralded: true,
        })
    }

    /// Basis state `|n0, n1, ...⟩`.
    pub fn basis_state(mode_dims: Vec<usize>, occupations: &[usize]) -> Result<Self> {
        if occupations.len() != mode_dims.len() {
            return Err(Error::Validation(
                "one occupation number per mode required".into(),
            ));
        }
        for (&n, &d) in occupations.iter().zip(mode_dims.iter()) {
            if n >= d {
                return Err(Error::InvalidDimension {
                    dim: d,
                    reason: "occupation exceeds cutoff",
                });
            }
        }
        let st = strides(&mode_dims);
        let idx: usize = occupations.iter().zip(st.iter()).map(|(&n, &s)| n * s).sum();
        let mut amps = Array1::<C64>::zeros(product_dim(&mode_dims));
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self {
            mode_dims,
            amps,
            heralded: false,
        })
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> ArrayView1<'_, C64> {
        self.amps.view()
    }

    pub fn is_heralded(&self) -> bool {
        self.heralded
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescale to unit norm; the heralded flag is cleared.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= 0.0 {
            return Err(Error::Validation("cannot normalize a zero ket".into()));
        }
        Ok(Self {
            mode_dims: self.mode_dims.clone(),
            amps: self.amps.mapv(|z| z / n),
            heralded: false,
        })
    }

    /// Inner product ⟨self|other⟩.
    pub fn overlap(&self, other: &Self) -> Result<C64> {
        check_same_dims(&self.mode_dims, &other.mode_dims)?;
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Tensor composite self ⊗ other.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.mode_dims.clone();
        dims.extend_from_slice(&other.mode_dims);
        let mut amps = Array1::<C64>::zeros(self.dim() * other.dim());
        for (i, a) in self.amps.iter().enumerate() {
            for (j, b) in other.amps.iter().enumerate() {
                amps[i * other.dim() + j] = a * b;
            }
        }
        Self {
            mode_dims: dims,
            amps,
            heralded: self.heralded || other.heralded,
        }
    }

    /// |self⟩⟨self| as a density operator (subnormalized if the ket is).
    pub fn to_density(&self) -> DensityOperator {
        let d = self.dim();
        let mut m = Array2::<C64>::zeros((d, d));
        for (i, a) in self.amps.iter().enumerate() {
            for (j, b) in self.amps.iter().enumerate() {
                m[(i, j)] = a * b.conj();
            }
        }
        DensityOperator {
            mode_dims: self.mode_dims.clone(),
            matrix: m,
        }
    }

    /// Mean photon number of one mode.
    pub fn mean_photon(&self, mode: usize) -> Result<f64> {
        if mode >= self.mode_dims.len() {
            return Err(Error::ModeIndexOutOfRange {
                index: mode,
                n_modes: self.mode_dims.len(),
            });
        }
        let mut total = 0.0;
        for (idx, a) in self.amps.iter().enumerate() {
            let occ = unravel(idx, &self.mode_dims)[mode];
            total += occ as f64 * a.norm_sqr();
        }
        Ok(total / self.norm().powi(2))
    }
}

// ---------------------------------------------------------------------------
// DensityOperator
// ---------------------------------------------------------------------------

/// Mixed multimode state: Hermitian, positive (within tolerance), trace ≤ 1.
/// Heralded branches are carried subnormalized, with the trace equal to the
/// branch probability.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    mode_dims: Vec<usize>,
    matrix: Array2<C64>,
}

impl DensityOperator {
    /// Validating constructor: checks shape, Hermiticity, positivity and the
    /// trace window (0, 1 + tol]. Positivity costs an eigendecomposition.
    pub fn new(mode_dims: Vec<usize>, matrix: Array2<C64>) -> Result<Self> {
        let d = product_dim(&mode_dims);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Validation(format!(
                "matrix shape {:?} does not match total dimension {}",
                matrix.shape(),
                d
            )));
        }
        let rho = Self { mode_dims, matrix };
        rho.validate()?;
        Ok(rho)
    }

    /// Construction without invariant checks, for internal hot paths whose
    /// outputs are validated at the boundaries (and in tests).
    pub(crate) fn from_parts_unchecked(mode_dims: Vec<usize>, matrix: Array2<C64>) -> Self {
        Self { mode_dims, matrix }
    }

    pub fn from_ket(ket: &FockKet) -> Self {
        ket.to_density()
    }

    /// Re-check all structural invariants.
    pub fn validate(&self) -> Result<()> {
        let h = linalg::hermiticity_defect(&self.matrix);
        if h > HERMITICITY_TOL {
            return Err(Error::Validation(format!(
                "hermiticity defect {h:.3e} exceeds {HERMITICITY_TOL:.1e}"
            )));
        }
        let tr = self.trace();
        if !(tr > 0.0 && tr <= 1.0 + TRACE_TOL) {
            return Err(Error::Validation(format!(
                "trace {tr} outside (0, 1 + {TRACE_TOL:.1e}]"
            )));
        }
        let w = linalg::eigvalsh(&self.matrix)?;
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(Error::Validation(format!(
                "negative eigenvalue {min:.3e} below -{POSITIVITY_TOL:.1e}"
            )));
        }
        Ok(())
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> ArrayView2<'_, C64> {
        self.matrix.view()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    /// Rescale to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::Validation(
                "cannot normalize a trace-zero density operator".into(),
            ));
        }
        Ok(Self {
            mode_dims: self.mode_dims.clone(),
            matrix: self.matrix.mapv(|z| z / tr),
        })
    }

    pub fn purity(&self) -> f64 {
        let prod = self.matrix.dot(&self.matrix);
        prod.diag().iter().map(|z| z.re).sum()
    }

    /// Tensor composite self ⊗ other.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.mode_dims.clone();
        dims.extend_from_slice(&other.mode_dims);
        Self {
            mode_dims: dims,
            matrix: ndarray::linalg::kron(&self.matrix, &other.matrix),
        }
    }

    /// Trace out all modes not listed in `keep`. Indices must be strictly
    /// increasing; the retained modes keep their relative order. The trace is
    /// preserved exactly up to floating-point summation.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.mode_dims.len();
        if keep.is_empty() {
            return Err(Error::Validation("must keep at least one mode".into()));
        }
        for w in keep.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Validation(
                    "keep indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&bad) = keep.iter().find(|&&m| m >= n) {
            return Err(Error::ModeIndexOutOfRange {
                index: bad,
                n_modes: n,
            });
        }
        let traced: Vec<usize> = (0..n).filter(|m| !keep.contains(m)).collect();
        let keep_dims: Vec<usize> = keep.iter().map(|&m| self.mode_dims[m]).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&m| self.mode_dims[m]).collect();
        let full_strides = strides(&self.mode_dims);
        let keep_strides: Vec<usize> = keep.iter().map(|&m| full_strides[m]).collect();
        let traced_strides: Vec<usize> = traced.iter().map(|&m| full_strides[m]).collect();

        let d_out = product_dim(&keep_dims);
        let d_tr = product_dim(&traced_dims);
        let mut out = Array2::<C64>::zeros((d_out, d_out));

        // base offset of each output index in the full space
        let offset = |idx: usize, dims: &[usize], strds: &[usize]| -> usize {
            let local = unravel(idx, dims);
            local.iter().zip(strds.iter()).map(|(&c, &s)| c * s).sum()
        };

        let traced_offsets: Vec<usize> = (0..d_tr)
            .map(|t| offset(t, &traced_dims, &traced_strides))
            .collect();
        let keep_offsets: Vec<usize> = (0..d_out)
            .map(|k| offset(k, &keep_dims, &keep_strides))
            .collect();

        for (i, &oi) in keep_offsets.iter().enumerate() {
            for (j, &oj) in keep_offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &ot in &traced_offsets {
                    acc += self.matrix[(oi + ot, oj + ot)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(Self {
            mode_dims: keep_dims,
            matrix: out,
        })
    }

    /// Occupation probability of basis state `|n0, n1, ...⟩`.
    pub fn occupation(&self, occupations: &[usize]) -> Result<f64> {
        if occupations.len() != self.mode_dims.len() {
            return Err(Error::Validation(
                "one occupation number per mode required".into(),
            ));
        }
        let st = strides(&self.mode_dims);
        let idx: usize = occupations.iter().zip(st.iter()).map(|(&n, &s)| n * s).sum();
        Ok(self.matrix[(idx, idx)].re)
    }

    /// Mean photon number of one mode (normalized by the trace).
    pub fn mean_photon(&self, mode: usize) -> Result<f64> {
        if mode >= self.mode_dims.len() {
            return Err(Error::ModeIndexOutOfRange {
                index: mode,
                n_modes: self.mode_dims.len(),
            });
        }
        let mut total = 0.0;
        for (idx, z) in self.matrix.diag().iter().enumerate() {
            let occ = unravel(idx, &self.mode_dims)[mode];
            total += occ as f64 * z.re;
        }
        Ok(total / self.trace())
    }
}

// ---------------------------------------------------------------------------
// FockOperator
// ---------------------------------------------------------------------------

/// Dense operator on a truncated multimode Fock space, with an optional
/// assertion of intended unitarity (checked at construction).
#[derive(Debug, Clone)]
pub struct FockOperator {
    mode_dims: Vec<usize>,
    matrix: Array2<C64>,
    unitary: bool,
}

impl FockOperator {
    pub fn new(mode_dims: Vec<usize>, matrix: Array2<C64>, unitary: bool) -> Result<Self> {
        let d = product_dim(&mode_dims);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Validation(format!(
                "matrix shape {:?} does not match total dimension {}",
                matrix.shape(),
                d
            )));
        }
        let op = Self {
            mode_dims,
            matrix,
            unitary,
        };
        if unitary {
            let defect = op.unitarity_defect();
            if defect > UNITARITY_TOL {
                return Err(Error::Validation(format!(
                    "unitarity defect {defect:.3e} exceeds {UNITARITY_TOL:.1e}"
                )));
            }
        }
        Ok(op)
    }

    pub fn identity(mode_dims: Vec<usize>) -> Self {
        let d = product_dim(&mode_dims);
        Self {
            mode_dims,
            matrix: Array2::<C64>::eye(d),
            unitary: true,
        }
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> ArrayView2<'_, C64> {
        self.matrix.view()
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// max |U†U - I| on the retained subspace.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = linalg::dagger(&self.matrix).dot(&self.matrix);
        let eye = Array2::<C64>::eye(self.dim());
        linalg::max_abs(&(&prod - &eye))
    }

    pub fn dagger(&self) -> Self {
        Self {
            mode_dims: self.mode_dims.clone(),
            matrix: linalg::dagger(&self.matrix),
            unitary: self.unitary,
        }
    }

    /// Operator product self · other.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_same_dims(&self.mode_dims, &other.mode_dims)?;
        Ok(Self {
            mode_dims: self.mode_dims.clone(),
            matrix: self.matrix.dot(&other.matrix),
            unitary: self.unitary && other.unitary,
        })
    }

    /// Tensor composite self ⊗ other.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.mode_dims.clone();
        dims.extend_from_slice(&other.mode_dims);
        Self {
            mode_dims: dims,
            matrix: ndarray::linalg::kron(&self.matrix, &other.matrix),
            unitary: self.unitary && other.unitary,
        }
    }

    /// Apply to a ket. Unitary operators preserve normalization; anything
    /// else yields a heralded (subnormalized) branch.
    pub fn apply_ket(&self, ket: &FockKet) -> Result<FockKet> {
        check_same_dims(&self.mode_dims, &ket.mode_dims)?;
        let amps = self.matrix.dot(&ket.amps);
        Ok(FockKet {
            mode_dims: ket.mode_dims.clone(),
            amps,
            heralded: ket.heralded || !self.unitary,
        })
    }

    /// Conjugation M ρ M†.
    pub fn conjugate(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        check_same_dims(&self.mode_dims, &rho.mode_dims)?;
        let m = self.matrix.dot(&rho.matrix).dot(&linalg::dagger(&self.matrix));
        Ok(DensityOperator {
            mode_dims: rho.mode_dims.clone(),
            matrix: m,
        })
    }
}

// ---------------------------------------------------------------------------
// Elementary operators
// ---------------------------------------------------------------------------

/// Annihilation operator, ⟨n-1|a|n⟩ = √n.
pub fn annihilation_op(dim: usize) -> Result<FockOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "annihilation operator needs at least two levels",
        });
    }
    let mut m = Array2::<C64>::zeros((dim, dim));
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    FockOperator::new(vec![dim], m, false)
}

/// Creation operator a†.
pub fn creation_op(dim: usize) -> Result<FockOperator> {
    Ok(annihilation_op(dim)?.dagger())
}

/// Number operator a†a (diagonal 0, 1, 2, ...).
pub fn number_op(dim: usize) -> Result<FockOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "number operator needs at least two levels",
        });
    }
    let mut m = Array2::<C64>::zeros((dim, dim));
    for n in 0..dim {
        m[(n, n)] = C64::new(n as f64, 0.0);
    }
    FockOperator::new(vec![dim], m, false)
}

/// Weight a coherent state of amplitude `alpha` carries above the cutoff:
/// the Poisson tail P(n ≥ dim) at mean |alpha|².
pub fn coherent_tail_weight(alpha: C64, dim: usize) -> f64 {
    let mean = alpha.norm_sqr();
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    let mut below = 0.0;
    for n in 0..dim {
        below += term;
        term *= mean / (n as f64 + 1.0);
    }
    (1.0 - below).max(0.0)
}

/// Displacement operator: the matrix exponential of α a† − α* a on the
/// truncated space. Exactly unitary at any cutoff, but leaks amplitude past
/// the boundary when |α|² approaches the cutoff; the precondition
/// |α|² ≤ dim/4 fails loudly with the estimated leakage.
pub fn displacement_op(alpha: C64, dim: usize) -> Result<FockOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "displacement operator needs at least two levels",
        });
    }
    let mean = alpha.norm_sqr();
    if mean > dim as f64 / 4.0 {
        return Err(Error::TruncationLeakage {
            leakage: coherent_tail_weight(alpha, dim),
            tolerance: coherent_tail_weight(
                C64::new((dim as f64 / 4.0).sqrt(), 0.0),
                dim,
            ),
        });
    }
    let a = annihilation_op(dim)?;
    let adag = a.dagger();
    let gen = adag.matrix().mapv(|z| alpha * z) - a.matrix().mapv(|z| alpha.conj() * z);
    let m = linalg::expm_antihermitian(&gen)?;
    FockOperator::new(vec![dim], m, true)
}

/// Exact matrix elements ⟨m|D(α)|n⟩ of the untruncated displacement operator,
/// returned as a `rows × cols` block. Unlike [`displacement_op`] this is the
/// truncation of the infinite-dimensional unitary, valid at any |α|; the
/// block itself is not unitary.
///
/// Column 0 is the coherent-state expansion e^{-|α|²/2} αᵐ/√m!; column n
/// follows from D(α)|n⟩ = (a† - α*) D(α)|n-1⟩ / √n, which never references
/// rows above the current one and is therefore exact on the retained block.
pub fn displaced_block(alpha: C64, rows: usize, cols: usize) -> Array2<C64> {
    let mut block = Array2::<C64>::zeros((rows, cols));
    // column 0: coherent state amplitudes
    let mut amp = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for m in 0..rows {
        block[(m, 0)] = amp;
        amp *= alpha / C64::new(((m + 1) as f64).sqrt(), 0.0);
    }
    for n in 1..cols {
        let inv_sqrt_n = 1.0 / (n as f64).sqrt();
        for m in 0..rows {
            let raised = if m == 0 {
                C64::new(0.0, 0.0)
            } else {
                C64::new((m as f64).sqrt(), 0.0) * block[(m - 1, n - 1)]
            };
            block[(m, n)] = (raised - alpha.conj() * block[(m, n - 1)]) * inv_sqrt_n;
        }
    }
    block
}

/// Two-mode beamsplitter exp[θ(a†b − a b†)] with cos θ = √τ, acting on
/// mode dimensions (dim_a, dim_b). Photon-number conserving; the sign
/// convention maps |1,0⟩ → cos θ |1,0⟩ − sin θ |0,1⟩ and is pinned by tests.
pub fn beamsplitter_op(tau: f64, dim_a: usize, dim_b: usize) -> Result<FockOperator> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: tau,
            constraint: "0 <= tau <= 1",
        });
    }
    let theta = tau.sqrt().clamp(0.0, 1.0).acos();
    let a = annihilation_op(dim_a)?;
    let b = annihilation_op(dim_b)?;
    let adag_b = ndarray::linalg::kron(&a.dagger().matrix().to_owned(), &b.matrix().to_owned());
    let a_bdag = ndarray::linalg::kron(&a.matrix().to_owned(), &b.dagger().matrix().to_owned());
    let gen = (&adag_b - &a_bdag).mapv(|z| z * C64::new(theta, 0.0));
    let m = linalg::expm_antihermitian(&gen)?;
    FockOperator::new(vec![dim_a, dim_b], m, true)
}

/// Embed a single-mode operator at position `mode` of a multimode register.
pub fn embed_one_mode(op: &FockOperator, mode_dims: &[usize], mode: usize) -> Result<FockOperator> {
    if mode >= mode_dims.len() {
        return Err(Error::ModeIndexOutOfRange {
            index: mode,
            n_modes: mode_dims.len(),
        });
    }
    if op.mode_dims() != [mode_dims[mode]] {
        return Err(Error::ModeMismatch {
            left: op.mode_dims().to_vec(),
            right: vec![mode_dims[mode]],
        });
    }
    let left: usize = mode_dims[..mode].iter().product();
    let right: usize = mode_dims[mode + 1..].iter().product();
    let eye_l = Array2::<C64>::eye(left);
    let eye_r = Array2::<C64>::eye(right);
    let m = ndarray::linalg::kron(
        &eye_l,
        &ndarray::linalg::kron(&op.matrix().to_owned(), &eye_r),
    );
    FockOperator::new(mode_dims.to_vec(), m, op.unitary)
}

/// Embed a two-mode operator acting on modes (i, j), i < j, of a multimode
/// register, with the operator's first mode mapped to i and second to j.
pub fn embed_two_mode(
    op: &FockOperator,
    mode_dims: &[usize],
    i: usize,
    j: usize,
) -> Result<FockOperator> {
    let n = mode_dims.len();
    if i >= j {
        return Err(Error::Validation("embed_two_mode requires i < j".into()));
    }
    if j >= n {
        return Err(Error::ModeIndexOutOfRange {
            index: j,
            n_modes: n,
        });
    }
    let (di, dj) = (mode_dims[i], mode_dims[j]);
    if op.mode_dims() != [di, dj] {
        return Err(Error::ModeMismatch {
            left: op.mode_dims().to_vec(),
            right: vec![di, dj],
        });
    }
    let full_dim = product_dim(mode_dims);
    let st = strides(mode_dims);
    let mut m = Array2::<C64>::zeros((full_dim, full_dim));
    let op_m = op.matrix();
    for row in 0..full_dim {
        let occ = unravel(row, mode_dims);
        let (ni, nj) = (occ[i], occ[j]);
        let base = row - ni * st[i] - nj * st[j];
        let op_row = ni * dj + nj;
        for mi in 0..di {
            for mj in 0..dj {
                let v = op_m[(op_row, mi * dj + mj)];
                if v.norm_sqr() > 0.0 {
                    let col = base + mi * st[i] + mj * st[j];
                    m[(row, col)] = v;
                }
            }
        }
    }
    FockOperator::new(mode_dims.to_vec(), m, op.unitary)
}

// ---------------------------------------------------------------------------
// Fidelity
// ---------------------------------------------------------------------------

/// Uhlmann fidelity F(ρ, σ) = ‖√ρ √σ‖₁², evaluated on trace-normalized
/// copies of the inputs. Equals |⟨ψ|φ⟩|² for pure inputs.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_same_dims(&rho.mode_dims, &sigma.mode_dims)?;
    let rho_n = rho.normalized()?;
    let sigma_n = sigma.normalized()?;
    for (name, m) in [("rho", &rho_n), ("sigma", &sigma_n)] {
        let w = linalg::eigvalsh(&m.matrix)?;
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(Error::Validation(format!(
                "fidelity: {name} is not positive (min eigenvalue {min:.3e})"
            )));
        }
    }
    let sqrt_rho = linalg::sqrt_psd(&rho_n.matrix)?;
    fidelity_with_sqrt(&sqrt_rho, &sigma_n.matrix)
}

/// Fidelity given a precomputed √ρ; used by fitting loops that compare one
/// fixed state against many candidates.
pub(crate) fn fidelity_with_sqrt(sqrt_rho: &Array2<C64>, sigma: &Array2<C64>) -> Result<f64> {
    let sqrt_sigma = linalg::sqrt_psd(sigma)?;
    let t = linalg::trace_norm(&sqrt_rho.dot(&sqrt_sigma))?;
    Ok((t * t).clamp(0.0, 1.0))
}

/// Fidelity of a pure state with a density operator, ⟨ψ|ρ|ψ⟩ on normalized
/// inputs.
pub fn fidelity_ket(psi: &FockKet, rho: &DensityOperator) -> Result<f64> {
    check_same_dims(&psi.mode_dims, &rho.mode_dims)?;
    let psi_n = psi.normalized()?;
    let rho_n = rho.normalized()?;
    let v = rho_n.matrix.dot(&psi_n.amps);
    let f: C64 = psi_n
        .amps
        .iter()
        .zip(v.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(f.re.clamp(0.0, 1.0))
}

/// Fidelity of two pure states, |⟨ψ|φ⟩|² on normalized inputs.
pub fn fidelity_kets(psi: &FockKet, phi: &FockKet) -> Result<f64> {
    let o = psi.normalized()?.overlap(&phi.normalized()?)?;
    Ok(o.norm_sqr().clamp(0.0, 1.0))
}

/// Smallest cutoff dimension whose neglected EPR weight χ^(2 dim) falls below
/// `tail_tol` (minimum 2).
pub fn recommended_cutoff(chi: f64, tail_tol: f64) -> usize {
    if chi <= 0.0 {
        return 2;
    }
    let d = (tail_tol.ln() / (2.0 * chi.ln())).ceil() as usize;
    d.max(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Independent matrix exponential by scaling-and-squaring Taylor series;
    /// oracle route for the eigendecomposition-based exponentials.
    fn expm_taylor(m: &Array2<C64>) -> Array2<C64> {
        let n = m.nrows();
        let norm = m.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
        let s = norm.log2().ceil().max(0.0) as u32;
        let scaled = m.mapv(|z| z / C64::new(2f64.powi(s as i32), 0.0));
        let mut term = Array2::<C64>::eye(n);
        let mut acc = Array2::<C64>::eye(n);
        for k in 1..=30 {
            term = term.dot(&scaled).mapv(|z| z / C64::new(k as f64, 0.0));
            acc += &term;
        }
        for _ in 0..s {
            acc = acc.dot(&acc);
        }
        acc
    }

    #[test]
    fn annihilation_matrix_elements_dim3() {
        let a = annihilation_op(3).unwrap();
        assert_abs_diff_eq!(a.matrix()[(0, 1)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.matrix()[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-15);
        let nonzero: usize = a
            .matrix()
            .iter()
            .filter(|z| z.norm_sqr() > 0.0)
            .count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn annihilation_kills_vacuum() {
        let a = annihilation_op(2).unwrap();
        let vac = FockKet::basis_state(vec![2], &[0]).unwrap();
        let out = a.apply_ket(&vac).unwrap();
        assert_abs_diff_eq!(out.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn number_operator_identity_dim8() {
        let a = annihilation_op(8).unwrap();
        let num = a.dagger().compose(&a).unwrap();
        for n in 0..8 {
            assert_abs_diff_eq!(num.matrix()[(n, n)].re, n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn annihilation_rejects_dim1() {
        assert!(matches!(
            annihilation_op(1),
            Err(Error::InvalidDimension { .. })
        ));
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement_op(c(0.0, 0.0), 8).unwrap();
        let eye = Array2::<C64>::eye(8);
        assert!(linalg::max_abs(&(&d.matrix().to_owned() - &eye)) < 1e-12);
    }

    #[test]
    fn displacement_column_zero_matches_coherent_expansion() {
        // oracle: ⟨n|D(α)|0⟩ = e^{-|α|²/2} αⁿ/√n!
        let alpha = c(0.5, 0.0);
        let d = displacement_op(alpha, 20).unwrap();
        let mut amp = (-alpha.norm_sqr() / 2.0).exp();
        for n in 0..20 {
            assert_abs_diff_eq!(d.matrix()[(n, 0)].re, amp, epsilon = 1e-8);
            assert_abs_diff_eq!(d.matrix()[(n, 0)].im, 0.0, epsilon = 1e-8);
            amp *= 0.5 / (n as f64 + 1.0).sqrt();
        }
    }

    #[test]
    fn displacement_inverse_composes_to_identity() {
        let d_plus = displacement_op(c(0.5, 0.0), 20).unwrap();
        let d_minus = displacement_op(c(-0.5, 0.0), 20).unwrap();
        let prod = d_plus.compose(&d_minus).unwrap();
        let eye = Array2::<C64>::eye(20);
        assert!(linalg::max_abs(&(&prod.matrix().to_owned() - &eye)) < 1e-8);
    }

    #[test]
    fn displacement_guard_fails_loudly() {
        let err = displacement_op(c(3.0, 0.0), 8);
        match err {
            Err(Error::TruncationLeakage { leakage, .. }) => assert!(leakage > 0.0),
            other => panic!("expected truncation leakage error, got {other:?}"),
        }
    }

    #[test]
    fn displacement_matches_taylor_oracle() {
        let alpha = c(0.4, -0.3);
        let dim = 16;
        let a = annihilation_op(dim).unwrap();
        let gen = a.dagger().matrix().mapv(|z| alpha * z)
            - a.matrix().mapv(|z| alpha.conj() * z);
        let oracle = expm_taylor(&gen);
        let d = displacement_op(alpha, dim).unwrap();
        assert!(linalg::max_abs(&(&d.matrix().to_owned() - &oracle)) < 1e-10);
    }

    #[test]
    fn displaced_block_matches_expm_at_small_alpha() {
        // interior elements agree with the truncated-generator exponential
        // when the leakage is negligible
        let alpha = c(0.3, 0.2);
        let block = displaced_block(alpha, 8, 8);
        let d = displacement_op(alpha, 24).unwrap();
        for m in 0..8 {
            for n in 0..8 {
                assert!(
                    (block[(m, n)] - d.matrix()[(m, n)]).norm() < 1e-9,
                    "mismatch at ({m},{n})"
                );
            }
        }
    }

    #[test]
    fn displaced_block_columns_are_normalized_at_large_alpha() {
        // the exact block keeps column norms ≤ 1 and ≈ 1 when rows cover the
        // displaced distribution
        let alpha = c(2.0, 1.0); // |α|² = 5
        let block = displaced_block(alpha, 40, 3);
        for nc in 0..3 {
            let norm: f64 = (0..40).map(|m| block[(m, nc)].norm_sqr()).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn beamsplitter_full_transmission_is_identity() {
        let bs = beamsplitter_op(1.0, 4, 4).unwrap();
        let eye = Array2::<C64>::eye(16);
        assert!(linalg::max_abs(&(&bs.matrix().to_owned() - &eye)) < 1e-10);
    }

    #[test]
    fn beamsplitter_splits_single_photon() {
        // documented sign convention: |1,0⟩ → (|1,0⟩ − |0,1⟩)/√2 at τ = 1/2
        let bs = beamsplitter_op(0.5, 2, 2).unwrap();
        let one_zero = FockKet::basis_state(vec![2, 2], &[1, 0]).unwrap();
        let out = bs.apply_ket(&one_zero).unwrap();
        let s = 0.5f64.sqrt();
        assert_abs_diff_eq!(out.amps()[2].re, s, epsilon = 1e-12); // |1,0⟩
        assert_abs_diff_eq!(out.amps()[1].re, -s, epsilon = 1e-12); // |0,1⟩
        assert_abs_diff_eq!(out.amps()[0].norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amps()[3].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn beamsplitter_hong_ou_mandel_against_taylor_oracle() {
        let dim = 4;
        let theta = std::f64::consts::FRAC_PI_4;
        let a = annihilation_op(dim).unwrap();
        let adag_b =
            ndarray::linalg::kron(&a.dagger().matrix().to_owned(), &a.matrix().to_owned());
        let a_bdag =
            ndarray::linalg::kron(&a.matrix().to_owned(), &a.dagger().matrix().to_owned());
        let gen = (&adag_b - &a_bdag).mapv(|z| z * c(theta, 0.0));
        let oracle = expm_taylor(&gen);

        let bs = beamsplitter_op(0.5, dim, dim).unwrap();
        assert!(linalg::max_abs(&(&bs.matrix().to_owned() - &oracle)) < 1e-10);

        let one_one = FockKet::basis_state(vec![dim, dim], &[1, 1]).unwrap();
        let out = bs.apply_ket(&one_one).unwrap();
        let idx = |na: usize, nb: usize| na * dim + nb;
        let s = 0.5f64.sqrt();
        assert_abs_diff_eq!(out.amps()[idx(1, 1)].norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amps()[idx(2, 0)].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amps()[idx(0, 2)].re, -s, epsilon = 1e-12);
    }

    #[test]
    fn beamsplitter_conserves_total_photon_number() {
        let bs = beamsplitter_op(0.3, 5, 5).unwrap();
        for row in 0..25 {
            for col in 0..25 {
                let (ra, rb) = (row / 5, row % 5);
                let (ca, cb) = (col / 5, col % 5);
                if ra + rb != ca + cb {
                    assert!(
                        bs.matrix()[(row, col)].norm() < 1e-12,
                        "sector leakage at ({row},{col})"
                    );
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_product_state_keeps_factor() {
        let zero = FockKet::basis_state(vec![3], &[0]).unwrap();
        let one = FockKet::basis_state(vec![3], &[1]).unwrap();
        let prod = zero.tensor(&one).to_density();
        let reduced = prod.partial_trace(&[1]).unwrap();
        assert_abs_diff_eq!(reduced.occupation(&[1]).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(reduced.trace(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn tensor_then_partial_trace_round_trip() {
        let mut amps = Array1::<C64>::zeros(3);
        amps[0] = c(0.8, 0.0);
        amps[1] = c(0.0, 0.6);
        let rho = FockKet::new(vec![3], amps).unwrap().to_density();
        let sigma = FockKet::basis_state(vec![4], &[2]).unwrap().to_density();
        let joint = rho.tensor(&sigma);
        let back = joint.partial_trace(&[0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((back.matrix()[(i, j)] - rho.matrix()[(i, j)]).norm() < 1e-12);
            }
        }
        assert_abs_diff_eq!(joint.trace(), back.trace(), epsilon = 1e-12);
    }

    #[test]
    fn embed_two_mode_matches_kron_for_adjacent_modes() {
        let bs = beamsplitter_op(0.37, 3, 3).unwrap();
        let full = embed_two_mode(&bs, &[3, 3, 2], 0, 1).unwrap();
        let eye2 = FockOperator::identity(vec![2]);
        let expect = bs.tensor(&eye2);
        assert!(linalg::max_abs(
            &(&full.matrix().to_owned() - &expect.matrix().to_owned())
        ) < 1e-12);
    }

    #[test]
    fn embed_two_mode_nonadjacent_agrees_with_manual_action() {
        // apply a beamsplitter on modes (0, 2) of a 3-mode register and check
        // action on |1,0,0⟩: middle mode must ride along untouched
        let bs = beamsplitter_op(0.5, 2, 2).unwrap();
        let full = embed_two_mode(&bs, &[2, 3, 2], 0, 2).unwrap();
        let input = FockKet::basis_state(vec![2, 3, 2], &[1, 1, 0]).unwrap();
        let out = full.apply_ket(&input).unwrap();
        let idx = |a: usize, b: usize, cc: usize| a * 6 + b * 2 + cc;
        let s = 0.5f64.sqrt();
        assert_abs_diff_eq!(out.amps()[idx(1, 1, 0)].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amps()[idx(0, 1, 1)].re, -s, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_of_state_with_itself_is_one() {
        let mut amps = Array1::<C64>::zeros(4);
        amps[0] = c(0.6, 0.0);
        amps[2] = c(0.0, 0.8);
        let rho = FockKet::new(vec![4], amps).unwrap().to_density();
        assert_abs_diff_eq!(fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_of_orthogonal_states_is_zero() {
        let zero = FockKet::basis_state(vec![4], &[0]).unwrap();
        let one = FockKet::basis_state(vec![4], &[1]).unwrap();
        assert_abs_diff_eq!(
            fidelity(&zero.to_density(), &one.to_density()).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(fidelity_kets(&zero, &one).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_mixed_vs_pure_matches_expectation_value() {
        // ρ = 0.5|0⟩⟨0| + 0.5|1⟩⟨1|, ψ = |0⟩: F = ⟨ψ|ρ|ψ⟩ = 0.5
        let zero = FockKet::basis_state(vec![3], &[0]).unwrap();
        let one = FockKet::basis_state(vec![3], &[1]).unwrap();
        let mix = Array2::from_diag(&Array1::from(vec![c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]));
        let rho = DensityOperator::new(vec![3], mix).unwrap();
        assert_abs_diff_eq!(fidelity_ket(&zero, &rho).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fidelity(&zero.to_density(), &rho).unwrap(),
            0.5,
            epsilon = 1e-10
        );
        let _ = one;
    }

    #[test]
    fn density_operator_validation_rejects_bad_inputs() {
        // non-Hermitian
        let mut m = Array2::<C64>::zeros((2, 2));
        m[(0, 0)] = c(1.0, 0.0);
        m[(0, 1)] = c(0.5, 0.0);
        assert!(DensityOperator::new(vec![2], m).is_err());
        // negative eigenvalue
        let neg = Array2::from_diag(&Array1::from(vec![c(1.2, 0.0), c(-0.2, 0.0)]));
        assert!(DensityOperator::new(vec![2], neg).is_err());
        // trace above one
        let big = Array2::from_diag(&Array1::from(vec![c(0.8, 0.0), c(0.4, 0.0)]));
        assert!(DensityOperator::new(vec![2], big).is_err());
    }

    #[test]
    fn recommended_cutoff_bounds_epr_tail() {
        let d = recommended_cutoff(0.5, 1e-8);
        assert!(0.5f64.powi(2 * d as i32) < 1e-8);
        assert!(0.5f64.powi(2 * (d as i32 - 1)) >= 1e-8);
    }
}
