//! Master-equation oracle: Liouvillian construction, steady state, time
//! evolution and exact equal-time correlations on a truncated Fock space.
//!
//! Density matrices are vectorized by stacking columns, so the flat index of
//! `ρ[i, j]` is `i + j·d` and `vec(AXB) = (Bᵀ ⊗ A) vec(X)`. With this
//! convention the generator reads
//!
//! ```text
//! L = -i(I ⊗ H - Hᵀ ⊗ I) + Σ_j κ/2 (2 Ā_j ⊗ A_j - I ⊗ A_j†A_j - (A_j†A_j)ᵀ ⊗ I)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{two_mode_ops, ComplexOperator, FockBasis};
use crate::model::{effective_hamiltonian, Cavity, SystemParams};

/// Largest superoperator dimension built without an explicit override.
pub const MAX_SUPEROPERATOR_DIM: usize = 10_000;

pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const MIN_EIGENVALUE: f64 = -1e-8;

/// Trace drift that aborts time integration.
pub const MAX_TRACE_DRIFT: f64 = 1e-6;

/// Mean photon number below which a mode counts as empty.
pub const EMPTY_MODE: f64 = 1e-30;

const MAGIC: &[u8; 4] = b"RHO1";

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Generator of the vectorized master equation, acting on `vec(ρ)`.
#[derive(Debug, Clone)]
pub struct Superoperator {
    hilbert_dim: usize,
    mat: DMatrix<C64>,
}

impl Superoperator {
    /// Dimension `d` of the underlying Hilbert space.
    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Superoperator dimension `d²`.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn inf_norm(&self) -> f64 {
        self.mat
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `L vec(ρ)` reshaped back into a matrix.
    pub fn apply(&self, rho: &DensityMatrix) -> DMatrix<C64> {
        let d = self.hilbert_dim;
        let v = &self.mat * vectorize(&rho.mat);
        DMatrix::from_column_slice(d, d, v.as_slice())
    }

    /// `max_k |Σ_i L[i + i·d, k]|`, the deviation of `vec(I)† L` from zero.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.hilbert_dim;
        (0..self.dim())
            .map(|k| (0..d).map(|i| self.mat[(i + i * d, k)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }

    fn sparse(&self) -> Csr {
        let n = self.dim();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for r in 0..n {
            for c in 0..n {
                let z = self.mat[(r, c)];
                if z != zero() {
                    cols.push(c);
                    vals.push(z);
                }
            }
            row_start.push(cols.len());
        }
        Csr {
            row_start,
            cols,
            vals,
        }
    }
}

struct Csr {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    fn mul_into(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = zero();
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }
}

fn vectorize(m: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Liouvillian for `p` on `basis`; fails if `d² > 10⁴`.
pub fn liouvillian(p: &SystemParams, basis: &FockBasis) -> Result<Superoperator> {
    liouvillian_with_override(p, basis, false)
}

pub fn liouvillian_with_override(
    p: &SystemParams,
    basis: &FockBasis,
    allow_large: bool,
) -> Result<Superoperator> {
    p.validate()?;
    let h = effective_hamiltonian(p, basis);
    liouvillian_from_hamiltonian(&h, basis, p.kappa, allow_large)
}

/// Liouvillian for an arbitrary Hermitian `h` with photon loss at rate `kappa`
/// from both modes of `basis`.
pub fn liouvillian_from_hamiltonian(
    h: &ComplexOperator,
    basis: &FockBasis,
    kappa: f64,
    allow_large: bool,
) -> Result<Superoperator> {
    let d = basis.dim();
    if h.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: h.dim(),
        });
    }
    let n = d * d;
    if n > MAX_SUPEROPERATOR_DIM && !allow_large {
        return Err(Error::DimensionOverflow(n));
    }
    let id = DMatrix::<C64>::identity(d, d);
    let hm = h.matrix();
    let mi = C64::new(0.0, -1.0);
    let mut l = (kron(&id, hm) - kron(&hm.transpose(), &id)) * mi;

    let (a1, a2) = two_mode_ops(basis);
    let half = C64::from(kappa / 2.0);
    for a in [a1, a2] {
        let a = a.into_matrix();
        let ada = a.adjoint() * &a;
        let jump = kron(&a.conjugate(), &a) * C64::from(2.0);
        let anti = kron(&id, &ada) + kron(&ada.transpose(), &id);
        l += (jump - anti) * half;
    }
    Ok(Superoperator {
        hilbert_dim: d,
        mat: l,
    })
}

/// Hermitian unit-trace state on a truncated two-mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps a square matrix; physicality is checked separately.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        Ok(DensityMatrix { mat })
    }

    /// `|ψ><ψ| / <ψ|ψ>`.
    pub fn from_state(psi: &DVector<C64>) -> Self {
        let norm = psi.norm_squared();
        DensityMatrix {
            mat: psi * psi.adjoint() / C64::from(norm),
        }
    }

    /// Fock state `|n1, n2><n1, n2|`.
    pub fn fock(basis: &FockBasis, n1: usize, n2: usize) -> Option<Self> {
        let k = basis.index(n1, n2)?;
        let d = basis.dim();
        let mut mat = DMatrix::zeros(d, d);
        mat[(k, k)] = C64::new(1.0, 0.0);
        Some(DensityMatrix { mat })
    }

    pub fn vacuum(basis: &FockBasis) -> Self {
        Self::fock(basis, 0, 0).expect("vacuum is always in the basis")
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        (&self.mat - self.mat.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `(ρ + ρ†) / 2`.
    pub fn hermitize(&self) -> Self {
        DensityMatrix {
            mat: (&self.mat + self.mat.adjoint()) * C64::from(0.5),
        }
    }

    /// Ascending eigenvalues of the Hermitian part; all NaN if the iteration fails.
    ///
    /// Computed from the real symmetric embedding `[[A, -B], [B, A]]` of `A + iB`,
    /// whose spectrum is that of `A + iB` with every eigenvalue doubled. The complex
    /// routine can return NaN when the spectrum spans hundreds of decades, as it
    /// does for weakly driven states at large cutoff.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let h = self.hermitize().mat;
        let real = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = h[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let mut ev: Vec<f64> = match real.try_symmetric_eigen(f64::EPSILON, 0) {
            Some(e) => e.eigenvalues.iter().copied().collect(),
            None => vec![f64::NAN; 2 * n],
        };
        ev.sort_by(f64::total_cmp);
        ev.into_iter().step_by(2).collect()
    }

    /// NaN if any eigenvalue is not finite.
    pub fn min_eigenvalue(&self) -> f64 {
        let ev = self.eigenvalues();
        if ev.iter().all(|v| v.is_finite()) {
            ev[0]
        } else {
            f64::NAN
        }
    }

    /// Enforces unit trace, Hermiticity and positivity within the module tolerances.
    pub fn check_physical(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Unphysical(format!("trace {tr}")));
        }
        let herm = self.hermitian_deviation();
        if herm > HERMITIAN_TOL {
            return Err(Error::Unphysical(format!("hermiticity deviation {herm:e}")));
        }
        let min = self.min_eigenvalue();
        if !(min >= MIN_EIGENVALUE) {
            return Err(Error::Unphysical(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `Tr(A ρ)`.
    pub fn expect(&self, op: &ComplexOperator) -> C64 {
        let a = op.matrix();
        let d = self.dim();
        let mut acc = zero();
        for i in 0..d {
            for j in 0..d {
                acc += a[(i, j)] * self.mat[(j, i)];
            }
        }
        acc
    }

    /// `½ Σ |eig(ρ - σ)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = DensityMatrix {
            mat: &self.mat - &other.mat,
        };
        0.5 * diff.eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Binary dump: magic `RHO1`, four zero bytes, `u64` dimension, then
    /// row-major interleaved real/imaginary `f64`, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dim();
        let mut out = Vec::with_capacity(16 + 16 * d * d);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[0; 4]);
        out.extend_from_slice(&(d as u64).to_le_bytes());
        for r in 0..d {
            for c in 0..d {
                let z = self.mat[(r, c)];
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::BadDump("missing RHO1 header".into()));
        }
        let d = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        let want = d
            .checked_mul(d)
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| Error::BadDump(format!("dimension {d} overflows")))?;
        if body.len() != want {
            return Err(Error::BadDump(format!(
                "expected {want} payload bytes, found {}",
                body.len()
            )));
        }
        let f = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().expect("8 bytes"));
        let mat = DMatrix::from_fn(d, d, |r, c| {
            let k = 2 * (r * d + c);
            C64::new(f(k), f(k + 1))
        });
        Ok(DensityMatrix { mat })
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_dump(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Steady state together with solver health metrics.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `max |ρ - ρ†|` before Hermitization.
    pub asymmetry: f64,
    /// `‖L vec(ρ)‖∞` after Hermitization.
    pub residual: f64,
}

/// Unit-trace null vector of `l`, Hermitized and checked for physicality.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    steady_state_report(l).map(|s| s.rho)
}

pub fn steady_state_report(l: &Superoperator) -> Result<SteadyState> {
    let d = l.hilbert_dim;
    let n = l.dim();
    let mut a = l.mat.clone();
    for c in 0..n {
        a[(0, c)] = zero();
    }
    for i in 0..d {
        a[(0, i + i * d)] = C64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(n);
    rhs[0] = C64::new(1.0, 0.0);

    let solved = a.lu().solve(&rhs).filter(|v| v.iter().all(|z| z.is_finite()));
    let v = match solved {
        Some(v) => v,
        None => return Err(diagnose_failure(l)),
    };
    let raw = DensityMatrix {
        mat: DMatrix::from_column_slice(d, d, v.as_slice()),
    };
    let asymmetry = raw.hermitian_deviation();
    let rho = raw.hermitize();
    let residual = l.apply(&rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
    log::debug!("steady state: asymmetry {asymmetry:e}, residual {residual:e}");

    let scale = l.inf_norm().max(1.0);
    if residual > 1e-8 * scale {
        return Err(diagnose_failure(l));
    }
    rho.check_physical()?;
    Ok(SteadyState {
        rho,
        asymmetry,
        residual,
    })
}

fn diagnose_failure(l: &Superoperator) -> Error {
    let sv = l.mat.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let null = sv.iter().filter(|&&s| s <= 1e-12 * max.max(f64::MIN_POSITIVE)).count();
    if null > 1 {
        Error::NonUniqueSteadyState(null)
    } else {
        Error::SingularLiouvillian
    }
}

/// Outcome of a fixed-step integration.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub rho: DensityMatrix,
    pub steps: usize,
    /// Largest `|Tr ρ(t) - 1|` seen at the step boundaries.
    pub max_trace_drift: f64,
}

/// Classical RK4 integration of `dρ/dt = L ρ` up to `t_final`.
pub fn evolve(l: &Superoperator, rho0: &DensityMatrix, t_final: f64, dt: f64) -> Result<DensityMatrix> {
    evolve_report(l, rho0, t_final, dt).map(|e| e.rho)
}

pub fn evolve_report(
    l: &Superoperator,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
) -> Result<Evolution> {
    let d = l.hilbert_dim;
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        });
    }
    let bound = 0.1 / l.inf_norm();
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParams(format!("t_final = {t_final}")));
    }
    let steps = (t_final / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let hc = C64::from(h);

    let csr = l.sparse();
    let n = l.dim();
    let mut y: Vec<C64> = rho0.mat.as_slice().to_vec();
    let mut k1 = vec![zero(); n];
    let mut k2 = vec![zero(); n];
    let mut k3 = vec![zero(); n];
    let mut k4 = vec![zero(); n];
    let mut tmp = vec![zero(); n];
    let trace0: C64 = (0..d).map(|i| y[i + i * d]).sum();
    let mut max_drift = 0.0f64;

    for step in 0..steps {
        csr.mul_into(&y, &mut k1);
        axpy(&y, hc * 0.5, &k1, &mut tmp);
        csr.mul_into(&tmp, &mut k2);
        axpy(&y, hc * 0.5, &k2, &mut tmp);
        csr.mul_into(&tmp, &mut k3);
        axpy(&y, hc, &k3, &mut tmp);
        csr.mul_into(&tmp, &mut k4);
        let w = hc / 6.0;
        for i in 0..n {
            y[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let tr: C64 = (0..d).map(|i| y[i + i * d]).sum();
        let drift = (tr - trace0).norm();
        max_drift = max_drift.max(drift);
        if !(drift <= MAX_TRACE_DRIFT) {
            return Err(Error::IntegrationUnstable {
                time: (step + 1) as f64 * h,
                drift,
            });
        }
    }
    Ok(Evolution {
        rho: DensityMatrix {
            mat: DMatrix::from_column_slice(d, d, &y),
        },
        steps,
        max_trace_drift: max_drift,
    })
}

fn axpy(y: &[C64], a: C64, x: &[C64], out: &mut [C64]) {
    for ((o, yi), xi) in out.iter_mut().zip(y).zip(x) {
        *o = yi + a * xi;
    }
}

/// `(g2, n̄)` of one mode: `Tr(a†a†aa ρ) / Tr(a†a ρ)²` and `Tr(a†a ρ)`.
pub fn mode_statistics(rho: &DensityMatrix, a: &ComplexOperator, cavity: Cavity) -> Result<(f64, f64)> {
    let ad = a.adjoint();
    let n_op = &ad * a;
    let n = rho.expect(&n_op).re;
    if !(n > EMPTY_MODE) {
        return Err(Error::EmptyMode(cavity.number()));
    }
    let pairs = &(&ad * &ad) * &(a * a);
    Ok((rho.expect(&pairs).re / (n * n), n))
}

/// `(g2_1, g2_2, n̄_1, n̄_2)`; fails if either mode is empty.
pub fn g2_from_rho(
    rho: &DensityMatrix,
    a1: &ComplexOperator,
    a2: &ComplexOperator,
) -> Result<(f64, f64, f64, f64)> {
    let (g1, n1) = mode_statistics(rho, a1, Cavity::One)?;
    let (g2, n2) = mode_statistics(rho, a2, Cavity::Two)?;
    Ok((g1, g2, n1, n2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonStatistics {
    Bunched,
    Poissonian,
    Antibunched,
}

/// Bunched iff `g2 > 1`, antibunched iff `g2 < 1`.
pub fn classify_statistics(g2: f64) -> PhotonStatistics {
    if g2 > 1.0 {
        PhotonStatistics::Bunched
    } else if g2 < 1.0 {
        PhotonStatistics::Antibunched
    } else {
        PhotonStatistics::Poissonian
    }
}

/// Steady state of `p` at a symmetric cutoff, with per-mode statistics.
#[derive(Debug, Clone)]
pub struct MasterEquationPoint {
    pub steady: SteadyState,
    pub basis: FockBasis,
}

impl MasterEquationPoint {
    pub fn solve(p: &SystemParams, cutoff: usize) -> Result<Self> {
        let basis = FockBasis::symmetric(cutoff)?;
        let l = liouvillian(p, &basis)?;
        let steady = steady_state_report(&l)?;
        Ok(MasterEquationPoint { steady, basis })
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.steady.rho
    }

    pub fn statistics(&self, cavity: Cavity) -> Result<(f64, f64)> {
        let (a1, a2) = two_mode_ops(&self.basis);
        let a = match cavity {
            Cavity::One => a1,
            Cavity::Two => a2,
        };
        mode_statistics(&self.steady.rho, &a, cavity)
    }

    pub fn g2(&self, cavity: Cavity) -> Result<f64> {
        self.statistics(cavity).map(|(g, _)| g)
    }
}
