//! Matrix Lie-algebra substrate.
//!
//! A [`ReductiveStructure`] holds bases of `k` (antisymmetric part) and `p`
//! (symmetric part) of a reductive subalgebra `g = k + p` of real matrices,
//! together with the trace inner product `<A, B> = tr(A B^T)`. The Cartan
//! involution is `theta(A) = -A^T`; elements of `k` are its `+1`
//! eigenvectors and elements of `p` its `-1` eigenvectors.
//!
//! The inner product used here is positive definite on all of `g`. On `p`
//! it agrees with the invariant form carried by the symmetric space; on `k`
//! it is the negative of that form. Every formula evaluated by this crate
//! only pairs elements of `p`, so the sign convention is invisible outside
//! of the diagnostics record, which states it.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg::{
    cluster_eigenvalues, commutator, kernel_basis, orthonormalize, rank_with_threshold, sym_eigen,
    trace_inner, trace_norm,
};
use crate::Result;

/// Default residual tolerance for structure checks.
pub const STRUCTURE_TOL: f64 = 1e-8;

/// An element of `p` in coordinates of the structure's `basis_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub coords: DVector<f64>,
}

impl Direction {
    pub fn new(coords: Vec<f64>) -> Self {
        Direction {
            coords: DVector::from_vec(coords),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Direction {
            coords: DVector::zeros(dim),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Direction {
            coords: &self.coords * c,
        }
    }

    pub fn add(&self, other: &Direction) -> Self {
        Direction {
            coords: &self.coords + &other.coords,
        }
    }

    pub fn negate(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

/// Eigenspace split of `g` along `ad(beta)` for `beta` in `p`.
///
/// `parabolic_plus` is the span of `levi` and `nilradical_plus`; the minus
/// nilradical is the image of the plus one under the Cartan involution.
#[derive(Debug, Clone)]
pub struct SubalgebraSplit {
    pub levi: Vec<DMatrix<f64>>,
    pub nilradical_plus: Vec<DMatrix<f64>>,
    pub nilradical_minus: Vec<DMatrix<f64>>,
    pub parabolic_plus: Vec<DMatrix<f64>>,
}

impl SubalgebraSplit {
    /// `(levi, nilradical_plus, nilradical_minus)` dimensions.
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.levi.len(),
            self.nilradical_plus.len(),
            self.nilradical_minus.len(),
        )
    }
}

/// Residual record produced by [`ReductiveStructure::check_compatible_structure`].
#[derive(Debug, Clone)]
pub struct StructureDiagnostics {
    pub ok: bool,
    pub theta_k_residual: f64,
    pub theta_p_residual: f64,
    pub bracket_kk_residual: f64,
    pub bracket_kp_residual: f64,
    pub bracket_pp_residual: f64,
    pub ad_invariance_residual: f64,
    pub jacobi_residual: f64,
    pub independence_min_sv: f64,
    /// Sign convention of the inner product relative to the invariant form.
    pub convention: &'static str,
}

/// Verdict of [`ReductiveStructure::check_global_decomposition`].
#[derive(Debug, Clone)]
pub struct GlobalDecomposition {
    pub holds: bool,
    pub dim_g: usize,
    pub dim_k: usize,
    pub dim_parabolic: usize,
    pub dim_sum: usize,
    pub dim_intersection: usize,
    pub dim_k_centralizer: usize,
}

/// Structure data for a reductive matrix group `G = K exp(p)`.
///
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone)]
pub struct ReductiveStructure {
    ambient_dim: usize,
    basis_k: Vec<DMatrix<f64>>,
    basis_p: Vec<DMatrix<f64>>,
    /// Orthonormal basis of k under the trace form.
    on_k: Vec<DMatrix<f64>>,
    /// Orthonormal basis of p, orthogonalized against `on_k` as well.
    on_p: Vec<DMatrix<f64>>,
    /// Gram matrix of the user `basis_p`.
    gram_p: DMatrix<f64>,
    /// Change of basis: user p-coordinates to orthonormal p-coordinates.
    on_from_user: DMatrix<f64>,
    /// Inverse change of basis.
    user_from_on: DMatrix<f64>,
}

impl ReductiveStructure {
    /// Builds a structure from explicit bases.
    ///
    /// Rejects dimension mismatches and linearly dependent bases. Deeper
    /// compatibility (bracket closure, involution signs) is reported by
    /// [`Self::check_compatible_structure`], not enforced here.
    pub fn new(
        ambient_dim: usize,
        basis_k: Vec<DMatrix<f64>>,
        basis_p: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        for m in basis_k.iter().chain(basis_p.iter()) {
            if m.nrows() != ambient_dim || m.ncols() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    got: m.nrows(),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("basis matrix"));
            }
        }
        if basis_p.is_empty() {
            return Err(Error::InvalidStructure("basis_p must be nonempty".into()));
        }
        let on_k = orthonormalize(&basis_k, 1e-10);
        if on_k.len() != basis_k.len() {
            return Err(Error::InvalidStructure(
                "basis_k is linearly dependent".into(),
            ));
        }
        let mut joint = on_k.clone();
        joint.extend(basis_p.iter().cloned());
        let on_joint = orthonormalize(&joint, 1e-10);
        if on_joint.len() != on_k.len() + basis_p.len() {
            return Err(Error::InvalidStructure(
                "basis_k and basis_p together are linearly dependent".into(),
            ));
        }
        let on_p: Vec<DMatrix<f64>> = on_joint[on_k.len()..].to_vec();

        let dim_p = basis_p.len();
        let mut gram_p = DMatrix::zeros(dim_p, dim_p);
        for i in 0..dim_p {
            for j in 0..dim_p {
                gram_p[(i, j)] = trace_inner(&basis_p[i], &basis_p[j]);
            }
        }
        if gram_p.clone().cholesky().is_none() {
            return Err(Error::InvalidStructure(
                "degenerate basis_p (singular Gram matrix)".into(),
            ));
        }
        let mut on_from_user = DMatrix::zeros(dim_p, dim_p);
        for j in 0..dim_p {
            for i in 0..dim_p {
                on_from_user[(i, j)] = trace_inner(&basis_p[j], &on_p[i]);
            }
        }
        let user_from_on = on_from_user
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::InvalidStructure("p basis change is singular".into()))?;

        Ok(ReductiveStructure {
            ambient_dim,
            basis_k,
            basis_p,
            on_k,
            on_p,
            gram_p,
            on_from_user,
            user_from_on,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim_k(&self) -> usize {
        self.basis_k.len()
    }

    pub fn dim_p(&self) -> usize {
        self.basis_p.len()
    }

    pub fn dim_g(&self) -> usize {
        self.dim_k() + self.dim_p()
    }

    pub fn basis_k(&self) -> &[DMatrix<f64>] {
        &self.basis_k
    }

    pub fn basis_p(&self) -> &[DMatrix<f64>] {
        &self.basis_p
    }

    /// The Cartan involution `theta(A) = -A^T`.
    pub fn cartan_involution(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.ambient_dim || a.ncols() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: a.nrows(),
            });
        }
        Ok(-a.transpose())
    }

    // ---- directions -----------------------------------------------------

    pub fn direction(&self, coords: Vec<f64>) -> Result<Direction> {
        if coords.len() != self.dim_p() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_p(),
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("direction coordinates"));
        }
        Ok(Direction::new(coords))
    }

    /// Matrix form of a direction.
    pub fn dir_matrix(&self, dir: &Direction) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (c, b) in dir.coords.iter().zip(self.basis_p.iter()) {
            m += b * *c;
        }
        m
    }

    /// Inner product of two directions under the invariant form on `p`.
    pub fn dir_inner(&self, a: &Direction, b: &Direction) -> f64 {
        (a.coords.transpose() * &self.gram_p * &b.coords)[(0, 0)]
    }

    pub fn dir_norm(&self, a: &Direction) -> f64 {
        self.dir_inner(a, a).max(0.0).sqrt()
    }

    /// Normalizes to the unit sphere of `p`; errors on (numerically) zero input.
    pub fn dir_unit(&self, a: &Direction) -> Result<Direction> {
        let n = self.dir_norm(a);
        if n < 1e-14 {
            return Err(Error::InvalidStructure(
                "cannot normalize a zero direction".into(),
            ));
        }
        Ok(a.scale(1.0 / n))
    }

    /// Direction whose matrix form is the orthogonal projection of `m` onto `p`.
    pub fn dir_from_matrix(&self, m: &DMatrix<f64>) -> Result<Direction> {
        if m.nrows() != self.ambient_dim || m.ncols() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: m.nrows(),
            });
        }
        let rhs =
            DVector::from_iterator(self.dim_p(), self.basis_p.iter().map(|b| trace_inner(m, b)));
        let coords = crate::linalg::solve_spd(&self.gram_p, &rhs)
            .ok_or_else(|| Error::InvalidStructure("singular Gram matrix".into()))?;
        Ok(Direction { coords })
    }

    /// Orthonormal p-coordinates of a direction.
    pub fn dir_on_coords(&self, dir: &Direction) -> DVector<f64> {
        &self.on_from_user * &dir.coords
    }

    /// Direction from orthonormal p-coordinates.
    pub fn dir_from_on_coords(&self, on: &DVector<f64>) -> Direction {
        Direction {
            coords: &self.user_from_on * on,
        }
    }

    /// Angle between two directions, in radians.
    pub fn dir_angle(&self, a: &Direction, b: &Direction) -> f64 {
        let na = self.dir_norm(a);
        let nb = self.dir_norm(b);
        if na < 1e-14 || nb < 1e-14 {
            return 0.0;
        }
        (self.dir_inner(a, b) / (na * nb)).clamp(-1.0, 1.0).acos()
    }

    // ---- coordinates on g ------------------------------------------------

    /// Coordinates of a matrix in the orthonormal basis of `g` (k part first).
    ///
    /// This basis also underlies the adjoint representation, whose vectors
    /// are exactly these coordinates.
    pub fn g_coords(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let dim = self.dim_g();
        let mut v = DVector::zeros(dim);
        for (i, b) in self.on_k.iter().chain(self.on_p.iter()).enumerate() {
            v[i] = trace_inner(m, b);
        }
        v
    }

    /// Matrix with the given orthonormal `g` coordinates.
    pub fn g_from_coords(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (i, b) in self.on_k.iter().chain(self.on_p.iter()).enumerate() {
            m += b * v[i];
        }
        m
    }

    /// Splits `m` into user-basis coordinates `(k part, p part)`.
    pub fn g_user_split(&self, m: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let k_coords = if self.basis_k.is_empty() {
            DVector::zeros(0)
        } else {
            let dim_k = self.dim_k();
            let mut gram_k = DMatrix::zeros(dim_k, dim_k);
            for i in 0..dim_k {
                for j in 0..dim_k {
                    gram_k[(i, j)] = trace_inner(&self.basis_k[i], &self.basis_k[j]);
                }
            }
            let rhs = DVector::from_iterator(dim_k, self.basis_k.iter().map(|b| trace_inner(m, b)));
            crate::linalg::solve_spd(&gram_k, &rhs)
                .ok_or_else(|| Error::InvalidStructure("singular k Gram matrix".into()))?
        };
        let p = self.dir_from_matrix(m)?;
        Ok((k_coords, p.coords))
    }

    /// Residual of `m` against the span of `g`, relative to `|m|`.
    pub fn g_membership_residual(&self, m: &DMatrix<f64>) -> f64 {
        let c = self.g_coords(m);
        let back = self.g_from_coords(&c);
        trace_norm(&(m - back)) / trace_norm(m).max(1.0)
    }

    /// Matrix of `ad(b)` acting on `g` in the orthonormal basis.
    pub(crate) fn ad_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let dim = self.dim_g();
        let mut m = DMatrix::zeros(dim, dim);
        for (j, e) in self.on_k.iter().chain(self.on_p.iter()).enumerate() {
            m.set_column(j, &self.g_coords(&commutator(b, e)));
        }
        m
    }

    /// Matrix of `ad(b)` on `g`; this is the adjoint representation matrix
    /// of `b` in the orthonormal coordinates.
    pub fn ad_matrix_public(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.ad_matrix(b)
    }

    pub(crate) fn gram_p_ref(&self) -> &DMatrix<f64> {
        &self.gram_p
    }

    // ---- structure checks ------------------------------------------------

    /// Residual diagnostics for Cartan compatibility of the structure data.
    pub fn check_compatible_structure(&self) -> StructureDiagnostics {
        let theta_k_residual = self
            .basis_k
            .iter()
            .map(|b| trace_norm(&(-b.transpose() - b)) / trace_norm(b).max(1e-300))
            .fold(0.0f64, f64::max);
        let theta_p_residual = self
            .basis_p
            .iter()
            .map(|b| trace_norm(&(-b.transpose() + b)) / trace_norm(b).max(1e-300))
            .fold(0.0f64, f64::max);

        let closure = |lhs: &[DMatrix<f64>], rhs: &[DMatrix<f64>], target: &[DMatrix<f64>]| {
            let mut worst = 0.0f64;
            for a in lhs {
                for b in rhs {
                    let br = commutator(a, b);
                    let n = trace_norm(&br);
                    if n < 1e-14 {
                        continue;
                    }
                    let mut proj = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
                    for t in target {
                        proj += t * trace_inner(&br, t);
                    }
                    worst = worst.max(trace_norm(&(br - proj)) / n.max(1.0));
                }
            }
            worst
        };
        let bracket_kk_residual = closure(&self.basis_k, &self.basis_k, &self.on_k);
        let bracket_kp_residual = closure(&self.basis_k, &self.basis_p, &self.on_p);
        let bracket_pp_residual = closure(&self.basis_p, &self.basis_p, &self.on_k);

        let all: Vec<&DMatrix<f64>> = self.basis_k.iter().chain(self.basis_p.iter()).collect();
        let mut ad_invariance_residual = 0.0f64;
        for xi in &self.basis_k {
            for a in &all {
                for b in &all {
                    let lhs =
                        trace_inner(&commutator(xi, a), b) + trace_inner(a, &commutator(xi, b));
                    let scale = trace_norm(xi) * trace_norm(a) * trace_norm(b);
                    ad_invariance_residual = ad_invariance_residual.max(lhs.abs() / scale.max(1.0));
                }
            }
        }

        let mut jacobi_residual = 0.0f64;
        for a in &all {
            for b in &all {
                for c in &all {
                    let j = commutator(a, &commutator(b, c))
                        + commutator(b, &commutator(c, a))
                        + commutator(c, &commutator(a, b));
                    let scale = trace_norm(a) * trace_norm(b) * trace_norm(c);
                    jacobi_residual = jacobi_residual.max(trace_norm(&j) / scale.max(1.0));
                }
            }
        }

        let n2 = self.ambient_dim * self.ambient_dim;
        let mut stacked = DMatrix::zeros(n2, all.len());
        for (j, m) in all.iter().enumerate() {
            let norm = trace_norm(m).max(1e-300);
            for (i, x) in m.iter().enumerate() {
                stacked[(i, j)] = x / norm;
            }
        }
        let (independence_min_sv, _) = crate::linalg::singular_value_range(&stacked);

        let ok = theta_k_residual <= STRUCTURE_TOL
            && theta_p_residual <= STRUCTURE_TOL
            && bracket_kk_residual <= STRUCTURE_TOL
            && bracket_kp_residual <= STRUCTURE_TOL
            && bracket_pp_residual <= STRUCTURE_TOL
            && ad_invariance_residual <= STRUCTURE_TOL
            && independence_min_sv > STRUCTURE_TOL;

        StructureDiagnostics {
            ok,
            theta_k_residual,
            theta_p_residual,
            bracket_kk_residual,
            bracket_kp_residual,
            bracket_pp_residual,
            ad_invariance_residual,
            jacobi_residual,
            independence_min_sv,
            convention: "inner product tr(A B^T): positive definite on g; equals the invariant \
                         form on p and its negation on k",
        }
    }

    // ---- eigenspace machinery ---------------------------------------------

    /// Eigenspaces of `ad(beta)` on `g`, eigenvalues ascending.
    ///
    /// Eigenvalues closer than `1e-8 * (1 + spectral radius)` are merged.
    /// Fails when `ad(beta)` is not symmetric in the orthonormal basis,
    /// which signals that the input does not lie in `p`.
    pub fn ad_eigenspaces(&self, beta: &Direction) -> Result<Vec<(f64, Vec<DMatrix<f64>>)>> {
        if !beta.is_finite() {
            return Err(Error::NonFinite("direction"));
        }
        let b = self.dir_matrix(beta);
        let ad = self.ad_matrix(&b);
        let sym_residual = (&ad - ad.transpose()).amax();
        let scale = ad.amax().max(1.0);
        if sym_residual > 1e-7 * scale {
            return Err(Error::NotInP {
                residual: sym_residual / scale,
            });
        }
        let sym = (&ad + ad.transpose()) * 0.5;
        let (vals, vecs) = sym_eigen(&sym);
        let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = 1e-8 * (1.0 + radius);
        let clusters = cluster_eigenvalues(&vals, gap);
        let mut out = Vec::with_capacity(clusters.len());
        for (rep, cols) in clusters {
            let basis: Vec<DMatrix<f64>> = cols
                .iter()
                .map(|&c| self.g_from_coords(&vecs.column(c).into_owned()))
                .collect();
            out.push((rep, basis));
        }
        Ok(out)
    }

    /// Levi / nilradical / parabolic split along a direction.
    pub fn parabolic_subalgebra(&self, beta: &Direction) -> Result<SubalgebraSplit> {
        let spaces = self.ad_eigenspaces(beta)?;
        let mut levi = Vec::new();
        let mut plus = Vec::new();
        for (lambda, basis) in &spaces {
            if *lambda == 0.0 {
                levi.extend(basis.iter().cloned());
            } else if *lambda > 0.0 {
                plus.extend(basis.iter().cloned());
            }
        }
        let minus: Vec<DMatrix<f64>> = plus.iter().map(|m| -m.transpose()).collect();
        let mut parabolic_plus = levi.clone();
        parabolic_plus.extend(plus.iter().cloned());
        Ok(SubalgebraSplit {
            levi,
            nilradical_plus: plus,
            nilradical_minus: minus,
            parabolic_plus,
        })
    }

    /// Basis of the centralizer `p^E = {x in p : [x, e] = 0 for all e in E}`.
    pub fn centralizer_in_p(&self, dirs: &[Direction]) -> Vec<DMatrix<f64>> {
        self.centralizer_in_span(dirs, &self.on_p)
    }

    /// Basis of `k^E`, the centralizer of `E` inside `k`.
    pub fn centralizer_in_k(&self, dirs: &[Direction]) -> Vec<DMatrix<f64>> {
        self.centralizer_in_span(dirs, &self.on_k)
    }

    fn centralizer_in_span(&self, dirs: &[Direction], span: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        if span.is_empty() {
            return Vec::new();
        }
        if dirs.is_empty() {
            return span.to_vec();
        }
        let dim_g = self.dim_g();
        let mut stacked = DMatrix::zeros(dim_g * dirs.len(), span.len());
        for (bi, d) in dirs.iter().enumerate() {
            let dm = self.dir_matrix(d);
            for (j, e) in span.iter().enumerate() {
                let col = self.g_coords(&commutator(e, &dm));
                for i in 0..dim_g {
                    stacked[(bi * dim_g + i, j)] = col[i];
                }
            }
        }
        let scale = stacked.amax().max(1.0);
        let kernel = kernel_basis(&stacked, 1e-10 * scale);
        (0..kernel.ncols())
            .map(|j| {
                let mut m = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
                for (i, b) in span.iter().enumerate() {
                    m += b * kernel[(i, j)];
                }
                m
            })
            .collect()
    }

    /// Infinitesimal check of the global decomposition `G = K G^{beta+}`:
    /// `dim(k + g^{beta+})` must equal `dim g`.
    pub fn check_global_decomposition(&self, beta: &Direction) -> Result<GlobalDecomposition> {
        let split = self.parabolic_subalgebra(beta)?;
        let dim_g = self.dim_g();
        let dim_k = self.dim_k();
        let dim_parabolic = split.parabolic_plus.len();
        let mut stacked = DMatrix::zeros(dim_g, dim_k + dim_parabolic);
        for (j, m) in self
            .on_k
            .iter()
            .chain(split.parabolic_plus.iter())
            .enumerate()
        {
            stacked.set_column(j, &self.g_coords(m));
        }
        let dim_sum = rank_with_threshold(&stacked, 1e-9 * stacked.amax().max(1.0));
        let dim_intersection = dim_k + dim_parabolic - dim_sum;
        let dim_k_centralizer = self.centralizer_in_k(std::slice::from_ref(beta)).len();
        Ok(GlobalDecomposition {
            holds: dim_sum == dim_g,
            dim_g,
            dim_k,
            dim_parabolic,
            dim_sum,
            dim_intersection,
            dim_k_centralizer,
        })
    }
}

/// Presets: `sl(n, R)` with `k = so(n)` and `p` the symmetric traceless
/// matrices, for the ambient sizes used by the test corpus.
pub mod presets {
    use super::*;

    fn unit(n: usize, i: usize, j: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 1.0;
        m
    }

    /// `sl(n, R)` structure; supported for `n >= 2`.
    pub fn sl(n: usize) -> Result<ReductiveStructure> {
        if n < 2 {
            return Err(Error::InvalidStructure("sl(n) needs n >= 2".into()));
        }
        let mut basis_k = Vec::new();
        let mut basis_p = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                basis_k.push(unit(n, i, j) - unit(n, j, i));
                basis_p.push(unit(n, i, j) + unit(n, j, i));
            }
        }
        for i in 0..n - 1 {
            basis_p.push(unit(n, i, i) - unit(n, i + 1, i + 1));
        }
        ReductiveStructure::new(n, basis_k, basis_p)
    }

    /// Looks up a preset by name: `sl2`, `sl3` or `sl4`.
    pub fn by_name(name: &str) -> Result<ReductiveStructure> {
        match name {
            "sl2" => sl(2),
            "sl3" => sl(3),
            "sl4" => sl(4),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}
