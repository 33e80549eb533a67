//! Concrete group actions on vector spaces and their projectivizations.
//!
//! A [`Representation`] carries the matrices of the derived action on the
//! bases of `k` and `p`. Elements of `p` act by symmetric matrices and
//! elements of `k` by antisymmetric ones, so one-parameter subgroups from
//! `p` can always be evaluated through a spectral decomposition.
//!
//! The gradient map is normalized by
//! `<mu_p(x), beta> = 1/2 x^T drho(beta) x` on a vector space and by the
//! Rayleigh quotient `x^T drho(beta) x / x^T x` on projective space; the
//! Kempf-Ness potentials `1/4 (|gx|^2 - |x|^2)` and `1/2 log(|gx|^2/|x|^2)`
//! are chosen so that `d/dt Phi(x, exp(t beta))` recovers the pairing
//! exactly.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::liealg::{Direction, ReductiveStructure};
use crate::linalg::{matrix_exp, sym_eigen};
use crate::Result;

/// Which space the group acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Affine,
    Projective,
}

/// A point of the representation space. Projective points are stored as
/// unit vectors; affine points are unrestricted.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub vec: DVector<f64>,
}

impl Point {
    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }
}

/// An element of the acting group in representation coordinates.
///
/// Instances are only produced by exponentials and their products, so the
/// determinant stays bounded away from zero for the inputs in scope.
#[derive(Debug, Clone)]
pub struct GroupElement {
    mat: DMatrix<f64>,
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        GroupElement {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// `other * self`, the composition acting after `self`.
    pub fn then(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            mat: &other.mat * &self.mat,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        let det = self.mat.determinant();
        !det.is_finite() || det.abs() < 1e-12
    }
}

/// A linear or projective action of a reductive structure.
#[derive(Debug, Clone)]
pub struct Representation {
    structure: ReductiveStructure,
    dim_v: usize,
    rho_k: Vec<DMatrix<f64>>,
    rho_p: Vec<DMatrix<f64>>,
    /// Action matrices of the orthonormal basis of `g` (k part first).
    rho_on: Vec<DMatrix<f64>>,
    space: Space,
}

impl Representation {
    /// Builds and validates a representation.
    ///
    /// Checks that `drho` respects brackets on all basis pairs, that `p`
    /// acts symmetrically and `k` antisymmetrically.
    pub fn new(
        structure: ReductiveStructure,
        dim_v: usize,
        rho_k: Vec<DMatrix<f64>>,
        rho_p: Vec<DMatrix<f64>>,
        space: Space,
    ) -> Result<Self> {
        if rho_k.len() != structure.dim_k() || rho_p.len() != structure.dim_p() {
            return Err(Error::InvalidRepresentation(format!(
                "expected {} k-matrices and {} p-matrices, got {} and {}",
                structure.dim_k(),
                structure.dim_p(),
                rho_k.len(),
                rho_p.len()
            )));
        }
        for m in rho_k.iter().chain(rho_p.iter()) {
            if m.nrows() != dim_v || m.ncols() != dim_v {
                return Err(Error::DimensionMismatch {
                    expected: dim_v,
                    got: m.nrows(),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("representation matrix"));
            }
        }
        let scale = rho_k
            .iter()
            .chain(rho_p.iter())
            .map(|m| m.amax())
            .fold(0.0f64, f64::max)
            .max(1.0);
        for m in &rho_p {
            if (m - m.transpose()).amax() > 1e-8 * scale {
                return Err(Error::InvalidRepresentation(
                    "p must act by symmetric matrices".into(),
                ));
            }
        }
        for m in &rho_k {
            if (m + m.transpose()).amax() > 1e-8 * scale {
                return Err(Error::InvalidRepresentation(
                    "k must act by antisymmetric matrices".into(),
                ));
            }
        }

        let rep = Representation {
            structure,
            dim_v,
            rho_k,
            rho_p,
            rho_on: Vec::new(),
            space,
        };
        let dim_g = rep.structure.dim_g();
        let mut rho_on = Vec::with_capacity(dim_g);
        for i in 0..dim_g {
            let mut coords = DVector::zeros(dim_g);
            coords[i] = 1.0;
            let m = rep.structure.g_from_coords(&coords);
            rho_on.push(rep.rho_of_matrix_raw(&m)?);
        }
        let rep = Representation { rho_on, ..rep };

        // Bracket compatibility on user basis pairs.
        let all_m: Vec<&DMatrix<f64>> = rep
            .structure
            .basis_k()
            .iter()
            .chain(rep.structure.basis_p().iter())
            .collect();
        let all_r: Vec<&DMatrix<f64>> = rep.rho_k.iter().chain(rep.rho_p.iter()).collect();
        for i in 0..all_m.len() {
            for j in 0..all_m.len() {
                let lie = crate::linalg::commutator(all_m[i], all_m[j]);
                let expect = rep.rho_of_matrix_raw(&lie)?;
                let got = crate::linalg::commutator(all_r[i], all_r[j]);
                if (expect - got).amax() > 1e-7 * scale.powi(2).max(1.0) {
                    return Err(Error::InvalidRepresentation(format!(
                        "drho is not a homomorphism on basis pair ({i}, {j})"
                    )));
                }
            }
        }
        Ok(rep)
    }

    fn rho_of_matrix_raw(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (kc, pc) = self.structure.g_user_split(m)?;
        let mut out = DMatrix::zeros(self.dim_v, self.dim_v);
        for (c, r) in kc.iter().zip(self.rho_k.iter()) {
            out += r * *c;
        }
        for (c, r) in pc.iter().zip(self.rho_p.iter()) {
            out += r * *c;
        }
        Ok(out)
    }

    pub fn structure(&self) -> &ReductiveStructure {
        &self.structure
    }

    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    pub fn space(&self) -> Space {
        self.space
    }

    /// Same representation matrices acting on the other space.
    pub fn with_space(&self, space: Space) -> Representation {
        Representation {
            space,
            ..self.clone()
        }
    }

    // ---- points -----------------------------------------------------------

    /// Validates (and for projective space, normalizes) a point.
    pub fn point(&self, vec: Vec<f64>) -> Result<Point> {
        if vec.len() != self.dim_v {
            return Err(Error::DimensionMismatch {
                expected: self.dim_v,
                got: vec.len(),
            });
        }
        if vec.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        let v = DVector::from_vec(vec);
        match self.space {
            Space::Affine => Ok(Point { vec: v }),
            Space::Projective => {
                let n = v.norm();
                if n < 1e-300 {
                    return Err(Error::ZeroProjectivePoint);
                }
                Ok(Point { vec: v / n })
            }
        }
    }

    pub(crate) fn renormalize(&self, v: DVector<f64>) -> Result<Point> {
        match self.space {
            Space::Affine => Ok(Point { vec: v }),
            Space::Projective => {
                let n = v.norm();
                if !n.is_finite() || n < 1e-300 {
                    return Err(Error::ZeroProjectivePoint);
                }
                Ok(Point { vec: v / n })
            }
        }
    }

    // ---- the infinitesimal action -----------------------------------------

    /// `drho(beta)` for a direction in `p`. Always symmetric.
    pub fn rho_dir(&self, beta: &Direction) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim_v, self.dim_v);
        for (c, r) in beta.coords.iter().zip(self.rho_p.iter()) {
            out += r * *c;
        }
        out
    }

    /// `drho(m)` for any matrix in `g`.
    pub fn rho_of_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let residual = self.structure.g_membership_residual(m);
        if residual > 1e-6 {
            return Err(Error::InvalidRepresentation(format!(
                "matrix is not in g (residual {residual:.3e})"
            )));
        }
        let coords = self.structure.g_coords(m);
        let mut out = DMatrix::zeros(self.dim_v, self.dim_v);
        for (c, r) in coords.iter().zip(self.rho_on.iter()) {
            out += r * *c;
        }
        Ok(out)
    }

    pub(crate) fn rho_on(&self) -> &[DMatrix<f64>] {
        &self.rho_on
    }

    /// Fundamental vector field of a direction at a point.
    ///
    /// Affine: `drho(beta) x`. Projective: the tangent component
    /// `drho(beta) x - (x^T drho(beta) x) x` at the stored unit vector.
    pub fn fundamental_field(&self, beta: &Direction, x: &Point) -> DVector<f64> {
        self.field_of_operator(&self.rho_dir(beta), x)
    }

    pub(crate) fn field_of_operator(&self, a: &DMatrix<f64>, x: &Point) -> DVector<f64> {
        let ax = a * &x.vec;
        match self.space {
            Space::Affine => ax,
            Space::Projective => {
                let n2 = x.vec.norm_squared();
                let r = x.vec.dot(&ax) / n2;
                ax - &x.vec * r
            }
        }
    }

    /// Squared norm of the fundamental field in the metric that makes it
    /// the gradient of `<mu_p, beta>`. Affine: Euclidean; projective: twice
    /// the Euclidean tangent norm.
    pub fn field_energy(&self, beta: &Direction, x: &Point) -> f64 {
        let f = self.fundamental_field(beta, x);
        match self.space {
            Space::Affine => f.norm_squared(),
            Space::Projective => 2.0 * f.norm_squared() / x.vec.norm_squared(),
        }
    }

    // ---- gradient map -------------------------------------------------------

    /// Pairing `<mu_p(x), beta>` evaluated directly.
    pub fn moment_pairing(&self, x: &Point, beta: &Direction) -> f64 {
        let a = self.rho_dir(beta);
        let xax = x.vec.dot(&(&a * &x.vec));
        match self.space {
            Space::Affine => 0.5 * xax,
            Space::Projective => xax / x.vec.norm_squared(),
        }
    }

    /// The gradient map `mu_p(x)` as a direction in `p`.
    pub fn gradient_map(&self, x: &Point) -> Result<Direction> {
        let dim_p = self.structure.dim_p();
        let mut rhs = DVector::zeros(dim_p);
        for (i, r) in self.rho_p.iter().enumerate() {
            let xax = x.vec.dot(&(r * &x.vec));
            rhs[i] = match self.space {
                Space::Affine => 0.5 * xax,
                Space::Projective => xax / x.vec.norm_squared(),
            };
        }
        // <sum_j c_j b_j, b_i> = rhs_i is the Gram system solved at
        // structure construction time; singularity was rejected there.
        let gram = self.gram_p();
        let coords = crate::linalg::solve_spd(gram, &rhs)
            .ok_or_else(|| Error::InvalidStructure("singular Gram matrix".into()))?;
        Ok(Direction { coords })
    }

    fn gram_p(&self) -> &DMatrix<f64> {
        self.structure.gram_p_ref()
    }

    /// Norm of the gradient map at a point.
    pub fn moment_norm(&self, x: &Point) -> Result<f64> {
        let mu = self.gradient_map(x)?;
        Ok(self.structure.dir_norm(&mu))
    }

    // ---- group elements ------------------------------------------------------

    /// `exp(t drho(beta))` through the spectral decomposition.
    pub fn exp_dir(&self, beta: &Direction, t: f64) -> GroupElement {
        let a = self.rho_dir(beta);
        GroupElement {
            mat: crate::linalg::sym_exp(&a, t),
        }
    }

    /// `exp(drho(m))` for an arbitrary element of `g`.
    pub fn exp_algebra(&self, m: &DMatrix<f64>) -> Result<GroupElement> {
        let a = self.rho_of_matrix(m)?;
        Ok(GroupElement {
            mat: matrix_exp(&a),
        })
    }

    /// Applies a group element to a point.
    pub fn act(&self, g: &GroupElement, x: &Point) -> Result<Point> {
        self.renormalize(&g.mat * &x.vec)
    }

    /// Applies `exp(t drho(beta))` to `x`. On projective space the flow is
    /// evaluated with the spectrum shifted by its maximum so large `t` does
    /// not overflow.
    pub fn act_exp_dir(&self, beta: &Direction, t: f64, x: &Point) -> Result<Point> {
        let a = self.rho_dir(beta);
        match self.space {
            Space::Affine => self.renormalize(crate::linalg::sym_exp(&a, t) * &x.vec),
            Space::Projective => {
                let (vals, vecs) = sym_eigen(&a);
                let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let coords = vecs.transpose() * &x.vec;
                let scaled = DVector::from_iterator(
                    vals.len(),
                    vals.iter()
                        .zip(coords.iter())
                        .map(|(l, c)| ((l - top) * t).exp() * c),
                );
                self.renormalize(&vecs * scaled)
            }
        }
    }

    // ---- Kempf-Ness function ---------------------------------------------------

    /// The Kempf-Ness potential `Phi(x, g)`.
    pub fn kempf_ness(&self, x: &Point, g: &GroupElement) -> f64 {
        let gx = &g.mat * &x.vec;
        match self.space {
            Space::Affine => 0.25 * (gx.norm_squared() - x.vec.norm_squared()),
            Space::Projective => 0.5 * (gx.norm_squared() / x.vec.norm_squared()).ln(),
        }
    }

    /// `d/dt Phi(x, exp(t beta)) = <mu_p(exp(t beta) x), beta>`.
    pub fn kempf_ness_derivative(&self, x: &Point, beta: &Direction, t: f64) -> Result<f64> {
        let y = self.act_exp_dir(beta, t, x)?;
        Ok(self.moment_pairing(&y, beta))
    }

    /// Growth constant `C`: the largest operator norm of `drho(beta)` over
    /// unit directions, estimated by deterministic sampling plus power
    /// iteration. Bounds the fundamental fields linearly.
    pub fn linear_growth_constant(&self) -> f64 {
        let dim_p = self.structure.dim_p();
        let mut best = 0.0f64;
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9);
        let mut candidates: Vec<DVector<f64>> = Vec::new();
        for i in 0..dim_p {
            let mut v = DVector::zeros(dim_p);
            v[i] = 1.0;
            candidates.push(v);
        }
        for _ in 0..(64 * dim_p) {
            let v = DVector::from_iterator(dim_p, (0..dim_p).map(|_| rng.gen_range(-1.0..1.0)));
            if v.norm() > 1e-9 {
                candidates.push(v);
            }
        }
        for on in candidates {
            let unit = self.structure.dir_from_on_coords(&(&on / on.norm()));
            let a = self.rho_dir(&unit);
            best = best.max(operator_norm_power(&a));
        }
        best
    }

    /// Distance on the space: Euclidean for affine points, angular for
    /// projective classes.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self.space {
            Space::Affine => (&x.vec - &y.vec).norm(),
            Space::Projective => {
                let c = (x.vec.dot(&y.vec) / (x.norm() * y.norm()))
                    .abs()
                    .clamp(0.0, 1.0);
                c.acos()
            }
        }
    }

    /// Conjugates a direction by `exp(xi)` at the ambient level, with `xi`
    /// in `k`: the adjoint action of `K` on `p`.
    pub fn ad_k_direction(&self, xi_k: &DMatrix<f64>, beta: &Direction) -> Result<Direction> {
        let k_amb = matrix_exp(xi_k);
        let inv = matrix_exp(&(-xi_k));
        let conj = &k_amb * self.structure.dir_matrix(beta) * inv;
        self.structure.dir_from_matrix(&conj)
    }
}

fn operator_norm_power(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 || a.amax() == 0.0 {
        return 0.0;
    }
    // Power iteration on A^2; A is symmetric so this converges to the
    // squared spectral radius.
    let a2 = a * a;
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0f64;
    for _ in 0..200 {
        let w = &a2 * &v;
        let nw = w.norm();
        if nw < 1e-300 {
            return 0.0;
        }
        lambda = nw;
        v = w / nw;
    }
    lambda.sqrt()
}

/// Representation presets over the `sl(n)` structures.
pub mod presets {
    use super::*;

    /// The defining action of `sl(n)` on `R^n`.
    pub fn defining(structure: &ReductiveStructure, space: Space) -> Result<Representation> {
        Representation::new(
            structure.clone(),
            structure.ambient_dim(),
            structure.basis_k().to_vec(),
            structure.basis_p().to_vec(),
            space,
        )
    }

    /// The adjoint action on `g` itself, in the orthonormal coordinates
    /// given by [`ReductiveStructure::g_coords`].
    pub fn adjoint(structure: &ReductiveStructure, space: Space) -> Result<Representation> {
        let rho_k: Vec<DMatrix<f64>> = structure
            .basis_k()
            .iter()
            .map(|b| structure.ad_matrix_public(b))
            .collect();
        let rho_p: Vec<DMatrix<f64>> = structure
            .basis_p()
            .iter()
            .map(|b| structure.ad_matrix_public(b))
            .collect();
        Representation::new(structure.clone(), structure.dim_g(), rho_k, rho_p, space)
    }

    /// Binary forms of degree `d` under `sl(2)`, acting by
    /// `(g . f)(v) = f(g^{-1} v)`, in the scaled monomial basis
    /// `sqrt(binom(d, j)) v1^{d-j} v2^j`.
    pub fn sym(structure: &ReductiveStructure, d: usize, space: Space) -> Result<Representation> {
        if structure.ambient_dim() != 2 {
            return Err(Error::InvalidRepresentation(
                "sym_d requires an sl(2) structure".into(),
            ));
        }
        if d == 0 || d > 6 {
            return Err(Error::InvalidRepresentation(
                "sym_d supports 1 <= d <= 6".into(),
            ));
        }
        let n = d + 1;
        let mut de = DMatrix::zeros(n, n);
        let mut df = DMatrix::zeros(n, n);
        let mut dh = DMatrix::zeros(n, n);
        for j in 0..n {
            dh[(j, j)] = 2.0 * j as f64 - d as f64;
            if j + 1 < n {
                de[(j + 1, j)] = -(((d - j) * (j + 1)) as f64).sqrt();
            }
            if j > 0 {
                df[(j - 1, j)] = -((j * (d - j + 1)) as f64).sqrt();
            }
        }
        let lift = |b: &DMatrix<f64>| -> DMatrix<f64> {
            // b = alpha H + beta E + gamma F for traceless 2x2 input.
            &dh * b[(0, 0)] + &de * b[(0, 1)] + &df * b[(1, 0)]
        };
        let rho_k: Vec<DMatrix<f64>> = structure.basis_k().iter().map(&lift).collect();
        let rho_p: Vec<DMatrix<f64>> = structure.basis_p().iter().map(lift).collect();
        Representation::new(structure.clone(), n, rho_k, rho_p, space)
    }

    /// Parses `defining`, `adjoint`, `sym2` .. `sym6` (or `sym_2` style).
    pub fn by_name(
        structure: &ReductiveStructure,
        name: &str,
        space: Space,
    ) -> Result<Representation> {
        match name {
            "defining" => defining(structure, space),
            "adjoint" => adjoint(structure, space),
            other => {
                let rest = other
                    .strip_prefix("sym_")
                    .or_else(|| other.strip_prefix("sym"))
                    .ok_or_else(|| Error::UnknownPreset(other.to_string()))?;
                let d: usize = rest
                    .parse()
                    .map_err(|_| Error::UnknownPreset(other.to_string()))?;
                sym(structure, d, space)
            }
        }
    }
}
