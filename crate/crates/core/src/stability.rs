//! Stability classification with certificates.
//!
//! The classifier combines three ingredients:
//! - the sphere search for the minimum of the maximal weight function,
//! - the Kempf-Ness flow `x -> exp(-s mu_p(x)) x`, whose convergence to a
//!   zero of the gradient map witnesses polystability,
//! - slice restriction to the fixed set of a zero direction, which reduces
//!   a degenerate flow to a smaller problem.
//!
//! Labels are conservative: a definite label is only produced when its
//! witnesses check out numerically, everything else collapses to
//! `Indeterminate`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::action::{GroupElement, Point, Representation, Space};
use crate::error::Error;
use crate::liealg::{Direction, ReductiveStructure};
use crate::linalg::{commutator, kernel_basis, trace_norm};
use crate::maxweight::{
    max_weight_algebraic, zero_set_search, CurveEvaluator, MaxWeightValue, SearchOptions, ZeroSet,
};
use crate::Result;

/// Classification outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityLabel {
    Stable,
    Polystable,
    SemistableOnly,
    Unstable,
    Indeterminate,
}

/// How a flow run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowTermination {
    /// `|mu_p|` reached the flow tolerance.
    Converged,
    /// Iteration or step-size budget exhausted.
    Stalled,
    /// The numerical stabilizer dimension jumped: the iterates left the
    /// orbit for a smaller one in its closure.
    Degenerated,
}

/// Stabilizer subalgebra data at a point.
#[derive(Debug, Clone)]
pub struct StabilizerInfo {
    /// Basis matrices of `g_x`.
    pub basis: Vec<DMatrix<f64>>,
    pub dim: usize,
    /// Dimension of `g_x` intersected with `k`.
    pub dim_k: usize,
    /// Dimension of `g_x` intersected with `p`.
    pub dim_p: usize,
    /// Residual of theta-stability of `g_x` (zero when `g_x = k_x + p_x`).
    pub theta_residual: f64,
    /// A singular value fell within a factor 10 of the rank threshold.
    pub ambiguous: bool,
}

/// Flow tunables.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub flow_tolerance: f64,
    pub max_iters: usize,
    pub bisection_depth: usize,
    /// Cap on `t * spectral_radius` per line-search step.
    pub step_cap_exponent: f64,
    /// Relative singular-value threshold for stabilizer ranks.
    pub rank_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            flow_tolerance: 1e-8,
            max_iters: 10_000,
            bisection_depth: 60,
            step_cap_exponent: 40.0,
            rank_tol: 1e-8,
        }
    }
}

/// One recorded flow iterate.
#[derive(Debug, Clone)]
pub struct FlowIterate {
    pub moment_norm: f64,
    /// Cumulative Kempf-Ness value relative to the starting point.
    pub phi: f64,
    pub step: f64,
}

/// Full trace of one Kempf-Ness flow run.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub iterates: Vec<FlowIterate>,
    pub termination: FlowTermination,
    pub final_point: Point,
    /// Accumulated group element with `final_point = group * start`.
    pub group: GroupElement,
    pub iterations: usize,
    pub final_moment_norm: f64,
    pub initial_stabilizer_dim: usize,
    pub final_stabilizer_dim: usize,
}

/// Matrix of the infinitesimal action at `x`: column `j` is the
/// fundamental field of the j-th orthonormal basis vector of `g`.
fn stabilizer_map(rep: &Representation, x: &Point) -> DMatrix<f64> {
    let dim_g = rep.structure().dim_g();
    let mut m = DMatrix::zeros(rep.dim_v(), dim_g);
    for (j, op) in rep.rho_on().iter().enumerate() {
        m.set_column(j, &rep.field_of_operator(op, x));
    }
    m
}

/// Stabilizer subalgebra of a point, with its theta split.
///
/// `threshold` overrides the relative rank cutoff with an absolute one;
/// the flow freezes it at the starting point so that collapse toward a
/// smaller orbit shows up as a dimension jump.
pub fn stabilizer_algebra(
    rep: &Representation,
    x: &Point,
    threshold: Option<f64>,
) -> Result<StabilizerInfo> {
    let structure = rep.structure();
    let map = stabilizer_map(rep, x);
    let (_, sigma_max) = crate::linalg::singular_value_range(&map);
    let tau = threshold.unwrap_or(1e-8 * sigma_max.max(1e-8));
    let svd = map.clone().svd(false, false);
    let mut ambiguous = false;
    for &s in svd.singular_values.iter() {
        if s > tau / 10.0 && s < tau * 10.0 {
            ambiguous = true;
        }
    }
    let kernel = kernel_basis(&map, tau);
    let dim = kernel.ncols();
    let basis: Vec<DMatrix<f64>> = (0..dim)
        .map(|j| structure.g_from_coords(&kernel.column(j).into_owned()))
        .collect();

    let dim_g = structure.dim_g();
    let dim_k_all = structure.dim_k();
    let dim_p_all = structure.dim_p();
    // dim(g_x ^ k) = dim g_x + dim k - dim(g_x + k), via ranks of stacked
    // orthonormal coordinates.
    let join_dim = |other_coords: Vec<DVector<f64>>| -> usize {
        let cols = dim + other_coords.len();
        let mut stacked = DMatrix::zeros(dim_g, cols);
        for j in 0..dim {
            stacked.set_column(j, &kernel.column(j).into_owned());
        }
        for (j, c) in other_coords.iter().enumerate() {
            stacked.set_column(dim + j, c);
        }
        crate::linalg::rank_with_threshold(&stacked, 1e-9 * stacked.amax().max(1.0))
    };
    let k_coords: Vec<DVector<f64>> = (0..dim_k_all)
        .map(|i| {
            let mut v = DVector::zeros(dim_g);
            v[i] = 1.0;
            v
        })
        .collect();
    let p_coords: Vec<DVector<f64>> = (0..dim_p_all)
        .map(|i| {
            let mut v = DVector::zeros(dim_g);
            v[dim_k_all + i] = 1.0;
            v
        })
        .collect();
    let dim_k = dim + dim_k_all - join_dim(k_coords);
    let dim_p = dim + dim_p_all - join_dim(p_coords);

    let mut theta_residual = 0.0f64;
    for b in &basis {
        let tb = -b.transpose();
        let mut proj = DMatrix::zeros(structure.ambient_dim(), structure.ambient_dim());
        for c in &basis {
            proj += c * crate::linalg::trace_inner(&tb, c);
        }
        theta_residual = theta_residual.max(trace_norm(&(tb - proj)) / trace_norm(b).max(1e-300));
    }

    Ok(StabilizerInfo {
        basis,
        dim,
        dim_k,
        dim_p,
        theta_residual,
        ambiguous,
    })
}

/// Unit directions in `p` that kill the point: a basis of `p_x`.
fn p_stabilizer_basis(rep: &Representation, x: &Point) -> Vec<Direction> {
    let structure = rep.structure();
    let dim_p = structure.dim_p();
    let dim_k = structure.dim_k();
    let mut m = DMatrix::zeros(rep.dim_v(), dim_p);
    for j in 0..dim_p {
        m.set_column(j, &rep.field_of_operator(&rep.rho_on()[dim_k + j], x));
    }
    let (_, sigma_max) = crate::linalg::singular_value_range(&m);
    let kernel = kernel_basis(&m, 1e-8 * sigma_max.max(1e-8));
    (0..kernel.ncols())
        .map(|j| structure.dir_from_on_coords(&kernel.column(j).into_owned()))
        .collect()
}

/// Kempf-Ness gradient flow with exact line search along each step.
///
/// Each iteration moves along `-mu_p(x)/|mu_p(x)|` to the minimum of the
/// convex one-variable potential, found by derivative bisection; steps are
/// capped when the potential keeps descending along the whole ray.
pub fn kempf_ness_flow(rep: &Representation, x: &Point, opts: &FlowOptions) -> Result<FlowTrace> {
    let mut current = x.clone();
    let mut group = GroupElement::identity(rep.dim_v());
    let mut phi_total = 0.0f64;
    let mut iterates = Vec::new();

    // Freeze the degeneration threshold at the starting point.
    let map0 = stabilizer_map(rep, &current);
    let (_, sigma_max0) = crate::linalg::singular_value_range(&map0);
    let tau = opts.rank_tol * sigma_max0.max(1e-8);
    let initial = stabilizer_algebra(rep, &current, Some(tau))?;

    let mut termination = FlowTermination::Stalled;
    let mut iterations = 0usize;
    let mut final_moment_norm = f64::NAN;

    for it in 0..=opts.max_iters {
        let mu = rep.gradient_map(&current)?;
        let mn = rep.structure().dir_norm(&mu);
        final_moment_norm = mn;
        iterations = it;
        // Degeneration is checked before convergence: a collapsing orbit
        // also drives |mu_p| to zero, but through a stabilizer jump.
        let stab = stabilizer_algebra(rep, &current, Some(tau))?;
        if stab.dim > initial.dim {
            iterates.push(FlowIterate {
                moment_norm: mn,
                phi: phi_total,
                step: 0.0,
            });
            termination = FlowTermination::Degenerated;
            break;
        }
        if mn <= opts.flow_tolerance {
            iterates.push(FlowIterate {
                moment_norm: mn,
                phi: phi_total,
                step: 0.0,
            });
            termination = FlowTermination::Converged;
            break;
        }
        if it == opts.max_iters {
            iterates.push(FlowIterate {
                moment_norm: mn,
                phi: phi_total,
                step: 0.0,
            });
            termination = FlowTermination::Stalled;
            break;
        }

        let descent = mu.scale(-1.0 / mn);
        let curve = CurveEvaluator::new(rep, &current, &descent)?;
        let radius = curve.spectral_radius().max(1e-12);
        let t_cap = opts.step_cap_exponent / radius;
        // phi'(0) = -|mu| < 0; bracket a sign change of the derivative.
        let mut t_hi = (1.0f64).min(t_cap);
        let mut bracketed = curve.value(t_hi) >= 0.0;
        while !bracketed && t_hi < t_cap {
            t_hi = (t_hi * 2.0).min(t_cap);
            bracketed = curve.value(t_hi) >= 0.0;
        }
        let step = if bracketed {
            let mut lo = 0.0f64;
            let mut hi = t_hi;
            for _ in 0..opts.bisection_depth {
                let mid = 0.5 * (lo + hi);
                if curve.value(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        } else {
            t_cap
        };
        if step < 1e-16 {
            iterates.push(FlowIterate {
                moment_norm: mn,
                phi: phi_total,
                step,
            });
            termination = FlowTermination::Stalled;
            break;
        }
        let phi_inc = curve.potential(step);
        current = rep.act_exp_dir(&descent, step, &current)?;
        group = group.then(&rep.exp_dir(&descent, step));
        phi_total += phi_inc;
        iterates.push(FlowIterate {
            moment_norm: mn,
            phi: phi_total,
            step,
        });
    }

    let final_stab = stabilizer_algebra(rep, &current, Some(tau))?;
    Ok(FlowTrace {
        iterates,
        termination,
        final_point: current,
        group,
        iterations,
        final_moment_norm,
        initial_stabilizer_dim: initial.dim,
        final_stabilizer_dim: final_stab.dim,
    })
}

/// A verified polystability witness.
#[derive(Debug, Clone)]
pub struct PolystableCertificate {
    /// Group element with `|mu_p(g x)|` at flow tolerance.
    pub group: GroupElement,
    /// Unit direction fixing the witness point, with both boundary weights
    /// vanishing: the geodesic along it connects two antipodal zeros.
    pub fixed_direction: Direction,
    pub moment_norm: f64,
    pub boundary_plus: f64,
    pub boundary_minus: f64,
    /// Largest fundamental-field norm over sampled zero directions at the
    /// witness point; small means every sampled zero fixes the point.
    pub zero_fixing_residual: Option<f64>,
}

/// Searches for the connected-antipodal-pair certificate at the flow limit.
///
/// Returns `None` when the flow did not converge, when the witness point
/// has no fixed directions in `p`, or when the boundary weights along the
/// candidate do not vanish. Absence is a negative result, not an error.
pub fn polystable_certificate(
    rep: &Representation,
    flow: &FlowTrace,
    zeros: &ZeroSet,
    opts: &SearchOptions,
) -> Result<Option<PolystableCertificate>> {
    if flow.termination != FlowTermination::Converged {
        return Ok(None);
    }
    // Zeros sampled at the start point only describe the witness point
    // when the flow did not move it.
    let zeros_at_witness = if flow.iterations == 0 {
        Some(zeros)
    } else {
        None
    };
    certificate_at(
        rep,
        &flow.final_point,
        flow.group.clone(),
        zeros_at_witness,
        opts,
    )
}

fn certificate_at(
    rep: &Representation,
    y: &Point,
    group: GroupElement,
    zeros_at_y: Option<&ZeroSet>,
    opts: &SearchOptions,
) -> Result<Option<PolystableCertificate>> {
    let moment_norm = rep.moment_norm(y)?;
    let p_fix = p_stabilizer_basis(rep, y);
    let Some(raw) = p_fix.first() else {
        return Ok(None);
    };
    let xi = rep.structure().dir_unit(raw)?;
    let wopts = &opts.weight;
    let plus = max_weight_algebraic(rep, y, &xi, wopts)?;
    let minus = max_weight_algebraic(rep, y, &xi.negate(), wopts)?;
    let (bp, bm) = match (plus.value, minus.value) {
        (MaxWeightValue::Finite(a), MaxWeightValue::Finite(b)) => (a, b),
        _ => return Ok(None),
    };
    if bp.abs() > opts.zero_tolerance || bm.abs() > opts.zero_tolerance {
        return Ok(None);
    }
    // At a zero of the gradient map every zero direction must fix the
    // point; check sampled zeros of the witness point, resampling with a
    // reduced start budget when the flow moved it.
    let zero_fixing_residual = if moment_norm <= 1e-6 {
        let resampled;
        let zs = match zeros_at_y {
            Some(z) => z,
            None => {
                let mut reduced = opts.clone();
                reduced.starts_per_dim = opts.starts_per_dim.div_ceil(8).max(2);
                resampled = zero_set_search(rep, y, &reduced)?;
                &resampled
            }
        };
        let mut worst = 0.0f64;
        for z in &zs.zeros {
            let f = rep.fundamental_field(&z.direction, y);
            worst = worst.max(f.norm() / y.norm().max(1e-300));
        }
        Some(worst)
    } else {
        None
    };
    Ok(Some(PolystableCertificate {
        group,
        fixed_direction: xi,
        moment_norm,
        boundary_plus: bp,
        boundary_minus: bm,
        zero_fixing_residual,
    }))
}

/// A problem restricted to the joint fixed set of commuting directions.
#[derive(Debug, Clone)]
pub struct SliceProblem {
    /// Orthonormal columns spanning the fixed subspace inside the original
    /// coordinates.
    pub subspace: DMatrix<f64>,
    /// The restricted representation of the centralizer structure, absent
    /// when the fixed set is trivial.
    pub rep: Option<Representation>,
    /// Basis matrices of `p^a` (the restricted structure's `basis_p`).
    pub p_centralizer: Vec<DMatrix<f64>>,
    /// Basis matrices of `k^a`.
    pub k_centralizer: Vec<DMatrix<f64>>,
}

impl SliceProblem {
    pub fn dim(&self) -> usize {
        self.subspace.ncols()
    }

    /// Coordinates of a point in the slice; the residual is the distance
    /// from the slice relative to the point norm.
    pub fn restrict_point(&self, x: &Point) -> (Point, f64) {
        let coords = self.subspace.transpose() * &x.vec;
        let back = &self.subspace * &coords;
        let residual = (&x.vec - &back).norm() / x.vec.norm().max(1e-300);
        (Point { vec: coords }, residual)
    }

    pub fn embed_point(&self, x: &Point) -> Point {
        Point {
            vec: &self.subspace * &x.vec,
        }
    }

    /// Embeds a restricted direction (coordinates in the `p^a` basis) as a
    /// direction of the original structure.
    pub fn embed_direction(
        &self,
        original: &ReductiveStructure,
        dir: &Direction,
    ) -> Result<Direction> {
        let mut m = DMatrix::zeros(original.ambient_dim(), original.ambient_dim());
        for (c, b) in dir.coords.iter().zip(self.p_centralizer.iter()) {
            m += b * *c;
        }
        original.dir_from_matrix(&m)
    }
}

/// Restricts the action to `X^a`, the joint fixed set of pairwise
/// commuting directions, together with the centralizer structure
/// `(k^a, p^a)`. On projective space the relevant component of the fixed
/// set is the joint eigenspace through `anchor`.
pub fn restrict_to_slice(
    rep: &Representation,
    dirs: &[Direction],
    anchor: Option<&Point>,
) -> Result<SliceProblem> {
    let structure = rep.structure();
    // Pairwise commutation.
    for (i, a) in dirs.iter().enumerate() {
        for b in dirs.iter().skip(i + 1) {
            let ma = structure.dir_matrix(a);
            let mb = structure.dir_matrix(b);
            let br = commutator(&ma, &mb);
            let scale = trace_norm(&ma) * trace_norm(&mb);
            let residual = trace_norm(&br) / scale.max(1e-300);
            if residual > 1e-8 {
                return Err(Error::NotCommuting { residual });
            }
        }
    }

    let dim_v = rep.dim_v();
    let subspace = if dirs.is_empty() {
        DMatrix::identity(dim_v, dim_v)
    } else {
        let mut stacked = DMatrix::zeros(dim_v * dirs.len(), dim_v);
        for (i, d) in dirs.iter().enumerate() {
            let mut a = rep.rho_dir(d);
            if rep.space() == Space::Projective {
                if let Some(pt) = anchor {
                    let c = pt.vec.dot(&(&a * &pt.vec)) / pt.vec.norm_squared();
                    a -= DMatrix::identity(dim_v, dim_v) * c;
                }
            }
            let scale = a.amax().max(1e-300);
            for r in 0..dim_v {
                for c in 0..dim_v {
                    stacked[(i * dim_v + r, c)] = a[(r, c)] / scale;
                }
            }
        }
        kernel_basis(&stacked, 1e-9 * (dim_v as f64).sqrt())
    };

    let p_centralizer = structure.centralizer_in_p(dirs);
    let k_centralizer = structure.centralizer_in_k(dirs);

    let rep_restricted = if subspace.ncols() > 0 {
        let q = &subspace;
        let lift = |b: &DMatrix<f64>| -> DMatrix<f64> {
            q.transpose() * rep.rho_of_matrix(b).expect("centralizer basis lies in g") * q
        };
        let rho_k: Vec<DMatrix<f64>> = k_centralizer.iter().map(&lift).collect();
        let rho_p: Vec<DMatrix<f64>> = p_centralizer.iter().map(&lift).collect();
        let sub_structure = ReductiveStructure::new(
            structure.ambient_dim(),
            k_centralizer.clone(),
            p_centralizer.clone(),
        )?;
        Some(Representation::new(
            sub_structure,
            subspace.ncols(),
            rho_k,
            rho_p,
            rep.space(),
        )?)
    } else {
        None
    };

    Ok(SliceProblem {
        subspace,
        rep: rep_restricted,
        p_centralizer,
        k_centralizer,
    })
}

// ---- classification -----------------------------------------------------------

/// Everything the classifier needs.
#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub search: SearchOptions,
    pub flow: FlowOptions,
    /// Recursion budget for slice restriction.
    pub max_slice_depth: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            search: SearchOptions::default(),
            flow: FlowOptions::default(),
            max_slice_depth: 3,
        }
    }
}

/// Summary of the flow attached to a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSummary {
    pub iterations: usize,
    pub final_moment_norm: f64,
    pub termination: FlowTermination,
    pub initial_stabilizer_dim: usize,
    pub final_stabilizer_dim: usize,
}

/// A finite real or infinity, serialized as a number or the string "inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(pub f64);

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = ExtReal;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or \"inf\"")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<ExtReal, E> {
                match v {
                    "inf" => Ok(ExtReal(f64::INFINITY)),
                    "-inf" => Ok(ExtReal(f64::NEG_INFINITY)),
                    other => Err(E::custom(format!(
                        "expected number or \"inf\", got {other:?}"
                    ))),
                }
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// Classification result with certificates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub label: StabilityLabel,
    /// Minimum of the maximal weight over the sampled sphere.
    pub min_weight: ExtReal,
    /// Zero directions found (for unstable points, the minimizing
    /// direction), as coordinate vectors in the `p` basis.
    pub zero_directions: Vec<Vec<f64>>,
    /// Group element reaching the zero of the gradient map, when found.
    pub witness_matrix: Option<Vec<Vec<f64>>>,
    /// Unit direction in `p` fixing the witness point with vanishing
    /// boundary weights on both ends.
    pub fixed_direction: Option<Vec<f64>>,
    /// `(dim g_x, dim g_x ^ k, dim g_x ^ p)` at the input point.
    pub stabilizer_dims: (usize, usize, usize),
    pub flow: Option<FlowSummary>,
    /// Whether the label carries a full numerical certificate, as opposed
    /// to sampled evidence only.
    pub certified: bool,
    pub notes: Vec<String>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn flow_summary(flow: &FlowTrace) -> FlowSummary {
    FlowSummary {
        iterations: flow.iterations,
        final_moment_norm: flow.final_moment_norm,
        termination: flow.termination,
        initial_stabilizer_dim: flow.initial_stabilizer_dim,
        final_stabilizer_dim: flow.final_stabilizer_dim,
    }
}

/// Full classification pipeline.
///
/// 1. Sphere search for the minimal maximal weight `m` and the zero set.
/// 2. `m < -tol`: unstable, with the minimizing direction as witness.
/// 3. `m > tol`: the flow must converge; stable after checking that the
///    stabilizer at the witness has no `p` part.
/// 4. `|m| <= tol`: the flow decides. Convergence gives polystability with
///    certificate; degeneration triggers slice recursion along the zero
///    direction with maximal torus dimension, lifting only when the limit
///    stayed in the orbit (equal stabilizer dimensions).
///
/// Indeterminate subresults surface as an `Indeterminate` label, never as
/// a wrong definite one.
pub fn classify(
    rep: &Representation,
    x: &Point,
    opts: &ClassifyOptions,
) -> Result<StabilityReport> {
    classify_depth(rep, x, opts, opts.max_slice_depth)
}

fn classify_depth(
    rep: &Representation,
    x: &Point,
    opts: &ClassifyOptions,
    depth: usize,
) -> Result<StabilityReport> {
    let tol = opts.search.zero_tolerance;
    let stab = stabilizer_algebra(rep, x, None)?;
    let stabilizer_dims = (stab.dim, stab.dim_k, stab.dim_p);
    let mut notes = Vec::new();
    if stab.ambiguous {
        notes.push("stabilizer rank is ambiguous near the tolerance".to_string());
    }

    let zeros = zero_set_search(rep, x, &opts.search)?;
    let m = zeros.min_value;
    let zero_directions: Vec<Vec<f64>> = zeros
        .zeros
        .iter()
        .map(|z| z.direction.coords.iter().copied().collect())
        .collect();
    for w in &zeros.warnings {
        notes.push(w.clone());
    }

    // Unstable: a direction with strictly negative maximal weight.
    if m.as_f64() < -tol {
        let witness_dir = zeros
            .min_direction
            .as_ref()
            .map(|d| d.coords.iter().copied().collect::<Vec<f64>>());
        return Ok(StabilityReport {
            label: StabilityLabel::Unstable,
            min_weight: ExtReal(m.as_f64()),
            zero_directions: witness_dir.into_iter().collect(),
            witness_matrix: None,
            fixed_direction: None,
            stabilizer_dims,
            flow: None,
            certified: true,
            notes,
        });
    }

    let flow = kempf_ness_flow(rep, x, &opts.flow)?;
    let summary = flow_summary(&flow);

    if m.as_f64() > tol {
        // Strictly positive maximal weights: stable, expect convergence.
        if flow.termination != FlowTermination::Converged {
            notes.push(format!(
                "positive minimal weight but flow ended {:?}",
                flow.termination
            ));
            return Ok(StabilityReport {
                label: StabilityLabel::Indeterminate,
                min_weight: ExtReal(m.as_f64()),
                zero_directions,
                witness_matrix: None,
                fixed_direction: None,
                stabilizer_dims,
                flow: Some(summary),
                certified: false,
                notes,
            });
        }
        let witness_stab = stabilizer_algebra(rep, &flow.final_point, None)?;
        if witness_stab.dim_p > 0 || witness_stab.dim != witness_stab.dim_k {
            notes.push(format!(
                "witness stabilizer is not compact: dims ({}, {}, {})",
                witness_stab.dim, witness_stab.dim_k, witness_stab.dim_p
            ));
            return Ok(StabilityReport {
                label: StabilityLabel::Indeterminate,
                min_weight: ExtReal(m.as_f64()),
                zero_directions,
                witness_matrix: None,
                fixed_direction: None,
                stabilizer_dims,
                flow: Some(summary),
                certified: false,
                notes,
            });
        }
        return Ok(StabilityReport {
            label: StabilityLabel::Stable,
            min_weight: ExtReal(m.as_f64()),
            zero_directions,
            witness_matrix: Some(matrix_rows(flow.group.matrix())),
            fixed_direction: None,
            stabilizer_dims,
            flow: Some(summary),
            certified: true,
            notes,
        });
    }

    // |m| <= tol: polystable or semistable-only.
    match flow.termination {
        FlowTermination::Converged => {
            let cert = polystable_certificate(rep, &flow, &zeros, &opts.search)?;
            // The stabilizer at the witness must split under theta.
            let witness_stab = stabilizer_algebra(rep, &flow.final_point, None)?;
            if witness_stab.theta_residual > 1e-6 {
                notes.push(format!(
                    "witness stabilizer not theta-stable (residual {:.3e})",
                    witness_stab.theta_residual
                ));
            }
            let (fixed_direction, certified) = match &cert {
                Some(c) => (
                    Some(
                        c.fixed_direction
                            .coords
                            .iter()
                            .copied()
                            .collect::<Vec<f64>>(),
                    ),
                    true,
                ),
                None => (None, false),
            };
            if cert.is_none() {
                notes.push("no fixed direction certificate at the witness".to_string());
            }
            Ok(StabilityReport {
                label: StabilityLabel::Polystable,
                min_weight: ExtReal(m.as_f64()),
                zero_directions,
                witness_matrix: Some(matrix_rows(flow.group.matrix())),
                fixed_direction,
                stabilizer_dims,
                flow: Some(summary),
                certified,
                notes,
            })
        }
        FlowTermination::Degenerated => {
            let outcome = slice_recursion(rep, x, &zeros, &flow, opts, depth, &mut notes)?;
            match outcome {
                SliceOutcome::Lifted {
                    witness,
                    witness_point,
                } => {
                    let cert =
                        certificate_at(rep, &witness_point, witness.clone(), None, &opts.search)?;
                    let fixed_direction = cert.as_ref().map(|c| {
                        c.fixed_direction
                            .coords
                            .iter()
                            .copied()
                            .collect::<Vec<f64>>()
                    });
                    Ok(StabilityReport {
                        label: StabilityLabel::Polystable,
                        min_weight: ExtReal(m.as_f64()),
                        zero_directions,
                        witness_matrix: Some(matrix_rows(witness.matrix())),
                        fixed_direction,
                        stabilizer_dims,
                        flow: Some(summary),
                        certified: false,
                        notes,
                    })
                }
                SliceOutcome::NotLifted => Ok(StabilityReport {
                    label: StabilityLabel::SemistableOnly,
                    min_weight: ExtReal(m.as_f64()),
                    zero_directions,
                    witness_matrix: None,
                    fixed_direction: None,
                    stabilizer_dims,
                    flow: Some(summary),
                    certified: false,
                    notes,
                }),
                SliceOutcome::Indeterminate => Ok(StabilityReport {
                    label: StabilityLabel::Indeterminate,
                    min_weight: ExtReal(m.as_f64()),
                    zero_directions,
                    witness_matrix: None,
                    fixed_direction: None,
                    stabilizer_dims,
                    flow: Some(summary),
                    certified: false,
                    notes,
                }),
            }
        }
        FlowTermination::Stalled => {
            notes.push("flow stalled before reaching the tolerance".to_string());
            Ok(StabilityReport {
                label: StabilityLabel::Indeterminate,
                min_weight: ExtReal(m.as_f64()),
                zero_directions,
                witness_matrix: None,
                fixed_direction: None,
                stabilizer_dims,
                flow: Some(summary),
                certified: false,
                notes,
            })
        }
    }
}

enum SliceOutcome {
    Lifted {
        witness: GroupElement,
        witness_point: Point,
    },
    NotLifted,
    Indeterminate,
}

/// Slice recursion for a degenerated flow: restrict along the zero
/// direction with maximal torus dimension, classify the flow limit there,
/// and lift polystability only when the limit kept the stabilizer
/// dimension of the input (a conservative in-orbit test).
fn slice_recursion(
    rep: &Representation,
    x: &Point,
    zeros: &ZeroSet,
    flow: &FlowTrace,
    opts: &ClassifyOptions,
    depth: usize,
    notes: &mut Vec<String>,
) -> Result<SliceOutcome> {
    if depth == 0 {
        notes.push("slice recursion budget exhausted".to_string());
        return Ok(SliceOutcome::Indeterminate);
    }
    if zeros.zeros.is_empty() {
        notes.push("degenerated flow without zero directions".to_string());
        return Ok(SliceOutcome::Indeterminate);
    }
    // Zero direction with maximal torus dimension.
    let mut best: Option<(usize, &Direction)> = None;
    for z in &zeros.zeros {
        let td = match crate::maxweight::torus_dimension(rep, &z.direction) {
            Ok(td) => td,
            Err(Error::IndeterminateRank { .. }) => {
                notes.push("torus dimension indeterminate on a zero direction".to_string());
                return Ok(SliceOutcome::Indeterminate);
            }
            Err(e) => return Err(e),
        };
        if best.map(|(b, _)| td > b).unwrap_or(true) {
            best = Some((td, &z.direction));
        }
    }
    let (_, beta_star) = best.expect("nonempty zeros");

    let slice = restrict_to_slice(
        rep,
        std::slice::from_ref(beta_star),
        Some(&flow.final_point),
    )?;
    let limit_stab = stabilizer_algebra(rep, &flow.final_point, None)?;
    let input_stab = stabilizer_algebra(rep, x, None)?;

    let Some(sub_rep) = slice.rep.as_ref() else {
        notes.push("slice along the zero direction is trivial".to_string());
        return Ok(SliceOutcome::NotLifted);
    };
    let (restricted, residual) = slice.restrict_point(&flow.final_point);
    if residual > 0.1 {
        notes.push(format!(
            "flow limit is not in the slice (residual {residual:.3e})"
        ));
        return Ok(SliceOutcome::NotLifted);
    }
    let sub_point = match sub_rep.space() {
        Space::Affine => restricted,
        Space::Projective => {
            if restricted.vec.norm() < 1e-12 {
                notes.push("flow limit projects to zero in the slice".to_string());
                return Ok(SliceOutcome::NotLifted);
            }
            sub_rep.point(restricted.vec.iter().copied().collect())?
        }
    };
    let sub_report = classify_depth(sub_rep, &sub_point, opts, depth - 1)?;
    notes.push(format!("slice classification: {:?}", sub_report.label));
    match sub_report.label {
        StabilityLabel::Stable | StabilityLabel::Polystable => {
            if limit_stab.dim != input_stab.dim {
                notes.push(format!(
                    "limit left the orbit: stabilizer dim {} vs {}",
                    limit_stab.dim, input_stab.dim
                ));
                return Ok(SliceOutcome::NotLifted);
            }
            // The limit stayed in the orbit and is polystable in the
            // slice, so a flow restarted there (fresh rank thresholds)
            // must reach a genuine zero of the gradient map; its group
            // element composed with the first leg is the witness.
            let second = kempf_ness_flow(rep, &flow.final_point, &opts.flow)?;
            if second.termination == FlowTermination::Converged {
                Ok(SliceOutcome::Lifted {
                    witness: flow.group.then(&second.group),
                    witness_point: second.final_point,
                })
            } else {
                notes.push(format!(
                    "slice lift accepted but the restarted flow ended {:?}",
                    second.termination
                ));
                Ok(SliceOutcome::Indeterminate)
            }
        }
        StabilityLabel::Indeterminate => Ok(SliceOutcome::Indeterminate),
        _ => Ok(SliceOutcome::NotLifted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::presets;
    use crate::liealg::presets::sl;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn h_mat() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])
    }

    fn e_mat() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
    }

    fn adjoint_affine() -> Representation {
        presets::adjoint(&sl(2).unwrap(), Space::Affine).unwrap()
    }

    fn adjoint_point(rep: &Representation, m: &DMatrix<f64>) -> Point {
        Point {
            vec: rep.structure().g_coords(m),
        }
    }

    #[test]
    fn stabilizer_examples() {
        let s = sl(2).unwrap();
        let def = presets::defining(&s, Space::Affine).unwrap();
        let origin = def.point(vec![0.0, 0.0]).unwrap();
        let st = stabilizer_algebra(&def, &origin, None).unwrap();
        assert_eq!((st.dim, st.dim_k, st.dim_p), (3, 1, 2));

        let x = def.point(vec![1.0, 0.0]).unwrap();
        let st = stabilizer_algebra(&def, &x, None).unwrap();
        assert_eq!(st.dim, 1);
        assert_eq!(st.dim_k, 0);
        assert_eq!(st.dim_p, 0);
        // The kernel is spanned by E, which is not theta-stable.
        assert!(st.theta_residual > 0.5);
        let b = &st.basis[0];
        assert!((b / b[(0, 1)] - e_mat()).amax() < 1e-8);

        let adj = adjoint_affine();
        let ef = adjoint_point(&adj, &(e_mat() - e_mat().transpose()));
        let st = stabilizer_algebra(&adj, &ef, None).unwrap();
        assert_eq!((st.dim, st.dim_k, st.dim_p), (1, 1, 0));
        assert!(st.theta_residual < 1e-9);
    }

    #[test]
    fn flow_converges_immediately_at_critical_point() {
        let adj = adjoint_affine();
        let xh = adjoint_point(&adj, &h_mat());
        let flow = kempf_ness_flow(&adj, &xh, &FlowOptions::default()).unwrap();
        assert_eq!(flow.termination, FlowTermination::Converged);
        assert_eq!(flow.iterations, 0);
        assert!(flow.final_moment_norm < 1e-12);
        assert!((flow.group.matrix() - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn flow_recovers_zero_from_orbit_of_h() {
        let adj = adjoint_affine();
        // Ad(exp(E)) H = H - 2E
        let x = adjoint_point(&adj, &(h_mat() - e_mat() * 2.0));
        let flow = kempf_ness_flow(&adj, &x, &FlowOptions::default()).unwrap();
        assert_eq!(flow.termination, FlowTermination::Converged);
        assert!(flow.final_moment_norm <= 1e-8);
        assert_eq!(flow.initial_stabilizer_dim, 1);
        assert_eq!(flow.final_stabilizer_dim, 1);
        // Phi decreases monotonically along the trace.
        for w in flow.iterates.windows(2) {
            assert!(w[1].phi <= w[0].phi + 1e-12);
        }
        // At the converged witness the stabilizer splits under theta.
        let witness_stab = stabilizer_algebra(&adj, &flow.final_point, None).unwrap();
        assert!(witness_stab.theta_residual < 1e-6);
        assert_eq!(witness_stab.dim, witness_stab.dim_k + witness_stab.dim_p);
    }

    #[test]
    fn flow_degenerates_on_nilpotent() {
        let adj = adjoint_affine();
        let x = adjoint_point(&adj, &e_mat());
        let flow = kempf_ness_flow(&adj, &x, &FlowOptions::default()).unwrap();
        assert_eq!(flow.termination, FlowTermination::Degenerated);
        assert_eq!(flow.initial_stabilizer_dim, 1);
        assert_eq!(flow.final_stabilizer_dim, 3);
        assert!(flow.final_point.norm() < 1e-4);
    }

    #[test]
    fn certificate_for_semisimple_element() {
        let adj = adjoint_affine();
        let xh = adjoint_point(&adj, &h_mat());
        let opts = ClassifyOptions::default();
        let zeros = zero_set_search(&adj, &xh, &opts.search).unwrap();
        let flow = kempf_ness_flow(&adj, &xh, &opts.flow).unwrap();
        let cert = polystable_certificate(&adj, &flow, &zeros, &opts.search)
            .unwrap()
            .unwrap();
        // xi = H / sqrt(2) up to sign
        let xi_mat = adj.structure().dir_matrix(&cert.fixed_direction);
        let expect = h_mat() / 2.0f64.sqrt();
        let aligned = (&xi_mat - &expect).amax().min((&xi_mat + &expect).amax());
        assert!(aligned < 1e-8, "fixed direction {xi_mat}");
        assert!(cert.boundary_plus.abs() < 1e-9 && cert.boundary_minus.abs() < 1e-9);
        assert!(cert.zero_fixing_residual.unwrap() < 1e-6);
    }

    #[test]
    fn certificate_for_origin() {
        let def = presets::defining(&sl(2).unwrap(), Space::Affine).unwrap();
        let origin = def.point(vec![0.0, 0.0]).unwrap();
        let opts = ClassifyOptions::default();
        let zeros = zero_set_search(&def, &origin, &opts.search).unwrap();
        let flow = kempf_ness_flow(&def, &origin, &opts.flow).unwrap();
        let cert = polystable_certificate(&def, &flow, &zeros, &opts.search).unwrap();
        assert!(cert.is_some());
    }

    #[test]
    fn no_certificate_for_degenerate_flow() {
        let def = presets::defining(&sl(2).unwrap(), Space::Affine).unwrap();
        let x = def.point(vec![1.0, 0.0]).unwrap();
        let opts = ClassifyOptions::default();
        let zeros = zero_set_search(&def, &x, &opts.search).unwrap();
        let flow = kempf_ness_flow(&def, &x, &opts.flow).unwrap();
        assert_eq!(flow.termination, FlowTermination::Degenerated);
        let cert = polystable_certificate(&def, &flow, &zeros, &opts.search).unwrap();
        assert!(cert.is_none());
    }

    #[test]
    fn slice_examples() {
        let s = sl(2).unwrap();
        let adj = presets::adjoint(&s, Space::Affine).unwrap();
        let h = s.dir_from_matrix(&h_mat()).unwrap();

        let slice = restrict_to_slice(&adj, std::slice::from_ref(&h), None).unwrap();
        assert_eq!(slice.dim(), 1);
        assert_eq!(slice.p_centralizer.len(), 1);
        let sub = slice.rep.as_ref().unwrap();
        // The restricted gradient map vanishes identically on X^a.
        let pt = sub.point(vec![0.7]).unwrap();
        assert!(sub.moment_norm(&pt).unwrap() < 1e-12);

        let empty = restrict_to_slice(&adj, &[], None).unwrap();
        assert_eq!(empty.dim(), 3);
        assert_eq!(empty.p_centralizer.len(), 2);

        let s3 = sl(3).unwrap();
        let def3 = presets::defining(&s3, Space::Affine).unwrap();
        let beta = s3
            .dir_from_matrix(&DMatrix::from_diagonal(&DVector::from_vec(vec![
                1.0, 0.0, -1.0,
            ])))
            .unwrap();
        let slice3 = restrict_to_slice(&def3, std::slice::from_ref(&beta), None).unwrap();
        assert_eq!(slice3.dim(), 1);
        // X^a = span{e2}
        assert!(slice3.subspace.column(0)[1].abs() > 0.999);
        assert_eq!(slice3.p_centralizer.len(), 2);
    }

    #[test]
    fn slice_rejects_non_commuting() {
        let s = sl(2).unwrap();
        let adj = presets::adjoint(&s, Space::Affine).unwrap();
        let h = s.dir_from_matrix(&h_mat()).unwrap();
        let ef = s.dir_from_matrix(&(e_mat() + e_mat().transpose())).unwrap();
        assert!(matches!(
            restrict_to_slice(&adj, &[h, ef], None),
            Err(Error::NotCommuting { .. })
        ));
    }

    #[test]
    fn slice_moment_consistency() {
        // mu_p of points in X^a equals the embedded restricted moment.
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let s3 = sl(3).unwrap();
        let def3 = presets::defining(&s3, Space::Affine).unwrap();
        let beta = s3
            .dir_from_matrix(&DMatrix::from_diagonal(&DVector::from_vec(vec![
                1.0, 0.0, -1.0,
            ])))
            .unwrap();
        let slice = restrict_to_slice(&def3, std::slice::from_ref(&beta), None).unwrap();
        let sub = slice.rep.as_ref().unwrap();
        for _ in 0..50 {
            let c = rng.gen_range(-2.0..2.0);
            let full_point = def3.point(vec![0.0, c, 0.0]).unwrap();
            let (sub_point, residual) = slice.restrict_point(&full_point);
            assert!(residual < 1e-12);
            let mu_full = def3
                .structure()
                .dir_matrix(&def3.gradient_map(&full_point).unwrap());
            let mu_sub = sub.gradient_map(&sub_point).unwrap();
            let mu_emb = def3
                .structure()
                .dir_matrix(&slice.embed_direction(def3.structure(), &mu_sub).unwrap());
            assert!((mu_full - mu_emb).amax() < 1e-10);
        }
    }

    #[test]
    fn golden_classification_table() {
        let opts = ClassifyOptions::default();
        let adj = adjoint_affine();

        let h = adjoint_point(&adj, &h_mat());
        let rh = classify(&adj, &h, &opts).unwrap();
        assert_eq!(
            rh.label,
            StabilityLabel::Polystable,
            "notes: {:?}",
            rh.notes
        );
        assert!(rh.stabilizer_dims.2 > 0);

        let e = adjoint_point(&adj, &e_mat());
        let re = classify(&adj, &e, &opts).unwrap();
        assert_eq!(
            re.label,
            StabilityLabel::SemistableOnly,
            "notes: {:?}",
            re.notes
        );

        let ef = adjoint_point(&adj, &(e_mat() - e_mat().transpose()));
        let ref_ = classify(&adj, &ef, &opts).unwrap();
        assert_eq!(
            ref_.label,
            StabilityLabel::Stable,
            "notes: {:?}",
            ref_.notes
        );
        assert!(ref_.min_weight.0 > 0.0);

        let origin = adjoint_point(&adj, &DMatrix::zeros(2, 2));
        let r0 = classify(&adj, &origin, &opts).unwrap();
        assert_eq!(
            r0.label,
            StabilityLabel::Polystable,
            "notes: {:?}",
            r0.notes
        );

        let def = presets::defining(&sl(2).unwrap(), Space::Affine).unwrap();
        let x10 = def.point(vec![1.0, 0.0]).unwrap();
        let r10 = classify(&def, &x10, &opts).unwrap();
        assert_eq!(
            r10.label,
            StabilityLabel::SemistableOnly,
            "notes: {:?}",
            r10.notes
        );

        let sym2 = presets::sym(&sl(2).unwrap(), 2, Space::Projective).unwrap();
        let v1sq = sym2.point(vec![1.0, 0.0, 0.0]).unwrap();
        let ru = classify(&sym2, &v1sq, &opts).unwrap();
        assert_eq!(ru.label, StabilityLabel::Unstable, "notes: {:?}", ru.notes);
        assert!((ru.min_weight.0 + 2.0f64.sqrt()).abs() < 1e-6);

        let v1v2 = sym2.point(vec![0.0, 1.0, 0.0]).unwrap();
        let rp = classify(&sym2, &v1v2, &opts).unwrap();
        assert_eq!(
            rp.label,
            StabilityLabel::Polystable,
            "notes: {:?}",
            rp.notes
        );
    }

    #[test]
    fn classification_is_orbit_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let opts = ClassifyOptions::default();
        let adj = adjoint_affine();
        let cases = vec![
            (adjoint_point(&adj, &h_mat()), StabilityLabel::Polystable),
            (
                adjoint_point(&adj, &(e_mat() - e_mat().transpose())),
                StabilityLabel::Stable,
            ),
        ];
        for (x, expect) in cases {
            for _ in 0..3 {
                let mut xi = DMatrix::zeros(2, 2);
                for b in adj
                    .structure()
                    .basis_k()
                    .iter()
                    .chain(adj.structure().basis_p())
                {
                    xi += b * rng.gen_range(-0.2..0.2);
                }
                let g = adj.exp_algebra(&xi).unwrap();
                let gx = adj.act(&g, &x).unwrap();
                let r = classify(&adj, &gx, &opts).unwrap();
                assert_eq!(r.label, expect, "moved point, notes: {:?}", r.notes);
            }
        }
    }

    #[test]
    fn zeros_fix_the_point_at_moment_zero() {
        // At mu_p(x) = 0 every zero direction lies in the stabilizer.
        let opts = ClassifyOptions::default();
        let adj = adjoint_affine();
        let xh = adjoint_point(&adj, &h_mat());
        let zeros = zero_set_search(&adj, &xh, &opts.search).unwrap();
        assert!(!zeros.zeros.is_empty());
        for z in &zeros.zeros {
            let f = adj.fundamental_field(&z.direction, &xh);
            assert!(f.norm() < 1e-6, "zero direction does not fix the point");
        }
    }

    #[test]
    fn report_roundtrips_through_json() {
        let opts = ClassifyOptions::default();
        let adj = adjoint_affine();
        let xh = adjoint_point(&adj, &h_mat());
        let report = classify(&adj, &xh, &opts).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: StabilityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.label, report.label);
        assert_eq!(back.min_weight.0, report.min_weight.0);

        // Infinite minimum serializes as "inf" and parses back.
        let ef = adjoint_point(&adj, &(e_mat() - e_mat().transpose()));
        let report = classify(&adj, &ef, &opts).unwrap();
        assert!(report.min_weight.0.is_infinite());
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"inf\""));
        let back: StabilityReport = serde_json::from_str(&json).unwrap();
        assert!(back.min_weight.0.is_infinite());
    }
}
