//! Maximal weight curves, their limits, and the boundary weight function.
//!
//! For a point `x` and a direction `beta` the weight curve is
//! `lambda(x, beta, t) = <mu_p(exp(t beta) x), beta>`, which is
//! nondecreasing in `t`. Its limit `lambda(x, beta)` is the maximal weight
//! of `x` along `beta`; composed with the antipode it gives the boundary
//! weight function on the unit sphere of `p`.
//!
//! Evaluation goes through the spectral decomposition of `drho(beta)`:
//! with weights `w_i = |P_i x|^2` over the eigenvalues `lambda_i`,
//!
//! - affine: `lambda(x, beta, t) = 1/2 sum_i lambda_i exp(2 lambda_i t) w_i`,
//! - projective: the exponent-shifted Rayleigh ratio of the same data,
//!
//! so large `t` never needs the matrix exponential itself.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::action::{Point, Representation, Space};
use crate::error::Error;
use crate::liealg::Direction;
use crate::linalg::{cluster_eigenvalues, sym_eigen};
use crate::Result;

/// Spectral data of `drho(beta)` on the representation space.
#[derive(Debug, Clone)]
pub struct WeightDecomposition {
    /// Distinct eigenvalues, ascending. Clusters closer than
    /// `1e-8 * (1 + spectral radius)` are merged.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal projectors onto the eigenspaces, same order.
    pub projectors: Vec<DMatrix<f64>>,
}

impl WeightDecomposition {
    pub fn new(rep: &Representation, beta: &Direction) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::NonFinite("direction"));
        }
        let a = rep.rho_dir(beta);
        let (vals, vecs) = sym_eigen(&a);
        let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = 1e-8 * (1.0 + radius);
        let clusters = cluster_eigenvalues(&vals, gap);
        let mut eigenvalues = Vec::with_capacity(clusters.len());
        let mut projectors = Vec::with_capacity(clusters.len());
        for (rep_val, cols) in clusters {
            let mut p = DMatrix::zeros(a.nrows(), a.ncols());
            for &c in &cols {
                let v = vecs.column(c);
                p += v * v.transpose();
            }
            eigenvalues.push(rep_val);
            projectors.push(p);
        }
        Ok(WeightDecomposition {
            eigenvalues,
            projectors,
        })
    }

    /// Eigencomponents `P_i x` of a vector.
    pub fn components(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        self.projectors.iter().map(|p| p * x).collect()
    }

    /// Squared norms of the eigencomponents.
    pub fn component_weights(&self, x: &DVector<f64>) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|p| (p * x).norm_squared())
            .collect()
    }
}

/// One sample of a weight curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightCurvePoint {
    pub t: f64,
    pub value: f64,
}

/// How a maximal weight was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMethod {
    Numeric,
    Algebraic,
}

/// A finite or infinite maximal weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxWeightValue {
    Finite(f64),
    Infinite,
}

impl MaxWeightValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, MaxWeightValue::Infinite)
    }

    /// Finite value, or `f64::INFINITY`.
    pub fn as_f64(&self) -> f64 {
        match self {
            MaxWeightValue::Finite(v) => *v,
            MaxWeightValue::Infinite => f64::INFINITY,
        }
    }
}

/// Maximal weight with provenance and diagnostics.
#[derive(Debug, Clone)]
pub struct MaxWeight {
    pub value: MaxWeightValue,
    pub method: WeightMethod,
    /// Samples inspected by the numeric route (empty for algebraic).
    pub t_grid: Vec<WeightCurvePoint>,
    /// Last successive difference seen by the numeric route.
    pub extrapolation_residual: f64,
    /// Some eigencomponent norm fell within a factor 10 of the component
    /// tolerance, so the support decision is fragile.
    pub ambiguous_components: bool,
    /// The input direction was not unit and has been rescaled.
    pub rescaled: bool,
}

impl MaxWeight {
    fn algebraic(value: MaxWeightValue, ambiguous: bool) -> Self {
        MaxWeight {
            value,
            method: WeightMethod::Algebraic,
            t_grid: Vec::new(),
            extrapolation_residual: 0.0,
            ambiguous_components: ambiguous,
            rescaled: false,
        }
    }
}

/// Tunables for weight limits.
#[derive(Debug, Clone)]
pub struct WeightOptions {
    /// Largest time on the doubling grid.
    pub t_max: f64,
    /// Successive-difference tolerance declaring convergence.
    pub convergence_tol: f64,
    /// Divergence is declared past `divergence_factor * (1 + |lambda(0)|)`.
    pub divergence_factor: f64,
    /// Relative eigencomponent norm below which a component counts as zero.
    pub component_tol: f64,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions {
            t_max: 2f64.powi(24),
            convergence_tol: 1e-10,
            divergence_factor: 1e6,
            component_tol: 1e-8,
        }
    }
}

/// One weight curve with its spectral data frozen, so many `t` values can
/// be probed cheaply (the flow line search bisects on this).
#[derive(Debug, Clone)]
pub struct CurveEvaluator {
    space: Space,
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl CurveEvaluator {
    pub fn new(rep: &Representation, x: &Point, beta: &Direction) -> Result<Self> {
        if x.vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        let wd = WeightDecomposition::new(rep, beta)?;
        let weights = wd.component_weights(&x.vec);
        Ok(CurveEvaluator {
            space: rep.space(),
            eigenvalues: wd.eigenvalues,
            weights,
            total: x.vec.norm_squared(),
        })
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `lambda(x, beta, t)`.
    pub fn value(&self, t: f64) -> f64 {
        match self.space {
            Space::Affine => {
                0.5 * self
                    .eigenvalues
                    .iter()
                    .zip(&self.weights)
                    .map(|(l, w)| {
                        if *w == 0.0 {
                            0.0
                        } else {
                            l * (2.0 * l * t).exp() * w
                        }
                    })
                    .sum::<f64>()
            }
            Space::Projective => {
                let shift = self.shift(t);
                let mut num = 0.0;
                let mut den = 0.0;
                for (l, w) in self.eigenvalues.iter().zip(&self.weights) {
                    if *w == 0.0 {
                        continue;
                    }
                    let e = (2.0 * l * t - shift).exp();
                    num += l * e * w;
                    den += e * w;
                }
                if den == 0.0 {
                    0.0
                } else {
                    num / den
                }
            }
        }
    }

    /// `Phi(x, exp(t beta))`, stable for large `t` on projective space.
    pub fn potential(&self, t: f64) -> f64 {
        match self.space {
            Space::Affine => {
                let s: f64 = self
                    .eigenvalues
                    .iter()
                    .zip(&self.weights)
                    .map(|(l, w)| {
                        if *w == 0.0 {
                            0.0
                        } else {
                            (2.0 * l * t).exp() * w
                        }
                    })
                    .sum();
                0.25 * (s - self.total)
            }
            Space::Projective => {
                let shift = self.shift(t);
                let s: f64 = self
                    .eigenvalues
                    .iter()
                    .zip(&self.weights)
                    .map(|(l, w)| {
                        if *w == 0.0 {
                            0.0
                        } else {
                            (2.0 * l * t - shift).exp() * w
                        }
                    })
                    .sum();
                0.5 * (shift + s.ln() - self.total.ln())
            }
        }
    }

    fn shift(&self, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(l, _)| 2.0 * l * t)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The weight curve `lambda(x, beta, t)`, evaluated in eigencoordinates.
pub fn weight_curve(rep: &Representation, x: &Point, beta: &Direction, t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::NonFinite("curve parameter t"));
    }
    Ok(CurveEvaluator::new(rep, x, beta)?.value(t))
}

/// Kempf-Ness value `Phi(x, exp(t beta))` through the same spectral data,
/// safe for large `t` on projective space.
pub fn kempf_ness_along(rep: &Representation, x: &Point, beta: &Direction, t: f64) -> Result<f64> {
    Ok(CurveEvaluator::new(rep, x, beta)?.potential(t))
}

/// Numeric maximal weight on the doubling grid `t = 1, 2, 4, ...`.
///
/// Returns `Infinite` once the curve passes the divergence threshold while
/// still increasing, `Finite` once two successive differences fall below
/// the convergence tolerance, and an error when neither happens by `t_max`.
pub fn max_weight_numeric(
    rep: &Representation,
    x: &Point,
    beta: &Direction,
    opts: &WeightOptions,
) -> Result<MaxWeight> {
    let curve = CurveEvaluator::new(rep, x, beta)?;
    let value0 = curve.value(0.0);
    let threshold = opts.divergence_factor * (1.0 + value0.abs());
    let mut grid = vec![WeightCurvePoint {
        t: 0.0,
        value: value0,
    }];
    let mut prev = value0;
    let mut prev_residual = f64::INFINITY;
    let mut quiet = 0usize;
    let mut t = 1.0;
    while t <= opts.t_max {
        let value = curve.value(t);
        grid.push(WeightCurvePoint { t, value });
        debug_assert!(
            value >= prev - 1e-9 * (1.0 + prev.abs()),
            "weight curve decreased: {prev} -> {value}"
        );
        if value > threshold && value >= prev {
            return Ok(MaxWeight {
                value: MaxWeightValue::Infinite,
                method: WeightMethod::Numeric,
                t_grid: grid,
                extrapolation_residual: f64::INFINITY,
                ambiguous_components: false,
                rescaled: false,
            });
        }
        let residual = (value - prev).abs();
        // Stabilized means small successive differences that also shrink
        // geometrically; slow curves look flat early on the doubling grid
        // but their differences hold steady or grow instead.
        let shrinking = residual <= 0.5 * prev_residual;
        if residual <= opts.convergence_tol * (1.0 + value.abs()) && shrinking {
            quiet += 1;
            if quiet >= 2 {
                return Ok(MaxWeight {
                    value: MaxWeightValue::Finite(value),
                    method: WeightMethod::Numeric,
                    t_grid: grid,
                    extrapolation_residual: residual,
                    ambiguous_components: false,
                    rescaled: false,
                });
            }
        } else {
            quiet = 0;
        }
        prev = value;
        prev_residual = residual;
        t *= 2.0;
    }
    Err(Error::IndeterminateLimit { t_max: opts.t_max })
}

/// Algebraic maximal weight read off the spectral support of the point.
///
/// Affine: infinite iff some positive eigenvalue carries weight, else zero.
/// Projective: the largest eigenvalue carrying weight.
pub fn max_weight_algebraic(
    rep: &Representation,
    x: &Point,
    beta: &Direction,
    opts: &WeightOptions,
) -> Result<MaxWeight> {
    let wd = WeightDecomposition::new(rep, beta)?;
    let weights = wd.component_weights(&x.vec);
    let total = x.vec.norm_squared();
    if total == 0.0 {
        return Ok(MaxWeight::algebraic(MaxWeightValue::Finite(0.0), false));
    }
    let ct = opts.component_tol;
    let mut ambiguous = false;
    let mut supported = vec![false; weights.len()];
    for (i, w) in weights.iter().enumerate() {
        let ratio = (w / total).sqrt();
        supported[i] = ratio > ct;
        if ratio > ct / 10.0 && ratio < ct * 10.0 {
            ambiguous = true;
        }
    }
    let value = match rep.space() {
        Space::Affine => {
            let has_positive = wd
                .eigenvalues
                .iter()
                .zip(&supported)
                .any(|(l, s)| *s && *l > 0.0);
            if has_positive {
                MaxWeightValue::Infinite
            } else {
                MaxWeightValue::Finite(0.0)
            }
        }
        Space::Projective => {
            let top = wd
                .eigenvalues
                .iter()
                .zip(&supported)
                .filter(|(_, s)| **s)
                .map(|(l, _)| *l)
                .fold(f64::NEG_INFINITY, f64::max);
            MaxWeightValue::Finite(top)
        }
    };
    Ok(MaxWeight::algebraic(value, ambiguous))
}

/// The boundary weight `lambda_x(e(beta)) = lambda(x, -beta)` for a unit
/// direction. Non-unit inputs are rescaled (flagged in the result), which
/// realizes the normalization `lambda_x(e(beta/|beta|)) =
/// (1/|beta|) lambda(x, -beta)`.
pub fn boundary_weight(
    rep: &Representation,
    x: &Point,
    beta: &Direction,
    opts: &WeightOptions,
) -> Result<MaxWeight> {
    let norm = rep.structure().dir_norm(beta);
    if norm < 1e-14 {
        return Err(Error::InvalidStructure(
            "boundary direction must be nonzero".into(),
        ));
    }
    let rescaled = (norm - 1.0).abs() > 1e-9;
    let unit = beta.scale(1.0 / norm);
    let mut mw = max_weight_algebraic(rep, x, &unit.negate(), opts)?;
    mw.rescaled = rescaled;
    Ok(mw)
}

// ---- zero set search --------------------------------------------------------

/// Options for the multi-start sphere search.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub seed: u64,
    /// Total starts are `starts_per_dim * dim p`.
    pub starts_per_dim: usize,
    /// `|lambda| <= zero_tolerance` counts as a zero direction.
    pub zero_tolerance: f64,
    /// Minimizers closer than this angle are merged.
    pub dedup_angle: f64,
    pub nm_max_iter: usize,
    pub weight: WeightOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            seed: 0,
            starts_per_dim: 64,
            zero_tolerance: 1e-6,
            dedup_angle: 1e-3,
            nm_max_iter: 600,
            weight: WeightOptions::default(),
        }
    }
}

/// A direction found by [`zero_set_search`], with its maximal weight.
#[derive(Debug, Clone)]
pub struct ZeroDirection {
    pub direction: Direction,
    pub value: f64,
    pub ambiguous: bool,
}

/// Outcome of the sphere search.
#[derive(Debug, Clone)]
pub struct ZeroSet {
    /// Smallest maximal weight over all sampled directions.
    pub min_value: MaxWeightValue,
    /// A direction attaining the minimum.
    pub min_direction: Option<Direction>,
    /// Distinct directions with `|lambda| <= zero_tolerance`, sorted by
    /// value, then lexicographically.
    pub zeros: Vec<ZeroDirection>,
    pub warnings: Vec<String>,
}

/// Multi-start minimization of `beta -> lambda(x, beta)` over the unit
/// sphere of `p`.
///
/// The zeros parametrize the vanishing set of the boundary weight function
/// through the antipode, `lambda(x, beta) = lambda_x(e(-beta))`, so each
/// reported direction is the geodesic ray direction along which `x`
/// degenerates. Nelder-Mead runs on a finite-horizon weight curve with a
/// doubling horizon; candidates are then confirmed with the algebraic
/// limit.
pub fn zero_set_search(rep: &Representation, x: &Point, opts: &SearchOptions) -> Result<ZeroSet> {
    let structure = rep.structure();
    let dim_p = structure.dim_p();

    // Horizon schedule, clamped so exponents stay below overflow.
    let growth = rep.linear_growth_constant().max(1e-6);
    let t_cap = 300.0 / growth;
    let mut schedule: Vec<f64> = [4.0f64, 16.0, 64.0, 256.0]
        .iter()
        .map(|t| t.min(t_cap))
        .collect();
    schedule.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let objective = |on: &DVector<f64>, horizon: f64| -> f64 {
        let n = on.norm();
        if n < 1e-12 {
            return f64::INFINITY;
        }
        let dir = structure.dir_from_on_coords(&(on / n));
        weight_curve(rep, x, &dir, horizon).unwrap_or(f64::INFINITY)
    };

    let mut starts: Vec<DVector<f64>> = Vec::new();
    for i in 0..dim_p {
        for sign in [1.0, -1.0] {
            let mut v = DVector::zeros(dim_p);
            v[i] = sign;
            starts.push(v);
        }
    }
    for i in 0..dim_p {
        for j in (i + 1)..dim_p {
            for si in [1.0, -1.0] {
                for sj in [1.0, -1.0] {
                    let mut v = DVector::zeros(dim_p);
                    v[i] = si;
                    v[j] = sj;
                    starts.push(v.normalize());
                }
            }
        }
    }
    let target = opts.starts_per_dim * dim_p;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < target {
        let v = DVector::from_iterator(dim_p, (0..dim_p).map(|_| rng.gen_range(-1.0f64..1.0)));
        if v.norm() > 1e-6 {
            starts.push(v.normalize());
        }
    }

    let polish_horizon = *schedule.last().expect("nonempty schedule");
    let mut candidates: Vec<(DVector<f64>, MaxWeight)> = Vec::new();
    for start in &starts {
        let mut current = start.clone();
        let mut radius = 0.3;
        for horizon in &schedule {
            let (best, _) = nelder_mead_sphere(
                |v| objective(v, *horizon),
                &current,
                radius,
                opts.nm_max_iter,
                1e-12,
            );
            current = best;
            radius *= 0.2;
        }
        // Final polish with a tight simplex so support decisions at the
        // component tolerance are unambiguous.
        let (best, _) = nelder_mead_sphere(
            |v| objective(v, polish_horizon),
            &current,
            1e-5,
            opts.nm_max_iter,
            1e-14,
        );
        current = best;
        let dir = structure.dir_from_on_coords(&current);
        let unit = structure.dir_unit(&dir)?;
        let mw = max_weight_algebraic(rep, x, &unit, &opts.weight)?;
        candidates.push((structure.dir_on_coords(&unit), mw));
    }

    let mut min_value = MaxWeightValue::Infinite;
    let mut min_direction: Option<Direction> = None;
    for (on, mw) in &candidates {
        if mw.value.as_f64() < min_value.as_f64() {
            min_value = mw.value;
            min_direction = Some(structure.dir_from_on_coords(on));
        }
    }

    // Collect zeros and deduplicate by angle, keeping the best value.
    let mut zeros: Vec<(DVector<f64>, f64, bool)> = Vec::new();
    let mut warnings = Vec::new();
    let mut ambiguous_candidates = 0usize;
    for (on, mw) in &candidates {
        let v = match mw.value {
            MaxWeightValue::Finite(v) => v,
            MaxWeightValue::Infinite => continue,
        };
        if v.abs() > opts.zero_tolerance {
            continue;
        }
        if mw.ambiguous_components {
            ambiguous_candidates += 1;
        }
        let mut merged = false;
        for (on0, v0, amb0) in zeros.iter_mut() {
            let cos = on.dot(on0).clamp(-1.0, 1.0);
            if cos.acos() <= opts.dedup_angle {
                if v.abs() < v0.abs() {
                    *on0 = on.clone();
                    *v0 = v;
                    *amb0 = mw.ambiguous_components;
                }
                merged = true;
                break;
            }
        }
        if !merged {
            zeros.push((on.clone(), v, mw.ambiguous_components));
        }
    }
    if ambiguous_candidates > 0 {
        warnings.push(format!(
            "{ambiguous_candidates} candidate directions had component support within a \
             factor 10 of the tolerance"
        ));
    }
    zeros.sort_by(|a, b| {
        a.1.total_cmp(&b.1).then_with(|| {
            for (x0, x1) in a.0.iter().zip(b.0.iter()) {
                match x0.total_cmp(x1) {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let zeros = zeros
        .into_iter()
        .map(|(on, value, ambiguous)| ZeroDirection {
            direction: structure.dir_from_on_coords(&on),
            value,
            ambiguous,
        })
        .collect();

    Ok(ZeroSet {
        min_value,
        min_direction,
        zeros,
        warnings,
    })
}

/// Nelder-Mead on the unit sphere: the simplex lives in the ambient space
/// and every probe is radially projected back to the sphere. Comparison
/// based, so infinite objective values are fine.
fn nelder_mead_sphere<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    start: &DVector<f64>,
    radius: f64,
    max_iter: usize,
    tol: f64,
) -> (DVector<f64>, f64) {
    let dim = start.len();
    let normalize = |v: &DVector<f64>| -> Option<DVector<f64>> {
        let n = v.norm();
        if n < 1e-10 {
            None
        } else {
            Some(v / n)
        }
    };
    let s0 = normalize(start).unwrap_or_else(|| {
        let mut e = DVector::zeros(dim);
        e[0] = 1.0;
        e
    });
    if dim == 1 {
        // The sphere is two points.
        let neg = -&s0;
        let f0 = f(&s0);
        let f1 = f(&neg);
        return if f0 <= f1 { (s0, f0) } else { (neg, f1) };
    }
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = f(&s0);
    simplex.push((s0.clone(), f0));
    for i in 0..dim {
        let mut v = s0.clone();
        v[i] += radius;
        let v = normalize(&v).unwrap_or_else(|| s0.clone());
        let fv = f(&v);
        simplex.push((v, fv));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut diam = 0.0f64;
        for (v, _) in simplex.iter().skip(1) {
            diam = diam.max((v - &simplex[0].0).norm());
        }
        if diam < tol {
            break;
        }
        let worst = simplex.len() - 1;
        let mut centroid = DVector::zeros(dim);
        for (v, _) in &simplex[..worst] {
            centroid += v;
        }
        centroid /= worst as f64;
        let reflect = &centroid * 2.0 - &simplex[worst].0;
        let reflect = match normalize(&reflect) {
            Some(v) => v,
            None => break,
        };
        let fr = f(&reflect);
        if fr < simplex[0].1 {
            let expand = &centroid * 3.0 - &simplex[worst].0 * 2.0;
            if let Some(e) = normalize(&expand) {
                let fe = f(&e);
                simplex[worst] = if fe < fr { (e, fe) } else { (reflect, fr) };
            } else {
                simplex[worst] = (reflect, fr);
            }
        } else if fr < simplex[worst - 1].1 {
            simplex[worst] = (reflect, fr);
        } else {
            let contract = (&centroid + &simplex[worst].0) * 0.5;
            let contract = match normalize(&contract) {
                Some(v) => v,
                None => break,
            };
            let fc = f(&contract);
            if fc < simplex[worst].1 {
                simplex[worst] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let v = (&item.0 + &best) * 0.5;
                    let v = normalize(&v).unwrap_or_else(|| best.clone());
                    let fv = f(&v);
                    *item = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

// ---- torus dimension --------------------------------------------------------

/// Dimension of the closure of the one-parameter torus generated by a
/// direction: the rational rank of the distinct eigenvalue frequencies of
/// `drho(beta)`.
///
/// Rational eigenvalues are recognized exactly via continued fractions;
/// otherwise integer relations are detected with LLL lattice reduction.
pub fn torus_dimension(rep: &Representation, beta: &Direction) -> Result<usize> {
    let wd = WeightDecomposition::new(rep, beta)?;
    let radius = wd.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = 1e-8 * (1.0 + radius);
    let freqs: Vec<f64> = wd
        .eigenvalues
        .iter()
        .copied()
        .filter(|l| l.abs() > gap)
        .collect();
    if freqs.is_empty() {
        return Ok(0);
    }
    if freqs
        .iter()
        .all(|f| rational_snap(*f, 1e-9, 10_000).is_some())
    {
        return Ok(1);
    }
    rational_rank(&freqs)
}

/// Continued-fraction snap: `Some((p, q))` when `|x - p/q| < tol` with
/// `q <= qmax`.
pub(crate) fn rational_snap(x: f64, tol: f64, qmax: i64) -> Option<(i64, i64)> {
    let mut a = x.floor() as i64;
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, a, 1i64);
    let mut frac = x - a as f64;
    for _ in 0..64 {
        if (x - p1 as f64 / q1 as f64).abs() < tol {
            return Some((p1, q1));
        }
        if frac.abs() < 1e-18 {
            break;
        }
        let inv = 1.0 / frac;
        a = inv.floor() as i64;
        frac = inv - a as f64;
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > qmax {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    if q1 != 0 && q1 <= qmax && (x - p1 as f64 / q1 as f64).abs() < tol {
        Some((p1, q1))
    } else {
        None
    }
}

const RELATION_ACCEPT: f64 = 1e-9;
const RELATION_REJECT: f64 = 1e-8;
const RELATION_SCALE: f64 = 1e9;
const COEFF_CAP: f64 = 1e5;

/// Rational rank of a set of reals: the count left after repeatedly
/// removing one value per accepted integer relation.
fn rational_rank(values: &[f64]) -> Result<usize> {
    let mut vals: Vec<f64> = values.to_vec();
    loop {
        if vals.len() <= 1 {
            return Ok(vals.len());
        }
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let normalized: Vec<f64> = vals.iter().map(|v| v / scale).collect();
        match best_relation(&normalized) {
            Some((coeffs, residual)) => {
                if residual < RELATION_ACCEPT {
                    let k = coeffs
                        .iter()
                        .enumerate()
                        .max_by_key(|(_, c)| c.unsigned_abs())
                        .map(|(i, _)| i)
                        .expect("nonzero relation");
                    vals.remove(k);
                } else if residual < RELATION_REJECT {
                    return Err(Error::IndeterminateRank { residual });
                } else {
                    return Ok(vals.len());
                }
            }
            None => return Ok(vals.len()),
        }
    }
}

/// Best integer relation candidate via LLL on the standard relation
/// lattice `[I | N v]`. Returns coefficients and `|sum c_i v_i|`.
fn best_relation(values: &[f64]) -> Option<(Vec<i64>, f64)> {
    let m = values.len();
    let mut basis: Vec<Vec<i128>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0i128; m + 1];
        row[i] = 1;
        row[m] = (values[i] * RELATION_SCALE).round() as i128;
        basis.push(row);
    }
    lll_reduce(&mut basis, 0.99);
    let mut best: Option<(Vec<i64>, f64)> = None;
    for row in &basis {
        let coeffs: Vec<i64> = row[..m].iter().map(|&c| c as i64).collect();
        if coeffs.iter().all(|&c| c == 0) {
            continue;
        }
        if coeffs.iter().any(|&c| (c as f64).abs() > COEFF_CAP) {
            continue;
        }
        let residual: f64 = coeffs
            .iter()
            .zip(values)
            .map(|(&c, &v)| c as f64 * v)
            .sum::<f64>()
            .abs();
        if best.as_ref().map(|(_, r)| residual < *r).unwrap_or(true) {
            best = Some((coeffs, residual));
        }
    }
    best
}

/// Textbook LLL over integer rows with floating-point Gram-Schmidt,
/// adequate for the small lattices produced by eigenvalue vectors.
fn lll_reduce(basis: &mut [Vec<i128>], delta: f64) {
    let n = basis.len();
    if n < 2 {
        return;
    }
    let gso = |basis: &[Vec<i128>]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let dim = basis[0].len();
        let mut star: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut mu = vec![vec![0.0; n]; n];
        let mut norms = vec![0.0; n];
        for i in 0..n {
            let mut v: Vec<f64> = basis[i].iter().map(|&x| x as f64).collect();
            for j in 0..i {
                let num: f64 = basis[i]
                    .iter()
                    .zip(&star[j])
                    .map(|(&x, y)| x as f64 * y)
                    .sum();
                let m = if norms[j] > 0.0 { num / norms[j] } else { 0.0 };
                mu[i][j] = m;
                for k in 0..dim {
                    v[k] -= m * star[j][k];
                }
            }
            norms[i] = v.iter().map(|x| x * x).sum();
            star.push(v);
        }
        (mu, norms)
    };

    let (mut mu, mut norms) = gso(basis);
    let mut k = 1;
    let mut guard = 0usize;
    while k < n && guard < 10_000 {
        guard += 1;
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                let qi = q as i128;
                let bj = basis[j].clone();
                for (x, y) in basis[k].iter_mut().zip(bj.iter()) {
                    *x -= qi * *y;
                }
                let (m2, n2) = gso(basis);
                mu = m2;
                norms = n2;
            }
        }
        let lovasz = norms[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1];
        if lovasz {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            let (m2, n2) = gso(basis);
            mu = m2;
            norms = n2;
            k = k.max(2) - 1;
        }
    }
}
