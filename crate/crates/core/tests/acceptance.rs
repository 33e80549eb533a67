//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p polystab-core --test acceptance -- --nocapture`
//! to see the lines; every tolerance is pinned in the assertions below.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use polystab_core::action::{presets as reps, Point, Representation, Space};
use polystab_core::liealg::presets::sl;
use polystab_core::liealg::Direction;
use polystab_core::linalg::{trace_inner, trace_norm};
use polystab_core::maxweight::{
    max_weight_algebraic, max_weight_numeric, torus_dimension, weight_curve, MaxWeightValue,
    WeightOptions,
};
use polystab_core::stability::{
    classify, kempf_ness_flow, ClassifyOptions, FlowOptions, FlowTermination, StabilityLabel,
};

fn h_mat() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

fn e_mat() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
}

fn random_point(rep: &Representation, rng: &mut impl Rng) -> Point {
    rep.point((0..rep.dim_v()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap()
}

fn random_direction(rep: &Representation, rng: &mut impl Rng) -> Direction {
    rep.structure()
        .direction(
            (0..rep.structure().dim_p())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
}

fn preset_battery() -> Vec<(&'static str, Representation)> {
    let s2 = sl(2).unwrap();
    let s3 = sl(3).unwrap();
    vec![
        (
            "sl2 defining affine",
            reps::defining(&s2, Space::Affine).unwrap(),
        ),
        (
            "sl2 adjoint affine",
            reps::adjoint(&s2, Space::Affine).unwrap(),
        ),
        (
            "sl2 sym2 projective",
            reps::sym(&s2, 2, Space::Projective).unwrap(),
        ),
        (
            "sl2 sym4 projective",
            reps::sym(&s2, 4, Space::Projective).unwrap(),
        ),
        (
            "sl3 defining affine",
            reps::defining(&s3, Space::Affine).unwrap(),
        ),
        (
            "sl3 adjoint affine",
            reps::adjoint(&s3, Space::Affine).unwrap(),
        ),
    ]
}

#[test]
fn criterion_01_gradient_identity() {
    let start = Instant::now();
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0usize;
    for (name, rep) in preset_battery() {
        for _ in 0..1000 {
            let x = random_point(&rep, &mut rng);
            let beta = random_direction(&rep, &mut rng);
            let plus = rep.kempf_ness(&x, &rep.exp_dir(&beta, h));
            let minus = rep.kempf_ness(&x, &rep.exp_dir(&beta, -h));
            let fd = (plus - minus) / (2.0 * h);
            let exact = rep.moment_pairing(&x, &beta);
            assert!(
                (fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                "{name}: fd {fd} vs exact {exact}"
            );
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 (gradient identity): PASS ({checked} samples, {:.2}s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_02_cocycle_and_k_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_cocycle = 0.0f64;
    let mut worst_k = 0.0f64;
    for (name, rep) in preset_battery() {
        for _ in 0..200 {
            let x = random_point(&rep, &mut rng);
            let g = rep
                .exp_dir(&random_direction(&rep, &mut rng), rng.gen_range(-0.7..0.7))
                .then(&rep.exp_dir(&random_direction(&rep, &mut rng), rng.gen_range(-0.7..0.7)));
            let hh = rep
                .exp_dir(&random_direction(&rep, &mut rng), rng.gen_range(-0.7..0.7))
                .then(&rep.exp_dir(&random_direction(&rep, &mut rng), rng.gen_range(-0.7..0.7)));
            let hg = g.then(&hh);
            let gx = rep.act(&g, &x).unwrap();
            let residual =
                (rep.kempf_ness(&x, &hg) - rep.kempf_ness(&x, &g) - rep.kempf_ness(&gx, &hh)).abs();
            assert!(residual <= 1e-10, "{name}: cocycle residual {residual}");
            worst_cocycle = worst_cocycle.max(residual);

            let mut xi =
                DMatrix::zeros(rep.structure().ambient_dim(), rep.structure().ambient_dim());
            for b in rep.structure().basis_k() {
                xi += b * rng.gen_range(-1.0..1.0);
            }
            let k = rep.exp_algebra(&xi).unwrap();
            let kg = g.then(&k);
            let kres = (rep.kempf_ness(&x, &kg) - rep.kempf_ness(&x, &g)).abs();
            assert!(kres <= 1e-10, "{name}: K-invariance residual {kres}");
            worst_k = worst_k.max(kres);
        }
    }
    println!(
        "ACCEPTANCE 2 (cocycle + K-invariance): PASS (worst {worst_cocycle:.2e} / {worst_k:.2e})"
    );
}

#[test]
fn criterion_03_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let opts = WeightOptions::default();
    let mut finite = 0usize;
    let mut infinite = 0usize;
    for (name, rep) in preset_battery() {
        for _ in 0..1000 {
            let x = random_point(&rep, &mut rng);
            let beta = random_direction(&rep, &mut rng);
            let num = max_weight_numeric(&rep, &x, &beta, &opts).unwrap();
            let alg = max_weight_algebraic(&rep, &x, &beta, &opts).unwrap();
            assert_eq!(
                num.value.is_infinite(),
                alg.value.is_infinite(),
                "{name}: infinity flags differ"
            );
            match (num.value, alg.value) {
                (MaxWeightValue::Finite(a), MaxWeightValue::Finite(b)) => {
                    assert!((a - b).abs() <= 1e-6, "{name}: {a} vs {b}");
                    finite += 1;
                }
                _ => infinite += 1,
            }
        }
    }
    println!(
        "ACCEPTANCE 3 (numeric/algebraic oracle equivalence): PASS ({finite} finite, {infinite} infinite)"
    );
}

#[test]
fn criterion_04_golden_classification_table() {
    let start = Instant::now();
    let opts = ClassifyOptions::default();
    let s2 = sl(2).unwrap();
    let adj = reps::adjoint(&s2, Space::Affine).unwrap();

    // H: polystable with the identity witness and an exact moment zero.
    let xh = Point {
        vec: s2.g_coords(&h_mat()),
    };
    let rh = classify(&adj, &xh, &opts).unwrap();
    assert_eq!(
        rh.label,
        StabilityLabel::Polystable,
        "H notes: {:?}",
        rh.notes
    );
    let flow = rh.flow.as_ref().unwrap();
    assert!(
        flow.final_moment_norm <= 1e-12,
        "moment norm {}",
        flow.final_moment_norm
    );
    let witness = rh.witness_matrix.as_ref().unwrap();
    for (i, row) in witness.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((v - expect).abs() <= 1e-12, "witness not identity");
        }
    }

    // E: semistable only, degenerated flow, stabilizer jump 1 -> 3.
    let xe = Point {
        vec: s2.g_coords(&e_mat()),
    };
    let re = classify(&adj, &xe, &opts).unwrap();
    assert_eq!(
        re.label,
        StabilityLabel::SemistableOnly,
        "E notes: {:?}",
        re.notes
    );
    let flow = re.flow.as_ref().unwrap();
    assert_eq!(flow.termination, FlowTermination::Degenerated);
    assert_eq!(flow.initial_stabilizer_dim, 1);
    assert_eq!(flow.final_stabilizer_dim, 3);

    // E - F: stable with positive minimal weight.
    let xef = Point {
        vec: s2.g_coords(&(e_mat() - e_mat().transpose())),
    };
    let rs = classify(&adj, &xef, &opts).unwrap();
    assert_eq!(
        rs.label,
        StabilityLabel::Stable,
        "E-F notes: {:?}",
        rs.notes
    );
    assert!(rs.min_weight.0 > 0.0);

    // 0: polystable.
    let r0 = classify(
        &adj,
        &Point {
            vec: DVector::zeros(3),
        },
        &opts,
    )
    .unwrap();
    assert_eq!(
        r0.label,
        StabilityLabel::Polystable,
        "0 notes: {:?}",
        r0.notes
    );

    // Defining (1, 0): semistable only with the unique zero direction
    // diag(-1, 1)/sqrt(2).
    let def = reps::defining(&s2, Space::Affine).unwrap();
    let x10 = def.point(vec![1.0, 0.0]).unwrap();
    let r10 = classify(&def, &x10, &opts).unwrap();
    assert_eq!(
        r10.label,
        StabilityLabel::SemistableOnly,
        "(1,0) notes: {:?}",
        r10.notes
    );
    assert_eq!(
        r10.zero_directions.len(),
        1,
        "zeros: {:?}",
        r10.zero_directions
    );
    let zero = s2.direction(r10.zero_directions[0].clone()).unwrap();
    let expect = s2
        .dir_from_matrix(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]))
        .unwrap()
        .scale(1.0 / 2.0f64.sqrt());
    let angle = s2.dir_angle(&zero, &expect);
    assert!(angle <= 1e-6, "zero direction angle {angle}");

    // Projective sym^2.
    let sym2 = reps::sym(&s2, 2, Space::Projective).unwrap();
    let ru = classify(&sym2, &sym2.point(vec![1.0, 0.0, 0.0]).unwrap(), &opts).unwrap();
    assert_eq!(
        ru.label,
        StabilityLabel::Unstable,
        "[v1^2] notes: {:?}",
        ru.notes
    );
    assert!(
        (ru.min_weight.0 + 2.0f64.sqrt()).abs() <= 1e-6,
        "min weight {}",
        ru.min_weight.0
    );
    let rp = classify(&sym2, &sym2.point(vec![0.0, 1.0, 0.0]).unwrap(), &opts).unwrap();
    assert_eq!(
        rp.label,
        StabilityLabel::Polystable,
        "[v1v2] notes: {:?}",
        rp.notes
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 4 (golden classification table): PASS ({:.2}s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_05_flow_recovery() {
    let s2 = sl(2).unwrap();
    let adj = reps::adjoint(&s2, Space::Affine).unwrap();
    let opts = FlowOptions::default();
    for t in [0.1, 1.0, 5.0] {
        // Ad(exp(tE)) H = H - 2tE
        let m = h_mat() - e_mat() * (2.0 * t);
        let x = Point {
            vec: s2.g_coords(&m),
        };
        let trace = kempf_ness_flow(&adj, &x, &opts).unwrap();
        assert_eq!(trace.termination, FlowTermination::Converged, "t = {t}");
        assert!(
            trace.final_moment_norm <= 1e-8,
            "t = {t}: |mu| {}",
            trace.final_moment_norm
        );
        assert!(trace.iterations <= 10_000);
        for w in trace.iterates.windows(2) {
            assert!(w[1].phi <= w[0].phi + 1e-12, "t = {t}: phi increased");
        }
    }
    println!("ACCEPTANCE 5 (flow recovery from moved points): PASS");
}

#[test]
fn criterion_06_torus_dimensions() {
    let s2 = sl(2).unwrap();
    let s3 = sl(3).unwrap();
    let def2 = reps::defining(&s2, Space::Affine).unwrap();
    let def3 = reps::defining(&s3, Space::Affine).unwrap();

    let h = s2.dir_from_matrix(&h_mat()).unwrap();
    assert_eq!(torus_dimension(&def2, &h).unwrap(), 1);
    assert_eq!(torus_dimension(&def2, &Direction::zero(2)).unwrap(), 0);

    let sqrt2 = 2.0f64.sqrt();
    let beta3 = s3
        .dir_from_matrix(&DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0,
            sqrt2,
            -1.0 - sqrt2,
        ])))
        .unwrap();
    assert_eq!(torus_dimension(&def3, &beta3).unwrap(), 2);

    // Conjugation invariance under 100 random rotations.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for i in 0..100 {
        let (rep, structure, beta, expect): (&Representation, _, &Direction, usize) = if i % 2 == 0
        {
            (&def3, &s3, &beta3, 2)
        } else {
            (&def2, &s2, &h, 1)
        };
        let mut xi = DMatrix::zeros(structure.ambient_dim(), structure.ambient_dim());
        for b in structure.basis_k() {
            xi += b * rng.gen_range(-2.0..2.0);
        }
        let conj = rep.ad_k_direction(&xi, beta).unwrap();
        assert_eq!(torus_dimension(rep, &conj).unwrap(), expect, "sample {i}");
    }
    println!("ACCEPTANCE 6 (torus dimensions + conjugation invariance): PASS");
}

#[test]
fn criterion_07_parabolic_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for n in 2..=4 {
        let s = sl(n).unwrap();
        for _ in 0..100 {
            let beta = s
                .direction((0..s.dim_p()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let split = s.parabolic_subalgebra(&beta).unwrap();
            let (levi, plus, minus) = split.dims();
            assert_eq!(split.parabolic_plus.len(), levi + plus, "sl({n})");
            assert_eq!(plus, minus);

            let global = s.check_global_decomposition(&beta).unwrap();
            assert!(
                global.holds,
                "sl({n}): dim(k + parabolic) = {}",
                global.dim_sum
            );

            // theta maps the plus nilradical onto the minus one.
            for v in &split.nilradical_plus {
                let tv = -v.transpose();
                let mut proj = DMatrix::zeros(n, n);
                for w in &split.nilradical_minus {
                    proj += w * trace_inner(&tv, w);
                }
                let residual = trace_norm(&(tv - proj)) / trace_norm(v).max(1e-300);
                assert!(residual <= 1e-8, "sl({n}): theta residual {residual}");
            }
        }
    }
    println!("ACCEPTANCE 7 (parabolic dimension identities): PASS");
}

#[test]
fn criterion_08_monotonicity_and_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let opts = WeightOptions::default();
    let mut finite_cases = 0usize;
    for (name, rep) in preset_battery() {
        for _ in 0..200 {
            let x = random_point(&rep, &mut rng);
            let beta = random_direction(&rep, &mut rng);
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=24 {
                let t = i as f64 * 0.5;
                let v = weight_curve(&rep, &x, &beta, t).unwrap();
                assert!(
                    v >= prev - 1e-9 * (1.0 + prev.abs()),
                    "{name}: curve decreased {prev} -> {v}"
                );
                prev = v;
            }
            let alg = max_weight_algebraic(&rep, &x, &beta, &opts).unwrap();
            let pairing = rep.moment_pairing(&x, &beta);
            assert!(
                alg.value.as_f64() >= pairing - 1e-9,
                "{name}: lambda {} < pairing {pairing}",
                alg.value.as_f64()
            );
            if !alg.value.is_infinite() {
                finite_cases += 1;
            }
        }
    }
    println!("ACCEPTANCE 8 (curve monotonicity + lower bound): PASS ({finite_cases} finite cases)");
}

#[test]
fn criterion_09_slice_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let s2 = sl(2).unwrap();
    let adj = reps::adjoint(&s2, Space::Affine).unwrap();
    let h = s2.dir_from_matrix(&h_mat()).unwrap();
    let slice =
        polystab_core::stability::restrict_to_slice(&adj, std::slice::from_ref(&h), None).unwrap();
    let sub = slice.rep.as_ref().unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        // X^a is the line through the H coordinate vector.
        let c = rng.gen_range(-3.0..3.0);
        let x = Point {
            vec: s2.g_coords(&h_mat()) * c,
        };
        let (sub_point, residual) = slice.restrict_point(&x);
        assert!(residual <= 1e-10 || x.vec.norm() < 1e-12);
        let mu_full = s2.dir_matrix(&adj.gradient_map(&x).unwrap());
        let mu_sub = sub.gradient_map(&sub_point).unwrap();
        let mu_emb = s2.dir_matrix(&slice.embed_direction(&s2, &mu_sub).unwrap());
        let diff = (mu_full - mu_emb).amax();
        assert!(diff <= 1e-10, "residual {diff}");
        worst = worst.max(diff);
    }
    println!("ACCEPTANCE 9 (slice moment consistency): PASS (worst residual {worst:.2e})");
}
