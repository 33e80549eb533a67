//! Batch front end for the stability toolkit.
//!
//! Subcommands: `classify`, `weights`, `flow`, `parabolic`, `check`.
//! Exit codes: 0 success, 2 schema or I/O error, 3 classification finished
//! with at least one indeterminate label (reports are still written).

mod problem;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use serde::Serialize;

use polystab_core::maxweight::{max_weight_numeric, weight_curve, MaxWeightValue, WeightOptions};
use polystab_core::stability::{classify, kempf_ness_flow, ClassifyOptions, StabilityLabel};
use polystab_core::{Direction, StabilityReport};

use problem::{parse_problem, Problem};

#[derive(Parser)]
#[command(
    name = "polystab",
    version,
    about = "Stability classification for reductive matrix group actions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every point in a problem file and write a JSON report.
    Classify {
        problem: PathBuf,
        /// Output path for the JSON array of reports.
        #[arg(short, long)]
        out: PathBuf,
        /// Override the zero tolerance of the sphere search.
        #[arg(long)]
        tol: Option<f64>,
        /// Override the problem seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the flow iteration budget.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Concurrent points (output order stays the input order).
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Export the weight curve of one point along a direction as CSV.
    Weights {
        problem: PathBuf,
        /// Point id from the problem file.
        #[arg(long)]
        point: String,
        /// Direction as comma-separated coordinates in the p basis.
        #[arg(long)]
        direction: String,
        /// Largest curve parameter on the doubling grid.
        #[arg(long)]
        t_max: Option<f64>,
        /// Output CSV path.
        #[arg(long)]
        csv: PathBuf,
    },
    /// Run the Kempf-Ness flow for one point and print a JSON summary.
    Flow {
        problem: PathBuf,
        #[arg(long)]
        point: String,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Print the Levi/nilradical split along a direction as JSON.
    Parabolic {
        problem: PathBuf,
        #[arg(long)]
        direction: String,
    },
    /// Print structure compatibility diagnostics as JSON.
    Check { problem: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn load(path: &Path) -> Result<Problem, i32> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(2);
        }
    };
    match parse_problem(&text) {
        Ok(p) => Ok(p),
        Err(errors) => {
            eprint!("{errors}");
            Err(2)
        }
    }
}

fn parse_direction(problem: &Problem, text: &str) -> Result<Direction, i32> {
    let coords: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let coords = match coords {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: cannot parse direction {text:?}: {e}");
            return Err(2);
        }
    };
    problem.rep.structure().direction(coords).map_err(|e| {
        eprintln!("error: {e}");
        2
    })
}

fn classify_options(
    problem: &Problem,
    tol: Option<f64>,
    seed: Option<u64>,
    max_iters: Option<usize>,
) -> ClassifyOptions {
    let mut opts = ClassifyOptions::default();
    if let Some(t) = problem.zero_tolerance {
        opts.search.zero_tolerance = t;
    }
    if let Some(t) = problem.flow_tolerance {
        opts.flow.flow_tolerance = t;
    }
    if let Some(n) = problem.max_iters {
        opts.flow.max_iters = n;
    }
    if let Some(c) = problem.component_tolerance {
        opts.search.weight.component_tol = c;
    }
    if let Some(s) = problem.starts_per_dim {
        opts.search.starts_per_dim = s;
    }
    opts.search.seed = problem.seed;
    if let Some(t) = tol {
        opts.search.zero_tolerance = t;
    }
    if let Some(s) = seed {
        opts.search.seed = s;
    }
    if let Some(n) = max_iters {
        opts.flow.max_iters = n;
    }
    opts
}

#[derive(Serialize)]
struct KeyedReport {
    id: String,
    report: StabilityReport,
}

fn cmd_classify(
    problem_path: &Path,
    out: &Path,
    tol: Option<f64>,
    seed: Option<u64>,
    max_iters: Option<usize>,
    jobs: usize,
) -> i32 {
    let problem = match load(problem_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let base_opts = classify_options(&problem, tol, seed, max_iters);
    let n = problem.points.len();
    let slots: Mutex<Vec<Option<Result<StabilityReport, String>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(n.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let (_, point) = &problem.points[i];
                let mut opts = base_opts.clone();
                // Distinct per-point streams, still a pure function of
                // (problem seed, point index).
                opts.search.seed =
                    base_opts.search.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let result = classify(&problem.rep, point, &opts).map_err(|e| e.to_string());
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });

    let results = slots.into_inner().unwrap();
    let mut keyed = Vec::with_capacity(n);
    let mut indeterminate = false;
    for ((id, _), result) in problem.points.iter().zip(results) {
        match result.expect("all slots filled") {
            Ok(report) => {
                if report.label == StabilityLabel::Indeterminate {
                    indeterminate = true;
                }
                println!("{id}: {:?}", report.label);
                keyed.push(KeyedReport {
                    id: id.clone(),
                    report,
                });
            }
            Err(e) => {
                eprintln!("error: classifying {id}: {e}");
                return 2;
            }
        }
    }
    let json = serde_json::to_string_pretty(&keyed).expect("reports serialize");
    if let Err(e) = std::fs::write(out, json + "\n") {
        eprintln!("error: cannot write {}: {e}", out.display());
        return 2;
    }
    if indeterminate {
        3
    } else {
        0
    }
}

fn cmd_weights(
    problem_path: &Path,
    point_id: &str,
    direction: &str,
    t_max: Option<f64>,
    csv_path: &Path,
) -> i32 {
    let problem = match load(problem_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let Some((_, point)) = problem.points.iter().find(|(id, _)| id == point_id) else {
        eprintln!("error: unknown point id {point_id:?}");
        return 2;
    };
    let beta = match parse_direction(&problem, direction) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let mut wopts = WeightOptions::default();
    if let Some(t) = t_max {
        wopts.t_max = t;
    }
    if let Some(c) = problem.component_tolerance {
        wopts.component_tol = c;
    }

    let mut rows = String::from("t,value\n");
    let mut t = 0.0f64;
    loop {
        let value = match weight_curve(&problem.rep, point, &beta, t) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        };
        rows.push_str(&format!("{t},{value}\n"));
        t = if t == 0.0 { 1.0 } else { t * 2.0 };
        if t > wopts.t_max {
            break;
        }
    }
    let limit = match max_weight_numeric(&problem.rep, point, &beta, &wopts) {
        Ok(mw) => match mw.value {
            MaxWeightValue::Finite(v) => format!("{v}"),
            MaxWeightValue::Infinite => "inf".to_string(),
        },
        Err(e) => {
            eprintln!("warning: limit indeterminate: {e}");
            "indeterminate".to_string()
        }
    };
    rows.push_str(&format!("limit,{limit}\n"));
    if let Err(e) = std::fs::write(csv_path, rows) {
        eprintln!("error: cannot write {}: {e}", csv_path.display());
        return 2;
    }
    0
}

fn cmd_flow(problem_path: &Path, point_id: &str, max_iters: Option<usize>) -> i32 {
    let problem = match load(problem_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let Some((id, point)) = problem.points.iter().find(|(id, _)| id == point_id) else {
        eprintln!("error: unknown point id {point_id:?}");
        return 2;
    };
    let opts = classify_options(&problem, None, None, max_iters);
    match kempf_ness_flow(&problem.rep, point, &opts.flow) {
        Ok(trace) => {
            let monotone = trace
                .iterates
                .windows(2)
                .all(|w| w[1].phi <= w[0].phi + 1e-12);
            let out = serde_json::json!({
                "id": id,
                "termination": format!("{:?}", trace.termination),
                "iterations": trace.iterations,
                "final_moment_norm": trace.final_moment_norm,
                "initial_stabilizer_dim": trace.initial_stabilizer_dim,
                "final_stabilizer_dim": trace.final_stabilizer_dim,
                "phi_final": trace.iterates.last().map(|i| i.phi),
                "phi_monotone": monotone,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("serializes")
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn cmd_parabolic(problem_path: &Path, direction: &str) -> i32 {
    let problem = match load(problem_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let beta = match parse_direction(&problem, direction) {
        Ok(d) => d,
        Err(code) => return code,
    };
    match problem.rep.structure().parabolic_subalgebra(&beta) {
        Ok(split) => {
            let (l, rp, rm) = split.dims();
            let out = serde_json::json!({
                "levi_dim": l,
                "nilradical_plus_dim": rp,
                "nilradical_minus_dim": rm,
                "parabolic_plus_dim": split.parabolic_plus.len(),
                "levi": split.levi.iter().map(matrix_rows).collect::<Vec<_>>(),
                "nilradical_plus": split.nilradical_plus.iter().map(matrix_rows).collect::<Vec<_>>(),
                "nilradical_minus": split.nilradical_minus.iter().map(matrix_rows).collect::<Vec<_>>(),
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("serializes")
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_check(problem_path: &Path) -> i32 {
    let problem = match load(problem_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let d = problem.rep.structure().check_compatible_structure();
    let growth = problem.rep.linear_growth_constant();
    let out = serde_json::json!({
        "ok": d.ok,
        "theta_k_residual": d.theta_k_residual,
        "theta_p_residual": d.theta_p_residual,
        "bracket_kk_residual": d.bracket_kk_residual,
        "bracket_kp_residual": d.bracket_kp_residual,
        "bracket_pp_residual": d.bracket_pp_residual,
        "ad_invariance_residual": d.ad_invariance_residual,
        "jacobi_residual": d.jacobi_residual,
        "independence_min_sv": d.independence_min_sv,
        "convention": d.convention,
        "linear_growth_constant": growth,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("serializes")
    );
    if d.ok {
        0
    } else {
        2
    }
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Classify {
            problem,
            out,
            tol,
            seed,
            max_iters,
            jobs,
        } => cmd_classify(&problem, &out, tol, seed, max_iters, jobs),
        Command::Weights {
            problem,
            point,
            direction,
            t_max,
            csv,
        } => cmd_weights(&problem, &point, &direction, t_max, &csv),
        Command::Flow {
            problem,
            point,
            max_iters,
        } => cmd_flow(&problem, &point, max_iters),
        Command::Parabolic { problem, direction } => cmd_parabolic(&problem, &direction),
        Command::Check { problem } => cmd_check(&problem),
    }
}
