//! Command-line surface for the ranksdp library.
//!
//! Subcommands: `phi` (surrogate value and gap bounds), `rank` (finite
//! exact-rank scheme), `rankmin` (penalized continuation over an affine
//! set), and `certify` (zero-only certificates for quadratic systems).
//!
//! Exit codes: 0 success, 1 inconclusive / no convergence, 2 input error,
//! 3 numerical failure.

mod formats;

use clap::{Args, Parser, Subcommand};
use ranksdp::quadcert::{certify_zero_only, CertifyOptions, Verdict};
use ranksdp::rank_approx::{exact_rank_scheme, rank_gap, RankApproxError, RankSchemeParams};
use ranksdp::rankmin::{
    nuclear_norm_min, solve_rankmin, trajectory_csv, ContinuationSchedule, RankMinStatus,
};
use ranksdp::sdp::{standard_form_compile, to_sdpa_sparse, SolverOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

const EXIT_OK: u8 = 0;
const EXIT_INCONCLUSIVE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ranksdp",
    version,
    about = "Smooth rank surrogates, rank minimization, and quadratic-system certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the rank surrogate and its exact gap bounds on a matrix file.
    Phi(PhiArgs),
    /// Run the finite exact-rank scheme on a matrix file.
    Rank(RankArgs),
    /// Penalized-SDP rank minimization over an affine set (problem file).
    Rankmin(RankminArgs),
    /// Certify that a quadratic system has only the zero solution.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct PhiArgs {
    /// Matrix files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Surrogate parameter.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Parallelize across input files.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct RankArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Initial epsilon; defaults to ||X||_F^2.
    #[arg(long)]
    epsilon0: Option<f64>,
    /// Geometric factor in (0, 1).
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
    /// Consecutive stable stages required to stop.
    #[arg(long, default_value_t = 3)]
    window: usize,
    #[arg(long, default_value_t = 60)]
    max_iters: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct RankminArgs {
    /// Problem files (rankmat v1, kind affine).
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Penalty exponent (gamma = epsilon^p).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    max_stages: Option<usize>,
    /// Write the trajectory CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory for per-stage X snapshots as matrix files.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Also run the nuclear-norm baseline and add a `nuclear` CSV column.
    #[arg(long)]
    nuclear_baseline: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CertifyArgs {
    /// System files (`n m` then upper triangles).
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Relaxation parameter; omitted = try the grid 1e-2, 1e-3, 1e-4.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Penalty parameter; omitted = tied to epsilon.
    #[arg(long)]
    eta: Option<f64>,
    /// Seed for the counterexample search restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restart budget for the counterexample search.
    #[arg(long, default_value_t = 40)]
    budget: usize,
    /// Export the compiled single-block standard form in SDPA sparse format.
    #[arg(long)]
    sdpa_export: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Phi(a) => {
            let eps = a.epsilon;
            run_files(&a.files, a.jobs, move |f| cmd_phi(f, eps))
        }
        Command::Rank(a) => {
            let (e0, b, w, mi) = (a.epsilon0, a.beta, a.window, a.max_iters);
            run_files(&a.files, a.jobs, move |f| cmd_rank(f, e0, b, w, mi))
        }
        Command::Rankmin(a) => {
            let cfg = RankminCfg {
                epsilon0: a.epsilon0,
                beta: a.beta,
                p: a.p,
                max_stages: a.max_stages,
                csv: a.csv.clone(),
                snapshots: a.snapshots.clone(),
                nuclear: a.nuclear_baseline,
            };
            run_files(&a.files, a.jobs, move |f| cmd_rankmin(f, &cfg))
        }
        Command::Certify(a) => {
            let cfg = CertifyCfg {
                epsilon: a.epsilon,
                eta: a.eta,
                seed: a.seed,
                budget: a.budget,
                sdpa_export: a.sdpa_export.clone(),
            };
            run_files(&a.files, a.jobs, move |f| cmd_certify(f, &cfg))
        }
    };
    ExitCode::from(code)
}

/// Runs one command over the input files, optionally in parallel; output is
/// printed in input order and the exit code is the worst per-file code.
fn run_files<F>(files: &[PathBuf], jobs: usize, f: F) -> u8
where
    F: Fn(&Path) -> (String, u8) + Sync,
{
    let many = files.len() > 1;
    let results: Mutex<Vec<Option<(String, u8)>>> = Mutex::new(vec![None; files.len()]);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = jobs.max(1).min(files.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= files.len() {
                    break;
                }
                let out = f(&files[k]);
                results.lock().unwrap()[k] = Some(out);
            });
        }
    });
    let mut worst = EXIT_OK;
    for (k, slot) in results.into_inner().unwrap().into_iter().enumerate() {
        let (text, code) = slot.expect("worker filled every slot");
        if many {
            println!("== {}", files[k].display());
        }
        print!("{text}");
        worst = worst.max(code);
    }
    worst
}

fn read(path: &Path) -> Result<String, (String, u8)> {
    std::fs::read_to_string(path).map_err(|e| {
        (
            format!("error: cannot read {}: {e}\n", path.display()),
            EXIT_INPUT,
        )
    })
}

fn cmd_phi(path: &Path, epsilon: f64) -> (String, u8) {
    let run = || -> Result<String, (String, u8)> {
        let x = formats::parse_matrix(&read(path)?)
            .map_err(|e| (format!("error: {e}\n"), EXIT_INPUT))?;
        let phi = ranksdp::rank_approx::phi_direct(&x, epsilon)
            .map_err(|e| (format!("error: {e}\n"), EXIT_INPUT))?;
        let (gap_exact, gap_upper) =
            rank_gap(&x, epsilon).map_err(|e| (format!("error: {e}\n"), EXIT_NUMERICAL))?;
        Ok(format!(
            "phi={phi}\ngap_exact={gap_exact}\ngap_upper={gap_upper}\n"
        ))
    };
    match run() {
        Ok(s) => (s, EXIT_OK),
        Err(e) => e,
    }
}

fn cmd_rank(
    path: &Path,
    epsilon0: Option<f64>,
    beta: f64,
    window: usize,
    max_iters: usize,
) -> (String, u8) {
    let run = || -> Result<(String, u8), (String, u8)> {
        let x = formats::parse_matrix(&read(path)?)
            .map_err(|e| (format!("error: {e}\n"), EXIT_INPUT))?;
        let mut params = RankSchemeParams::default_for(&x);
        if let Some(e0) = epsilon0 {
            params.epsilon0 = e0;
        }
        params.beta = beta;
        params.stability_window = window;
        params.max_iters = max_iters;
        let mut out = String::new();
        match exact_rank_scheme(&x, &params) {
            Ok(trace) => {
                for (k, (eps, phi, rounded)) in trace.iterations.iter().enumerate() {
                    out.push_str(&format!(
                        "stage={k} epsilon={eps} phi={phi} rounded={rounded}\n"
                    ));
                }
                out.push_str(&format!("rank={}\n", trace.final_rank));
                Ok((out, EXIT_OK))
            }
            Err(RankApproxError::NoConvergence { trace, .. }) => {
                for (k, (eps, phi, rounded)) in trace.iterations.iter().enumerate() {
                    out.push_str(&format!(
                        "stage={k} epsilon={eps} phi={phi} rounded={rounded}\n"
                    ));
                }
                out.push_str("no_convergence=true\n");
                Ok((out, EXIT_INCONCLUSIVE))
            }
            Err(e) => Err((format!("error: {e}\n"), EXIT_INPUT)),
        }
    };
    match run() {
        Ok(r) => r,
        Err(e) => e,
    }
}

#[derive(Clone)]
struct RankminCfg {
    epsilon0: Option<f64>,
    beta: Option<f64>,
    p: Option<f64>,
    max_stages: Option<usize>,
    csv: Option<PathBuf>,
    snapshots: Option<PathBuf>,
    nuclear: bool,
}

fn cmd_rankmin(path: &Path, cfg: &RankminCfg) -> (String, u8) {
    let run = || -> Result<(String, u8), (String, u8)> {
        let pf = formats::parse_problem(&read(path)?)
            .map_err(|e| (format!("error: {e}\n"), EXIT_INPUT))?;
        let mut schedule = ContinuationSchedule::default();
        if let Some(v) = pf.options.epsilon0 {
            schedule.epsilon0 = v;
        }
        if let Some(v) = pf.options.beta {
            schedule.beta = v;
        }
        if let Some(v) = pf.options.p {
            schedule.p = v;
        }
        if let Some(v) = pf.options.max_stages {
            schedule.max_stages = v;
        }
        // flags override file options
        if let Some(v) = cfg.epsilon0 {
            schedule.epsilon0 = v;
        }
        if let Some(v) = cfg.beta {
            schedule.beta = v;
        }
        if let Some(v) = cfg.p {
            schedule.p = v;
        }
        if let Some(v) = cfg.max_stages {
            schedule.max_stages = v;
        }

        let result = solve_rankmin(&pf.spec, &schedule, &SolverOptions::default())
            .map_err(|e| (format!("error: {e}\n"), EXIT_INPUT))?;

        let mut csv = trajectory_csv(&result);
        let mut out = String::new();
        let status = match result.status {
            RankMinStatus::Converged => "converged",
            RankMinStatus::MaxStages => "max-stages",
            RankMinStatus::PenaltyCapReached => "penalty-cap",
            RankMinStatus::Infeasible => "infeasible",
            RankMinStatus::NumericalFailure => "numerical-failure",
        };
        out.push_str(&format!("status={status}\n"));
        out.push_str(&format!("rank_estimate={}\n", result.rank_estimate));
        out.push_str(&format!(
            "least_fnorm_estimate={}\n",
            result.least_fnorm_estimate
        ));

        if cfg.nuclear {
            match nuclear_norm_min(&pf.spec, &SolverOptions::default()) {
                Ok((_, v)) => {
                    out.push_str(&format!("nuclear_norm={v}\n"));
                    let mut lines: Vec<String> = csv.lines().map(|l| l.to_string()).collect();
                    if let Some(h) = lines.first_mut() {
                        h.push_str(",nuclear");
                    }
                    for l in lines.iter_mut().skip(1) {
                        l.push_str(&format!(",{v}"));
                    }
                    csv = lines.join("\n");
                    csv.push('\n');
                }
                Err(e) => out.push_str(&format!("nuclear_norm_error={e}\n")),
            }
        }

        if let Some(dir) = &cfg.snapshots {
            std::fs::create_dir_all(dir)
                .map_err(|e| (format!("error: snapshots dir: {e}\n"), EXIT_INPUT))?;
            for (k, stage) in result.trajectory.iter().enumerate() {
                let text = formats::emit_matrix(&stage.x);
                std::fs::write(dir.join(format!("stage_{k}.mat")), text)
                    .map_err(|e| (format!("error: snapshot write: {e}\n"), EXIT_INPUT))?;
            }
        }

        match &cfg.csv {
            Some(p) => std::fs::write(p, &csv)
                .map_err(|e| (format!("error: csv write: {e}\n"), EXIT_INPUT))?,
            None => out.push_str(&csv),
        }

        let code = match result.status {
            RankMinStatus::Converged | RankMinStatus::Infeasible => EXIT_OK,
            RankMinStatus::MaxStages | RankMinStatus::PenaltyCapReached => EXIT_INCONCLUSIVE,
            RankMinStatus::NumericalFailure => EXIT_NUMERICAL,
        };
        Ok((out, code))
    };
    match run() {
        Ok(r) => r,
        Err(e) => e,
    }
}

#[derive(Clone)]
struct CertifyCfg {
    epsilon: Option<f64>,
    eta: Option<f64>,
    seed: u64,
    budget: usize,
    sdpa_export: Option<PathBuf>,
}

fn cmd_certify(path: &Path, cfg: &CertifyCfg) -> (String, u8) {
    let run = || -> Result<(String, u8), (String, u8)> {
        let q = formats::parse_system(&read(path)?)
            .map_err(|e| (format!("error: {e}\n"), EXIT_INPUT))?;
        let opts = CertifyOptions {
            epsilon: cfg.epsilon,
            eta: cfg.eta,
            seed: cfg.seed,
            counterexample_budget: cfg.budget,
            ..Default::default()
        };
        let report =
            certify_zero_only(&q, &opts).map_err(|e| (format!("error: {e}\n"), EXIT_NUMERICAL))?;

        if let Some(p) = &cfg.sdpa_export {
            let model = ranksdp::quadcert::build_relaxation(&q, report.epsilon, report.eta)
                .map_err(|e| (format!("error: {e}\n"), EXIT_INPUT))?;
            let std_form = standard_form_compile(&model.problem)
                .map_err(|e| (format!("error: {e}\n"), EXIT_INPUT))?;
            std::fs::write(p, to_sdpa_sparse(&std_form))
                .map_err(|e| (format!("error: sdpa write: {e}\n"), EXIT_INPUT))?;
        }

        let mut out = String::new();
        let verdict = match report.verdict {
            Verdict::CertifiedZeroOnly => "certified-zero-only",
            Verdict::CounterexampleFound => "counterexample-found",
            Verdict::Inconclusive => "inconclusive",
        };
        let summary = match report.verdict {
            Verdict::CertifiedZeroOnly => {
                "only the zero vector solves the system (dual witness verified)"
            }
            Verdict::CounterexampleFound => "a nonzero solution was found",
            Verdict::Inconclusive => "neither a certificate nor a counterexample was found",
        };
        out.push_str(&format!("# system n={} m={}: {summary}\n", q.n, q.m()));
        out.push_str(&format!("verdict={verdict}\n"));
        out.push_str(&format!("dual_bound={}\n", report.dual_bound));
        out.push_str(&format!("epsilon={}\n", report.epsilon));
        out.push_str(&format!("eta={}\n", report.eta));
        out.push_str(&format!("threshold={}\n", report.threshold_used));
        if let Some(v) = report.witness_value() {
            out.push_str(&format!("witness_value={v}\n"));
        }
        if let Some(mu) = &report.pencil_result {
            let s: Vec<String> = mu.iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!("pencil={}\n", s.join(" ")));
        }
        if let Some(ce) = &report.counterexample {
            let s: Vec<String> = ce.x.iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!("counterexample={}\n", s.join(" ")));
            out.push_str(&format!("counterexample_residual={}\n", ce.residual));
        }
        for d in &report.diagnostics {
            out.push_str(&format!("diagnostic={d}\n"));
        }
        let code = match report.verdict {
            Verdict::CertifiedZeroOnly | Verdict::CounterexampleFound => EXIT_OK,
            Verdict::Inconclusive => EXIT_INCONCLUSIVE,
        };
        Ok((out, code))
    };
    match run() {
        Ok(r) => r,
        Err(e) => e,
    }
}
