use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbre::moments::{annealed_laplace, moment_table, paper_recursion_residual, TypeIndex};
use cbre::scenario::ScenarioConfig;
use cbre::simulate::{simulate_paths, Record};
use cbre::stats::MeanEstimator;
use cbre::verify::{coupling_monotonicity_report, rows_to_csv, run_verify_suite, EstimateRow};
use cbre::{fmoment, Error};
use clap::{Args, Parser, Subcommand};

/// Two-type continuous-state branching processes in a Lévy random environment.
#[derive(Parser)]
#[command(name = "cbre", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths; writes paths.csv and means.csv
    Simulate(Common),
    /// Exact mixed moments from the closure ODE; writes moments.csv
    Moments(Common),
    /// Compare the closure with the one-type moment recursion; writes recursion.csv
    RecursionCheck(Common),
    /// Annealed Laplace functional, Monte Carlo vs environment average; writes laplace.csv
    Laplace(Common),
    /// Full verification suite; writes verify.csv
    Verify(Common),
    /// Classify finiteness of E f(X(t)); writes fmoment.json
    Fmoment(Common),
    /// Monotone coupling of two truncation levels; writes couple.csv
    Couple(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of Monte Carlo paths
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory (default: the scenario's, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Moment degree
    #[arg(long)]
    n: Option<u32>,
    /// Print the validated scenario as JSON and exit
    #[arg(long)]
    dump_config: bool,
}

type Action = fn(&ScenarioConfig, &Common, &Path) -> Result<Outcome, Error>;

enum Outcome {
    Pass(String),
    Fail(String),
}

const RECURSION_TOLERANCE: f64 = 1e-6;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(Outcome::Pass(summary)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(Outcome::Fail(summary)) => {
            println!("FAILED: {summary}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<Outcome, Error> {
    let (common, action): (&Common, Action) = match &command {
        Command::Simulate(c) => (c, simulate),
        Command::Moments(c) => (c, moments),
        Command::RecursionCheck(c) => (c, recursion_check),
        Command::Laplace(c) => (c, laplace),
        Command::Verify(c) => (c, verify),
        Command::Fmoment(c) => (c, fmoment_cmd),
        Command::Couple(c) => (c, couple),
    };
    let mut scenario = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    if let Some(paths) = common.paths {
        scenario.n_paths = paths;
    }
    if let Some(n) = common.n {
        scenario.verify.moment_degree = n;
    }
    scenario.validate()?;
    if common.dump_config {
        return Ok(Outcome::Pass(scenario.to_json_pretty()));
    }
    let dir = common
        .out
        .clone()
        .or_else(|| scenario.output.directory.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    action(&scenario, common, &dir)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Config {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf, Error> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn simulate(s: &ScenarioConfig, _: &Common, dir: &Path) -> Result<Outcome, Error> {
    let dumped = simulate_paths(s, s.output.dump_paths.min(s.n_paths), s.seed, &Record::Full)?;
    let mut csv = String::from("path,t,X1,X2,xi\n");
    for (i, p) in dumped.iter().enumerate() {
        for ((t, x), xi) in p.times.iter().zip(&p.states).zip(&p.xi) {
            writeln!(csv, "{i},{t},{},{},{xi}", x[0], x[1]).unwrap();
        }
    }
    let paths_file = write(dir, "paths.csv", &csv)?;

    let times = s.times();
    let sims = simulate_paths(s, s.n_paths, s.seed, &Record::At(times.clone()))?;
    let mut csv = String::from("t,statistic,estimate,se\n");
    let mut last = [0.0; 2];
    for (k, t) in times.iter().enumerate() {
        for (c, slot) in last.iter_mut().enumerate() {
            let est: MeanEstimator = sims.iter().map(|p| p.states[k][c]).collect();
            writeln!(csv, "{t},X{},{},{}", c + 1, est.mean(), est.std_error()).unwrap();
            *slot = est.mean();
        }
    }
    write(dir, "means.csv", &csv)?;
    Ok(Outcome::Pass(format!(
        "simulate: {} paths, mean X({}) = ({:.6}, {:.6}); {} paths dumped to {}",
        s.n_paths,
        times.last().unwrap(),
        last[0],
        last[1],
        dumped.len(),
        paths_file.display()
    )))
}

fn moment_times(s: &ScenarioConfig) -> Vec<f64> {
    let mut times = s.times();
    if times[0] != 0.0 {
        times.insert(0, 0.0);
    }
    times
}

fn moments(s: &ScenarioConfig, _: &Common, dir: &Path) -> Result<Outcome, Error> {
    let n = s.verify.moment_degree;
    let table = moment_table(&s.environment, &s.branching, s.x0, n, &moment_times(s))?;
    let mut csv = String::from("t,p,q,value,finite_flag\n");
    for (k, t) in table.times.iter().enumerate() {
        for (i, &(p, q)) in table.basis.iter().enumerate() {
            writeln!(csv, "{t},{p},{q},{},{}", table.values[k][i], table.finite[i]).unwrap();
        }
    }
    let file = write(dir, "moments.csv", &csv)?;
    let finite = table.finite.iter().filter(|f| **f).count();
    Ok(Outcome::Pass(format!(
        "moments: degree {n}, {finite}/{} monomials finite, written to {}",
        table.basis.len(),
        file.display()
    )))
}

fn recursion_check(s: &ScenarioConfig, _: &Common, dir: &Path) -> Result<Outcome, Error> {
    let n = s.verify.moment_degree;
    if n < 2 {
        return Err(Error::spec("n", "the recursion check needs n >= 2"));
    }
    let times = s.times();
    let table = moment_table(&s.environment, &s.branching, s.x0, n, &times)?;
    let mut csv = String::from("t,n,type,lhs,rhs,residual\n");
    let mut worst = 0.0f64;
    for &t in &times {
        for k in 2..=n {
            for ty in [TypeIndex::One, TypeIndex::Two] {
                let r = paper_recursion_residual(&s.environment, &s.branching, &table, k, ty, t)?;
                writeln!(csv, "{t},{k},{},{},{},{}", ty.number(), r.lhs, r.rhs, r.residual).unwrap();
                worst = worst.max(r.residual);
            }
        }
    }
    write(dir, "recursion.csv", &csv)?;
    let summary = format!("recursion-check: n = 2..={n}, max residual {worst:.3e} (tolerance {RECURSION_TOLERANCE:e})");
    Ok(if worst < RECURSION_TOLERANCE { Outcome::Pass(summary) } else { Outcome::Fail(summary) })
}

fn laplace(s: &ScenarioConfig, _: &Common, dir: &Path) -> Result<Outcome, Error> {
    let lambda = s
        .lambda
        .ok_or_else(|| Error::spec("lambda", "the laplace subcommand needs a lambda vector"))?;
    let times = s.times();
    let sims = simulate_paths(s, s.n_paths, s.seed, &Record::At(times.clone()))?;
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let mc: MeanEstimator = sims
            .iter()
            .map(|p| (-(lambda[0] * p.states[k][0] + lambda[1] * p.states[k][1])).exp())
            .collect();
        // independent environment stream for the quenched average
        let (target, target_se) = annealed_laplace(
            &s.environment,
            &s.branching,
            s.x0,
            lambda,
            t,
            s.step,
            s.n_paths,
            s.seed.wrapping_add(1),
        )?;
        let se = (mc.std_error().powi(2) + target_se.powi(2)).sqrt();
        let z = if se > 0.0 { (mc.mean() - target) / se } else { 0.0 };
        rows.push(EstimateRow {
            t,
            statistic: "laplace".into(),
            estimate: mc.mean(),
            se,
            target,
            z,
            pass: z.abs() <= s.verify.se_multiple || (se == 0.0 && (mc.mean() - target).abs() <= 1e-12),
        });
    }
    write(dir, "laplace.csv", &rows_to_csv(&rows))?;
    let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let summary = format!("laplace: {} times, max |z| {worst:.2}", rows.len());
    Ok(if rows.iter().all(|r| r.pass) { Outcome::Pass(summary) } else { Outcome::Fail(summary) })
}

fn verify(s: &ScenarioConfig, _: &Common, dir: &Path) -> Result<Outcome, Error> {
    let report = run_verify_suite(s, s.n_paths, s.seed)?;
    write(dir, "verify.csv", &report.to_csv())?;
    let rows = report.rows();
    let failed = rows.iter().filter(|r| !r.pass).count();
    let summary = format!("verify: {} rows, {failed} failed", rows.len());
    Ok(if report.passed() { Outcome::Pass(summary) } else { Outcome::Fail(summary) })
}

fn fmoment_cmd(s: &ScenarioConfig, _: &Common, dir: &Path) -> Result<Outcome, Error> {
    let f = s
        .function
        .as_ref()
        .ok_or_else(|| Error::spec("function", "the fmoment subcommand needs a function descriptor"))?;
    let verdict = fmoment::f_moment_verdict(&s.environment, &s.branching, s.x0, f)?;
    let json = serde_json::to_string_pretty(&verdict).expect("verdict serializes");
    write(dir, "fmoment.json", &json)?;
    Ok(Outcome::Pass(format!("fmoment: {:?}", verdict.verdict)))
}

fn couple(s: &ScenarioConfig, _: &Common, dir: &Path) -> Result<Outcome, Error> {
    let levels = s
        .verify
        .coupling
        .ok_or_else(|| Error::spec("verify.coupling", "the couple subcommand needs coupling levels k1, k2"))?;
    let report = coupling_monotonicity_report(s, levels.k1, levels.k2, s.n_paths, s.seed)?;
    write(dir, "couple.csv", &rows_to_csv(&report.rows()))?;
    let summary = format!(
        "couple: k1 = {}, k2 = {}, {} grid points, {} violations",
        levels.k1, levels.k2, report.grid_points, report.violations
    );
    Ok(if report.passed() { Outcome::Pass(summary) } else { Outcome::Fail(summary) })
}
