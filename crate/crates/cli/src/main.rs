use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use indistinet::entanglement::{concurrence, fidelity, BellState};
use indistinet::experiments::{self, HeraldReport, Scenario};
use indistinet::tomography::{self, error_bars, read_counts_csv, reconstruct_with, Reconstruction};
use indistinet::Error;

#[derive(Parser)]
#[command(name = "indistinet", version, about = "Heralded entanglement distribution through spatial indistinguishability")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario TOML file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's output.dir, else `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Also write the post-selected Fock state as text.
    #[arg(long, global = true)]
    dump_state: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the distribution protocol and report the heralded states.
    Distribute,
    /// Two-photon and four-photon HOM curves.
    Hom,
    /// Standard entanglement swapping next to the LPSM pipeline.
    SwapBaseline,
    /// Heralding probability over the θ–φ grid.
    Scan,
    /// Reconstruct a state from a count table (`setting,observed,shots`).
    Tomo(TomoArgs),
}

#[derive(Args)]
struct TomoArgs {
    /// Count table CSV.
    #[arg(long)]
    counts: PathBuf,
    /// Target Bell state: psi+, psi-, phi+ or phi-.
    #[arg(long, default_value = "psi+")]
    target: BellState,
    #[arg(long, default_value_t = 200)]
    resamples: usize,
    #[arg(long, default_value = "linear_inversion", value_parser = parse_method)]
    method: Reconstruction,
}

fn parse_method(s: &str) -> Result<Reconstruction, String> {
    match s {
        "linear_inversion" => Ok(Reconstruction::LinearInversion),
        "maximum_likelihood" => Ok(Reconstruction::MaximumLikelihood),
        _ => Err(format!("unknown method `{s}`")),
    }
}

enum Failure {
    Config(String),
    EmptyPostselection(String),
    Invariant(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::EmptyPostselection(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::EmptyPostselection(m) | Failure::Invariant(m) | Failure::Other(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) | Error::InvalidDistinguishability(_) => Failure::Config(e.to_string()),
            Error::EmptyPostselection { .. } => Failure::EmptyPostselection(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Other(format!("{}: {e}", path.display()))
}

struct Context {
    scenario: Option<Scenario>,
    out_dir: PathBuf,
    dump_state: bool,
}

impl Context {
    fn new(global: Global) -> Result<Self, Failure> {
        let scenario = match &global.config {
            Some(path) => {
                let mut s = Scenario::from_file(path)?;
                if let Some(seed) = global.seed {
                    s.seed = seed;
                }
                Some(s)
            }
            None => None,
        };
        let out_dir = global
            .out_dir
            .or_else(|| scenario.as_ref().and_then(|s| s.output.dir.clone()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Context {
            scenario,
            out_dir,
            dump_state: global.dump_state,
        })
    }

    fn scenario(&self) -> Result<&Scenario, Failure> {
        self.scenario
            .as_ref()
            .ok_or_else(|| Failure::Config("this command needs --config <scenario.toml>".into()))
    }

    fn path(&self, name: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out_dir).map_err(|e| io_failure(&self.out_dir, e))?;
        Ok(self.out_dir.join(name))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_failure(&path, e))?;
        Ok(path)
    }

    fn create(&self, name: &str) -> Result<(fs::File, PathBuf), Failure> {
        let path = self.path(name)?;
        let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
        Ok((file, path))
    }
}

fn herald_line(h: &HeraldReport) -> String {
    let mut line = format!(
        "{:<5} {:<9} p={:.6} F={:.4} C={:.4} classical_limit_exceeded={}",
        h.target.name(),
        h.basis.name(),
        h.probability,
        h.fidelity,
        h.concurrence,
        h.above_classical_limit
    );
    if let Some(t) = &h.tomography {
        let bars = &t.error_bars;
        line.push_str(&format!(
            " tomo F={:.4}±{:.4} C={:.4}±{:.4}",
            bars.fidelity.value, bars.fidelity.std, bars.concurrence.value, bars.concurrence.std
        ));
    }
    line
}

fn distribute(ctx: &Context) -> Result<(), Failure> {
    let scenario = ctx.scenario()?;
    let report = experiments::run_distribution(scenario)?;
    let path = ctx.write_json("report.json", &report)?;
    println!("report: {}", path.display());
    if let Some(f) = &report.failure {
        if f.kind == "empty_postselection" {
            return Err(Failure::EmptyPostselection(f.message.clone()));
        }
        eprintln!("warning: {}", f.message);
    }
    println!("post-selection {} probability {:.6}", report.pattern, report.postselection_probability);
    for h in &report.heralds {
        println!("{}", herald_line(h));
        if let Some(t) = &h.tomography {
            let counts = tomography::simulate_counts(&h.rl_state, t.shots_per_setting, t.seed);
            let name = format!("counts_{}.csv", h.target.name().replace('+', "plus").replace('-', "minus"));
            let (file, path) = ctx.create(&name)?;
            tomography::write_counts_csv(&counts, file)?;
            println!("  counts: {}", path.display());
        }
    }
    if ctx.dump_state {
        let (state, _) = experiments::postselected_state(scenario)?;
        let path = ctx.path("postselected_state.txt")?;
        fs::write(&path, state.to_dump()).map_err(|e| io_failure(&path, e))?;
        println!("state: {}", path.display());
    }
    report.check_invariants().map_err(Failure::Invariant)
}

fn hom(ctx: &Context) -> Result<(), Failure> {
    let report = experiments::run_hom(ctx.scenario()?)?;
    ctx.write_json("hom.json", &report)?;
    for (name, curve) in [
        ("hom_source_1.csv", &report.source_1),
        ("hom_source_2.csv", &report.source_2),
        ("hom_four_photon.csv", &report.four_photon),
    ] {
        let (file, path) = ctx.create(name)?;
        curve.write_csv(file)?;
        println!("{}: visibility {:.4}", path.display(), curve.visibility);
    }
    let in_range = |v: f64| (0.0..=1.0 + experiments::METRIC_TOLERANCE).contains(&v);
    if [&report.source_1, &report.source_2, &report.four_photon].iter().all(|c| in_range(c.visibility)) {
        Ok(())
    } else {
        Err(Failure::Invariant("visibility outside [0, 1]".into()))
    }
}

fn swap_baseline(ctx: &Context) -> Result<(), Failure> {
    let report = experiments::run_swap_baseline(ctx.scenario()?)?;
    let path = ctx.write_json("swap_baseline.json", &report)?;
    println!("report: {}", path.display());
    for o in &report.outcomes {
        println!("BSM {:<5} p={:.4} heralds {:<5} F={:.4}", o.bsm_outcome.name(), o.probability, o.target.name(), o.fidelity);
    }
    println!(
        "entangled pairs needed: BSM {} / LPSM {}; LPSM success per basis {:.6}; families match: {}",
        report.bsm.initial_entangled_pairs, report.lpsm.initial_entangled_pairs, report.lpsm.success_probability, report.families_match
    );
    if report.families_match {
        Ok(())
    } else {
        Err(Failure::Invariant("heralded families differ beyond local Paulis".into()))
    }
}

fn scan(ctx: &Context) -> Result<(), Failure> {
    let report = experiments::run_scan(ctx.scenario()?)?;
    ctx.write_json("scan.json", &report)?;
    let (file, path) = ctx.create("scan.csv")?;
    report.write_csv(file)?;
    let best = report
        .points
        .iter()
        .max_by(|a, b| a.probability.total_cmp(&b.probability))
        .ok_or_else(|| Failure::Config("empty scan grid".into()))?;
    println!(
        "{}: {} points, max probability {:.6} at theta={:.2} phi={:.2}",
        path.display(),
        report.points.len(),
        best.probability,
        best.theta,
        best.phi
    );
    if report.points.iter().all(|p| (0.0..=1.0 + experiments::METRIC_TOLERANCE).contains(&p.probability)) {
        Ok(())
    } else {
        Err(Failure::Invariant("probability outside [0, 1]".into()))
    }
}

#[derive(Serialize)]
struct TomoReport {
    counts_file: String,
    target: BellState,
    method: Reconstruction,
    seed: u64,
    fidelity: f64,
    concurrence: f64,
    error_bars: tomography::ErrorBars,
    density: indistinet::entanglement::TwoQubitDensity,
}

fn tomo(ctx: &Context, args: &TomoArgs, seed: u64) -> Result<(), Failure> {
    let file = fs::File::open(&args.counts).map_err(|e| Failure::Config(format!("{}: {e}", args.counts.display())))?;
    let records = read_counts_csv(file)?;
    let rho = reconstruct_with(&records, args.method)?;
    let bars = error_bars(&records, &args.target.ket(), args.resamples, seed, args.method)?;
    let report = TomoReport {
        counts_file: args.counts.display().to_string(),
        target: args.target,
        method: args.method,
        seed,
        fidelity: fidelity(&rho, &args.target.ket()),
        concurrence: concurrence(&rho),
        error_bars: bars,
        density: rho,
    };
    let path = ctx.write_json("tomo.json", &report)?;
    println!(
        "{}: F={:.4}±{:.4} C={:.4}±{:.4}",
        path.display(),
        report.fidelity,
        bars.fidelity.std,
        report.concurrence,
        bars.concurrence.std
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed_flag = cli.global.seed;
    let ctx = Context::new(cli.global)?;
    match &cli.command {
        Command::Distribute => distribute(&ctx),
        Command::Hom => hom(&ctx),
        Command::SwapBaseline => swap_baseline(&ctx),
        Command::Scan => scan(&ctx),
        Command::Tomo(args) => {
            let seed = seed_flag.or(ctx.scenario.as_ref().map(|s| s.seed)).unwrap_or(0);
            tomo(&ctx, args, seed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
