//! Command-line front end: simulate registered models, verify their
//! structural axioms, and couple them through ports.
//!
//! Exit codes: 0 success/pass, 1 verification or rank-condition failure,
//! 2 solver failure during integration, 3 invalid input.

mod effort;
mod spec;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use phmb::models::{self, ModelEntry};
use phmb::sample::SampleSet;
use phmb::sim::{self, consistent_init, simulate, SimConfig, Trajectory};
use phmb::verify::{
    self, draw_samples, verify_system, CheckResult, VerificationReport, VerifyConfig,
};
use phmb::PhError;

use effort::EffortSpec;
use spec::FileSpec;

#[derive(Parser)]
#[command(
    name = "phmb",
    version,
    about = "Port-Hamiltonian multibody simulator and verifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a registered model and export the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Check the structural axioms of a registered model over a sample box.
    Verify(VerifyArgs),
    /// Couple two registered models through ports and optionally simulate
    /// the interconnection.
    Couple(CoupleArgs),
}

#[derive(Args, Clone)]
struct SimFlags {
    /// End time of the run (s).
    #[arg(long)]
    t_end: Option<f64>,
    /// Step size (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Integration scheme: implicit-midpoint | explicit-rk4.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    newton_max_iter: Option<usize>,
    #[arg(long)]
    projection_tol: Option<f64>,
    /// Keep every n-th step in the CSV.
    #[arg(long)]
    store_every: Option<usize>,
    /// External-effort schedule: zero | const:v,.. | sin:amp=..;freq=.. |
    /// table:t,v..;t,v..
    #[arg(long)]
    effort: Option<String>,
    /// Initial condition, e.g. "zeta=0,0,0;omega=10,0,0" or "omega1=5".
    #[arg(long)]
    init: Option<String>,
    /// Trajectory CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Registered model name.
    #[arg(long)]
    model: Option<String>,
    /// Config file (TOML) mirroring the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model parameter overrides, e.g. "m=2,ell=0.15".
    #[arg(long)]
    params: Option<String>,
    #[command(flatten)]
    sim: SimFlags,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    params: Option<String>,
    /// Number of sample points.
    #[arg(long)]
    samples: Option<usize>,
    /// Sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sample box "lo:hi,lo:hi,.." (positions then momenta).
    #[arg(long, value_name = "BOX")]
    sample_box: Option<String>,
    /// Write the report to this file as well as standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CoupleArgs {
    /// First model name.
    #[arg(long)]
    a: Option<String>,
    /// Second model name.
    #[arg(long)]
    b: Option<String>,
    /// Port pairing "i,j:k,l" (indices into each model's ports).
    #[arg(long)]
    pair: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    params_a: Option<String>,
    #[arg(long)]
    params_b: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulate the coupling even if the rank condition fails.
    #[arg(long)]
    force: bool,
    /// Also integrate the coupled system.
    #[arg(long)]
    simulate: bool,
    #[command(flatten)]
    sim: SimFlags,
}

enum Failure {
    /// Exit 3.
    Invalid(String),
    /// Exit 2.
    Solver(String),
}

impl From<PhError> for Failure {
    fn from(e: PhError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Couple(args) => cmd_couple(args),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            3
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            2
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<FileSpec, Failure> {
    match path {
        Some(p) => FileSpec::load(p).map_err(Failure::Invalid),
        None => Ok(FileSpec::default()),
    }
}

fn resolve_params(
    flag: &Option<String>,
    file: &Option<BTreeMap<String, f64>>,
) -> Result<BTreeMap<String, f64>, Failure> {
    match flag {
        Some(s) => spec::parse_params(s).map_err(Failure::Invalid),
        None => Ok(file.clone().unwrap_or_default()),
    }
}

fn resolve_init(
    flag: &Option<String>,
    file: &FileSpec,
) -> Result<BTreeMap<String, Vec<f64>>, Failure> {
    match flag {
        Some(s) => spec::parse_init(s).map_err(Failure::Invalid),
        None => match &file.init {
            Some(table) => spec::init_from_toml(table).map_err(Failure::Invalid),
            None => Ok(BTreeMap::new()),
        },
    }
}

fn sim_config(flags: &SimFlags, file: &FileSpec) -> Result<SimConfig, Failure> {
    let defaults = SimConfig::default();
    let scheme = match flags.scheme.as_ref().or(file.scheme.as_ref()) {
        Some(s) => s
            .parse()
            .map_err(|e: PhError| Failure::Invalid(e.to_string()))?,
        None => defaults.scheme,
    };
    let cfg = SimConfig {
        dt: flags.dt.or(file.dt).unwrap_or(defaults.dt),
        t_end: flags.t_end.or(file.t_end).unwrap_or(10.0),
        newton_tol: flags
            .newton_tol
            .or(file.newton_tol)
            .unwrap_or(defaults.newton_tol),
        newton_max_iter: flags
            .newton_max_iter
            .or(file.newton_max_iter)
            .unwrap_or(defaults.newton_max_iter),
        projection_tol: flags
            .projection_tol
            .or(file.projection_tol)
            .unwrap_or(defaults.projection_tol),
        scheme,
        store_every: flags.store_every.or(file.store_every).unwrap_or(1),
        check_rank_drift: false,
        mass_floor: defaults.mass_floor,
    };
    cfg.validate()
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    Ok(cfg)
}

fn resolve_effort(
    flags: &SimFlags,
    file: &FileSpec,
    m_ports: usize,
) -> Result<Box<dyn Fn(f64) -> DVector<f64>>, Failure> {
    let spec = match &flags.effort {
        Some(s) => EffortSpec::parse(s).map_err(Failure::Invalid)?,
        None => file.effort.clone().unwrap_or_default(),
    };
    spec.compile(m_ports).map_err(Failure::Invalid)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_trajectory(
    traj: &Trajectory,
    entry_system: &phmb::PhSystem,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    if let Some(path) = out {
        let mut buf = Vec::new();
        sim::write_csv(traj, entry_system, &mut buf)
            .map_err(|e| Failure::Invalid(format!("cannot format CSV: {e}")))?;
        std::fs::write(path, buf)
            .map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn print_summary(name: &str, cfg: &SimConfig, traj: &Trajectory, out: &Option<PathBuf>) {
    println!("model = {name}");
    println!("scheme = {}", cfg.scheme);
    println!("dt = {}", fmt(cfg.dt));
    println!("steps = {}", ((cfg.t_end / cfg.dt).round() as usize));
    println!("rows = {}", traj.len());
    println!("final_t = {}", fmt(*traj.times.last().unwrap()));
    println!("final_H = {}", fmt(*traj.energy.last().unwrap()));
    println!("max_balance_residual = {}", fmt(traj.max_balance_residual));
    println!(
        "max_constraint_residual = {}",
        fmt(traj.max_constraint_residual)
    );
    if let Some(path) = out {
        println!("csv = {}", path.display());
    }
}

fn build_entry(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelEntry, Failure> {
    models::build(name, params).map_err(|e| Failure::Invalid(e.to_string()))
}

fn prepare_initial_state(
    entry: &ModelEntry,
    init_kv: &BTreeMap<String, Vec<f64>>,
    tol: f64,
) -> Result<(phmb::State, f64, f64), Failure> {
    let (zeta_guess, omega_guess) = entry
        .resolve_init(init_kv)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let state = consistent_init(&entry.system, &zeta_guess, &omega_guess, tol)
        .map_err(|e| Failure::Invalid(format!("initial condition: {e}")))?;
    let dz = (&state.zeta - zeta_guess).norm();
    let dw = (&state.omega - omega_guess).norm();
    Ok((state, dz, dw))
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, Failure> {
    let file = load_config(&args.config)?;
    let name = args.model.or(file.model.clone()).ok_or_else(|| {
        Failure::Invalid("simulate needs --model (or model= in the config)".into())
    })?;
    let params = resolve_params(&args.params, &file.params)?;
    let entry = build_entry(&name, &params)?;
    let cfg = sim_config(&args.sim, &file)?;
    let init_kv = resolve_init(&args.sim.init, &file)?;
    let (state, dz, dw) = prepare_initial_state(&entry, &init_kv, cfg.projection_tol)?;
    let effort = resolve_effort(&args.sim, &file, entry.system.m_ports)?;
    let out = args.sim.out.clone().or(file.out.clone());

    println!("projection_distance_zeta = {}", fmt(dz));
    println!("projection_distance_omega = {}", fmt(dw));
    match simulate(&entry.system, &state, &effort, &cfg) {
        Ok(traj) => {
            write_trajectory(&traj, &entry.system, &out)?;
            print_summary(&name, &cfg, &traj, &out);
            Ok(0)
        }
        Err(failure) => Err(Failure::Solver(failure.to_string())),
    }
}

/// Negative fixture exercised by `verify --model dim-jump-counterexample`:
/// a constant structure whose constrained reduction changes dimension at the
/// box midpoint. The sample set pins the midpoint so the defect is hit
/// exactly.
const COUNTEREXAMPLE: &str = "dim-jump-counterexample";

fn verify_counterexample(
    seed: u64,
    count: usize,
    bounds: &[(f64, f64)],
) -> Result<VerificationReport, Failure> {
    if bounds.len() != 1 {
        return Err(Failure::Invalid(
            "the counterexample fixture samples a scalar box".into(),
        ));
    }
    let mut samples = SampleSet::generate(seed, count.max(2) - 1, bounds, None)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let (lo, hi) = bounds[0];
    samples
        .points
        .insert(0, DVector::from_element(1, 0.5 * (lo + hi)));

    let mut report = VerificationReport {
        subject: COUNTEREXAMPLE.into(),
        seed,
        sample_count: samples.points.len(),
        checks: Vec::new(),
    };
    match verify::fixtures::counterexample_dim_constancy(&samples) {
        Ok(v) => {
            let detail = match &v.witness {
                Some((x, dim)) => format!(
                    "dimension jumps to {dim} at x = {} (elsewhere {})",
                    fmt(x[0]),
                    v.dims
                        .iter()
                        .find(|&&d| Some(d) != v.witness.as_ref().map(|w| w.1))
                        .copied()
                        .unwrap_or(0)
                ),
                None => format!("dimension = {}", v.dims.first().copied().unwrap_or(0)),
            };
            report.push(
                CheckResult::judged(
                    "dirac_dim_constancy",
                    v.pass,
                    0.0,
                    0.0,
                    v.witness.map(|(x, _)| x),
                )
                .with_detail(detail),
            );
        }
        Err(e) => report.push(CheckResult::error("dirac_dim_constancy", e.to_string())),
    }
    Ok(report)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, Failure> {
    let file = load_config(&args.config)?;
    let name = args
        .model
        .or(file.model.clone())
        .ok_or_else(|| Failure::Invalid("verify needs --model (or model= in the config)".into()))?;
    let samples_count = args.samples.or(file.samples).unwrap_or(200);
    let seed = args.seed.or(file.seed).unwrap_or(42);
    let flag_box = match &args.sample_box {
        Some(s) => Some(spec::parse_box(s).map_err(Failure::Invalid)?),
        None => file
            .sample_box
            .as_ref()
            .map(|rows| rows.iter().map(|r| (r[0], r[1])).collect()),
    };

    let report = if name == COUNTEREXAMPLE {
        let bounds = flag_box.unwrap_or_else(|| vec![(-1.0, 1.0)]);
        verify_counterexample(seed, samples_count, &bounds)?
    } else {
        let params = resolve_params(&args.params, &file.params)?;
        let entry = build_entry(&name, &params)?;
        let bounds = flag_box.unwrap_or_else(|| entry.sample_bounds.clone());
        let samples = draw_samples(&entry.system, seed, samples_count, &bounds)
            .map_err(|e| Failure::Invalid(e.to_string()))?;
        let mut report = verify_system(&entry.system, &samples, &VerifyConfig::default());
        report.subject = name.clone();
        report
    };

    let text = report.to_string();
    print!("{text}");
    if let Some(path) = args.report.or(file.report) {
        std::fs::write(&path, &text)
            .map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if report.overall_pass() { 0 } else { 1 })
}

fn cmd_couple(args: CoupleArgs) -> Result<i32, Failure> {
    let file = load_config(&args.config)?;
    let name_a = args
        .a
        .or(file.a.clone())
        .ok_or_else(|| Failure::Invalid("couple needs --a".into()))?;
    let name_b = args
        .b
        .or(file.b.clone())
        .ok_or_else(|| Failure::Invalid("couple needs --b".into()))?;
    let pair_text = args
        .pair
        .or(file.pair.clone())
        .ok_or_else(|| Failure::Invalid("couple needs --pair".into()))?;
    let (ports_a, ports_b) = spec::parse_pair(&pair_text).map_err(Failure::Invalid)?;

    let entry_a = build_entry(&name_a, &resolve_params(&args.params_a, &file.params_a)?)?;
    let entry_b = build_entry(&name_b, &resolve_params(&args.params_b, &file.params_b)?)?;
    let coupling = phmb::CouplingSpec::new(ports_a, ports_b);

    // rank condition over the product of the position boxes; the box
    // midpoint is pinned into the sample set so symmetric singular
    // configurations are hit exactly
    let seed = args.seed.or(file.seed).unwrap_or(42);
    let samples_count = args.samples.or(file.samples).unwrap_or(200);
    let mut bounds: Vec<(f64, f64)> = entry_a.sample_bounds[..entry_a.system.n_pot].to_vec();
    bounds.extend_from_slice(&entry_b.sample_bounds[..entry_b.system.n_pot]);
    let mut samples = SampleSet::generate(seed, samples_count.max(2) - 1, &bounds, None)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    samples.points.insert(
        0,
        DVector::from_fn(bounds.len(), |i, _| 0.5 * (bounds[i].0 + bounds[i].1)),
    );
    let rank = phmb::interconnect::check_interconnection_rank(
        &entry_a.system,
        &entry_b.system,
        &coupling,
        &samples,
    )
    .map_err(|e| Failure::Invalid(e.to_string()))?;

    println!("coupling = {name_a}:{name_b}");
    println!(
        "rank_condition = {}",
        if rank.pass { "pass" } else { "fail" }
    );
    println!("rank = {}", rank.rank);
    if let Some((witness, r)) = &rank.witness {
        let coords: Vec<String> = witness.iter().map(|x| fmt(*x)).collect();
        println!("rank_witness = {}", coords.join(" "));
        println!("rank_at_witness = {r}");
    }

    let force = args.force || file.force.unwrap_or(false);
    if !rank.pass && !force {
        return Ok(1);
    }
    if !rank.pass {
        println!("forced = true");
    }

    let do_simulate = args.simulate || file.simulate.unwrap_or(false);
    if do_simulate {
        let coupled = phmb::interconnect::couple(&entry_a.system, &entry_b.system, &coupling)
            .map_err(|e| Failure::Invalid(e.to_string()))?;
        let mut cfg = sim_config(&args.sim, &file)?;
        cfg.check_rank_drift = true;
        let init_kv = resolve_init(&args.sim.init, &file)?;
        let sys = &coupled.system;
        let mut zeta_guess = DVector::zeros(sys.n_pot);
        let mut omega_guess = DVector::zeros(sys.n_kin);
        for (key, values) in &init_kv {
            match key.as_str() {
                "zeta" if values.len() == sys.n_pot => zeta_guess = DVector::from_row_slice(values),
                "omega" if values.len() == sys.n_kin => {
                    omega_guess = DVector::from_row_slice(values)
                }
                other => {
                    return Err(Failure::Invalid(format!(
                        "coupled init accepts zeta ({} values) and omega ({} values); got '{other}' with {} values",
                        sys.n_pot,
                        sys.n_kin,
                        values.len()
                    )));
                }
            }
        }
        let state = consistent_init(sys, &zeta_guess, &omega_guess, cfg.projection_tol)
            .map_err(|e| Failure::Invalid(format!("initial condition: {e}")))?;
        println!(
            "projection_distance_zeta = {}",
            fmt((&state.zeta - zeta_guess).norm())
        );
        println!(
            "projection_distance_omega = {}",
            fmt((&state.omega - omega_guess).norm())
        );
        let effort = resolve_effort(&args.sim, &file, sys.m_ports)?;
        let out = args.sim.out.clone().or(file.out.clone());
        match simulate(sys, &state, &effort, &cfg) {
            Ok(traj) => {
                // post-hoc coupling-port power residual over stored steps
                let mut worst = 0.0_f64;
                for i in 0..traj.len() {
                    let r = phmb::interconnect::coupling_power_residual(
                        &coupled,
                        &traj.states[i],
                        &traj.multipliers[i],
                    )
                    .map_err(|e| Failure::Invalid(e.to_string()))?;
                    worst = worst.max(r.abs());
                }
                write_trajectory(&traj, sys, &out)?;
                println!("max_coupling_power_residual = {}", fmt(worst));
                print_summary(&format!("{name_a}+{name_b}"), &cfg, &traj, &out);
            }
            Err(failure) => return Err(Failure::Solver(failure.to_string())),
        }
    }
    Ok(0)
}
