//! Command-line entry point for the QuPUF simulation toolkit.
//!
//! Every stochastic subcommand takes an explicit `--seed`; identical flags
//! and seed always produce byte-identical output files. Exit codes: 0 on
//! success, 2 when authentication ends Rejected/Unknown, 1 on errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qupuf_core::{
    circuit_description, circuits, execute_challenge, generate_registry, line_edges,
    run_detection_experiment, select_optimum, sweep, t_shape_edges, AuthOutcome, CRPDatabase,
    ChallengeKey, DeviceRegistry, PufChallenge, PufVariant, SchedulerPolicy, SweepConfig,
};

#[derive(Parser)]
#[command(
    name = "qupuf",
    version,
    about = "Simulate quantum-device PUFs: fleets, challenges, sweeps, enrollment, and scheduler attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a registry of simulated devices.
    GenDevices(GenDevicesArgs),
    /// Execute one PUF challenge against a device and write the trace.
    Run(RunArgs),
    /// Sweep angle/precision/idle combinations and write the metrics CSV.
    Sweep(SweepArgs),
    /// Enroll a device into the CRP database.
    Register(RegisterArgs),
    /// Probe a device and identify or verify it against the CRP database.
    Authenticate(AuthenticateArgs),
    /// Measure detection rates under a scheduler policy.
    Attack(AttackArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Hadamard,
    Decoherence,
}

impl From<VariantArg> for PufVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Hadamard => PufVariant::Hadamard,
            VariantArg::Decoherence => PufVariant::Decoherence,
        }
    }
}

/// Circuit parameters shared by run/register/authenticate/attack.
#[derive(Args)]
struct ChallengeSpec {
    /// Circuit variant.
    #[arg(long, value_enum, default_value_t = VariantArg::Hadamard)]
    variant: VariantArg,
    /// Commanded rotation angle, degrees.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Idle-gate count (decoherence variant only).
    #[arg(long, default_value_t = 0)]
    idles: u32,
}

/// Shot/session budget with the standard and reduced presets.
#[derive(Args)]
struct BudgetSpec {
    /// Shots per experiment (default 8192, or 1024 with --resilient).
    #[arg(long)]
    shots: Option<u64>,
    /// Number of experiments (default 75, or 20 with --resilient).
    #[arg(long)]
    experiments: Option<u32>,
    /// Use the reduced shot/session budget.
    #[arg(long)]
    resilient: bool,
}

impl BudgetSpec {
    fn shots(&self) -> u64 {
        self.shots.unwrap_or(if self.resilient {
            circuits::RESILIENT_SHOTS
        } else {
            circuits::BASIC_SHOTS
        })
    }

    fn experiments(&self) -> u32 {
        self.experiments.unwrap_or(if self.resilient {
            circuits::RESILIENT_EXPERIMENTS
        } else {
            circuits::BASIC_EXPERIMENTS
        })
    }
}

#[derive(Args)]
struct GenDevicesArgs {
    /// Number of devices to generate.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    n: u32,
    /// Topology template: t_shape, line, or custom:FILE with
    /// {"n_qubits": N, "coupling_map": [[u, v], ...], "idle_gate_ns": ns?}.
    #[arg(long, default_value = "t_shape")]
    template: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    device: String,
    #[command(flatten)]
    challenge: ChallengeSpec,
    #[command(flatten)]
    budget: BudgetSpec,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Print the per-qubit gate listing before executing.
    #[arg(long)]
    describe: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Hadamard)]
    variant: VariantArg,
    /// Angle range START:END[:STEP], degrees (single value allowed).
    #[arg(long, default_value = "1:5:1")]
    theta: String,
    /// Precision range START:END[:STEP], bits per qubit.
    #[arg(long, default_value = "4:9")]
    bits: String,
    /// Idle-count range START:END[:STEP] (decoherence variant).
    #[arg(long, default_value = "0")]
    idles: String,
    #[command(flatten)]
    budget: BudgetSpec,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Device whose intra-HD feeds the combined metric (default: first).
    #[arg(long)]
    intra_device: Option<String>,
    /// Pair whose inter-HD feeds the combined metric, as "A,B"
    /// (default: first pair).
    #[arg(long)]
    inter_pair: Option<String>,
}

#[derive(Args)]
struct RegisterArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    device: String,
    #[command(flatten)]
    challenge: ChallengeSpec,
    /// Signature precision, bits per qubit.
    #[arg(long, default_value_t = 5)]
    bits: u8,
    #[command(flatten)]
    budget: BudgetSpec,
    #[arg(long)]
    seed: u64,
    /// Replace an existing record for the same device and challenge.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct AuthenticateArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    db: PathBuf,
    /// Device to actually probe.
    #[arg(long)]
    device: String,
    /// Claimed identity to verify against; omit to identify instead.
    #[arg(long)]
    claim: Option<String>,
    #[command(flatten)]
    challenge: ChallengeSpec,
    #[arg(long, default_value_t = 5)]
    bits: u8,
    #[arg(long)]
    seed: u64,
    /// Also write the decision JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    db: PathBuf,
    /// Device the user requests.
    #[arg(long)]
    device: String,
    /// Scheduler policy: honest | reroute:ID | subgraph:ID:FACTOR.
    #[arg(long)]
    policy: String,
    #[command(flatten)]
    challenge: ChallengeSpec,
    #[arg(long, default_value_t = 5)]
    bits: u8,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    trials: u32,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenDevices(args) => cmd_gen_devices(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Register(args) => cmd_register(args),
        Command::Authenticate(args) => cmd_authenticate(args),
        Command::Attack(args) => cmd_attack(args),
    }
}

/// Parses "START:END[:STEP]" (inclusive of END when STEP divides the range)
/// or a single value.
fn parse_range<T>(text: &str, what: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr + PartialOrd + Copy + Into<f64>,
    f64: TryIntoValue<T>,
{
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| -> Result<T> {
        s.parse::<T>()
            .map_err(|_| anyhow::anyhow!("bad {what} value '{s}' in '{text}'"))
    };
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [start, end] => range_values(parse(start)?, parse(end)?, None, text),
        [start, end, step] => range_values(parse(start)?, parse(end)?, Some(parse(step)?), text),
        _ => bail!("bad {what} range '{text}', expected START:END[:STEP]"),
    }
}

/// Closes the f64 -> T round trip for range stepping.
trait TryIntoValue<T> {
    fn into_value(self) -> T;
}

impl TryIntoValue<f64> for f64 {
    fn into_value(self) -> f64 {
        self
    }
}

impl TryIntoValue<u8> for f64 {
    fn into_value(self) -> u8 {
        self.round() as u8
    }
}

impl TryIntoValue<u32> for f64 {
    fn into_value(self) -> u32 {
        self.round() as u32
    }
}

fn range_values<T>(start: T, end: T, step: Option<T>, text: &str) -> Result<Vec<T>>
where
    T: PartialOrd + Copy + Into<f64>,
    f64: TryIntoValue<T>,
{
    let start_f: f64 = start.into();
    let end_f: f64 = end.into();
    let step_f: f64 = step.map_or(1.0, Into::into);
    if step_f <= 0.0 {
        bail!("range step must be positive in '{text}'");
    }
    if end_f < start_f {
        bail!("range end below start in '{text}'");
    }
    let mut out = Vec::new();
    let mut i = 0u64;
    loop {
        let v = start_f + step_f * i as f64;
        if v > end_f + 1e-9 {
            break;
        }
        out.push(v.into_value());
        i += 1;
    }
    Ok(out)
}

fn parse_policy(text: &str) -> Result<SchedulerPolicy> {
    if text == "honest" {
        return Ok(SchedulerPolicy::Honest);
    }
    if let Some(target) = text.strip_prefix("reroute:") {
        if target.is_empty() {
            bail!("reroute policy needs a device id");
        }
        return Ok(SchedulerPolicy::RerouteSameShape {
            target_id: target.to_string(),
        });
    }
    if let Some(rest) = text.strip_prefix("subgraph:") {
        let (host, factor) = rest
            .split_once(':')
            .context("subgraph policy is subgraph:ID:FACTOR")?;
        if host.is_empty() {
            bail!("subgraph policy needs a device id");
        }
        let factor: f64 = factor
            .parse()
            .with_context(|| format!("bad crosstalk factor '{factor}'"))?;
        return Ok(SchedulerPolicy::RerouteSubgraph {
            host_id: host.to_string(),
            crosstalk_factor: factor,
        });
    }
    bail!("unknown policy '{text}', expected honest | reroute:ID | subgraph:ID:FACTOR")
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn build_challenge(spec: &ChallengeSpec, budget: &BudgetSpec) -> PufChallenge {
    PufChallenge {
        variant: spec.variant.into(),
        theta_deg: spec.theta,
        idle_count: spec.idles,
        shots: budget.shots(),
        n_experiments: budget.experiments(),
        qubit_subset: None,
    }
}

fn cmd_gen_devices(args: GenDevicesArgs) -> Result<ExitCode> {
    let (n_qubits, edges, idle_ns) = match args.template.as_str() {
        "t_shape" => (5, t_shape_edges(), 100.0),
        "line" => (5, line_edges(5), 100.0),
        other => {
            let path = other.strip_prefix("custom:").unwrap_or(other);
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading template '{path}'"))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let n = value["n_qubits"]
                .as_u64()
                .context("template needs integer n_qubits")? as usize;
            let edges = value["coupling_map"]
                .as_array()
                .context("template needs a coupling_map array")?
                .iter()
                .map(|e| {
                    let pair = e.as_array().context("coupling_map entries are [u, v]")?;
                    anyhow::ensure!(pair.len() == 2, "coupling_map entries are [u, v]");
                    Ok((
                        pair[0].as_u64().context("edge endpoint")? as usize,
                        pair[1].as_u64().context("edge endpoint")? as usize,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let idle = value
                .get("idle_gate_ns")
                .and_then(|v| v.as_f64())
                .unwrap_or(100.0);
            (n, edges, idle)
        }
    };
    let registry = generate_registry(args.n as usize, n_qubits, &edges, idle_ns, args.seed)?;
    registry.save(&args.out)?;
    println!(
        "wrote {} devices ({} qubits each) to {}",
        registry.len(),
        n_qubits,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let registry = DeviceRegistry::load(&args.registry)?;
    let device = registry.get(&args.device)?;
    let challenge = build_challenge(&args.challenge, &args.budget);
    if args.describe {
        println!("{}", circuit_description(&challenge, device.n_qubits));
    }
    let trace = execute_challenge(device, &challenge, args.seed)?;
    write_file(&args.out, &trace.to_json())?;
    println!(
        "ran {:?} on '{}': {} sessions x {} shots -> {}",
        challenge.variant,
        args.device,
        challenge.n_experiments,
        challenge.shots,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let registry = DeviceRegistry::load(&args.registry)?;
    let devices: Vec<_> = registry.iter().cloned().collect();
    let inter_pair = match &args.inter_pair {
        Some(text) => {
            let (a, b) = text
                .split_once(',')
                .context("--inter-pair takes two ids as 'A,B'")?;
            Some((a.trim().to_string(), b.trim().to_string()))
        }
        None => None,
    };
    let config = SweepConfig {
        variant: args.variant.into(),
        theta_values: parse_range::<f64>(&args.theta, "theta")?,
        precisions: parse_range::<u8>(&args.bits, "bits")?,
        idle_values: parse_range::<u32>(&args.idles, "idles")?,
        shots: args.budget.shots(),
        n_experiments: args.budget.experiments(),
        seed: args.seed,
        intra_device: args.intra_device.clone(),
        inter_pair,
    };
    let result = sweep(&devices, &config)?;
    write_file(&args.out, &result.to_csv())?;
    let best = select_optimum(&result)?;
    println!(
        "{} rows -> {}; optimum theta {}°, {} bits, {} idles (combined {:.2}%)",
        result.rows.len(),
        args.out.display(),
        best.theta_deg,
        best.precision,
        best.idle_count,
        best.combined
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_register(args: RegisterArgs) -> Result<ExitCode> {
    let registry = DeviceRegistry::load(&args.registry)?;
    let device = registry.get(&args.device)?;
    let mut db = if args.db.exists() {
        CRPDatabase::load(&args.db)?
    } else {
        CRPDatabase::new()
    };
    let challenge = build_challenge(&args.challenge, &args.budget);
    db.register(device, &challenge, args.bits, args.seed, args.overwrite)?;
    db.save(&args.db)?;
    let key = ChallengeKey::of(&challenge, args.bits);
    let record = db.get(&args.device, &key).expect("just registered");
    println!(
        "registered '{}' under {} (intra mean {:.2}%, threshold {:.2}%), db now {} records",
        args.device,
        key,
        record.intra_stats.mean,
        record.threshold_pct,
        db.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_authenticate(args: AuthenticateArgs) -> Result<ExitCode> {
    let registry = DeviceRegistry::load(&args.registry)?;
    let db = CRPDatabase::load(&args.db)?;
    let key = ChallengeKey::new(
        args.challenge.variant.into(),
        args.challenge.theta,
        args.challenge.idles,
        args.bits,
    );
    // Re-run the enrolled challenge: the claimed record's when verifying,
    // otherwise the first record under this key.
    let enrolled = match &args.claim {
        Some(claim) => db
            .get(claim, &key)
            .ok_or_else(|| anyhow::anyhow!("no CRP record for device '{claim}' under {key}"))?,
        None => db
            .iter()
            .find(|r| ChallengeKey::of(&r.challenge, r.precision) == key)
            .ok_or_else(|| anyhow::anyhow!("no CRP record under {key}"))?,
    };
    let challenge = enrolled.challenge.clone();
    let probed = registry.get(&args.device)?;
    let trace = execute_challenge(probed, &challenge, args.seed)?;
    let last = trace.sessions.last().expect("n_experiments >= 1");
    let response = qupuf_core::digitize(&last.prob_one, args.bits)?;
    let decision = match &args.claim {
        Some(claim) => db.verify(claim, &response, &key)?,
        None => db.identify(&response, &key)?,
    };
    let mut json = serde_json::to_string_pretty(&decision)?;
    json.push('\n');
    if let Some(out) = &args.out {
        write_file(out, &json)?;
    }
    print!("{json}");
    Ok(if decision.outcome == AuthOutcome::Accepted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_attack(args: AttackArgs) -> Result<ExitCode> {
    let registry = DeviceRegistry::load(&args.registry)?;
    let db = CRPDatabase::load(&args.db)?;
    let policy = parse_policy(&args.policy)?;
    let key = ChallengeKey::new(
        args.challenge.variant.into(),
        args.challenge.theta,
        args.challenge.idles,
        args.bits,
    );
    let report = run_detection_experiment(
        &registry,
        &db,
        &args.device,
        &policy,
        &key,
        args.trials as usize,
        args.seed,
    )?;
    write_file(&args.out, &report.to_json())?;
    println!("{}", report.summary());
    Ok(ExitCode::SUCCESS)
}
