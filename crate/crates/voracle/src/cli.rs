//! Command-line front door: run scenarios, demo a DKG + threshold-signing
//! round in process, and emit cost tables.
//!
//! Data goes to stdout (or `--out`), diagnostics to stderr. Exit codes: 0 on
//! success, 2 for scenario/usage errors, 1 for internal failures. Scenario
//! paths that do not resolve directly are retried under the directory named
//! by `VORACLE_SCENARIO_DIR`.

use crate::costmodel::{self, Breakeven, CalibrationConstraints, CostParams, Mechanism};
use crate::dkg::{create_deal, finalize, qualified_set, DkgConfig, IdentityKey};
use crate::scenario::Scenario;
use crate::simulator::{self, Metrics};
use crate::tbls;
use crate::NodeId;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Environment variable naming the default scenario directory.
pub const SCENARIO_DIR_ENV: &str = "VORACLE_SCENARIO_DIR";

const EXIT_OK: i32 = 0;
const EXIT_INTERNAL: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "voracle",
    about = "Voting-based cross-chain oracle: threshold-BLS simulation harness and cost model",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulation runs.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Distributed key generation demos.
    #[command(subcommand)]
    Dkg(DkgCommand),
    /// Gas-cost model tables and crossovers.
    #[command(subcommand)]
    Cost(CostCommand),
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Run a scenario file and report metrics.
    Run(SimRunArgs),
}

#[derive(Debug, Args)]
struct SimRunArgs {
    /// Scenario file (TOML); bare names resolve under $VORACLE_SCENARIO_DIR.
    scenario: PathBuf,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also dump transcripts to BASE.ledger.jsonl and BASE.dkg.jsonl.
    #[arg(long, value_name = "BASE")]
    transcript: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum DkgCommand {
    /// Generate a key among N in-process nodes and threshold-sign a message.
    Demo(DkgDemoArgs),
}

#[derive(Debug, Args)]
struct DkgDemoArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    threshold: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum CostCommand {
    /// Per-node-count cost table for every mechanism.
    Table(CostTableArgs),
    /// First node counts where BLS undercuts the alternatives.
    Breakeven(CostBreakevenArgs),
}

#[derive(Debug, Args)]
struct CostTableArgs {
    #[arg(long, default_value_t = 32)]
    max_nodes: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// TOML file with calibration constraint overrides.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CostBreakevenArgs {
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sim(SimCommand::Run(args)) => sim_run(args),
        Command::Dkg(DkgCommand::Demo(args)) => dkg_demo(args),
        Command::Cost(CostCommand::Table(args)) => cost_table(args),
        Command::Cost(CostCommand::Breakeven(args)) => cost_breakeven(args),
    }
}

fn resolve_scenario_path(given: &Path) -> PathBuf {
    if given.exists() {
        return given.to_path_buf();
    }
    if let Ok(dir) = std::env::var(SCENARIO_DIR_ENV) {
        let candidate = Path::new(&dir).join(given);
        if candidate.exists() {
            return candidate;
        }
        let with_ext = candidate.with_extension("toml");
        if with_ext.exists() {
            return with_ext;
        }
    }
    given.to_path_buf()
}

fn write_output(out: &Option<PathBuf>, data: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, data)
            .map_err(|e| Failure::internal(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{data}");
            Ok(())
        }
    }
}

fn sim_run(args: SimRunArgs) -> Result<(), Failure> {
    let path = resolve_scenario_path(&args.scenario);
    let mut scenario = Scenario::load(&path).map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let output = simulator::run(&scenario).map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(base) = &args.transcript {
        let ledger_path = base.with_extension("ledger.jsonl");
        let dkg_path = base.with_extension("dkg.jsonl");
        std::fs::write(&ledger_path, &output.ledger_transcript)
            .map_err(|e| Failure::internal(format!("cannot write transcript: {e}")))?;
        std::fs::write(&dkg_path, &output.dkg_transcript)
            .map_err(|e| Failure::internal(format!("cannot write transcript: {e}")))?;
        eprintln!(
            "transcripts: {} / {}",
            ledger_path.display(),
            dkg_path.display()
        );
    }
    let report = match args.format {
        Format::Json => serde_json::to_string_pretty(&output.metrics)
            .map_err(|e| Failure::internal(e.to_string()))?,
        Format::Table | Format::Csv => render_metrics_table(&output.metrics),
    };
    write_output(&args.out, &report)
}

fn render_metrics_table(metrics: &Metrics) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "run            seed {} over {} blocks\n\
         key            {} activation(s), {} session(s) announced\n\
         conservation   {}\n",
        metrics.seed,
        metrics.run_blocks,
        metrics.keys_activated,
        metrics.dkg_sessions_announced,
        if metrics.conservation_ok {
            "ok"
        } else {
            "VIOLATED"
        },
    ));
    out.push_str("\nrequests\n");
    out.push_str(&format!(
        "{:>4}  {:>9}  {:>9}  {:>7}  {:>9}  {:>7}\n",
        "id", "requested", "fulfilled", "latency", "canonical", "lottery"
    ));
    for request in &metrics.requests {
        out.push_str(&format!(
            "{:>4}  {:>9}  {:>9}  {:>7}  {:>9}  {:>7}\n",
            request.request_id,
            request.requested_at,
            request.fulfilled_at.map_or("-".into(), |h| h.to_string()),
            request.latency_blocks.map_or("-".into(), |l| l.to_string()),
            request
                .matches_canonical
                .map_or("-".into(), |m| String::from(if m { "yes" } else { "NO" })),
            request
                .lottery_win
                .map_or("-".into(), |w| String::from(if w { "won" } else { "lost" })),
        ));
    }
    out.push_str("\nnodes\n");
    out.push_str(&format!(
        "{:<6} {:<16} {:>7} {:>9} {:>5} {:>9} {:>9}\n",
        "id", "behavior", "stake", "balance", "wins", "accepted", "rejected"
    ));
    for node in &metrics.nodes {
        out.push_str(&format!(
            "{:<6} {:<16} {:>7} {:>9} {:>5} {:>9} {:>9}\n",
            node.id.as_str(),
            node.behavior,
            node.stake_final,
            node.balance,
            node.lottery_wins,
            node.submissions_accepted,
            node.submissions_rejected,
        ));
    }
    out.push_str(&format!(
        "\ncosts          {} submission(s) x {} gas = {} (relay over same window: {})\n",
        metrics.costs.oracle_submissions,
        metrics.costs.gas_per_submission,
        metrics.costs.oracle_gas_total,
        metrics.costs.relay_gas_same_window,
    ));
    out
}

fn dkg_demo(args: DkgDemoArgs) -> Result<(), Failure> {
    let (n, t) = (args.nodes, args.threshold);
    if t < 1 || t > n || n > 64 {
        return Err(Failure::usage(format!(
            "need 1 <= threshold <= nodes <= 64, got threshold {t}, nodes {n}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let participants: Vec<NodeId> = (1..=n).map(|i| NodeId::new(format!("node-{i}"))).collect();
    let keys: BTreeMap<NodeId, IdentityKey> = participants
        .iter()
        .map(|p| (p.clone(), IdentityKey::generate(&mut rng)))
        .collect();
    let identities = keys.iter().map(|(p, k)| (p.clone(), k.public())).collect();
    let config = DkgConfig::new(1, participants.clone(), t);
    let deals: Vec<_> = participants
        .iter()
        .map(|p| create_deal(&config, p, &keys[p], &mut rng))
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::internal(e.to_string()))?;
    let qualified = qualified_set(&config, &deals, &[], &identities);
    let shares: Vec<_> = participants
        .iter()
        .map(|p| finalize(&config, p, &deals, &qualified))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::internal(e.to_string()))?;

    let public_key = shares[0].public_key;
    println!(
        "participants  {n}, threshold {t}, qualified {}",
        qualified.len()
    );
    println!("public key    {}", hex::encode(public_key.to_bytes()));
    for (participant, share) in participants.iter().zip(&shares) {
        println!("share         {participant} -> index {}", share.owner_index);
    }

    let message = b"dkg demo message";
    let signature_shares: Vec<_> = shares[..t]
        .iter()
        .map(|ks| tbls::sign_share(ks, message))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::internal(e.to_string()))?;
    let signature =
        tbls::recover(&signature_shares, t).map_err(|e| Failure::internal(e.to_string()))?;
    let verified = tbls::verify(&signature, message, &public_key);
    println!("signature     {}", hex::encode(signature.to_bytes()));
    println!(
        "verification  {}",
        if verified { "success" } else { "FAILURE" }
    );
    if !verified {
        return Err(Failure::internal("threshold signature failed verification"));
    }
    Ok(())
}

fn load_cost_params(calibration: &Option<PathBuf>) -> Result<CostParams, Failure> {
    match calibration {
        None => Ok(CostParams::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::usage(format!("cannot read calibration {}: {e}", path.display()))
            })?;
            let constraints: CalibrationConstraints = toml::from_str(&text)
                .map_err(|e| Failure::usage(format!("cannot parse calibration: {e}")))?;
            costmodel::calibrate(&constraints).map_err(|e| Failure::usage(e.to_string()))
        }
    }
}

fn cost_table(args: CostTableArgs) -> Result<(), Failure> {
    if args.max_nodes == 0 {
        return Err(Failure::usage("--max-nodes must be at least 1"));
    }
    let params = load_cost_params(&args.calibration)?;
    let report = match args.format {
        Format::Csv => params.cost_table_csv(args.max_nodes),
        Format::Json => {
            #[derive(serde::Serialize)]
            struct Row {
                n: u32,
                on_chain: u64,
                ecdsa: u64,
                bls: u64,
            }
            let rows: Vec<Row> = (1..=args.max_nodes)
                .map(|n| Row {
                    n,
                    on_chain: params.cost(Mechanism::OnChain, n).unwrap(),
                    ecdsa: params.cost(Mechanism::Ecdsa, n).unwrap(),
                    bls: params.cost(Mechanism::Bls, n).unwrap(),
                })
                .collect();
            serde_json::to_string_pretty(&rows).map_err(|e| Failure::internal(e.to_string()))?
        }
        Format::Table => {
            let mut out = format!(
                "{:>4}  {:>12}  {:>12}  {:>12}\n",
                "n", "on-chain", "ecdsa", "bls"
            );
            for n in 1..=args.max_nodes {
                out.push_str(&format!(
                    "{:>4}  {:>12}  {:>12}  {:>12}\n",
                    n,
                    params.cost(Mechanism::OnChain, n).unwrap(),
                    params.cost(Mechanism::Ecdsa, n).unwrap(),
                    params.cost(Mechanism::Bls, n).unwrap(),
                ));
            }
            out
        }
    };
    write_output(&args.out, &report)
}

fn cost_breakeven(args: CostBreakevenArgs) -> Result<(), Failure> {
    let params = load_cost_params(&args.calibration)?;
    let onchain = params.breakeven(Mechanism::Bls, Mechanism::OnChain);
    let ecdsa = params.breakeven(Mechanism::Bls, Mechanism::Ecdsa);
    let report = match args.format {
        Format::Json => {
            #[derive(serde::Serialize)]
            struct Crossovers {
                bls_vs_on_chain: Option<u32>,
                bls_vs_ecdsa: Option<u32>,
            }
            let value = |b: Breakeven| match b {
                Breakeven::At(n) => Some(n),
                Breakeven::Never => None,
            };
            serde_json::to_string_pretty(&Crossovers {
                bls_vs_on_chain: value(onchain),
                bls_vs_ecdsa: value(ecdsa),
            })
            .map_err(|e| Failure::internal(e.to_string()))?
        }
        Format::Table | Format::Csv => {
            let show = |b: Breakeven| match b {
                Breakeven::At(n) => n.to_string(),
                Breakeven::Never => "never".to_string(),
            };
            format!(
                "bls cheaper than on-chain from n = {}\nbls cheaper than ecdsa    from n = {}",
                show(onchain),
                show(ecdsa)
            )
        }
    };
    write_output(&None, &report)
}
