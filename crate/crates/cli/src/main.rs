use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use groupauth::attacks::{self, AttackOptions};
use groupauth::cost::{self, CsvRow, EnergyModel, HarnSlope};
use groupauth::ec::CurveParams;
use groupauth::field::OpCounter;
use groupauth::harn::{harn_init, harn_release, harn_verify, HarnGroup, Released};
use groupauth::protocol::{decentralized_verify, gm_init, gm_verify, make_public_share, run_key_agreement};
use groupauth::sim::{self, Scenario, Schedule, SimReport, SimScheme};
use groupauth::sss::{verify_commitment, write_shares};

#[derive(Parser)]
#[command(name = "groupauth", version, about = "Threshold group authentication toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct SeedArg {
    /// RNG seed; GAS_SEED overrides the default.
    #[arg(long, env = "GAS_SEED", default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol instance and print its transcript.
    Demo(DemoArgs),
    /// Per-member cost table as CSV.
    Cost(CostArgs),
    /// Run one scenario, a preset, or a scenario file.
    Simulate(SimulateArgs),
    /// Run a grid of scenarios over schemes and group sizes.
    Sweep(SweepArgs),
    /// Run an adversary scenario and print its findings as JSON.
    Attack(AttackArgs),
    /// Emit parameter files.
    GenParams {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DemoScheme {
    Proposed,
    ProposedDecentralized,
    Harn,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, value_enum, default_value_t = DemoScheme::Proposed)]
    scheme: DemoScheme,
    #[arg(long, default_value_t = 3)]
    t: usize,
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Participating members (the first m of the roster).
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Curve file or builtin:<name>.
    #[arg(long, default_value = "builtin:test2017")]
    curve: String,
    /// Harn group file or builtin:<name>.
    #[arg(long, default_value = "builtin:tiny")]
    group: String,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SlopeArg {
    Text,
    Table,
    Both,
}

#[derive(Args)]
struct CostArgs {
    /// Inclusive range a:b:step (step defaults to 1).
    #[arg(long, default_value = "10:50:40")]
    m_range: String,
    #[arg(long, value_enum, default_value_t = SlopeArg::Text)]
    harn_slope: SlopeArg,
    #[arg(long, default_value_t = sim::DEFAULT_JOULES_PER_TMULQ)]
    joules_per_tmulq: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Staggered,
    Simultaneous,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Staggered => Schedule::Staggered,
            ScheduleArg::Simultaneous => Schedule::Simultaneous,
        }
    }
}

#[derive(Args)]
struct ScenarioFlags {
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    #[arg(long, default_value_t = 0)]
    attackers: usize,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Staggered)]
    schedule: ScheduleArg,
    #[arg(long)]
    queue_capacity: Option<usize>,
    #[arg(long, default_value = "builtin:secp160r1")]
    curve: String,
    #[command(flatten)]
    seed: SeedArg,
}

impl ScenarioFlags {
    fn apply(&self, sc: &mut Scenario) {
        sc.loss_probability = self.loss;
        sc.attackers = self.attackers;
        sc.schedule = self.schedule.into();
        sc.queue_capacity = self.queue_capacity;
        sc.curve = self.curve.clone();
        sc.seed = self.seed.seed;
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Builtin scenario set: compare-m10 or compare-m50.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "proposed-centralized")]
    scheme: String,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    t: usize,
    #[command(flatten)]
    flags: ScenarioFlags,
    /// Write the event log of every run as JSON to this path.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated scheme names.
    #[arg(long, default_value = "harn,proposed-centralized,proposed-decentralized")]
    schemes: String,
    #[arg(long, default_value = "10:50:10")]
    m_range: String,
    /// Threshold; defaults to m/2 at every point.
    #[arg(long)]
    t: Option<usize>,
    /// Worker threads; output order does not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    flags: ScenarioFlags,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Centralized,
    Decentralized,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    name: String,
    /// Rotate credentials between recording and replay.
    #[arg(long)]
    rotate: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Decentralized)]
    mode: ModeArg,
    #[arg(long, default_value_t = 3)]
    t: usize,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    attackers: usize,
    #[arg(long, default_value_t = 4)]
    queue_capacity: usize,
    #[arg(long, default_value = "builtin:secp160r1")]
    curve: String,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Subcommand)]
enum GenKind {
    /// Print a builtin curve as JSON.
    Curve {
        #[arg(long, default_value = "test2017")]
        name: String,
    },
    /// Generate a Harn group with q | p-1.
    Harn {
        #[arg(long, default_value_t = 1024)]
        p_bits: u64,
        #[arg(long, default_value_t = 160)]
        q_bits: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Initialize a group: public config to stdout, shares to --shares.
    Group {
        #[arg(long, default_value_t = 3)]
        t: usize,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value = "builtin:test2017")]
        curve: String,
        /// Share file (JSON lines); shares are not printed otherwise.
        #[arg(long)]
        shares: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
}

/// Parses `a:b[:step]` into the inclusive list `a, a+step, ... <= b`.
fn parse_range(text: &str) -> Result<Vec<u64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<u64>().with_context(|| format!("malformed range {text:?}"));
    let (a, b, step) = match parts.as_slice() {
        [a, b] => (num(a)?, num(b)?, 1),
        [a, b, s] => (num(a)?, num(b)?, num(s)?),
        _ => bail!("malformed range {text:?}; expected a:b or a:b:step"),
    };
    if step == 0 {
        bail!("malformed range {text:?}; step must be positive");
    }
    Ok((a..=b).step_by(step as usize).collect())
}

fn parse_schemes(text: &str) -> Result<Vec<SimScheme>> {
    text.split(',')
        .map(|s| s.trim().parse::<SimScheme>().map_err(|e| anyhow!(e)))
        .collect()
}

fn demo(args: &DemoArgs, out: &mut impl Write) -> Result<bool> {
    if !(1..=args.m).contains(&args.t) || args.m > args.n {
        bail!("invalid sizes: need 1 <= t <= m <= n, got t={} m={} n={}", args.t, args.m, args.n);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed.seed);
    let ctx = OpCounter::disabled();
    if args.scheme == DemoScheme::Harn {
        let group = HarnGroup::load(&args.group)?;
        let (params, tokens) = harn_init(args.t, args.n, &group, &mut rng)?;
        writeln!(out, "scheme: harn")?;
        writeln!(out, "group: {} (q = {})", args.group, group.q().value())?;
        writeln!(out, "sizes: t={} n={} m={}", args.t, args.n, args.m)?;
        let active = &tokens[..args.m];
        let xs: Vec<_> = active.iter().map(|t| t.x.clone()).collect();
        let mut released = Vec::new();
        for token in active {
            let e = harn_release(token, &xs, &params, &ctx)?;
            writeln!(out, "released {}: e = {}", token.member_id, e.residue())?;
            released.push(Released {
                member_id: token.member_id.clone(),
                e,
            });
        }
        let ok = harn_verify(&released, &params, &ctx)?;
        writeln!(out, "product of e_i equals g^s: {ok}")?;
        writeln!(out, "{}", if ok { "Authentication is complete" } else { "Authentication failed" })?;
        return Ok(ok);
    }

    let curve = CurveParams::load(&args.curve)?;
    let (config, shares) = gm_init(args.t, args.n, &curve, &mut rng)?;
    let centralized = args.scheme == DemoScheme::Proposed;
    writeln!(
        out,
        "scheme: proposed ({} confirmation)",
        if centralized { "centralized" } else { "decentralized" }
    )?;
    writeln!(out, "curve: {}", args.curve)?;
    writeln!(out, "sizes: t={} n={} m={} epoch={}", args.t, args.n, args.m, config.epoch())?;
    writeln!(out, "commitment H(s): {}", config.commitment().to_hex())?;
    let active = &shares[..args.m];
    let mut publics = Vec::new();
    for share in active {
        let ps = make_public_share(share, &config, &ctx)?;
        let (x, y) = (ps.point.x().expect("finite"), ps.point.y().expect("finite"));
        writeln!(out, "public share {}: ({}, {})", ps.member_id, x.residue(), y.residue())?;
        publics.push(ps);
    }
    let confirmed = if centralized {
        let verdicts = gm_verify(&config, &shares, &publics, &ctx)?;
        for (id, ok) in &verdicts.verdicts {
            writeln!(out, "verdict {id}: {}", if *ok { "valid" } else { "invalid" })?;
        }
        verdicts.accepted()
    } else {
        let ok = decentralized_verify(&config, &publics, &ctx)?;
        writeln!(out, "sum of weighted public shares equals Q: {ok}")?;
        ok
    };
    if !confirmed {
        writeln!(out, "Authentication failed")?;
        return Ok(false);
    }
    writeln!(out, "Authentication is complete")?;
    let keys = run_key_agreement(&config, active, &mut rng)?;
    let mut all_ok = true;
    for (id, key) in &keys {
        let ok = verify_commitment(key, config.commitment());
        all_ok &= ok;
        writeln!(out, "{id}: H(s') = H(s): {ok}")?;
    }
    let first = keys.values().next();
    all_ok &= keys.values().all(|k| Some(k) == first);
    writeln!(out, "{}", if all_ok { "Group Key is recovered" } else { "Group Key recovery failed" })?;
    Ok(all_ok)
}

fn cost_command(args: &CostArgs, out: &mut impl Write) -> Result<()> {
    let ms = parse_range(&args.m_range)?;
    let slopes = match args.harn_slope {
        SlopeArg::Text => vec![HarnSlope::Text],
        SlopeArg::Table => vec![HarnSlope::Table],
        SlopeArg::Both => vec![HarnSlope::Text, HarnSlope::Table],
    };
    let model = EnergyModel::new(
        args.joules_per_tmulq,
        cost::DEFAULT_TX_JOULES_PER_BYTE,
        cost::DEFAULT_RX_JOULES_PER_BYTE,
    )?;
    let rows = cost::cost_rows(&ms, &slopes, &model)?;
    cost::write_csv(out, &rows)?;
    Ok(())
}

fn write_events(path: &PathBuf, reports: &[SimReport]) -> Result<()> {
    let runs: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "scheme": r.scheme,
                "m": r.m,
                "seed": r.seed,
                "events": r.events,
            })
        })
        .collect();
    let text = serde_json::to_string_pretty(&runs)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate(args: &SimulateArgs, out: &mut impl Write) -> Result<()> {
    let scenarios = if let Some(path) = &args.scenario {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        vec![Scenario::from_json(&text)?]
    } else if let Some(name) = &args.preset {
        sim::preset(name)
            .ok_or_else(|| anyhow!("unknown preset {name:?}; valid presets: {}", sim::PRESETS.join(", ")))?
    } else {
        let scheme: SimScheme = args.scheme.parse().map_err(|e: String| anyhow!(e))?;
        let mut sc = Scenario::new(scheme, args.m, args.t);
        args.flags.apply(&mut sc);
        vec![sc]
    };
    for sc in &scenarios {
        sc.validate()?;
    }
    let reports = scenarios.iter().map(sim::run).collect::<std::result::Result<Vec<_>, _>>()?;
    for r in &reports {
        eprintln!(
            "{} m={}: {:?} after {} round(s), {:.3} s",
            r.scheme.name(),
            r.m,
            r.outcome,
            r.rounds,
            r.auth_time_s
        );
    }
    if let Some(path) = &args.events {
        write_events(path, &reports)?;
    }
    let rows: Vec<CsvRow> = reports.iter().map(SimReport::csv_row).collect();
    cost::write_csv(out, &rows)?;
    Ok(())
}

fn sweep_command(args: &SweepArgs, out: &mut impl Write) -> Result<()> {
    let schemes = parse_schemes(&args.schemes)?;
    let ms: Vec<usize> = parse_range(&args.m_range)?.into_iter().map(|m| m as usize).collect();
    let mut base = Scenario::new(schemes.first().copied().unwrap_or(SimScheme::ProposedCentralized), 1, 1);
    args.flags.apply(&mut base);
    base.t = args.t.unwrap_or(usize::MAX);
    let mut plan = sim::sweep_plan(&schemes, &ms, &base);
    if args.t.is_none() {
        for sc in &mut plan {
            sc.t = (sc.m / 2).max(1);
        }
    }
    for sc in &plan {
        sc.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let rows = pool.install(|| {
        plan.par_iter()
            .map(|sc| sim::run(sc).map(|r| r.csv_row()))
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;
    cost::write_csv(out, &rows)?;
    Ok(())
}

fn attack(args: &AttackArgs, out: &mut impl Write) -> Result<bool> {
    if !attacks::SCENARIOS.contains(&args.name.as_str()) {
        bail!(attacks::AttackError::UnknownScenario(args.name.clone()));
    }
    let mut opts = AttackOptions::new(args.seed.seed);
    opts.curve = CurveParams::load(&args.curve)?;
    opts.t = args.t;
    opts.n = args.n;
    opts.rotate = args.rotate;
    opts.centralized = args.mode == ModeArg::Centralized;
    opts.attackers = args.attackers;
    opts.queue_capacity = args.queue_capacity;
    let report = attacks::run_scenario(&args.name, &opts)?;
    writeln!(out, "{}", report.to_json())?;
    Ok(report.all_matched)
}

fn gen_params(kind: &GenKind, out: &mut impl Write) -> Result<()> {
    match kind {
        GenKind::Curve { name } => writeln!(out, "{}", CurveParams::builtin(name)?.to_json())?,
        GenKind::Harn { p_bits, q_bits, seed } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed.seed);
            writeln!(out, "{}", HarnGroup::generate(&mut rng, *p_bits, *q_bits)?.to_json())?;
        }
        GenKind::Group {
            t,
            n,
            curve,
            shares,
            seed,
        } => {
            let params = CurveParams::load(curve)?;
            let mut rng = ChaCha20Rng::seed_from_u64(seed.seed);
            let (config, issued) = gm_init(*t, *n, &params, &mut rng)?;
            if let Some(path) = shares {
                let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                write_shares(io::BufWriter::new(file), &issued)?;
            }
            writeln!(out, "{}", config.to_json())?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    // buffer so a failing command leaves no partial output
    let mut buf = Vec::new();
    let ok = match &cli.command {
        Command::Demo(args) => demo(args, &mut buf)?,
        Command::Cost(args) => cost_command(args, &mut buf).map(|_| true)?,
        Command::Simulate(args) => simulate(args, &mut buf).map(|_| true)?,
        Command::Sweep(args) => sweep_command(args, &mut buf).map(|_| true)?,
        Command::Attack(args) => attack(args, &mut buf)?,
        Command::GenParams { kind } => gen_params(kind, &mut buf).map(|_| true)?,
    };
    io::stdout().write_all(&buf)?;
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
