//! Command-line definition and the commands themselves.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use canonical_region::functionals::verify_linear_decomposition;
use canonical_region::optimize::{trace_inner_bound, verify_alphabet_bound, SearchConfig, DEFAULT_ORACLE_BUDGET};
use canonical_region::region::{
    enumerate_extreme_points, membership, nondegeneracy_preflight, random_member, rate_lhs, verify_chain_identities,
    ACTIVE_TOL, NONDEGENERACY_THRESHOLD,
};
use canonical_region::rng::{derive_seed, seeded};
use canonical_region::{attach_channels, Channel, Direction, Permutation, ProblemSpec, VarSet};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{exit, CliError, Result};
use crate::problem::{load_problem, parse_channels, parse_directions, ChannelFile, LoadedProblem, ProblemFile};
use crate::report::*;

#[derive(Debug, Parser)]
#[command(
    name = "canonical-region",
    version,
    about = "Inner bounds for multiterminal source coding on finite alphabets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Seed for every randomised step
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Tolerance (default depends on the command)
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Lattice resolution of the brute-force oracle
    #[arg(long, global = true, default_value_t = 12)]
    pub grid: usize,
    /// Maximum coordinate-descent sweeps
    #[arg(long, global = true, default_value_t = 50)]
    pub sweeps: usize,
    /// Random candidate points per single-channel step
    #[arg(long, global = true, default_value_t = 64)]
    pub candidates: usize,
    /// Coordinate-descent initialisations per direction
    #[arg(long, global = true, default_value_t = 8)]
    pub restarts: usize,
    /// Random draws per instance (default depends on the suite)
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Random channel sets drawn by the verification suites
    #[arg(long, global = true, default_value_t = 4)]
    pub instances: usize,
    /// Largest number of channel tuples the oracle may evaluate
    #[arg(long, global = true, default_value_t = DEFAULT_ORACLE_BUDGET)]
    pub budget: u128,
    /// Write JSON-lines records here
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the corner points of the rate region for fixed channels
    ExtremePoints {
        problem: String,
        /// `random`, `identity`, `constant` or a channel file
        #[arg(long, default_value = "random")]
        channels: String,
    },
    /// Run a verification suite
    Verify {
        suite: Suite,
        problem: String,
        /// Direction file (alphabet-bound only; random directions otherwise)
        #[arg(long)]
        directions: Option<PathBuf>,
    },
    /// Minimise weighted objectives along a set of directions
    Trace {
        problem: String,
        /// Direction file, one weight row per line
        #[arg(long, conflicts_with = "sweep")]
        directions: Option<PathBuf>,
        /// Quarter-circle sweep between two coordinates, e.g. `R1,D1`
        #[arg(long)]
        sweep: Option<String>,
        /// Number of sweep points
        #[arg(long, default_value_t = 17)]
        points: usize,
        /// Coding order, 1-based, e.g. `2,1,3`
        #[arg(long)]
        perm: Option<String>,
        /// Also write a CSV table here
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Noncrossing,
    Decomposition,
    AlphabetBound,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Noncrossing => "noncrossing",
            Suite::Decomposition => "decomposition",
            Suite::AlphabetBound => "alphabet-bound",
        }
    }

    fn default_tol(self) -> f64 {
        match self {
            Suite::AlphabetBound => 1e-2,
            _ => 1e-9,
        }
    }

    fn default_trials(self) -> usize {
        match self {
            Suite::Identities => 200,
            Suite::Noncrossing => 50,
            Suite::Decomposition => 200,
            Suite::AlphabetBound => 10,
        }
    }
}

/// What a finished command reports back.
#[derive(Debug)]
pub struct Outcome {
    pub passed: bool,
    pub report: Report,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::INPUT_ERROR
            } else {
                exit::SUCCESS
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let started = Instant::now();
    match run(&cli, stderr) {
        Ok(outcome) => {
            let _ = stdout.write_all(outcome.report.text().as_bytes());
            let _ = writeln!(stdout, "elapsed {:.2} s", started.elapsed().as_secs_f64());
            if outcome.passed {
                exit::SUCCESS
            } else {
                exit::VERIFICATION_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.kind());
            e.exit_code()
        }
    }
}

/// Runs a parsed command; warnings go to `stderr`, records to `--out`.
pub fn run(cli: &Cli, stderr: &mut dyn Write) -> Result<Outcome> {
    let (problem_path, command) = match &cli.command {
        Command::ExtremePoints { problem, .. } => (problem, "extreme-points".to_string()),
        Command::Verify { suite, problem, .. } => (problem, format!("verify {}", suite.name())),
        Command::Trace { problem, .. } => (problem, "trace".to_string()),
    };
    let problem = load_problem(problem_path)?;
    for w in &problem.warnings {
        let _ = writeln!(stderr, "warning: {}: {w}", problem.origin);
    }
    let opts = &cli.opts;
    let (tol, trials) = match &cli.command {
        Command::Verify { suite, .. } => (
            opts.tol.unwrap_or(suite.default_tol()),
            opts.trials.unwrap_or(suite.default_trials()),
        ),
        _ => (opts.tol.unwrap_or(ACTIVE_TOL), opts.trials.unwrap_or(0)),
    };
    if !tol.is_finite() || tol < 0.0 {
        return Err(CliError::Usage(format!(
            "--tol must be a nonnegative number, got {tol}"
        )));
    }
    let cfg = SearchConfig {
        candidates: opts.candidates,
        sweeps: opts.sweeps,
        tol: SearchConfig::default().tol,
        restarts: opts.restarts,
    };
    let ctx = Ctx {
        problem: &problem,
        seed: opts.seed,
        tol,
        trials,
        instances: opts.instances,
        grid: opts.grid,
        budget: opts.budget,
        cfg,
    };

    let mut report = Report::new();
    report.record(&Header {
        record: "header",
        command: command.clone(),
        problem: problem.name.clone(),
        origin: problem.origin.clone(),
        seed: opts.seed,
        config: ConfigEcho {
            tol,
            grid: opts.grid,
            sweeps: opts.sweeps,
            candidates: opts.candidates,
            restarts: opts.restarts,
            trials,
            instances: opts.instances,
            budget: opts.budget,
        },
        warnings: problem.warnings.clone(),
    });
    report.line(format!(
        "{command} on {} ({}), seed {}, tol {:e}",
        problem.name, problem.origin, opts.seed, tol
    ));

    let passed = match &cli.command {
        Command::ExtremePoints { channels, .. } => extreme_points(&ctx, channels, &mut report)?,
        Command::Verify { suite, directions, .. } => match suite {
            Suite::Identities => verify_identities(&ctx, &mut report)?,
            Suite::Noncrossing => verify_noncrossing_suite(&ctx, &mut report)?,
            Suite::Decomposition => verify_decomposition(&ctx, &mut report)?,
            Suite::AlphabetBound => verify_alphabet(&ctx, directions.as_deref(), &mut report)?,
        },
        Command::Trace {
            directions,
            sweep,
            points,
            perm,
            csv,
            ..
        } => trace(
            &ctx,
            directions.as_deref(),
            sweep.as_deref(),
            *points,
            perm.as_deref(),
            csv.as_deref(),
            &mut report,
        )?,
    };
    if let Some(out) = &opts.out {
        report.write_records(out)?;
    }
    Ok(Outcome { passed, report })
}

struct Ctx<'a> {
    problem: &'a LoadedProblem,
    seed: u64,
    tol: f64,
    trials: usize,
    instances: usize,
    grid: usize,
    budget: u128,
    cfg: SearchConfig,
}

impl Ctx<'_> {
    fn spec(&self) -> &ProblemSpec {
        &self.problem.spec
    }

    fn counterexample(&self, suite: &str, detail: String, channels: &[Channel]) -> Counterexample {
        Counterexample {
            record: "counterexample",
            suite: suite.into(),
            detail,
            problem: ProblemFile::from_spec(self.spec(), Some(self.problem.name.clone())),
            channels: ChannelFile::from_channels(self.spec(), channels),
        }
    }
}

// Independent random streams per purpose.
const STREAM_CHANNELS: u64 = 1;
const STREAM_MEMBERS: u64 = 2;
const STREAM_DIRECTIONS: u64 = 3;
const STREAM_IDENTITIES: u64 = 4;
const STREAM_SEARCH: u64 = 5;

fn random_channels(spec: &ProblemSpec, seed: u64, sizes: Option<&[usize]>) -> Vec<Channel> {
    let mut rng = seeded(seed);
    spec.channel_sources()
        .enumerate()
        .map(|(i, k)| {
            let nz = sizes.map_or(spec.x_alphabet(k).size(), |s| s[i]);
            Channel::random(spec, k, nz, &mut rng)
        })
        .collect()
}

/// Random `|Z_k| = |X_k|` channels that pass the nondegeneracy preflight.
fn nondegenerate_channels(spec: &ProblemSpec, seed: u64) -> Result<Vec<Channel>> {
    for attempt in 0..32 {
        let channels = random_channels(spec, derive_seed(seed, attempt), None);
        let aug = attach_channels(spec, &channels)?;
        if nondegeneracy_preflight(&aug, NONDEGENERACY_THRESHOLD)?.passed() {
            return Ok(channels);
        }
    }
    Err(CliError::Shape {
        origin: "input".into(),
        message: "no nondegenerate random channels found; the source dependence is degenerate".into(),
    })
}

fn one_based(set: VarSet) -> Vec<usize> {
    set.iter().map(|v| v as usize + 1).collect()
}

fn extreme_points(ctx: &Ctx, channels: &str, report: &mut Report) -> Result<bool> {
    let spec = ctx.spec();
    let chans: Vec<Channel> = match channels {
        "random" => random_channels(spec, derive_seed(ctx.seed, STREAM_CHANNELS), None),
        "identity" => spec.channel_sources().map(|k| Channel::identity(spec, k)).collect(),
        "constant" => spec.channel_sources().map(|k| Channel::constant(spec, k)).collect(),
        path => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: PathBuf::from(path),
                source,
            })?;
            parse_channels(&text, path, spec)?
        }
    };
    let aug = attach_channels(spec, &chans)?;
    let pre = nondegeneracy_preflight(&aug, NONDEGENERACY_THRESHOLD)?;
    let ext = enumerate_extreme_points(&aug)?;
    let joint = rate_lhs(&aug, aug.all_sources())?;

    let mut rows = Vec::new();
    let mut outside = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, (perm, rates)) in ext.corners.iter().enumerate() {
        let rep = membership(&aug, rates, ctx.tol)?;
        let active = rep.active_subsets();
        let chain = canonical_region::region::is_chain(&active);
        let sum = rates.sum();
        lo = lo.min(sum);
        hi = hi.max(sum);
        outside += usize::from(!rep.is_member());
        let order: Vec<usize> = perm.as_slice().iter().map(|k| k + 1).collect();
        let active_sets: Vec<Vec<usize>> = active.iter().map(|s| one_based(*s)).collect();
        rows.push(vec![
            (i + 1).to_string(),
            format!("{order:?}"),
            fmt_list(rates.as_slice()),
            fmt(sum),
            active_sets.len().to_string(),
            if chain { "yes" } else { "no" }.into(),
        ]);
        report.record(&CornerRecord {
            record: "corner",
            index: i + 1,
            order,
            rates: rates.as_slice().to_vec(),
            sum_rate: sum,
            member: rep.is_member(),
            worst_slack: rep.worst_slack(),
            active: active_sets,
            chain,
        });
    }
    let spread = hi - lo;
    let sum_ok = spread <= ctx.tol.max(ACTIVE_TOL) && (hi - joint).abs() <= ctx.tol.max(ACTIVE_TOL);
    let passed = outside == 0 && sum_ok;
    report.table(&["#", "order", "rates", "sum", "active", "chain"], &rows);
    report.line(format!(
        "{} corners, {} distinct; sum rate {} (I(X;Z|S) = {}); {}",
        ext.corners.len(),
        ext.distinct,
        fmt(hi),
        fmt(joint),
        if pre.passed() {
            "nondegenerate".to_string()
        } else {
            format!("DEGENERATE ({} vanishing dependences)", pre.violations.len())
        }
    ));
    report.record(&Summary {
        record: "summary",
        command: "extreme-points".into(),
        passed,
        items: ext.corners.len(),
        failures: outside + usize::from(!sum_ok),
        details: ExtremeSummary {
            distinct: ext.distinct,
            min_gap: ext.min_gap.is_finite().then_some(ext.min_gap),
            sum_rate_spread: spread,
            joint_information: joint,
            degenerate: !pre.passed(),
        },
    });
    Ok(passed)
}

fn verify_identities(ctx: &Ctx, report: &mut Report) -> Result<bool> {
    let spec = ctx.spec();
    let mut rows = Vec::new();
    let (mut checks, mut failures, mut worst) = (0, 0, 0.0f64);
    for inst in 0..ctx.instances {
        let chans = random_channels(spec, derive_seed(ctx.seed, STREAM_CHANNELS * 1000 + inst as u64), None);
        let aug = attach_channels(spec, &chans)?;
        let rep = verify_chain_identities(
            &aug,
            ctx.trials,
            ctx.tol,
            derive_seed(ctx.seed, STREAM_IDENTITIES * 1000 + inst as u64),
        )?;
        checks += rep.checks;
        failures += rep.failures.len();
        for (id, w) in &rep.worst {
            worst = worst.max(*w);
            let n_failed = rep.failures.iter().filter(|f| f.identity == *id).count();
            rows.push(vec![
                (inst + 1).to_string(),
                id.name().into(),
                format!("{w:.3e}"),
                if n_failed == 0 { "ok" } else { "FAIL" }.into(),
            ]);
            report.record(&IdentityRecord {
                record: "identity",
                instance: inst + 1,
                identity: id.name(),
                checks: rep.checks,
                worst: *w,
                passed: n_failed == 0,
            });
        }
        for f in &rep.failures {
            let detail = format!(
                "{} at {}: lhs {:e}, rhs {:e}",
                f.identity.name(),
                f.context,
                f.lhs,
                f.rhs
            );
            report.counterexample(ctx.counterexample("identities", detail, &chans));
        }
    }
    report.table(&["inst", "identity", "worst", ""], &rows);
    finish(report, "verify identities", checks, failures, worst)
}

fn verify_noncrossing_suite(ctx: &Ctx, report: &mut Report) -> Result<bool> {
    let spec = ctx.spec();
    let mut rows = Vec::new();
    let (mut items, mut failures) = (0, 0);
    let mut min_slack = f64::INFINITY;
    for inst in 0..ctx.instances {
        let chans = nondegenerate_channels(spec, derive_seed(ctx.seed, STREAM_CHANNELS * 1000 + inst as u64))?;
        let aug = attach_channels(spec, &chans)?;
        let ext = enumerate_extreme_points(&aug)?;
        let mut rng = seeded(derive_seed(ctx.seed, STREAM_MEMBERS * 1000 + inst as u64));
        let mut points: Vec<_> = ext.corners.iter().map(|(_, r)| r.clone()).collect();
        for _ in 0..ctx.trials {
            points.push(random_member(&ext, &mut rng)?);
        }
        let mut chains = 0;
        let mut inst_min = f64::INFINITY;
        for (i, r) in points.iter().enumerate() {
            let rep = membership(&aug, r, ctx.tol)?;
            inst_min = inst_min.min(rep.worst_slack());
            let active = rep.active_subsets();
            let ok = rep.is_member() && canonical_region::region::is_chain(&active);
            if ok {
                chains += 1;
            } else {
                let sets: Vec<Vec<usize>> = active.iter().map(|s| one_based(*s)).collect();
                let detail = format!(
                    "point {} rates {:?}: member {}, active {:?}",
                    i + 1,
                    r.as_slice(),
                    rep.is_member(),
                    sets
                );
                report.counterexample(ctx.counterexample("noncrossing", detail, &chans));
            }
        }
        min_slack = min_slack.min(inst_min);
        items += points.len();
        failures += points.len() - chains;
        rows.push(vec![
            (inst + 1).to_string(),
            ext.corners.len().to_string(),
            ctx.trials.to_string(),
            format!("{chains}/{}", points.len()),
            format!("{inst_min:.3e}"),
        ]);
        report.record(&NoncrossingRecord {
            record: "noncrossing",
            instance: inst + 1,
            corners: ext.corners.len(),
            members: ctx.trials,
            chains,
            min_slack: inst_min,
            passed: chains == points.len(),
        });
    }
    report.table(&["inst", "corners", "members", "chains", "min slack"], &rows);
    finish(report, "verify noncrossing", items, failures, min_slack)
}

fn verify_decomposition(ctx: &Ctx, report: &mut Report) -> Result<bool> {
    let spec = ctx.spec();
    let mut rows = Vec::new();
    let (mut failures, mut worst) = (0, 0.0f64);
    for draw in 0..ctx.trials {
        let dseed = derive_seed(ctx.seed, STREAM_DIRECTIONS * 1_000_000 + draw as u64);
        let mut rng = seeded(dseed);
        // output alphabets from 1 to |X_k| + 1
        let sizes: Vec<usize> = spec
            .channel_sources()
            .map(|k| 1 + (derive_seed(dseed, k as u64) % (spec.x_alphabet(k).size() as u64 + 1)) as usize)
            .collect();
        let chans = random_channels(spec, derive_seed(dseed, u64::MAX), Some(&sizes));
        let a = Direction::random(spec, &mut rng);
        let rep = verify_linear_decomposition(spec, &chans, &a, ctx.tol)?;
        let res = rep.max_residual();
        worst = worst.max(res);
        let objective = rep.entries.first().map_or(0.0, |e| e.direct);
        if !rep.passed() {
            failures += 1;
            let detail = format!("direction {:?}: {}", a.weights(), rep.describe_failures().join("; "));
            report.counterexample(ctx.counterexample("decomposition", detail, &chans));
        }
        if draw < 10 {
            rows.push(vec![
                (draw + 1).to_string(),
                format!("{sizes:?}"),
                fmt(objective),
                format!("{res:.3e}"),
            ]);
        }
        report.record(&DecompositionRecord {
            record: "decomposition",
            draw: draw + 1,
            z_sizes: sizes,
            direction: a.weights().to_vec(),
            objective,
            max_residual: res,
            passed: rep.passed(),
        });
    }
    report.table(&["draw", "|Z|", "objective", "residual"], &rows);
    if ctx.trials > 10 {
        report.line(format!("({} more draws in the records)", ctx.trials - 10));
    }
    finish(report, "verify decomposition", ctx.trials, failures, worst)
}

fn verify_alphabet(ctx: &Ctx, directions: Option<&Path>, report: &mut Report) -> Result<bool> {
    let spec = ctx.spec();
    let dirs = match directions {
        Some(path) => read_directions(path, spec)?,
        None => {
            let mut rng = seeded(derive_seed(ctx.seed, STREAM_DIRECTIONS));
            (0..ctx.trials).map(|_| Direction::random(spec, &mut rng)).collect()
        }
    };
    if dirs.is_empty() {
        return Err(CliError::Usage("no directions to check".into()));
    }
    let reports = verify_alphabet_bound(
        spec,
        &dirs,
        ctx.grid,
        ctx.tol,
        &ctx.cfg,
        derive_seed(ctx.seed, STREAM_SEARCH),
        ctx.budget,
    )?;
    let mut rows = Vec::new();
    let (mut failures, mut worst) = (0, f64::NEG_INFINITY);
    for (i, r) in reports.iter().enumerate() {
        let margin = r.capped - r.enlarged;
        worst = worst.max(margin);
        if !r.passed() {
            failures += 1;
            let detail = format!(
                "direction {:?}: capped {:e} exceeds enlarged {:e} by more than {:e}",
                r.direction.weights(),
                r.capped,
                r.enlarged,
                r.tol
            );
            report.counterexample(ctx.counterexample("alphabet-bound", detail, &r.capped_channels));
        }
        rows.push(vec![
            (i + 1).to_string(),
            fmt_list(r.direction.weights()),
            fmt(r.enlarged),
            fmt(r.capped),
            r.capped_oracle.map_or("-".into(), fmt),
            fmt(r.reduced),
            if r.passed() { "ok" } else { "FAIL" }.into(),
        ]);
        report.record(&AlphabetBoundRecord {
            record: "alphabet_bound",
            index: i + 1,
            direction: r.direction.weights().to_vec(),
            enlarged: r.enlarged,
            capped: r.capped,
            capped_oracle: r.capped_oracle,
            reduced: r.reduced,
            grid: r.grid,
            capped_grid: r.capped_grid,
            passed: r.passed(),
        });
    }
    report.table(
        &["#", "direction", "enlarged", "capped", "capped lattice", "reduced", ""],
        &rows,
    );
    finish(report, "verify alphabet-bound", reports.len(), failures, worst)
}

fn finish(report: &mut Report, command: &str, items: usize, failures: usize, worst: f64) -> Result<bool> {
    let passed = failures == 0;
    report.line(format!(
        "{}: {items} checked, {failures} failed, worst {worst:.3e}{}",
        if passed { "PASS" } else { "FAIL" },
        match report.omitted_counterexamples() {
            0 => String::new(),
            n => format!(" ({n} counterexamples not dumped)"),
        }
    ));
    report.record(&Summary {
        record: "summary",
        command: command.into(),
        passed,
        items,
        failures,
        details: WorstSummary { worst },
    });
    Ok(passed)
}

fn read_directions(path: &Path, spec: &ProblemSpec) -> Result<Vec<Direction>> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_directions(&text, &path.display().to_string(), spec)
}

/// Directions on the quarter circle between two named coordinates.
pub fn sweep_directions(spec: &ProblemSpec, sweep: &str, points: usize) -> Result<Vec<Direction>> {
    let labels: Vec<String> = spec
        .channel_sources()
        .map(|i| format!("R{}", i + 1))
        .chain((1..=spec.distortion_count()).map(|l| format!("D{l}")))
        .collect();
    let names: Vec<&str> = sweep.split(',').map(str::trim).collect();
    let [first, second] = names.as_slice() else {
        return Err(CliError::Usage(format!(
            "--sweep takes two coordinates such as R1,D1, got `{sweep}`"
        )));
    };
    let find = |n: &str| {
        labels.iter().position(|l| l.eq_ignore_ascii_case(n)).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown coordinate `{n}`; this problem has {}",
                labels.join(", ")
            ))
        })
    };
    let (i, j) = (find(first)?, find(second)?);
    if i == j || points == 0 {
        return Err(CliError::Usage(
            "a sweep needs two different coordinates and at least one point".into(),
        ));
    }
    (0..points)
        .map(|p| {
            let (c, s) = if points == 1 {
                (1.0, 1.0)
            } else if p == 0 {
                (1.0, 0.0)
            } else if p == points - 1 {
                (0.0, 1.0)
            } else {
                let theta = std::f64::consts::FRAC_PI_2 * p as f64 / (points - 1) as f64;
                (theta.cos(), theta.sin())
            };
            let mut w = vec![0.0; labels.len()];
            w[i] = c;
            w[j] = s;
            Ok(Direction::normalized(spec, w)?)
        })
        .collect()
}

fn parse_perm(text: &str, m: usize) -> Result<Permutation> {
    let order = text
        .split(',')
        .map(|s| s.trim().parse::<usize>().ok().filter(|&v| v >= 1).map(|v| v - 1))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Usage(format!("--perm expects 1-based source indices, got `{text}`")))?;
    if order.len() != m {
        return Err(CliError::Usage(format!(
            "--perm lists {} sources, the problem has {m}",
            order.len()
        )));
    }
    Permutation::new(order).map_err(|e| CliError::Usage(format!("--perm: {e}")))
}

fn trace(
    ctx: &Ctx,
    directions: Option<&Path>,
    sweep: Option<&str>,
    points: usize,
    perm: Option<&str>,
    csv: Option<&Path>,
    report: &mut Report,
) -> Result<bool> {
    let spec = ctx.spec();
    let dirs = match (directions, sweep) {
        (Some(path), _) => read_directions(path, spec)?,
        (None, Some(s)) => sweep_directions(spec, s, points)?,
        (None, None) => return Err(CliError::Usage("trace needs --directions or --sweep".into())),
    };
    let perm = match perm {
        Some(p) => parse_perm(p, spec.sources())?,
        None => Permutation::identity(spec.sources()),
    };
    let results = trace_inner_bound(spec, &dirs, &perm, &ctx.cfg, derive_seed(ctx.seed, STREAM_SEARCH))?;
    let labels = dirs[0].labels();
    let m = spec.sources();
    let mut csv_text = String::new();
    {
        let mut cols: Vec<String> = labels.iter().map(|l| format!("a_{l}")).collect();
        cols.extend((1..=m).map(|i| format!("R{i}")));
        cols.extend((1..=spec.distortion_count()).map(|l| format!("D{l}")));
        cols.push("objective".into());
        csv_text.push_str(&cols.join(","));
        csv_text.push('\n');
    }
    let mut rows = Vec::new();
    for (i, (a, res)) in results.iter().enumerate() {
        let z_sizes: Vec<usize> = res.channels.iter().map(Channel::output_size).collect();
        let rates = res.rd_point.rates.as_slice().to_vec();
        let dist = res.rd_point.distortions.clone();
        let vals: Vec<String> = a
            .weights()
            .iter()
            .chain(&rates)
            .chain(&dist)
            .chain(std::iter::once(&res.objective))
            .map(|v| format!("{v}"))
            .collect();
        csv_text.push_str(&vals.join(","));
        csv_text.push('\n');
        rows.push(vec![
            (i + 1).to_string(),
            fmt_list(a.weights()),
            fmt_list(&rates),
            fmt_list(&dist),
            fmt(res.objective),
        ]);
        report.record(&TraceRecord {
            record: "trace",
            index: i + 1,
            direction: a.weights().to_vec(),
            rates,
            distortions: dist,
            objective: res.objective,
            z_sizes,
            sweeps: res.trace.len() - 1,
        });
    }
    report.line(format!("coordinates {}", labels.join(" ")));
    report.table(&["#", "direction", "rates", "distortions", "objective"], &rows);
    report.record(&Summary {
        record: "summary",
        command: "trace".into(),
        passed: true,
        items: results.len(),
        failures: 0,
        details: TraceSummary {
            coordinates: labels,
            order: perm.as_slice().iter().map(|k| k + 1).collect(),
        },
    });
    if let Some(path) = csv {
        fs::write(path, csv_text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(true)
}
