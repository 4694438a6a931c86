use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use socialnav_core::clustering::{group_persons, GroupKind};
use socialnav_core::cruise::run_cruise;
use socialnav_core::eval::{aggregate_table, compare, run_batch, run_table, tour_setup};
use socialnav_core::field::export_field_grid;
use socialnav_core::geometry::Disc;
use socialnav_core::observation::{solve_oop, OopConstraints};
use socialnav_core::planner::{plan, plan_rng, Algorithm, PlannerConfig};
use socialnav_core::{load_scenario, ParamSet, Scenario};

/// Output directory used when `--out` is absent.
const OUT_ENV: &str = "SOCIALNAV_OUT_DIR";
const DEFAULT_OUT: &str = "socialnav-out";

#[derive(Parser)]
#[command(
    name = "socialnav",
    version,
    about = "Group-aware observation and cruise planning among pedestrians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run seed (overrides the scenario's `seed` parameter).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [env: SOCIALNAV_OUT_DIR, default: socialnav-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Confidence matrix and groups at t = 0.
    Cluster {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Field samples over the map as CSV.
    Field {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        resolution: f64,
        /// Scene time to sample at.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Observation position, damping and gaze disc of every static group.
    Oop {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// One planning query from the robot start to a group's observation position.
    Plan {
        scenario: PathBuf,
        #[arg(long, default_value = "vmd")]
        algo: Algorithm,
        /// Target group index; defaults to the first group of the tour.
        #[arg(long)]
        group: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Full auto-cruise simulation, logged as JSON lines.
    Cruise {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Cruises over many scenarios and seeds; per-run and aggregate tables.
    Batch {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Number of consecutive seeds, starting at `--seed`.
        #[arg(long, default_value_t = 10)]
        runs: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Plans the t = 0 tour with several planners on one collision world.
    Compare {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "rrt,rrtstar,vmd")]
        algos: Vec<Algorithm>,
        #[arg(long, default_value_t = 10)]
        runs: u64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Scenario(String),
    Planner(String),
    Observation(String),
    Io(String),
    Run(String),
}

impl Failure {
    fn kind(&self) -> (&'static str, u8) {
        match self {
            Failure::Usage(_) => ("usage", 2),
            Failure::Scenario(_) => ("scenario", 3),
            Failure::Planner(_) => ("planner", 4),
            Failure::Observation(_) => ("observation", 5),
            Failure::Io(_) => ("io", 6),
            Failure::Run(_) => ("run", 7),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m)
            | Failure::Scenario(m)
            | Failure::Planner(m)
            | Failure::Observation(m)
            | Failure::Io(m)
            | Failure::Run(m) => m,
        }
    }

    /// `error kind=<kind> code=<n> message=<json string>` on one line.
    fn line(&self) -> String {
        let (kind, code) = self.kind();
        let message = serde_json::to_string(self.message()).expect("strings serialize");
        format!("error kind={kind} code={code} message={message}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

struct Context {
    out: PathBuf,
    seed: Option<u64>,
    overrides: Vec<(String, String)>,
}

impl Context {
    fn new(common: &Common) -> Result<Self, Failure> {
        let out = common
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let overrides = common
            .params
            .iter()
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| Failure::Usage(format!("--param expects KEY=VALUE, got `{kv}`")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            out,
            seed: common.seed,
            overrides,
        })
    }

    fn params_for(&self, base: &ParamSet) -> Result<ParamSet, Failure> {
        let mut params = base.clone();
        for (k, v) in &self.overrides {
            params
                .set(k, v)
                .map_err(|e| Failure::Usage(format!("--param {k}={v}: {e}")))?;
        }
        if let Some(seed) = self.seed {
            params.seed = seed;
        }
        Ok(params)
    }

    fn load(&self, path: &Path) -> Result<(Scenario, ParamSet), Failure> {
        let scenario = load_scenario(path).map_err(|e| Failure::Scenario(e.to_string()))?;
        let params = self.params_for(&scenario.params)?;
        Ok((scenario, params))
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out).map_err(io_err(&self.out))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        Ok(path)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn cluster(ctx: &Context, path: &Path) -> Result<String, Failure> {
    let (scenario, params) = ctx.load(path)?;
    let persons = scenario.state_at(0.0);
    let (h, groups) = group_persons(&persons, &params, 0.0).map_err(|e| Failure::Scenario(e.to_string()))?;
    let mut text = String::from("confidence\n");
    let ids: Vec<String> = persons.iter().map(|p| p.id.to_string()).collect();
    writeln!(text, "ids {}", ids.join(" ")).unwrap();
    for row in h.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(text, "{}", cells.join(" ")).unwrap();
    }
    writeln!(text, "groups {}", groups.len()).unwrap();
    for (k, g) in groups.iter().enumerate() {
        let members: Vec<String> = g.member_ids(&persons).iter().map(u32::to_string).collect();
        writeln!(
            text,
            "group {k} kind={} members={}",
            kind_name(g.kind),
            members.join(",")
        )
        .unwrap();
    }
    ctx.write(&format!("{}.cluster.txt", stem(path)), text.as_bytes())?;
    Ok(text)
}

fn kind_name(kind: GroupKind) -> &'static str {
    match kind {
        GroupKind::Static => "static",
        GroupKind::Dynamic => "dynamic",
    }
}

fn field(ctx: &Context, path: &Path, resolution: f64, time: f64) -> Result<String, Failure> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Failure::Usage(format!(
            "--resolution must be positive, got {resolution}"
        )));
    }
    let (mut scenario, params) = ctx.load(path)?;
    scenario.params = params;
    let grid = export_field_grid(&scenario, time, resolution);
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).map_err(|e| Failure::Io(e.to_string()))?;
    let out = ctx.write(&format!("{}.field.csv", stem(path)), &csv)?;
    Ok(format!("field {}x{} cells -> {}\n", grid.nx, grid.ny, out.display()))
}

fn oop(ctx: &Context, path: &Path) -> Result<String, Failure> {
    let (scenario, params) = ctx.load(path)?;
    let persons = scenario.state_at(0.0);
    let (_, groups) = group_persons(&persons, &params, 0.0).map_err(|e| Failure::Scenario(e.to_string()))?;
    let constraints = OopConstraints {
        size: Some(scenario.size),
        obstacles: &scenario.obstacles,
        persons: &persons,
        clearance: params.person_clearance(),
    };
    let mut text = String::new();
    let mut unsolved = 0;
    for (k, g) in groups.iter().enumerate() {
        let members: Vec<String> = g.member_ids(&persons).iter().map(u32::to_string).collect();
        write!(text, "group {k} members={}", members.join(",")).unwrap();
        if g.kind == GroupKind::Dynamic {
            writeln!(text, " kind=dynamic").unwrap();
            continue;
        }
        match solve_oop(g, &persons, &params, &constraints) {
            Ok(o) => writeln!(
                text,
                " kind=static oop={:.6},{:.6} residual={:.3e} damping_amp={:.6} damping_arg={:.6} gaze_center={:.6},{:.6} gaze_radius={:.6}",
                o.oop.x, o.oop.y, o.residual, o.damping_amp, o.damping_arg, o.gaze_center.x, o.gaze_center.y, o.gaze_radius
            )
            .unwrap(),
            Err(e) => {
                unsolved += 1;
                writeln!(text, " kind=static unobservable={}", serde_json::to_string(&e.to_string()).unwrap()).unwrap();
            }
        }
    }
    ctx.write(&format!("{}.oop.txt", stem(path)), text.as_bytes())?;
    if unsolved > 0 {
        print!("{text}");
        return Err(Failure::Observation(format!(
            "{unsolved} static group(s) without an observation position"
        )));
    }
    Ok(text)
}

fn plan_one(ctx: &Context, path: &Path, algo: Algorithm, group: Option<u32>) -> Result<String, Failure> {
    let (scenario, params) = ctx.load(path)?;
    let setup = tour_setup(&scenario, &params).map_err(Failure::Observation)?;
    let target = match group {
        Some(k) => setup.targets.iter().find(|t| t.0 == k).ok_or_else(|| {
            Failure::Usage(format!(
                "--group {k} is not a static group with an observation position"
            ))
        })?,
        None => setup
            .targets
            .first()
            .ok_or_else(|| Failure::Scenario("scene has no static group".into()))?,
    };
    let config = PlannerConfig::from_params(&params, algo);
    let mut rng = plan_rng(params.seed, 0);
    let goal = Disc::new(target.1, params.goal_radius);
    let out = plan(setup.start, target.1, goal, &setup.world, &config, &mut rng)
        .map_err(|e| Failure::Planner(e.to_string()))?;
    let name = stem(path);
    let mut buf = Vec::new();
    out.path.write_csv(&mut buf).map_err(|e| Failure::Io(e.to_string()))?;
    let path_file = ctx.write(&format!("{name}.path.csv"), &buf)?;
    buf.clear();
    out.tree.write_csv(&mut buf).map_err(|e| Failure::Io(e.to_string()))?;
    let tree_file = ctx.write(&format!("{name}.tree.csv"), &buf)?;
    Ok(format!(
        "plan algo={} group={} length={:.4} waypoints={} nodes={} path={} tree={}\n",
        algo.name(),
        target.0,
        out.path.length(),
        out.path.waypoints.len(),
        out.tree.len(),
        path_file.display(),
        tree_file.display()
    ))
}

fn cruise(ctx: &Context, path: &Path) -> Result<String, Failure> {
    let (scenario, params) = ctx.load(path)?;
    let log = run_cruise(&scenario, &params, params.seed);
    let file = ctx.write(
        &format!("{}.s{}.cruise.jsonl", stem(path), params.seed),
        log.to_jsonl().as_bytes(),
    )?;
    let s = &log.summary;
    let line = format!(
        "cruise success={} t_end={:.1} path_m={:.3} legs={} adm={} plans={} nodes={} log={}\n",
        s.success,
        s.t_end,
        s.total_path_length,
        s.legs,
        s.adm_count,
        s.plans,
        s.total_nodes,
        file.display()
    );
    match &s.failure {
        None => Ok(line),
        Some(f) => {
            print!("{line}");
            Err(Failure::Run(format!("{f}: {}", serde_json::to_string(f).unwrap())))
        }
    }
}

fn seeds(ctx: &Context, runs: u64) -> Result<Vec<u64>, Failure> {
    if runs == 0 {
        return Err(Failure::Usage("--runs must be at least 1".into()));
    }
    let first = ctx.seed.unwrap_or(0);
    Ok((first..first + runs).collect())
}

fn batch(ctx: &Context, paths: &[PathBuf], runs: u64) -> Result<String, Failure> {
    let seeds = seeds(ctx, runs)?;
    let scenarios: Vec<(String, Result<Scenario, String>)> = paths
        .iter()
        .map(|p| (stem(p), load_scenario(p).map_err(|e| e.to_string())))
        .collect();
    // Overrides are checked once up front so a typo is a usage error, not a
    // table full of error rows.
    ctx.params_for(&ParamSet::default())?;
    let report = run_batch(&scenarios, &seeds, &ctx.overrides);
    ctx.write("batch.runs.txt", run_table(&report.runs).as_bytes())?;
    let summary = aggregate_table(&report.aggregates);
    ctx.write("batch.summary.txt", summary.as_bytes())?;
    Ok(summary)
}

fn compare_cmd(ctx: &Context, path: &Path, algos: &[Algorithm], runs: u64) -> Result<String, Failure> {
    let (scenario, params) = ctx.load(path)?;
    let seeds = seeds(ctx, runs)?;
    tour_setup(&scenario, &params).map_err(Failure::Observation)?;
    let cmp = compare(&scenario, &params, &seeds, algos).map_err(Failure::Observation)?;
    let table = aggregate_table(&cmp.rows);
    ctx.write(&format!("{}.compare.txt", stem(path)), table.as_bytes())?;
    Ok(table)
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Cluster { scenario, common } => cluster(&Context::new(&common)?, &scenario),
        Command::Field {
            scenario,
            resolution,
            time,
            common,
        } => field(&Context::new(&common)?, &scenario, resolution, time),
        Command::Oop { scenario, common } => oop(&Context::new(&common)?, &scenario),
        Command::Plan {
            scenario,
            algo,
            group,
            common,
        } => plan_one(&Context::new(&common)?, &scenario, algo, group),
        Command::Cruise { scenario, common } => cruise(&Context::new(&common)?, &scenario),
        Command::Batch {
            scenarios,
            runs,
            common,
        } => batch(&Context::new(&common)?, &scenarios, runs),
        Command::Compare {
            scenario,
            algos,
            runs,
            common,
        } => compare_cmd(&Context::new(&common)?, &scenario, &algos, runs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            let failure = Failure::Usage(first);
            eprintln!("{}", failure.line());
            return ExitCode::from(failure.kind().1);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.kind().1)
        }
    }
}
