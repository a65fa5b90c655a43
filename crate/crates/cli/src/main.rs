use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dsm_core::altsched::{q_learning_repeated, two_phase_study, QLearningConfig};
use dsm_core::dynamics::{ascending_order, cournot_run_with, DynamicsConfig, NashMode};
use dsm_core::engine::Engine;
use dsm_core::equilibrium::{
    augment_with_valuations, build_matrix_game, enumerate_ne_with_cap, group_equilibria, hull_and_folk_region,
    maximin_values, pure_ne_cells, MatrixGame, Orientation, DEFAULT_ENUMERATION_CAP,
};
use dsm_core::model::{load_scenario, validate_scenario, write_scenario, Billing, JointSchedule, Scenario, TimeSlot};
use dsm_core::montecarlo::{generate_flat_scenario, initial_state, run_study, OrderPolicy, StudyConfig};
use dsm_core::numeric::{format_fixed, format_rational, parse_rational};
use dsm_core::report::{csv_writer, emit, write_json};

#[derive(Parser)]
#[command(name = "dsm", version, about = "Demand-side scheduling games: dynamics, equilibria and studies")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed; required by every randomized command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the scenario's billing scheme.
    #[arg(long, global = true, value_enum)]
    scheme: Option<Scheme>,
    /// Runs per study.
    #[arg(long, global = true, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Round limit for best-response dynamics.
    #[arg(long, global = true, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
    max_rounds: u32,
    /// Largest joint space searched exhaustively.
    #[arg(long, global = true, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u128,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Hourly,
    Daily,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PerLoad,
    PerUser,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Ascending,
    Random,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct GameSource {
    /// Two-user scenario with one shiftable load per user.
    #[arg(long, conflicts_with = "game", required_unless_present = "game")]
    scenario: Option<PathBuf>,
    /// Payoff matrix file: one row per line, `a,b` cells separated by spaces.
    #[arg(long)]
    game: Option<PathBuf>,
    /// Payoff matrix added cell-wise to the game.
    #[arg(long)]
    valuations: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every violation.
    Validate(ScenarioArg),
    /// Run round-robin best responses from one initial schedule.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Comma-separated starts in load-id order; drawn at random when omitted.
        #[arg(long)]
        init: Option<String>,
        /// Comma-separated turn order of users.
        #[arg(long)]
        order: Option<String>,
    },
    /// Enumerate all pure Nash equilibria.
    Enumerate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Also write the grouped equilibrium table.
        #[arg(long)]
        group: bool,
        #[arg(long, value_enum, default_value_t = Mode::PerLoad)]
        mode: Mode,
    },
    /// Seeded convergence study from random initial schedules.
    Study {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, value_enum, default_value_t = Order::Ascending)]
        order: Order,
    },
    /// Print a two-player cost or payoff matrix and its pure equilibria.
    Matrix(GameSource),
    /// Payoff hull and folk-theorem region of a two-player game.
    Hull(GameSource),
    /// Central placement of large loads followed by a study of the rest.
    Twophase {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Energy threshold in kWh, or `inf`.
        #[arg(long)]
        threshold: String,
        #[arg(long, value_enum, default_value_t = Order::Ascending)]
        order: Order,
    },
    /// Repeated play by per-load ε-greedy learners.
    Qlearn {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 2000)]
        episodes: u32,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        /// Per-episode multiplier on epsilon.
        #[arg(long, default_value_t = 0.998)]
        decay: f64,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
    },
    /// Generate a scenario whose loads tile a flat profile.
    GenFlat {
        #[arg(long)]
        users: u32,
        #[arg(long)]
        loads_per_user: u32,
        #[arg(long, default_value_t = 24)]
        horizon: u32,
        /// File name inside the output directory.
        #[arg(long, default_value = "scenario.toml")]
        name: String,
    },
}

enum Failure {
    Usage(String),
    Invalid(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

impl From<dsm_core::Error> for Failure {
    fn from(e: dsm_core::Error) -> Self {
        Failure::Invalid(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Validate(a) => validate(g, &a.scenario),
        Command::Simulate { scenario, init, order } => simulate(g, &scenario.scenario, init.as_deref(), order.as_deref()),
        Command::Enumerate { scenario, group, mode } => enumerate(g, &scenario.scenario, *group, *mode),
        Command::Study { scenario, order } => study(g, &scenario.scenario, *order),
        Command::Matrix(src) => matrix(g, src),
        Command::Hull(src) => hull(g, src),
        Command::Twophase { scenario, threshold, order } => twophase(g, &scenario.scenario, threshold, *order),
        Command::Qlearn { scenario, episodes, epsilon, decay, lr } => {
            let cfg = QLearningConfig {
                episodes: *episodes,
                epsilon: *epsilon,
                epsilon_decay: *decay,
                learning_rate: *lr,
                seed: require_seed(g)?,
            };
            qlearn(g, &scenario.scenario, &cfg)
        }
        Command::GenFlat { users, loads_per_user, horizon, name } => {
            gen_flat(g, *users, *loads_per_user, *horizon, name)
        }
    }
}

fn require_seed(g: &Global) -> Result<u64, Failure> {
    g.seed.ok_or_else(|| Failure::Usage("this command is randomized and needs an explicit --seed".into()))
}

/// Loads and validates a scenario, applying `--scheme`.
fn scenario(g: &Global, path: &Path) -> Result<Scenario, Failure> {
    let mut s = load_scenario(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(scheme) = g.scheme {
        s.billing = match scheme {
            Scheme::Hourly => Billing::HourlyProportional,
            Scheme::Daily => Billing::DailyProportional,
        };
    }
    let violations = validate_scenario(&s);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(anyhow!("{} is invalid:\n{}", path.display(), list.join("\n")).into());
    }
    Ok(s)
}

fn study_config(g: &Global, order: Order) -> Result<StudyConfig, Failure> {
    Ok(StudyConfig {
        order_policy: match order {
            Order::Ascending => OrderPolicy::Ascending,
            Order::Random => OrderPolicy::RandomPerRun,
        },
        max_rounds: g.max_rounds,
        ..StudyConfig::new(g.runs, require_seed(g)?)
    })
}

fn parse_list(text: &str, what: &str) -> Result<Vec<u32>, Failure> {
    text.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|_| Failure::Usage(format!("{what}: `{t}` is not a positive integer"))))
        .collect()
}

fn validate(g: &Global, path: &Path) -> Outcome {
    let s = scenario(g, path)?;
    println!(
        "{}: valid ({} users, {} loads, {} shiftable, horizon {})",
        path.display(),
        s.users,
        s.loads.len(),
        s.shiftable_loads().len(),
        s.horizon
    );
    Ok(())
}

fn simulate(g: &Global, path: &Path, init: Option<&str>, order: Option<&str>) -> Outcome {
    let s = scenario(g, path)?;
    let engine = Engine::new(&s)?;
    let initial = match init {
        Some(text) => {
            let starts = parse_list(text, "--init")?;
            let ids: Vec<&str> = engine.loads().iter().map(|l| l.id.as_str()).collect();
            if starts.len() != ids.len() {
                return Err(Failure::Usage(format!(
                    "--init needs {} starts (for {}), got {}",
                    ids.len(),
                    ids.join(", "),
                    starts.len()
                )));
            }
            JointSchedule::from_pairs(ids.into_iter().zip(starts))
        }
        None => {
            let cfg = StudyConfig::new(1, require_seed(g)?);
            engine.schedule_of(&engine.state_from_starts(&initial_state(&engine, &cfg, 0).0))
        }
    };
    let order = match order {
        Some(text) => parse_list(text, "--order")?,
        None => ascending_order(&s),
    };
    let cfg = DynamicsConfig { max_rounds: g.max_rounds, ..DynamicsConfig::default() };
    let record = cournot_run_with(&s, &initial, &order, &cfg)?;
    emit(&g.out, "trace.csv", |w| record.write_trace(w))?;
    write_json(g.out.join("run.json"), &record)?;
    let terminal = engine.state_from_schedule(&record.terminal)?;
    println!("status: {} after {} rounds", record.status, record.rounds);
    println!("initial: {}", record.initial);
    println!("terminal: {}", record.terminal);
    println!("total cost: {}", engine.total_cost(&terminal));
    println!("par: {}", format_fixed(&engine.par(&terminal)?, 4));
    Ok(())
}

fn enumerate(g: &Global, path: &Path, group: bool, mode: Mode) -> Outcome {
    let s = scenario(g, path)?;
    let mode = match mode {
        Mode::PerLoad => NashMode::PerLoad,
        Mode::PerUser => NashMode::PerUserExact,
    };
    let nes = enumerate_ne_with_cap(&s, mode, g.cap)?;
    let engine = Engine::new(&s)?;
    emit(&g.out, "equilibria.csv", |w| {
        let mut c = csv_writer(w);
        let mut header: Vec<String> = engine.loads().iter().map(|l| l.id.clone()).collect();
        header.push("total_cost_cents".into());
        header.push("par".into());
        c.write_record(&header)?;
        for j in &nes {
            let st = engine.state_from_schedule(j)?;
            let mut row: Vec<String> = j.starts().iter().map(u32::to_string).collect();
            row.push(engine.total_cost(&st).to_string());
            row.push(format_fixed(&engine.par(&st)?, 4));
            c.write_record(&row)?;
        }
        c.flush()?;
        Ok(())
    })?;
    println!("{} equilibria over {} joint schedules", nes.len(), engine.joint_space());
    if group {
        let table = group_equilibria(&s, &nes)?;
        let path = emit(&g.out, "table.csv", |w| table.write_csv(w))?;
        print!("{}", std::fs::read_to_string(path).context("reading table.csv back")?);
    }
    Ok(())
}

fn study(g: &Global, path: &Path, order: Order) -> Outcome {
    let s = scenario(g, path)?;
    let cfg = study_config(g, order)?;
    let result = run_study(&s, &cfg)?;
    let table = if Engine::new(&s)?.joint_space() <= g.cap {
        Some(group_equilibria(&s, &enumerate_ne_with_cap(&s, NashMode::PerLoad, g.cap)?)?)
    } else {
        None
    };
    let table_path = emit(&g.out, "table.csv", |w| result.write_table_csv(w, table.as_ref()))?;
    emit(&g.out, "histogram.csv", |w| result.write_histogram_csv(w))?;
    write_json(g.out.join("study.json"), &result)?;
    println!(
        "{} runs, {} converged, rounds min {} / mean {:.2} / max {}",
        result.runs,
        result.converged(),
        result.rounds.min,
        result.rounds.mean,
        result.rounds.max
    );
    print!("{}", std::fs::read_to_string(table_path).context("reading table.csv back")?);
    Ok(())
}

fn game(g: &Global, src: &GameSource) -> Result<MatrixGame, Failure> {
    let base = match (&src.scenario, &src.game) {
        (Some(path), _) => build_matrix_game(&scenario(g, path)?)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            MatrixGame::parse(&text, Orientation::Payoff)?
        }
        (None, None) => return Err(Failure::Usage("give --scenario or --game".into())),
    };
    match &src.valuations {
        None => Ok(base),
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let v = MatrixGame::parse(&text, Orientation::Payoff)?;
            Ok(augment_with_valuations(&base.to_payoffs(), &v)?)
        }
    }
}

fn matrix(g: &Global, src: &GameSource) -> Outcome {
    let game = game(g, src)?;
    let decimals = (game.orientation == Orientation::Cost).then_some(2);
    let text = game.render(decimals);
    emit(&g.out, "matrix.txt", |w| Ok(w.write_all(text.as_bytes())?))?;
    let cells = pure_ne_cells(&game);
    emit(&g.out, "ne_cells.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["row", "col"])?;
        for (r, col) in &cells {
            c.write_record([r.to_string(), col.to_string()])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let unit = if game.orientation == Orientation::Cost { " (cents)" } else { "" };
    println!("{:?} matrix{unit}:", game.orientation);
    print!("{text}");
    let list: Vec<String> = cells.iter().map(|(r, c)| format!("({r},{c})")).collect();
    println!("pure equilibria: {}", list.join(" "));
    let (a, b) = maximin_values(&game);
    println!("maximin payoffs: ({}, {})", format_rational(&a), format_rational(&b));
    Ok(())
}

fn hull(g: &Global, src: &GameSource) -> Outcome {
    let report = hull_and_folk_region(&game(g, src)?);
    emit(&g.out, "vertices.csv", |w| report.write_vertices_csv(w))?;
    emit(&g.out, "region.csv", |w| report.write_region_csv(w))?;
    write_json(g.out.join("hull.json"), &report)?;
    let show = |ps: &[dsm_core::equilibrium::Point]| {
        ps.iter()
            .map(|p| format!("({}, {})", format_rational(&p.x), format_rational(&p.y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("hull: {}", show(&report.vertices));
    println!("maximin: {}", show(&[report.maximin]));
    let region = if report.folk_region.is_empty() { "empty".to_string() } else { show(&report.folk_region) };
    println!("folk region: {region}");
    Ok(())
}

fn twophase(g: &Global, path: &Path, threshold: &str, order: Order) -> Outcome {
    let s = scenario(g, path)?;
    let threshold = match threshold.trim() {
        t if t.eq_ignore_ascii_case("inf") => None,
        t => Some(parse_rational(t).map_err(|e| Failure::Usage(format!("--threshold: {e}")))?),
    };
    let cfg = study_config(g, order)?;
    let r = two_phase_study(&s, threshold.as_ref(), &cfg)?;
    let path = emit(&g.out, "comparison.csv", |w| r.write_comparison_csv(w))?;
    write_json(g.out.join("twophase.json"), &r)?;
    println!(
        "central loads ({}): {}",
        if r.central.exact { "exact" } else { "greedy" },
        if r.central.schedule.is_empty() { "none".to_string() } else { r.central.schedule.to_string() }
    );
    print!("{}", std::fs::read_to_string(path).context("reading comparison.csv back")?);
    Ok(())
}

fn qlearn(g: &Global, path: &Path, cfg: &QLearningConfig) -> Outcome {
    let s = scenario(g, path)?;
    let r = q_learning_repeated(&s, cfg)?;
    emit(&g.out, "learning.csv", |w| r.write_trace_csv(w))?;
    write_json(g.out.join("qlearn.json"), &r)?;
    let last = r.trace.last().expect("at least one episode");
    println!("episodes: {}", r.trace.len());
    println!("last episode: cost {} par {:.4}", last.total_cost, last.par);
    println!("greedy schedule: {} (cost {})", r.final_schedule, r.final_total_cost);
    Ok(())
}

fn gen_flat(g: &Global, users: u32, loads_per_user: u32, horizon: u32, name: &str) -> Outcome {
    let seed = require_seed(g)?;
    let flat = generate_flat_scenario(users, loads_per_user, horizon, seed)?;
    let path = dsm_core::report::output_path(&g.out, name)?;
    write_scenario(&flat.scenario, &path)?;
    emit(&g.out, "witness.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["load", "start"])?;
        for (id, TimeSlot(t)) in flat.witness.iter() {
            c.write_record([id.to_string(), t.to_string()])?;
        }
        c.flush()?;
        Ok(())
    })?;
    println!("wrote {} ({} loads, witness PAR 1)", path.display(), flat.scenario.loads.len());
    Ok(())
}
