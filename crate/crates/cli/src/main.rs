use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use relshock::calculus::HypothesisReport;
use relshock::dynamics::{config_hypotheses, identity_study};
use relshock::functionals::poincare_search;
use relshock::io::{hash_json, write_csv, write_json};
use relshock::profile::{tail_diagnostics, y_map_check, TailReport};
use relshock::{run_contraction, Error, ExperimentConfig};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const PROFILE_ODE_TOL: f64 = 1e-9;
const BURGERS_TANH_TOL: f64 = 1e-8;
const BURGERS_YMAP_TOL: f64 = 1e-9;
const SCALING_SLACK: f64 = 0.25;

#[derive(Parser, Debug)]
#[command(
    name = "relshock",
    version,
    about = "Viscous shock profiles and weighted relative-entropy contraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the profile and dump it with tail and y-map diagnostics
    Profile(Common),
    /// Scan the structural hypotheses on the entropy
    Hypotheses(Common),
    /// Evolve a perturbation with the shift and check the contraction
    Contract(Common),
    /// Random search for positive values of the Poincaré functional
    Poincare(PoincareArgs),
    /// Profile scaling under repeated halving of epsilon
    Sweep(SweepArgs),
    /// Entropy identity residual and its reduction under grid refinement
    Identity(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    flux: Option<String>,
    #[arg(long)]
    entropy: Option<String>,
    #[arg(long = "u-minus", allow_negative_numbers = true)]
    u_minus: Option<f64>,
    #[arg(long = "eps")]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Output directory
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Further overrides as `table.key=value`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct PoincareArgs {
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Bound on `∫ W^2`
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Number of epsilon values, each half the previous
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also run the contraction experiment at every level
    #[arg(long)]
    contract: bool,
}

/// Failure modes mapped to exit codes.
enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Io(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, Failure> {
        let mut o = Vec::new();
        let mut put = |k: &str, v: String| o.push((k.to_string(), v));
        if let Some(v) = &self.flux {
            put("problem.flux", toml_string(v));
        }
        if let Some(v) = &self.entropy {
            put("problem.entropy", toml_string(v));
        }
        for (key, value) in [
            ("problem.u_minus", self.u_minus),
            ("problem.epsilon", self.epsilon),
            ("problem.lambda", self.lambda),
            ("problem.delta0", self.delta0),
            ("problem.theta", self.theta),
            ("time.t_final", self.t_final),
        ] {
            if let Some(v) = value {
                put(key, format!("{v:?}"));
            }
        }
        if let Some(dir) = &self.output {
            put("run.output_dir", toml_string(&dir.to_string_lossy()));
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("override {item:?} is not KEY=VALUE")))?;
            o.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(o)
    }

    fn text(&self) -> Result<String, Failure> {
        match &self.config {
            Some(path) => {
                std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
            }
            None => Ok(String::new()),
        }
    }

    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let text = self.text()?;
        ExperimentConfig::from_toml_str(&text, &self.overrides()?).map_err(|e| self.located(e))
    }

    fn load_unchecked(&self) -> Result<ExperimentConfig, Failure> {
        let text = self.text()?;
        ExperimentConfig::from_toml_str_unchecked(&text, &self.overrides()?).map_err(|e| self.located(e))
    }

    fn located(&self, e: Error) -> Failure {
        match (&self.config, Failure::from(e)) {
            (Some(path), Failure::Config(msg)) => Failure::Config(format!("{}: {msg}", path.display())),
            (_, f) => f,
        }
    }
}

fn toml_string(s: &str) -> String {
    format!("{s:?}")
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(&cfg.run.output_dir)
}

fn verdict(name: &str, value: f64, tol: f64) -> bool {
    let pass = value <= tol;
    println!(
        "{name:<28} {value:>14.6e}  (<= {tol:e})  {}",
        if pass { "ok" } else { "FAIL" }
    );
    pass
}

fn info(name: &str, value: f64) {
    println!("{name:<28} {value:>14.6e}");
}

fn profile_cmd(args: &Common) -> Outcome {
    let cfg = args.load()?;
    let profile = cfg.profile()?;
    let dir = out_dir(&cfg);
    let hash = cfg.hash();
    write_csv(
        &dir.join("profile.csv"),
        &hash,
        &["xi", "S", "S_prime", "S_double_prime", "a", "y"],
        &profile.table(),
    )?;
    let tails = tail_diagnostics(&profile)?;
    let ymap = y_map_check(&profile);
    let ode = profile.ode_residual();
    info("sigma", profile.sigma());
    info("u_plus", profile.u_plus());
    info("decay_left", tails.decay_left);
    info("decay_right", tails.decay_right);
    info("inf_ratio", tails.inf_ratio);
    info("curvature_ratio", tails.curvature_ratio);
    let mut pass = verdict("ode_residual", ode, PROFILE_ODE_TOL);
    let mut tanh_error = None;
    if cfg.problem.flux == "burgers" {
        // S = (u_- + u_+)/2 - (eps/2) tanh(eps xi / 4)
        let (um, eps) = (cfg.problem.u_minus, cfg.epsilon());
        let mid = um - 0.5 * eps;
        let err = profile
            .table()
            .iter()
            .map(|r| (r[1] - (mid - 0.5 * eps * (0.25 * eps * r[0]).tanh())).abs())
            .fold(0.0f64, f64::max);
        pass &= verdict("tanh_error", err, BURGERS_TANH_TOL);
        pass &= verdict("y_map_error", ymap, BURGERS_YMAP_TOL);
        tanh_error = Some(err);
    } else {
        info("y_map_error", ymap);
    }
    write_json(
        &dir.join("profile.json"),
        &json!({
            "config_hash": hash,
            "sigma": profile.sigma(),
            "u_plus": profile.u_plus(),
            "nodes": profile.xi().len(),
            "ode_residual": ode,
            "tails": tails,
            "y_map_error": ymap,
            "tanh_error": tanh_error,
            "warnings": profile.warnings(),
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

fn print_hypotheses(r: &HypothesisReport) {
    info("alpha_est", r.alpha_est);
    info("min_eta2", r.min_eta2);
    info("min_eta4", r.min_eta4);
    for item in &r.h2 {
        info(&format!("h2 {} constant", item.name), item.c_est);
    }
    match &r.h1_failure {
        Some(why) => println!("(H1) fails: {why}"),
        None => println!("(H1) holds"),
    }
    println!("hypotheses {}", if r.pass { "pass" } else { "FAIL" });
}

fn hypotheses_cmd(args: &Common) -> Outcome {
    let cfg = args.load_unchecked()?;
    let u_plus = cfg.problem.u_minus - cfg.problem.epsilon.unwrap_or(0.0);
    let report = config_hypotheses(&cfg, u_plus)?;
    print_hypotheses(&report);
    write_json(&out_dir(&cfg).join("hypotheses.json"), &report)?;
    Ok(report.pass)
}

fn contract_cmd(args: &Common) -> Outcome {
    let cfg = args.load()?;
    let report = run_contraction(&cfg)?;
    report.write_artifacts(&out_dir(&cfg))?;
    info("initial_entropy", report.initial_entropy);
    info("final_entropy", report.final_entropy);
    info("x_final", report.x_final);
    info("h_l1", report.h_l1);
    info("h_l1_bound", report.h_l1_bound);
    for c in &report.checks {
        let tag = match (c.pass, c.enforced) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "warn",
        };
        println!("{:<28} {:>14.6e}  (<= {:e})  {tag}", c.name, c.value, c.tolerance);
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    if let Some(e) = &report.error {
        println!("run stopped at t = {}: {e}", report.t_reached);
    }
    println!("contraction {}", if report.pass { "pass" } else { "FAIL" });
    Ok(report.pass)
}

fn poincare_cmd(args: &PoincareArgs) -> Outcome {
    if !(args.delta > 0.0 && args.mass > 0.0) || args.trials == 0 {
        return Err(Failure::Config(
            "delta and mass must be positive and trials nonzero".into(),
        ));
    }
    let report = poincare_search(args.mass, args.delta, args.trials, args.seed);
    let hash = hash_json(&json!({
        "delta": args.delta, "mass": args.mass, "trials": args.trials, "seed": args.seed,
    }));
    let n = report.argmax.len();
    let rows: Vec<[f64; 2]> = report
        .argmax
        .iter()
        .enumerate()
        .map(|(i, &w)| [i as f64 / (n - 1) as f64, w])
        .collect();
    write_csv(&args.output.join("poincare_argmax.csv"), &hash, &["y", "W"], &rows)?;
    write_json(&args.output.join("poincare.json"), &report)?;
    info("max_sampled", report.max_sampled);
    info("positive_samples", report.positive_samples as f64);
    let pass = verdict("max_r", report.max_r, 0.0);
    Ok(pass)
}

struct Level {
    eps: f64,
    tails: TailReport,
    ymap: f64,
    contract: Option<bool>,
}

fn sweep_cmd(args: &SweepArgs) -> Outcome {
    if args.levels < 2 || args.jobs == 0 {
        return Err(Failure::Config("sweep needs at least two levels and one job".into()));
    }
    let base = args.common.load()?;
    let configs: Vec<ExperimentConfig> = (0..args.levels)
        .map(|k| {
            let mut c = base.clone();
            let eps = base.epsilon() / f64::powi(2.0, k as i32);
            c.problem.epsilon = Some(eps);
            c.grid.half_width = c.grid.half_width.map(|l| l * f64::powi(2.0, k as i32));
            c.run.output_dir = Path::new(&base.run.output_dir)
                .join(format!("level_{k}"))
                .to_string_lossy()
                .into_owned();
            c.validate().map(|_| c)
        })
        .collect::<Result<_, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Failure::Run(e.to_string()))?;
    let levels: Vec<Result<Level, Error>> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let profile = c.profile()?;
                let tails = tail_diagnostics(&profile)?;
                let ymap = y_map_check(&profile);
                let contract = if args.contract {
                    let r = run_contraction(c)?;
                    r.write_artifacts(Path::new(&c.run.output_dir))?;
                    Some(r.pass)
                } else {
                    None
                };
                Ok(Level {
                    eps: c.epsilon(),
                    tails,
                    ymap,
                    contract,
                })
            })
            .collect()
    });
    let levels: Vec<Level> = levels.into_iter().collect::<Result<_, _>>()?;

    let rows: Vec<[f64; 7]> = levels
        .iter()
        .map(|l| {
            [
                l.eps,
                l.tails.decay_left,
                l.tails.decay_right,
                l.tails.inf_ratio,
                l.tails.curvature_ratio,
                l.ymap,
                l.contract.map_or(f64::NAN, |p| if p { 1.0 } else { 0.0 }),
            ]
        })
        .collect();
    write_csv(
        &out_dir(&base).join("sweep.csv"),
        &base.hash(),
        &[
            "eps",
            "decay_left",
            "decay_right",
            "inf_ratio",
            "curvature_ratio",
            "y_map_error",
            "contract_pass",
        ],
        &rows,
    )?;

    let mut pass = true;
    for w in levels.windows(2) {
        for (side, a, b) in [
            ("left", w[0].tails.decay_left, w[1].tails.decay_left),
            ("right", w[0].tails.decay_right, w[1].tails.decay_right),
        ] {
            let ratio = a / b;
            let ok = (ratio - 2.0).abs() <= 2.0 * SCALING_SLACK;
            println!(
                "decay ratio {side:<5} eps {:.4e}/{:.4e} {ratio:>10.4}  {}",
                w[0].eps,
                w[1].eps,
                if ok { "ok" } else { "FAIL" }
            );
            pass &= ok;
        }
        for (name, a, b) in [
            ("inf_ratio", w[0].tails.inf_ratio, w[1].tails.inf_ratio),
            (
                "curvature_ratio",
                w[0].tails.curvature_ratio,
                w[1].tails.curvature_ratio,
            ),
        ] {
            let change = (a / b - 1.0).abs();
            pass &= verdict(&format!("{name} change"), change, SCALING_SLACK);
        }
        let yr = w[0].ymap / w[1].ymap;
        println!("y-map error ratio            {yr:>14.4}");
    }
    for l in &levels {
        if let Some(p) = l.contract {
            println!("contraction eps {:.4e}  {}", l.eps, if p { "pass" } else { "FAIL" });
            pass &= p;
        }
    }
    Ok(pass)
}

fn identity_cmd(args: &Common) -> Outcome {
    let cfg = args.load()?;
    let study = identity_study(&cfg)?;
    write_json(&out_dir(&cfg).join("identity.json"), &study)?;
    info("base points", study.base.grid_points as f64);
    info("base dt", study.base.dt);
    let mut pass = verdict("base residual", study.base.residual, study.tolerance);
    info("refined residual", study.refined.residual);
    let ok = study.ratio >= study.min_ratio;
    println!(
        "{:<28} {:>14.6e}  (>= {})  {}",
        "reduction",
        study.ratio,
        study.min_ratio,
        if ok { "ok" } else { "FAIL" }
    );
    pass &= ok && study.base.completed && study.refined.completed;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Profile(a) => profile_cmd(a),
        Command::Hypotheses(a) => hypotheses_cmd(a),
        Command::Contract(a) => contract_cmd(a),
        Command::Poincare(a) => poincare_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Identity(a) => identity_cmd(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
