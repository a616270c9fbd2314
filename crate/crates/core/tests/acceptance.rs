//! End-to-end acceptance checks, one printed verdict per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 1 7 9`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relshock::dynamics::{config_hypotheses, identity_study, IdentityStudy};
use relshock::functionals::{poincare_r, poincare_search, truncation_diagnostics};
use relshock::io::csv_string;
use relshock::pde::{initial_field, Perturbation};
use relshock::profile::{tail_diagnostics, y_map_check, ShockProfile};
use relshock::{run_contraction, ExperimentConfig, RunReport};
use std::time::Instant;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn config(text: &str, overrides: &[(&str, &str)]) -> ExperimentConfig {
    let o: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ExperimentConfig::from_toml_str(text, &o).expect("valid configuration")
}

fn profile(flux: &str, entropy: &str, eps: f64) -> ShockProfile {
    let text = format!("[problem]\nflux = {flux:?}\nentropy = {entropy:?}\nepsilon = {eps:?}\n");
    config(&text, &[]).profile().expect("profile solves")
}

fn burgers_golden() -> Verdict {
    let p = profile("burgers", "quadratic", 0.5);
    let err = p
        .table()
        .iter()
        .map(|r| (r[1] - (0.75 - 0.25 * (r[0] / 8.0).tanh())).abs())
        .fold(0.0f64, f64::max);
    let ode = p.ode_residual();
    verdict(
        err <= 1e-8 && ode <= 1e-9,
        format!("sup error {err:.2e} (<= 1e-8), ode residual {ode:.2e} (<= 1e-9)"),
    )
}

const SWEEP: [f64; 3] = [0.1, 0.05, 0.025];

fn tail_scaling() -> Verdict {
    let tails: Vec<_> = SWEEP
        .iter()
        .map(|&e| tail_diagnostics(&profile("quartic", "remark12", e)).unwrap())
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for w in tails.windows(2) {
        let (l, r) = (w[0].decay_left / w[1].decay_left, w[0].decay_right / w[1].decay_right);
        let inf = w[0].inf_ratio / w[1].inf_ratio;
        let curv = w[0].curvature_ratio / w[1].curvature_ratio;
        pass &= (l - 2.0).abs() <= 0.5 && (r - 2.0).abs() <= 0.5;
        pass &= (inf - 1.0).abs() <= 0.25 && (curv - 1.0).abs() <= 0.25;
        parts.push(format!("decay {l:.3}/{r:.3} inf {inf:.3} curvature {curv:.3}"));
    }
    let inf: Vec<f64> = tails.iter().map(|t| t.inf_ratio).collect();
    let spread = inf.iter().cloned().fold(f64::MIN, f64::max) / inf.iter().cloned().fold(f64::MAX, f64::min);
    parts.push(format!("inf max/min over all levels {spread:.3}"));
    verdict(pass, parts.join("; "))
}

fn y_map() -> Verdict {
    let burgers = y_map_check(&profile("burgers", "quadratic", 0.5));
    let errs: Vec<f64> = SWEEP
        .iter()
        .map(|&e| y_map_check(&profile("quartic", "remark12", e)))
        .collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = burgers <= 1e-9 && ratios.iter().all(|r| (r - 4.0).abs() <= 1.0);
    verdict(
        pass,
        format!("burgers {burgers:.2e} (<= 1e-9), quartic ratios {ratios:.3?} (4 +- 25%)"),
    )
}

fn identity() -> Verdict {
    let cases = [("burgers", "quadratic", "2.0"), ("quartic", "remark12", "1.0")];
    let mut pass = true;
    let mut parts = Vec::new();
    for (flux, entropy, t) in cases {
        let cfg = config(
            &format!("[problem]\nflux = {flux:?}\nentropy = {entropy:?}\nepsilon = 0.2\nlambda = 0.3\n"),
            &[("time.t_final", t), ("time.shift_heun", "true")],
        );
        let s: IdentityStudy = identity_study(&cfg).unwrap();
        pass &= s.pass && s.base.residual <= 5e-3 && s.ratio >= 1.8;
        parts.push(format!(
            "{flux}: residual {:.2e} reduction {:.2}",
            s.base.residual, s.ratio
        ));
    }
    verdict(pass, parts.join("; "))
}

const THEOREM: &str = "[problem]\nflux = \"quartic\"\nentropy = \"remark12\"\nu_minus = 1.0\nepsilon = 0.05\nlambda = 0.25\n[time]\nt_final = 50.0\n[run]\nassert_theorem = true\n";

fn theorem_runs() -> Vec<(&'static str, RunReport)> {
    let recipes = [
        ("bump", "{kind = \"bump\", amplitude = 0.3, center = 0.0, width = 5.0}"),
        ("shifted", "{kind = \"shifted\", shift = 20.0}"),
        (
            "rough",
            "{kind = \"rough\", amplitude = 1.0, center = 0.0, width = 2.0, count = 8, seed = 6}",
        ),
    ];
    recipes
        .iter()
        .map(|&(name, recipe)| {
            (
                name,
                run_contraction(&config(THEOREM, &[("perturbation", recipe)])).unwrap(),
            )
        })
        .collect()
}

fn contraction(runs: &[(&str, RunReport)]) -> Verdict {
    let eps = 0.05;
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r) in runs {
        pass &= r.completed && r.max_relative_increment <= 1e-8 && r.log.shift_violations == 0;
        parts.push(format!(
            "{name}: increment {:.1e} violations {} sup|u0-S| {:.2}",
            r.max_relative_increment, r.log.shift_violations, r.initial_sup_deviation
        ));
    }
    let large = runs.iter().any(|(_, r)| r.initial_sup_deviation >= 20.0 * eps);
    pass &= large;
    verdict(pass, parts.join("; "))
}

fn gate(runs: &[(&str, RunReport)]) -> Verdict {
    let eps2 = 0.05f64 * 0.05;
    let (mut r_max, mut xy_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (_, r) in runs {
        for s in &r.snapshots {
            if s.y.abs() <= eps2 {
                r_max = r_max.max(s.r_main);
            } else {
                xy_max = xy_max.max(s.xdot * s.y + 2.0 * s.b_total.abs());
            }
        }
        r_max = r_max.max(r.log.max_r_near.unwrap_or(f64::NEG_INFINITY));
        xy_max = xy_max.max(r.log.max_xy_far.unwrap_or(f64::NEG_INFINITY));
    }
    verdict(
        r_max <= 1e-8 && xy_max <= 1e-10,
        format!("max R near {r_max:.3e} (<= 1e-8), max XdotY+2|B| far {xy_max:.3e} (<= 1e-10)"),
    )
}

fn poincare() -> Verdict {
    let search = poincare_search(1.0, 1e-3, 10_000, 2024);
    let control = poincare_search(1.0, 10.0, 200, 2024);
    let n = 129;
    let minus_one = poincare_r(0.1, &vec![-1.0; n]);
    let ramp: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let identity = poincare_r(0.1, &ramp);
    // closed forms of the two hand evaluations
    let hand_minus_one = -1.0 / 0.1 + 1.1 - 2.0 / 3.0 + 0.1;
    let hand_identity = -(16.0 / 9.0) / 0.1 + 1.1 / 3.0 + 2.0 / 12.0 + 0.1 / 4.0 - 0.9 / 6.0;
    let pass = search.max_r <= 0.0
        && control.max_r > 0.0
        && (minus_one - hand_minus_one).abs() <= 1e-3
        && (minus_one + 9.4667).abs() <= 1e-3
        && (identity - hand_identity).abs() <= 1e-3;
    verdict(
        pass,
        format!(
            "max R {:.3e} (<= 0), control {:.3e} (> 0), W=-1 {minus_one:.4}, W=y {identity:.4} (closed form {hand_identity:.4})",
            search.max_r, control.max_r
        ),
    )
}

fn truncation() -> Verdict {
    let cfg = config("[problem]\nepsilon = 0.1\n", &[]);
    let p = cfg.profile().unwrap();
    let g = cfg.grid_for(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_d, mut worst_g0, mut ordered, mut truncated) = (0.0f64, f64::INFINITY, true, 0);
    for _ in 0..100 {
        let recipe = Perturbation::Rough {
            amplitude: rng.random_range(0.05..2.0),
            center: rng.random_range(-10.0..10.0),
            width: rng.random_range(1.0..6.0),
            count: rng.random_range(1..8),
            seed: rng.random(),
        };
        let u = initial_field(&p, &g, &recipe).unwrap();
        let shift = rng.random_range(-5.0..5.0);
        let r = rng.random_range(0.1..1.0);
        let rep = truncation_diagnostics(&u, &p, shift, r).unwrap();
        worst_d = worst_d.max(rep.d_identity_residual.abs());
        worst_g0 = worst_g0.min(rep.g0_gap);
        ordered &= rep.ordering_holds;
        truncated += usize::from(rep.truncated_nodes > 0);
    }
    verdict(
        worst_d <= 1e-8 && worst_g0 >= -1e-12 && ordered && truncated > 0,
        format!(
            "D residual {worst_d:.2e} (<= 1e-8), min G0 gap {worst_g0:.2e} (>= 0), ordering {ordered}, {truncated}/100 fields truncated"
        ),
    )
}

fn hypotheses() -> Verdict {
    let scan = |flux: &str, entropy: &str| {
        let text = format!("[problem]\nflux = {flux:?}\nentropy = {entropy:?}\n");
        let cfg = ExperimentConfig::from_toml_str_unchecked(&text, &[]).unwrap();
        config_hypotheses(&cfg, cfg.problem.u_minus).unwrap()
    };
    let good = scan("quartic", "remark12");
    let bad = scan("burgers", "quadratic");
    let reason = bad.h1_failure.clone().unwrap_or_default();
    let pass = good.pass && good.alpha_est == 2.0 && !bad.pass && reason.contains("eta''''");
    verdict(
        pass,
        format!(
            "quartic alpha {} pass {}; burgers pass {} ({reason})",
            good.alpha_est, good.pass, bad.pass
        ),
    )
}

fn determinism() -> Verdict {
    let cfg = config(
        "[problem]\nflux = \"burgers\"\nentropy = \"quadratic\"\nepsilon = 0.2\nlambda = 0.3\n[time]\nt_final = 0.5\n",
        &[],
    );
    let snapshots = || {
        let r = run_contraction(&cfg).unwrap();
        csv_string(
            &r.config_hash,
            &relshock::functionals::FunctionalSnapshot::CSV_HEADER,
            &r.snapshot_rows(),
        )
    };
    let profile_csv = || {
        let p = cfg.profile().unwrap();
        csv_string(
            &cfg.hash(),
            &["xi", "S", "S_prime", "S_double_prime", "a", "y"],
            &p.table(),
        )
    };
    let argmax = || format!("{:?}", poincare_search(1.0, 1e-3, 200, 5).argmax);
    let same = snapshots() == snapshots() && profile_csv() == profile_csv() && argmax() == argmax();
    verdict(same, "snapshot, profile and search outputs repeated".into())
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut failures = 0;
    let mut report = |k: usize, name: &str, run: &mut dyn FnMut() -> Verdict| {
        if !selected(k) {
            return;
        }
        let start = Instant::now();
        let v = run();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {k:>2} {tag} {name} [{:.1} s]: {}",
            start.elapsed().as_secs_f64(),
            v.detail
        );
        failures += usize::from(!v.pass);
    };
    report(1, "burgers golden profile", &mut burgers_golden);
    report(2, "tail scaling", &mut tail_scaling);
    report(3, "y-map", &mut y_map);
    report(4, "entropy identity", &mut identity);
    if selected(5) || selected(6) {
        let start = Instant::now();
        let runs = theorem_runs();
        println!("theorem runs finished in {:.1} s", start.elapsed().as_secs_f64());
        report(5, "contraction", &mut || contraction(&runs));
        report(6, "gate", &mut || gate(&runs));
    }
    report(7, "poincare search", &mut poincare);
    report(8, "truncation", &mut truncation);
    report(9, "hypotheses", &mut hypotheses);
    report(10, "determinism", &mut determinism);
    if failures > 0 {
        eprintln!("{failures} criteria failed");
        std::process::exit(1);
    }
}
