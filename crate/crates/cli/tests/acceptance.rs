//! End-to-end acceptance checks. Runs without the libtest harness so that
//! one PASS/FAIL line per criterion is always printed; exits non-zero if
//! any criterion fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lifemax_core::admm::{run_admm_budget, AdmmConfig};
use lifemax_core::harness::{compare, count_messages, geometric_grid, rho_sweep, tune_rho, MessageLedger, TunedRun};
use lifemax_core::lp::oracle;
use lifemax_core::report::RunStatus;
use lifemax_core::subgradient::{run_subgradient, StepRule, SubgradConfig};
use lifemax_core::topology::{Topology, TopologyParams};

struct Verdict {
    pass: bool,
    detail: String,
}

fn instance(sensors: usize, seed: u64) -> Topology {
    Topology::generate(&TopologyParams {
        sensors,
        seed,
        ..TopologyParams::default()
    })
    .expect("default parameters yield connected topologies")
}

/// Penalty grid for the tuned ADMM runs: 24 points from 0.5 to about 100.
fn tuning_grid() -> Vec<f64> {
    geometric_grid(0.5, 1.26, 24)
}

fn tuned(topo: &Topology) -> (f64, Option<TunedRun>) {
    let q_star = oracle(topo).expect("oracle solves").q;
    let run = tune_rho(topo, &tuning_grid(), &AdmmConfig::default(), q_star, 0.05).expect("valid grid");
    (q_star, run)
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn oracle_correctness() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_single: f64 = 0.0;
    let mut failures = 0;
    for seed in 0..100u64 {
        let topo = oracles::small_instance(seed, 1 + seed as usize % 3);
        let q = oracle(&topo).expect("tiny instances solve").q;
        let brute = oracles::grid_search_q(&topo, 1e-3);
        let rel = (q - brute).abs() / q;
        worst = worst.max(rel);
        if rel > 2e-3 {
            failures += 1;
        }
        if topo.sensor_count() == 1 {
            let s = topo.node(1);
            let exact = topo.edges()[0].cost * s.gen_rate / s.energy;
            worst_single = worst_single.max((q - exact).abs());
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        pass: failures == 0 && worst_single <= 1e-9 && within(elapsed, 10.0),
        detail: format!(
            "100 cases, worst relative gap to grid search {worst:.2e}, worst single-sensor error {worst_single:.1e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn subproblem_equivalence() -> Verdict {
    let start = Instant::now();
    let checks = oracles::check_updates(2024, 1000);
    let elapsed = start.elapsed();
    let worst = checks.iter().map(|c| c.max_err).fold(0.0, f64::max);
    let projected: usize = checks.iter().map(|c| c.projected).sum();
    let kkt: usize = checks.iter().map(|c| c.kkt_failures).sum();
    Verdict {
        pass: checks.iter().all(|c| c.calls == 1000 && c.passes(1e-8)) && within(elapsed, 5.0),
        detail: format!(
            "4 x 1000 calls, worst error {worst:.1e}, {projected} projected cases with {kkt} KKT failures, {:.2}s",
            elapsed.as_secs_f64()
        ),
    }
}

/// Shared by the convergence and violation criteria.
struct ConvergenceStudy {
    runs: Vec<(usize, u64, Option<TunedRun>)>,
    elapsed: Duration,
}

fn convergence_study() -> ConvergenceStudy {
    let start = Instant::now();
    let mut runs = Vec::new();
    for sensors in [10, 15] {
        for seed in 0..10u64 {
            let (_, run) = tuned(&instance(sensors, seed));
            runs.push((sensors, seed, run));
        }
    }
    ConvergenceStudy {
        runs,
        elapsed: start.elapsed(),
    }
}

fn converged(run: &Option<TunedRun>) -> Option<&TunedRun> {
    run.as_ref().filter(|r| {
        r.report.status == RunStatus::Converged
            && r.report.iterations <= 500
            && r.report.oracle_gap.is_some_and(|g| g <= 0.05)
            && r.report.residuals.primal_norm <= 0.01
            && r.report.residuals.dual_norm <= 0.01
    })
}

fn convergence_quality(study: &ConvergenceStudy) -> Verdict {
    let ok = study.runs.iter().filter(|(_, _, r)| converged(r).is_some()).count();
    let missed: Vec<String> = study
        .runs
        .iter()
        .filter(|(_, _, r)| converged(r).is_none())
        .map(|(n, s, _)| format!("n={n} seed={s}"))
        .collect();
    let rounds: Vec<usize> = study.runs.iter().filter_map(|(_, _, r)| converged(r)).map(|r| r.report.iterations).collect();
    Verdict {
        pass: ok >= 18 && within(study.elapsed, 120.0),
        detail: format!(
            "{ok}/20 within 5% and eps 0.01 in <= 500 rounds (median {} rounds), missed [{}], {:.1}s",
            median(&rounds),
            missed.join(", "),
            study.elapsed.as_secs_f64()
        ),
    }
}

fn median(values: &[usize]) -> usize {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.get(v.len() / 2).copied().unwrap_or(0)
}

fn violation_decay(study: &ConvergenceStudy) -> Verdict {
    let mut worst = [0.0f64; 4];
    let mut within_all = 0;
    let mut count = 0;
    for run in study.runs.iter().filter_map(|(_, _, r)| converged(r)) {
        let r = &run.report.residuals;
        let fam = [r.v_i, r.v_ii, r.v_iii, r.v_iv];
        for (w, v) in worst.iter_mut().zip(fam) {
            *w = w.max(v);
        }
        within_all += usize::from(fam.iter().all(|v| *v <= 0.01));
        count += 1;
    }
    Verdict {
        pass: count > 0 && within_all == count,
        detail: format!(
            "{within_all}/{count} convergent runs with every family <= 0.01; worst vI {:.2e}, vII {:.2e}, vIII {:.2e}, vIV {:.2e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    }
}

fn separation() -> Verdict {
    let start = Instant::now();
    let admm = AdmmConfig {
        max_iter: 2000,
        ..AdmmConfig::default()
    };
    let subgrad = SubgradConfig {
        step: StepRule::InvSqrt { a: 0.001 },
        max_iter: 20_000,
        stall_window: usize::MAX / 2,
        ..SubgradConfig::default()
    };
    let mut ok = 0;
    let mut censored = 0;
    let mut cells = Vec::new();
    for seed in 0..10u64 {
        let topo = instance(15, seed);
        let q_star = oracle(&topo).expect("oracle solves").q;
        let cmp = compare(&topo, &admm, &subgrad, 0.05, q_star).expect("comparison runs");
        if cmp.separation_at_least(10.0) {
            ok += 1;
        }
        let admm_k = cmp.admm.iterations_to_target.map_or("-".to_string(), |k| k.to_string());
        let sg_k = match cmp.subgrad.iterations_to_target {
            Some(k) => k.to_string(),
            None => {
                censored += 1;
                format!(">{}", cmp.subgrad.iterations_run)
            }
        };
        cells.push(format!("{admm_k}/{sg_k}"));
    }
    let elapsed = start.elapsed();
    Verdict {
        pass: ok >= 8 && within(elapsed, 300.0),
        detail: format!(
            "{ok}/10 with subgradient >= 10x ADMM rounds (admm/subgrad: {}; {censored} subgradient runs hit the cap), {:.1}s",
            cells.join(" "),
            elapsed.as_secs_f64()
        ),
    }
}

fn message_parity() -> Verdict {
    let mut ok = 0;
    for seed in 0..10u64 {
        let topo = instance(8 + seed as usize, 100 + seed);
        let rounds = 25 + 5 * seed as usize;
        let admm = run_admm_budget(
            &topo,
            &AdmmConfig {
                max_iter: rounds,
                ..AdmmConfig::default()
            },
        )
        .expect("admm runs");
        let sg = run_subgradient(
            &topo,
            &SubgradConfig {
                max_iter: rounds,
                stall_window: usize::MAX / 2,
                ..SubgradConfig::default()
            },
        )
        .expect("subgradient runs");
        let a = MessageLedger::from_trace(&topo, &admm.trace);
        let s = MessageLedger::from_trace(&topo, &sg.trace);
        if a == s && a == count_messages(&topo, rounds) {
            ok += 1;
        }
    }
    Verdict {
        pass: ok == 10,
        detail: format!("{ok}/10 topologies with identical ledgers"),
    }
}

fn sweep_structure() -> Verdict {
    let grid = [0.1, 1.0, 7.0, 50.0, 500.0];
    let mut interior = 0;
    let mut picks = Vec::new();
    for seed in 0..5u64 {
        let topo = instance(10, seed);
        let q_star = oracle(&topo).expect("oracle solves").q;
        let sweep = rho_sweep(&topo, &grid, 200, &AdmmConfig::default(), q_star).expect("sweep runs");
        if sweep.best_is_interior() {
            interior += 1;
        }
        picks.push(sweep.best_rho().map_or("none".to_string(), |r| r.to_string()));
    }
    Verdict {
        pass: interior >= 4,
        detail: format!("{interior}/5 interior argmins (best rho per seed: {})", picks.join(", ")),
    }
}

fn scaling_law() -> Verdict {
    let mut worst_t: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    let mut unconverged = 0;
    for seed in 0..5u64 {
        let topo = instance(10, seed);
        let scaled = topo.scale_energy(10.0);
        let (q_star, base) = tuned(&topo);
        let (q_star_scaled, big) = tuned(&scaled);
        let t_ratio = (1.0 / q_star_scaled) / (1.0 / q_star);
        worst_t = worst_t.max((t_ratio - 10.0).abs() / 10.0);
        match (converged(&base), converged(&big)) {
            (Some(a), Some(b)) => {
                let rel = (10.0 * b.report.q - a.report.q).abs() / a.report.q;
                worst_q = worst_q.max(rel);
            }
            _ => unconverged += 1,
        }
    }
    Verdict {
        pass: worst_t <= 1e-6 && worst_q <= 5e-2 && unconverged == 0,
        detail: format!(
            "5 instances, T* ratio error {worst_t:.1e}, ADMM q ratio error {worst_q:.2e}, {unconverged} unconverged"
        ),
    }
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_lifemax"))
        .current_dir(dir)
        .env_remove("LIFEMAX_SEED")
        .args(args)
        .output()
        .map(|o| matches!(o.status.code(), Some(0 | 4)))
        .unwrap_or(false)
}

fn determinism() -> Verdict {
    let script: &[&[&str]] = &[
        &["gen", "--n", "12", "--seed", "21", "-o", "topo.json"],
        &["solve", "topo.json", "--algo", "lp", "--report", "lp.json"],
        &["solve", "topo.json", "--report", "admm.json", "--trace", "admm.csv"],
        &[
            "solve",
            "topo.json",
            "--algo",
            "subgrad",
            "--subgrad-max-iter",
            "2000",
            "--report",
            "sg.json",
            "--trace",
            "sg.csv",
        ],
        &["sweep", "topo.json", "--jobs", "3", "-o", "sweep.csv", "--report", "sweep.json"],
        &["compare", "topo.json", "--subgrad-max-iter", "3000", "-o", "cmp.csv", "--report", "cmp.json"],
    ];
    let files = [
        "topo.json",
        "lp.json",
        "admm.json",
        "admm.csv",
        "sg.json",
        "sg.csv",
        "sweep.csv",
        "sweep.json",
        "cmp.csv",
        "cmp.json",
    ];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        for args in script {
            if !run_cli(dir.path(), args) {
                return Verdict {
                    pass: false,
                    detail: format!("command failed: lifemax {}", args.join(" ")),
                };
            }
        }
    }
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| {
            let a = std::fs::read(dirs[0].path().join(f));
            let b = std::fs::read(dirs[1].path().join(f));
            !matches!((a, b), (Ok(a), Ok(b)) if a == b)
        })
        .collect();
    Verdict {
        pass: differing.is_empty(),
        detail: format!(
            "{} output files from 6 commands compared, {} differ {:?}",
            files.len(),
            differing.len(),
            differing
        ),
    }
}

fn main() {
    let mut verdicts: Vec<(&str, Verdict)> = vec![
        ("oracle correctness", oracle_correctness()),
        ("subproblem equivalence", subproblem_equivalence()),
    ];
    let study = convergence_study();
    verdicts.push(("ADMM convergence quality", convergence_quality(&study)));
    verdicts.push(("violation decay", violation_decay(&study)));
    verdicts.push(("ADMM vs subgradient separation", separation()));
    verdicts.push(("message parity", message_parity()));
    verdicts.push(("penalty sweep structure", sweep_structure()));
    verdicts.push(("scaling law", scaling_law()));
    verdicts.push(("determinism", determinism()));

    let mut passed = 0;
    for (k, (name, v)) in verdicts.iter().enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {name}: {tag} ({})", k + 1, v.detail);
        passed += usize::from(v.pass);
    }
    println!("acceptance: {passed}/{} criteria passed", verdicts.len());
    if passed != verdicts.len() {
        std::process::exit(1);
    }
}
