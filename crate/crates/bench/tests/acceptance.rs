//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary so the lines are always printed.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use mpsca::channelgen::{channel_from_paths, draw_instance, draw_paths, steering_vector, user_rng, ChannelModelConfig};
use mpsca::oracle::{exhaustive_subsets, single_user_optimum, DEFAULT_SUBSET_CAP};
use mpsca::problem::{regularized_objective, Beamformer};
use mpsca::realcplx::{complex_quadratic, embed_quadratic, embed_vector, snr_form, ComplexMatrix, ComplexVector};
use mpsca::rng::rng_from;
use mpsca::select::{lambda_unit, random_feasible, sca_solve, solve_joint};
use mpsca::spmp::{project_ball, project_group_ball, project_simplex_kl, solve_subproblem, SaddleState, SolverConfig};
use mpsca::surrogate::{linearize, surrogate_value};
use mpsca::{BisectionConfig, ScaConfig};
use mpsca_bench::results::{read_results_csv, ResultsDocument, METHOD_SPMP};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SEED: u64 = 2024;
const POWER: f64 = 10.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn cgauss_vec(n: usize, rng: &mut ChaCha8Rng) -> ComplexVector {
    ComplexVector::from_fn(n, |_, _| Complex64::new(gauss(rng), gauss(rng)))
}

fn real_vec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * gauss(rng))
}

/// Feasible point of random radius; about a third have random groups zeroed.
fn feasible_point(n: usize, rng: &mut ChaCha8Rng) -> Beamformer {
    let mut w = random_feasible(n, POWER, rng).into_vector();
    if rng.random_range(0..3) == 0 {
        for j in 0..n {
            if rng.random_bool(0.5) {
                w[j] = 0.0;
                w[j + n] = 0.0;
            }
        }
    }
    let r: f64 = rng.random_range(0.0..=1.0);
    Beamformer::new(w * r).unwrap()
}

fn c1_embedding() -> Outcome {
    let mut rng = rng_from(SEED, &[1]);
    let mut worst: f64 = 0.0;
    for n in [1usize, 4, 16] {
        for _ in 0..1000 {
            let g = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(gauss(&mut rng), gauss(&mut rng)));
            let q = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
            let w = cgauss_vec(n, &mut rng);
            let lhs = complex_quadratic(&q, &w);
            let wb = embed_vector(&w);
            let rhs = wb.dot(&(embed_quadratic(&q).unwrap() * &wb));
            let scale = q.norm() * w.norm_squared();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("3000 pairs at N in {{1,4,16}}, max relative error {worst:.2e} (limit 1e-10)"),
    }
}

fn c2_projections() -> Outcome {
    let mut rng = rng_from(SEED, &[2]);
    let radius = POWER.sqrt();
    let n = 8;
    let (mut feas, mut idem, mut nonexp): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let scale = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-1.0..1.0));
    for _ in 0..10_000 {
        let u = real_vec(2 * n, scale(&mut rng) * radius, &mut rng);
        let v = real_vec(2 * n, scale(&mut rng) * radius, &mut rng);
        let (pu, pv) = (project_ball(&u, radius), project_ball(&v, radius));
        feas = feas.max(pu.norm() - radius);
        idem = idem.max((project_ball(&pu, radius) - &pu).norm());
        nonexp = nonexp.max((&pu - &pv).norm() - (&u - &v).norm());

        let (gu, gv) = (project_group_ball(&u).unwrap(), project_group_ball(&v).unwrap());
        for j in 0..n {
            feas = feas.max(gu[j].hypot(gu[j + n]) - 1.0);
        }
        idem = idem.max((project_group_ball(&gu).unwrap() - &gu).norm());
        nonexp = nonexp.max((&gu - &gv).norm() - (&u - &v).norm());

        let y = DVector::from_fn(6, |_, _| (3.0 * gauss(&mut rng)).exp());
        let py = project_simplex_kl(&y).unwrap();
        feas = feas.max((py.sum() - 1.0).abs());
        if py.iter().any(|&x| x <= 0.0) {
            feas = f64::INFINITY;
        }
        idem = idem.max((project_simplex_kl(&py).unwrap() - &py).amax());
    }
    let pass = feas <= 1e-12 && idem <= 1e-12 && nonexp <= 1e-12;
    Outcome {
        pass,
        detail: format!(
            "10^4 points each (ball, pair balls, simplex): feasibility {feas:.1e}, idempotence {idem:.1e}, expansion {nonexp:.1e} (limit 1e-12)"
        ),
    }
}

fn c3_majorization() -> Outcome {
    let cfg = ChannelModelConfig::new(8, 6, SEED);
    let (mut min_slack, mut worst_tight) = (f64::INFINITY, 0.0f64);
    for i in 0..50u64 {
        let inst = draw_instance(&cfg, i, POWER).unwrap();
        let lambda = [0.0, 0.1, 0.5][i as usize % 3] * lambda_unit(&inst);
        let mut rng = rng_from(SEED, &[3, i]);
        let w_n = random_feasible(8, POWER, &mut rng);
        let model = linearize(&inst, &w_n, lambda).unwrap();
        let at = regularized_objective(&inst, &w_n, lambda).unwrap();
        let tight = (surrogate_value(&model, &w_n).unwrap() - at).abs() / at.abs().max(1.0);
        worst_tight = worst_tight.max(tight);
        for _ in 0..1000 {
            let w = feasible_point(8, &mut rng);
            let slack = surrogate_value(&model, &w).unwrap() - regularized_objective(&inst, &w, lambda).unwrap();
            min_slack = min_slack.min(slack);
        }
    }
    Outcome {
        pass: min_slack >= -1e-9 && worst_tight <= 1e-9,
        detail: format!(
            "50 instances x 1000 points, min slack {min_slack:.2e} (limit -1e-9), tightness {worst_tight:.1e} (limit 1e-9)"
        ),
    }
}

fn c4_gap_decay() -> Outcome {
    let solver = SolverConfig {
        max_iters: 2000,
        gap_tol: Some(f64::INFINITY),
        ..SolverConfig::default()
    };
    let (mut fails, mut worst_ratio, mut worst_growth) = (Vec::new(), 0.0f64, 0.0f64);
    for seed in 0..10u64 {
        let inst = draw_instance(&ChannelModelConfig::new(8, 6, seed), 0, POWER).unwrap();
        let w0 = random_feasible(8, POWER, &mut rng_from(seed, &[]));
        for lam in [0.0, 0.5] {
            let model = linearize(&inst, &w0, lam * lambda_unit(&inst)).unwrap();
            let (_, report) = solve_subproblem(&model, SaddleState::initial(&model, &w0).unwrap(), &solver).unwrap();
            let gap = |t: usize| report.gap_trace.iter().find(|s| s.iteration == t).unwrap().gap;
            let ratio = gap(1000) / gap(100);
            let base = 50.0 * gap(50);
            let growth = report
                .gap_trace
                .iter()
                .filter(|s| s.iteration >= 50)
                .map(|s| s.gap * s.iteration as f64 / base)
                .fold(0.0, f64::max);
            worst_ratio = worst_ratio.max(ratio);
            worst_growth = worst_growth.max(growth);
            if ratio > 0.2 || growth > 10.0 {
                fails.push(format!("seed {seed} lambda {lam}: ratio {ratio:.3}, growth {growth:.2}"));
            }
        }
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!(
            "20 runs (seeds 0-9, lambda in {{0, 0.5}}), worst g(1000)/g(100) {worst_ratio:.3} (limit 0.2), worst gap*T growth {worst_growth:.2}x (limit 10x){}",
            if fails.is_empty() { String::new() } else { format!("; failing: {}", fails.join("; ")) }
        ),
    }
}

fn c5_sca_descent() -> Outcome {
    let cfg = ChannelModelConfig::new(8, 6, SEED);
    let (mut bad_trace, mut bad_step, mut rejected) = (0, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let inst = draw_instance(&cfg, 100 + i, POWER).unwrap();
        let lambda = [0.0, 0.05, 0.2][i as usize % 3] * lambda_unit(&inst);
        let sca = ScaConfig {
            seed: i,
            ..ScaConfig::default()
        };
        let out = sca_solve(&inst, lambda, &sca, None).unwrap();
        if out.objective_trace.windows(2).any(|p| p[1] > p[0]) {
            bad_trace += 1;
        }
        for step in &out.steps {
            let excess = step.candidate_objective - step.objective_before - step.subproblem_gap;
            if step.candidate_objective > step.objective_before {
                rejected += 1;
                worst = worst.max(excess);
                if excess > 0.0 {
                    bad_step += 1;
                }
            }
        }
    }
    Outcome {
        pass: bad_trace == 0 && bad_step == 0,
        detail: format!(
            "50 runs: {bad_trace} non-monotone traces, {rejected} uphill candidates, {bad_step} exceeding their certified gap (worst excess {worst:.2e})"
        ),
    }
}

#[derive(Default)]
struct ExactTally {
    exact: usize,
    total: usize,
    fallback: Vec<String>,
}

impl ExactTally {
    fn record(&mut self, exact: bool, label: String) {
        self.total += 1;
        if exact {
            self.exact += 1;
        } else {
            self.fallback.push(label);
        }
    }
}

fn c6_single_user(tally: &mut ExactTally) -> Outcome {
    let sca = ScaConfig::default();
    let bis = BisectionConfig::default();
    let mut misses = Vec::new();
    let mut runs = 0;
    for trial in 0..100u64 {
        let n = if trial < 50 { 4 } else { 10 };
        let inst = draw_instance(&ChannelModelConfig::new(n, 1, SEED), trial, POWER).unwrap();
        for k in [1, 2, n] {
            runs += 1;
            let r = solve_joint(&inst, k, &sca, &bis).unwrap();
            let o = single_user_optimum(&inst.channels()[0], 1.0, POWER, k).unwrap();
            tally.record(r.exact_k, format!("single-user trial {trial} K={k}"));
            let within = (r.min_snr.linear - o.best_min_snr.linear).abs() <= 0.01 * o.best_min_snr.linear;
            if r.selected != o.best_subset || !within {
                misses.push(format!("trial {trial} N={n} K={k}"));
            }
        }
    }
    Outcome {
        pass: misses.is_empty(),
        detail: format!(
            "{runs} runs (100 instances, N in {{4,10}}, K in {{1,2,N}}): {} match the analytic subset within 1%{}",
            runs - misses.len(),
            if misses.is_empty() { String::new() } else { format!("; misses: {}", misses.join(", ")) }
        ),
    }
}

fn c7_exhaustive(tally: &mut ExactTally) -> Outcome {
    let bis = BisectionConfig::default();
    let cfg = ChannelModelConfig::new(6, 3, SEED);
    let (mut within, mut over, mut runs) = (0, 0, 0);
    let mut worst_db: f64 = 0.0;
    for trial in 0..50u64 {
        let inst = draw_instance(&cfg, trial, POWER).unwrap();
        let sca = ScaConfig {
            seed: trial,
            ..ScaConfig::default()
        };
        for k in [2, 3, 4] {
            runs += 1;
            let r = solve_joint(&inst, k, &sca, &bis).unwrap();
            let o = exhaustive_subsets(&inst, k, &sca, 5, DEFAULT_SUBSET_CAP).unwrap();
            tally.record(r.exact_k, format!("N=6 trial {trial} K={k}"));
            let shortfall = o.best_min_snr.db - r.min_snr.db;
            worst_db = worst_db.max(shortfall);
            if shortfall <= 0.5 {
                within += 1;
            }
            if r.min_snr.linear > o.best_min_snr.linear * (1.0 + 1e-6) {
                over += 1;
            }
        }
    }
    let rate = within as f64 / runs as f64;
    Outcome {
        pass: rate >= 0.8 && over == 0,
        detail: format!(
            "{runs} runs (50 trials x K in {{2,3,4}}): {within} within 0.5 dB ({:.1}%, need 80%), {over} above the oracle, worst shortfall {worst_db:.2} dB",
            100.0 * rate
        ),
    }
}

fn c8_exact_k(tally: &ExactTally) -> Outcome {
    let rate = tally.exact as f64 / tally.total as f64;
    let shown: Vec<&str> = tally.fallback.iter().take(12).map(String::as_str).collect();
    Outcome {
        pass: rate >= 0.9,
        detail: format!(
            "{}/{} runs hit K exactly ({:.1}%, need 90%); fallback used {} times{}",
            tally.exact,
            tally.total,
            100.0 * rate,
            tally.fallback.len(),
            if shown.is_empty() {
                String::new()
            } else {
                format!(
                    ": {}{}",
                    shown.join(", "),
                    if tally.fallback.len() > shown.len() { ", ..." } else { "" }
                )
            }
        ),
    }
}

fn c9_channel_moments() -> Outcome {
    let n = 30;
    let cfg = ChannelModelConfig::new(n, 1, SEED);
    let (mut energy, mut modulus, mut rank_ratio) = (0.0, 0.0f64, 0.0f64);
    let draws = 10_000u64;
    for d in 0..draws {
        let paths = draw_paths(&cfg, &mut user_rng(SEED, d, 0));
        for p in &paths {
            for z in steering_vector(p.angle, n).iter() {
                modulus = modulus.max((z.norm() - 1.0).abs());
            }
        }
        let h = channel_from_paths(n, &paths);
        energy += h.norm_squared();
        let eig = snr_form(&h, 1.0).symmetric_eigenvalues();
        let mut mags: Vec<f64> = eig.iter().map(|x| x.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        rank_ratio = rank_ratio.max(mags[1] / mags[0]);
    }
    let mean = energy / draws as f64;
    let target = (n * n) as f64;
    let rel = (mean - target).abs() / target;
    Outcome {
        pass: rel <= 0.05 && modulus <= 1e-12 && rank_ratio <= 1e-10,
        detail: format!(
            "10^4 draws at N=30: mean |h|^2 {mean:.1} vs {target} ({:.2}% off, limit 5%), steering modulus error {modulus:.1e}, second/first eigenvalue {rank_ratio:.1e}",
            100.0 * rel
        ),
    }
}

fn mpsca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpsca"))
        .args(args)
        .env_remove("MPSCA_WORKERS")
        .output()
        .expect("binary runs")
}

fn c10_full_scale() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let seed = SEED.to_string();
    let started = Instant::now();
    let run = mpsca(&[
        "bench", "--n", "30", "--m", "50", "--power", "10", "--trials", "5", "--k", "5", "--k", "10", "--k",
        "20", "--seed", &seed, "--out", out,
    ]);
    let secs = started.elapsed().as_secs_f64();
    if !run.status.success() {
        return Outcome {
            pass: false,
            detail: format!("bench exited with {}: {}", run.status, String::from_utf8_lossy(&run.stderr)),
        };
    }
    let csv_rows = read_results_csv(&dir.path().join("results.csv"));
    let doc: Result<ResultsDocument, _> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap());
    let (csv_rows, doc) = match (csv_rows, doc) {
        (Ok(c), Ok(d)) => (c, d),
        (c, d) => {
            return Outcome {
                pass: false,
                detail: format!("malformed output: csv {:?}, json {:?}", c.err(), d.err()),
            }
        }
    };
    let summary_ok = fs::read_to_string(dir.path().join("summary.csv"))
        .map(|s| s.starts_with("method,k,rows,mean_snr_db,mean_time_ms\n") && s.lines().count() == 4)
        .unwrap_or(false);
    let well_formed =
        csv_rows.len() == 15 && csv_rows == doc.rows && doc.rows.iter().all(|r| r.min_snr_db.is_some()) && summary_ok;
    let means: Vec<(usize, f64)> = doc
        .summary
        .iter()
        .filter(|s| s.method == METHOD_SPMP)
        .map(|s| (s.k, s.mean_snr_db.unwrap_or(f64::NAN)))
        .collect();
    let monotone = means.len() == 3 && means.windows(2).all(|p| p[1].1 >= p[0].1 - 0.3);
    let listed: Vec<String> = means.iter().map(|(k, m)| format!("K={k}: {m:.2} dB")).collect();
    Outcome {
        pass: well_formed && monotone,
        detail: format!(
            "N=30 M=50 5 trials in {secs:.0} s, well-formed {well_formed}, means {} (monotone within 0.3 dB: {monotone})",
            listed.join(", ")
        ),
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c11_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let inst_dir = root.path().join("inst");
    let bench_dir = root.path().join("bench");
    let (inst, bench) = (inst_dir.to_str().unwrap(), bench_dir.to_str().unwrap());
    let inst0 = inst_dir.join("instance_0000.json");
    let inst0 = inst0.to_str().unwrap();
    let gen: &[&str] = &["gen", "--n", "6", "--m", "3", "--trials", "3", "--seed", "11", "--out", inst];
    let bench_args = |workers: &'static str| -> Vec<&str> {
        vec![
            "bench", "--n", "6", "--m", "3", "--trials", "3", "--k", "2-4", "--oracle", "--seed", "11", "--workers",
            workers, "--out", bench,
        ]
    };
    let mut diffs = Vec::new();
    let mut check = |name: &str, a: Vec<(String, Vec<u8>)>, b: Vec<(String, Vec<u8>)>| {
        if a != b || a.is_empty() {
            diffs.push(name.to_string());
        }
    };

    mpsca(gen);
    let first = snapshot(&inst_dir);
    mpsca(gen);
    check("gen", first, snapshot(&inst_dir));

    for cmd in ["solve", "oracle"] {
        let args = [cmd, "--instance", inst0, "--k", "3", "--seed", "11"];
        let a = mpsca(&args).stdout;
        let b = mpsca(&args).stdout;
        check(cmd, vec![(cmd.into(), a)], vec![(cmd.into(), b)]);
    }

    mpsca(&bench_args("1"));
    let first = snapshot(&bench_dir);
    mpsca(&bench_args("1"));
    check("bench", first.clone(), snapshot(&bench_dir));
    mpsca(&bench_args("3"));
    let csv_only = |files: Vec<(String, Vec<u8>)>| files.into_iter().filter(|(n, _)| n.ends_with(".csv")).collect();
    check("bench csv across worker counts", csv_only(first), csv_only(snapshot(&bench_dir)));

    Outcome {
        pass: diffs.is_empty(),
        detail: if diffs.is_empty() {
            "gen, solve, oracle and bench reruns are byte-identical; bench CSVs identical for 1 and 3 workers".into()
        } else {
            format!("differences in: {}", diffs.join(", "))
        },
    }
}

fn main() {
    let started = Instant::now();
    let mut tally = ExactTally::default();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "[{}] {id:>2}. {name}: {} ({secs:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };
    run(1, "embedding equivalence", &mut c1_embedding);
    run(2, "projection suite", &mut c2_projections);
    run(3, "surrogate majorization and tightness", &mut c3_majorization);
    run(4, "mirror-prox gap decay", &mut c4_gap_decay);
    run(5, "SCA monotone descent", &mut c5_sca_descent);
    run(6, "single-user analytic oracle", &mut || c6_single_user(&mut tally));
    run(7, "exhaustive-subset comparison", &mut || c7_exhaustive(&mut tally));
    run(8, "exact-K selection", &mut || c8_exact_k(&tally));
    run(9, "channel-model moments", &mut c9_channel_moments);
    run(10, "full-scale smoke run", &mut c10_full_scale);
    run(11, "determinism", &mut c11_determinism);

    let passed = results.iter().filter(|r| r.2.pass).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0} s",
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if passed != results.len() {
        std::process::exit(1);
    }
}
