//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fail.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pathlet_core::baselines::middlepoint_concat;
use pathlet_core::concat::{brute_force_concat, construct_path, ConcatError};
use pathlet_core::harness::io::concat_dump;
use pathlet_core::harness::{
    install_stage, run_experiment, run_pipeline, sampler, simulate_stage, ConcatRecord, Experiment, ExperimentConfig,
};
use pathlet_core::lagrangian::{one_round_selection, SolverConfig, TraceRow, BETA1, DEFAULT_BETA_FLOOR, STALL_HALVE};
use pathlet_core::selection::{check_feasible, exact_solve, objective, ExactLimits, SelectionInstance};
use pathlet_core::workload::DesiredPathSet;
use pathlet_core::{NodeId, Path, Pathlet, PathletSet, Pid, Topology};

const WORKED_RUNTIME: Duration = Duration::from_secs(1);
const SELECTION_INSTANCES: usize = 200;
const SELECTION_RUNTIME: Duration = Duration::from_secs(120);
const CONCAT_INSTANCES: usize = 500;
const CONCAT_MAX_LEN: usize = 8;
const SUBSET_START: &str = "Chicago,IL";
const SUBSET_NODES: usize = 30;
const SUBSET_SEED: u64 = 42;
const PRE_WITHIN_4: f64 = 0.95;
const MIN_CORE_SAVING: f64 = 50.0;
const MAX_GROWTH: f64 = 0.10;
const MIDDLEPOINT_SEGMENTS: usize = 3;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn load_cfg(name: &str) -> ExperimentConfig {
    let dir = fixtures();
    ExperimentConfig::from_kv(&fs::read_to_string(dir.join(name)).unwrap(), &dir).unwrap()
}

fn names(t: &Topology, s: &str) -> Path {
    Path::from_names(t, &s.split_whitespace().collect::<Vec<_>>()).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Experiments run so far, for the round-trip and trace checks.
#[derive(Default)]
struct Runs {
    experiments: Vec<(String, Experiment)>,
    traces: Vec<(String, Vec<TraceRow>)>,
}

impl Runs {
    fn keep(&mut self, name: &str, exp: Experiment) -> &Experiment {
        for r in &exp.selection.rounds {
            self.traces.push((format!("{name} round {}", r.round), r.trace.clone()));
        }
        self.experiments.push((name.to_string(), exp));
        &self.experiments.last().unwrap().1
    }
}

fn c1_worked(runs: &mut Runs) -> Outcome {
    let cfg = load_cfg("worked.cfg");
    let start = Instant::now();
    let exp = run_experiment(&cfg).unwrap();
    let took = start.elapsed();
    let exp = runs.keep("worked", exp);
    let r = &exp.report;
    let two = r.labels_post.iter().all(|&l| l == Some(2));
    let pass = r.success == 1.0 && two && r.intermediate_saving == Some(50.0) && took < WORKED_RUNTIME;
    outcome(
        pass,
        format!(
            "success {} labels {:?} intermediate saving {:?}% in {:.3}s",
            r.success,
            r.labels_post,
            r.intermediate_saving,
            took.as_secs_f64()
        ),
    )
}

/// Connected random graph, paths from random simple walks, candidates from
/// their sub-paths plus a few foreign walks.
fn random_instance(rng: &mut ChaCha8Rng) -> SelectionInstance {
    let n = rng.gen_range(4..=10);
    let mut links = Vec::new();
    for v in 1..n {
        links.push((rng.gen_range(0..v), v));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            links.push((a, b));
        }
    }
    let text: String = links.iter().map(|(a, b)| format!("n{a} n{b}\n")).collect();
    let t = Topology::parse(&text).unwrap();

    let walk = |rng: &mut ChaCha8Rng, max_links: usize| -> Option<Path> {
        let mut nodes = vec![NodeId(rng.gen_range(0..n as u32))];
        let want = rng.gen_range(1..=max_links);
        while nodes.len() <= want {
            let here = *nodes.last().unwrap();
            let next: Vec<NodeId> = t
                .successors(here)
                .iter()
                .copied()
                .filter(|v| !nodes.contains(v))
                .collect();
            match next.choose(rng) {
                Some(&v) => nodes.push(v),
                None => break,
            }
        }
        (nodes.len() >= 2).then(|| Path::new(&t, nodes).unwrap())
    };

    let mut paths = BTreeSet::new();
    for _ in 0..rng.gen_range(1..=8) {
        if let Some(p) = walk(rng, 5) {
            paths.insert(p);
        }
    }
    let paths: Vec<Path> = paths.into_iter().collect();
    let mut cands = BTreeSet::new();
    let budget = rng.gen_range(3..=15);
    let mut tries = 0;
    while cands.len() < budget && tries < 200 {
        tries += 1;
        if rng.gen_bool(0.15) {
            if let Some(q) = walk(rng, 3) {
                cands.insert(q);
            }
            continue;
        }
        let p = &paths[rng.gen_range(0..paths.len())];
        let a = rng.gen_range(0..p.len());
        let b = rng.gen_range(a + 1..=(a + 3).min(p.len()));
        cands.insert(p.slice(a, b));
    }
    let candidates = cands.into_iter().map(Pathlet::concrete).collect();
    let caps = (0..n).map(|_| rng.gen_range(1..=5)).collect();
    SelectionInstance::new(paths, candidates, caps, rng.gen_range(2..=3)).unwrap()
}

fn c2_selection(runs: &mut Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let config = SolverConfig::default();
    let mut bad = Vec::new();
    let mut gaps = 0;
    for i in 0..SELECTION_INSTANCES {
        let inst = random_instance(&mut rng);
        let r = one_round_selection(&inst, &config);
        let exact = objective(&exact_solve(&inst, ExactLimits::default()).unwrap()) as f64;
        let got = objective(&r.best) as f64;
        let feasible = check_feasible(&inst, &r.best).unwrap().is_feasible();
        if !(exact <= got && r.z_lb <= exact && exact <= r.z_up && feasible) {
            bad.push(format!(
                "#{i}: exact {exact} got {got} lb {} up {} feasible {feasible}",
                r.z_lb, r.z_up
            ));
        }
        if got > exact {
            gaps += 1;
        }
        runs.traces.push((format!("random instance {i}"), r.trace));
    }
    let took = start.elapsed();
    outcome(
        bad.is_empty() && took < SELECTION_RUNTIME,
        format!(
            "{SELECTION_INSTANCES} instances, {} bound or feasibility failures, {gaps} above optimum, {:.1}s{}",
            bad.len(),
            took.as_secs_f64(),
            bad.first().map(|b| format!(" (first {b})")).unwrap_or_default()
        ),
    )
}

fn c3_concat() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = Vec::new();
    let mut solvable = 0;
    for i in 0..CONCAT_INSTANCES {
        // A line of l links plus a detour through x, so some pathlets lie off the path.
        let l = rng.gen_range(1..=CONCAT_MAX_LEN);
        let mut text: String = (0..l).map(|j| format!("v{j} v{}\n", j + 1)).collect();
        text.insert_str(0, "directed\n");
        text.push_str(&format!("v0 x\nx v{}\n", l));
        let t = Topology::parse(&text).unwrap();
        let path = Path::new(&t, (0..=l).map(|j| t.id(&format!("v{j}")).unwrap()).collect()).unwrap();
        let mut routes = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=2 * l + 2) {
            let a = rng.gen_range(0..l);
            let b = rng.gen_range(a + 1..=l);
            routes.insert(path.slice(a, b));
        }
        if rng.gen_bool(0.3) {
            routes.insert(names(&t, &format!("v0 x v{l}")));
        }
        let mut set = PathletSet::from_routes(routes);
        let oracle = brute_force_concat(&set, &path).unwrap().map(|c| c.flat_count());
        let ours = match construct_path(&mut set, &path, 3) {
            Ok(c) => Some(c.flat_count()),
            Err(ConcatError::NotConcatenable(_)) => None,
            Err(e) => panic!("instance {i}: {e}"),
        };
        solvable += oracle.is_some() as usize;
        if ours != oracle {
            mismatches.push(format!("#{i}: ours {ours:?} oracle {oracle:?}"));
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "{CONCAT_INSTANCES} instances ({solvable} concatenable), {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first {m})")).unwrap_or_default()
        ),
    )
}

/// Five-link chain with pids fixed to 1..=7 so the ingress stack reads (1,6,7).
fn chain_fixed_pids() -> Result<(), String> {
    let t = Topology::parse(&fs::read_to_string(fixtures().join("chain.txt")).unwrap()).unwrap();
    let path = names(&t, "u1 u2 u3 u4 u5 u6");
    let mut set = PathletSet::from_routes((0..5).map(|i| path.slice(i, i + 1)));
    let c = construct_path(&mut set, &path, 3).map_err(|e| e.to_string())?;
    let pids: Vec<Pid> = (1..=set.len() as u32).map(Pid).collect();
    set.apply_pids(&pids);
    let labels = c.label_list(&set).ok_or("labels unassigned")?;
    if labels != [Pid(1), Pid(6), Pid(7)] {
        return Err(format!("ingress labels {labels:?}"));
    }
    let records = vec![ConcatRecord::new(0, "f7", &path, Some(&c))];
    let table = install_stage(&t, &set, &records).map_err(|e| e.to_string())?;
    let sims = simulate_stage(&t, &table, &records);
    match sims.as_slice() {
        [s] if s.ok && s.trace == path.nodes() => Ok(()),
        other => Err(format!("replay {other:?}; {}", concat_dump(&t, &set, &records))),
    }
}

fn c4_round_trip(runs: &Runs) -> Outcome {
    let mut failures = Vec::new();
    let mut replayed = 0;
    let mut nested = 0;
    for (name, exp) in &runs.experiments {
        let concatenated = exp.records.iter().filter(|r| !r.parts.is_empty()).count();
        nested += exp.records.iter().filter(|r| r.labels_post < r.labels_pre).count();
        replayed += exp.sims.len();
        if exp.sims.len() != concatenated {
            failures.push(format!("{name}: {} replays for {concatenated} paths", exp.sims.len()));
        }
        if let Some(s) = exp
            .sims
            .iter()
            .find(|s| !s.ok || s.trace != exp.records[s.index].path.nodes())
        {
            failures.push(format!("{name}: {} {}", s.tag, s.error));
        }
    }
    if let Err(e) = chain_fixed_pids() {
        failures.push(format!("chain pids (1,6,7): {e}"));
    }
    outcome(
        failures.is_empty() && nested > 0,
        format!(
            "{} experiments, {replayed} replays, {nested} nested paths, fixed-pid (1,6,7) case{}",
            runs.experiments.len(),
            failures
                .first()
                .map(|f| format!("; first failure {f}"))
                .unwrap_or_default()
        ),
    )
}

fn subset_config(dir: &FsPath, m: usize) -> ExperimentConfig {
    let isp = Topology::parse(&fs::read_to_string(fixtures().join("isp60.txt")).unwrap()).unwrap();
    let sub = pathlet_core::harness::topo_subset(&isp, SUBSET_START, SUBSET_NODES).unwrap();
    let file = dir.join("subset.txt");
    fs::write(&file, sub.to_text()).unwrap();
    let mut cfg = ExperimentConfig::new(file);
    cfg.m = m;
    cfg.seed = SUBSET_SEED;
    cfg
}

fn c5_labels(exp: &Experiment) -> Outcome {
    let r = &exp.report;
    let post = r.post_within(3);
    let pre = r.pre_within(4);
    let paths = exp.desired.paths();
    let hop_ok =
        paths.len() == r.hop_sr_labels.len() && paths.iter().zip(&r.hop_sr_labels).all(|(p, &h)| h == p.len() + 1);
    outcome(
        post == 1.0 && pre >= PRE_WITHIN_4 && hop_ok,
        format!(
            "{} nodes, {} paths: post <= 3 for {:.2}%, pre <= 4 for {:.2}% (need {:.0}%), hop-sr = l+1 {}",
            r.nodes,
            r.paths,
            100.0 * post,
            100.0 * pre,
            100.0 * PRE_WITHIN_4,
            if hop_ok { "holds" } else { "broken" }
        ),
    )
}

fn c6_rules(m2: &Experiment, m4: &Experiment) -> Outcome {
    let (a, b) = (&m2.report, &m4.report);
    let saving = a.r_avgsave.unwrap_or(f64::NAN);
    let growth = (b.avg_core - a.avg_core) / a.avg_core;
    outcome(
        saving >= MIN_CORE_SAVING && growth <= MAX_GROWTH,
        format!(
            "avg core {:.3} vs hop-by-hop {:.3}: saving {saving:.2}% (need {MIN_CORE_SAVING}%); \
             m=2 -> m=4 paths {} -> {}, avg core {:.3} -> {:.3}: growth {:.2}% (limit {:.0}%)",
            a.avg_core,
            a.avg_hbh,
            a.paths,
            b.paths,
            a.avg_core,
            b.avg_core,
            100.0 * growth,
            100.0 * MAX_GROWTH
        ),
    )
}

/// Two rails joined by rungs; the desired path zigzags between them, so
/// every shortest-path waypoint split needs many segments.
fn ladder() -> (Topology, Path) {
    let n = 8;
    let mut text = String::new();
    for i in 0..n {
        if i + 1 < n {
            text += &format!("t{i} t{}\nb{i} b{}\n", i + 1, i + 1);
        }
        text += &format!("t{i} b{i}\n");
    }
    let t = Topology::parse(&text).unwrap();
    let path = names(&t, "t0 t1 b1 b2 t2 t3 b3 b4 t4 t5 b5 b6 t6 t7");
    (t, path)
}

fn c7_middlepoint(runs: &mut Runs) -> Outcome {
    let (t, path) = ladder();
    let mp = middlepoint_concat(&t, &path, MIDDLEPOINT_SEGMENTS);
    let cfg = ExperimentConfig::new("unused");
    let desired = DesiredPathSet::from_paths(vec![path]);
    let exp = run_pipeline(&t, desired, &cfg, &mut sampler(&cfg)).unwrap();
    let exp = runs.keep("ladder", exp);
    let ours = exp.report.labels_post[0];
    outcome(
        !mp.success && exp.report.success == 1.0,
        format!(
            "middlepoint needs {} segments (limit {MIDDLEPOINT_SEGMENTS}), pathlets use {ours:?} labels",
            mp.segments
        ),
    )
}

fn c8_traces(runs: &Runs) -> Outcome {
    let mut rows = 0;
    let mut halvings = 0;
    let mut broken = Vec::new();
    for (name, trace) in &runs.traces {
        let mut prev: Option<&TraceRow> = None;
        for row in trace {
            rows += 1;
            let prev_beta = prev.map_or(BETA1, |p| p.beta);
            let halve = row.stall >= STALL_HALVE && prev_beta / 2.0 >= DEFAULT_BETA_FLOOR;
            let want_beta = if halve { prev_beta / 2.0 } else { prev_beta };
            halvings += halve as usize;
            let mut why = Vec::new();
            if row.beta != want_beta {
                why.push(format!("beta {} expected {want_beta}", row.beta));
            }
            if row.lambda_min < 0.0 {
                why.push(format!("lambda {}", row.lambda_min));
            }
            if let Some(p) = prev {
                if row.z_up > p.z_up {
                    why.push(format!("z_UP rose {} -> {}", p.z_up, row.z_up));
                }
                if row.z_lb < p.z_lb {
                    why.push(format!("z_LB fell {} -> {}", p.z_lb, row.z_lb));
                }
            }
            if !why.is_empty() {
                broken.push(format!("{name} k={}: {}", row.k, why.join(", ")));
            }
            prev = Some(row);
        }
    }
    outcome(
        broken.is_empty() && halvings > 0,
        format!(
            "{} traces, {rows} iterations, {halvings} beta halvings, {} violations{}",
            runs.traces.len(),
            broken.len(),
            broken.first().map(|b| format!(" (first {b})")).unwrap_or_default()
        ),
    )
}

fn csv_files(dir: &FsPath) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(csv_files(&p));
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn c9_determinism(runs: &mut Runs, scratch: &FsPath) -> Outcome {
    let mut cases: Vec<(&str, ExperimentConfig)> =
        vec![("worked", load_cfg("worked.cfg")), ("chain", load_cfg("chain.cfg"))];
    let mut sub = subset_config(scratch, 2);
    sub.seed = 7;
    cases.push(("subset seed 7", sub));
    let mut compared = 0;
    let mut diffs = Vec::new();
    for (name, cfg) in cases {
        let mut dirs = Vec::new();
        for rep in 0..2 {
            let dir = scratch.join(format!("{}-{rep}", name.replace(' ', "_")));
            let mut c = cfg.clone();
            c.out_dir = Some(dir.clone());
            let exp = run_experiment(&c).unwrap();
            if rep == 0 {
                runs.keep(name, exp);
            }
            dirs.push(dir);
        }
        let (a, b) = (csv_files(&dirs[0]), csv_files(&dirs[1]));
        let rel = |v: &[PathBuf], d: &FsPath| {
            v.iter()
                .map(|p| p.strip_prefix(d).unwrap().to_path_buf())
                .collect::<Vec<_>>()
        };
        if rel(&a, &dirs[0]) != rel(&b, &dirs[1]) {
            diffs.push(format!("{name}: file lists differ"));
            continue;
        }
        for (x, y) in a.iter().zip(&b) {
            compared += 1;
            if fs::read(x).unwrap() != fs::read(y).unwrap() {
                diffs.push(format!("{name}: {}", x.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    outcome(
        diffs.is_empty() && compared > 0,
        format!(
            "{compared} CSV files compared across repeated runs, {} differ {:?}",
            diffs.len(),
            diffs
        ),
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let mut runs = Runs::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    results.push((1, "worked example", c1_worked(&mut runs)));
    results.push((2, "selection vs exact oracle", c2_selection(&mut runs)));
    results.push((3, "concatenation vs brute force", c3_concat()));

    let m2 = run_experiment(&subset_config(scratch.path(), 2)).unwrap();
    let m4 = run_experiment(&subset_config(scratch.path(), 4)).unwrap();
    results.push((5, "label bound", c5_labels(&m2)));
    results.push((6, "rule saving", c6_rules(&m2, &m4)));
    runs.keep("subset m=2", m2);
    runs.keep("subset m=4", m4);

    results.push((7, "middlepoint gap", c7_middlepoint(&mut runs)));
    results.push((9, "determinism", c9_determinism(&mut runs, scratch.path())));
    runs.keep("chain harness", run_experiment(&load_cfg("chain.cfg")).unwrap());
    results.push((4, "forwarding round trip", c4_round_trip(&runs)));
    results.push((8, "solver traces", c8_traces(&runs)));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, o) in &results {
        println!(
            "criterion {n} ({name}): {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += !o.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
