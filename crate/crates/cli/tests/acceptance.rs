//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Seeds are pinned so every line is reproducible.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dsclust_cli::bench::{run_bench, BenchConfig};
use dsclust_cli::frames::{self, parse_pgm};
use dsclust_cli::solve::{self, Method, Problem, RunRecord, SolveOptions};
use dsclust_core::evidence::{
    combine_conflict, metaconflict, pairwise_conflict, weight_of_conflict, EvidenceSet, FocalSet,
    Frame, SimpleSupport,
};
use dsclust_core::lattice::{
    canonical_partition, conflict_probability, conflict_probability_terms,
    generate_lattice_problem, ProblemSpec,
};
use dsclust_core::neural::{self, NetParams, NetState};
use dsclust_core::oracle::brute_force_min;
use dsclust_core::partition::{best_transfer, is_favorable, iterative_optimize, Partition};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BASE_SEED: u64 = 2;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(started: Instant, budget: Duration, detail: String) -> Outcome {
    let took = started.elapsed();
    if took <= budget {
        Ok(format!("{detail}; {:.2}s", took.as_secs_f64()))
    } else {
        Err(format!(
            "{detail}; took {:.2}s, budget {:.0}s",
            took.as_secs_f64(),
            budget.as_secs_f64()
        ))
    }
}

fn bench(sizes: &[usize], methods: &[Method], runs: u64) -> Vec<RunRecord> {
    let config = BenchConfig {
        sizes: sizes.to_vec(),
        methods: methods.to_vec(),
        runs,
        seed: BASE_SEED,
        options: SolveOptions::default(),
    };
    run_bench(&config, |_| {}).expect("lattice sizes are valid")
}

fn mcfs(records: &[RunRecord], size: usize, method: Method) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.size == size && r.method == method)
        .map(|r| r.mcf.expect("solver succeeded"))
        .collect()
}

fn best(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn canonical_optimum() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 3..=7 {
        let es =
            generate_lattice_problem(&ProblemSpec::new(n, BASE_SEED)).map_err(|e| e.to_string())?;
        let p = canonical_partition(&es, n).map_err(|e| e.to_string())?;
        worst = worst.max(p.mcf());
    }
    check(
        worst < 1e-12,
        format!("max canonical Mcf over n=3..7 is {worst:e}"),
    )?;
    within_budget(
        started,
        Duration::from_secs(1),
        format!("max canonical Mcf {worst:e}"),
    )
}

fn oracle_agreement() -> Outcome {
    let started = Instant::now();
    let mut notes = Vec::new();
    for (n, expected) in [(2usize, 8u64), (3, 2187)] {
        let es = generate_lattice_problem(&ProblemSpec::new(n, BASE_SEED)).unwrap();
        let oracle = brute_force_min(&es, n).map_err(|e| e.to_string())?;
        check(
            oracle.min_mcf.abs() < 1e-12 && oracle.evaluated == expected,
            format!(
                "n={n}: oracle min {} over {} assignments",
                oracle.min_mcf, oracle.evaluated
            ),
        )?;
        for seed in 0..10 {
            for method in [Method::Iterative, Method::Neural] {
                let out = solve::solve(
                    Problem::Given(&es),
                    method,
                    seed,
                    seed,
                    &SolveOptions::default(),
                )
                .map_err(|e| e.to_string())?;
                let mcf = out.record.mcf.ok_or("solver failed")?;
                check(
                    mcf >= oracle.min_mcf - 1e-12,
                    format!(
                        "n={n} {method} seed {seed}: {mcf} below oracle {}",
                        oracle.min_mcf
                    ),
                )?;
            }
        }
        notes.push(format!("n={n} min 0 over {expected}"));
    }
    within_budget(started, Duration::from_secs(5), notes.join(", "))
}

fn iterative_quality() -> Outcome {
    let records = bench(&[3, 4, 5, 6], &[Method::Iterative], 10);
    let mut notes = Vec::new();
    let mut ok = true;
    for n in 3..=6 {
        let values = mcfs(&records, n, Method::Iterative);
        let (b, m) = (best(&values), mean(&values));
        ok &= b < 1e-9;
        ok &= match n {
            3 => m <= 0.02,
            4 => m <= 0.05,
            _ => true,
        };
        notes.push(format!("n={n} best {b:.2e} mean {m:.4}"));
    }
    check(ok, notes.join(", "))
}

fn neural_quality() -> Outcome {
    let records = bench(&[3, 4, 5, 6, 7], &[Method::Neural], 10);
    let reference = [0.016, 0.059, 0.076, 0.398, 0.856];
    let mut notes = Vec::new();
    let mut ok = true;
    for n in 3..=7 {
        let values = mcfs(&records, n, Method::Neural);
        let b = best(&values);
        ok &= match n {
            3 | 4 => b < 1e-6,
            5 | 6 => b < 0.1,
            _ => true,
        };
        notes.push(format!(
            "n={n} best {b:.4} mean {:.3} (ref {})",
            mean(&values),
            reference[n - 3]
        ));
    }
    check(ok, notes.join(", "))
}

fn time_crossover() -> Outcome {
    let records = bench(&[7], &[Method::Iterative, Method::Neural], 3);
    let total = |method| -> f64 {
        records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.wall_ms)
            .sum()
    };
    let (it, nn) = (total(Method::Iterative), total(Method::Neural));
    check(
        nn < it,
        format!("n=7, 3 problems: neural {nn:.1} ms, iterative {it:.1} ms"),
    )
}

/// Ordered pairs of distinct nonempty subsets of an `n`-set that are disjoint,
/// counted one pair at a time.
fn enumerate_disjoint_pairs(n: usize) -> (u64, u64) {
    let full = (1u32 << n) - 1;
    let (mut disjoint, mut total) = (0, 0);
    for a in 1..=full {
        for b in 1..=full {
            if a != b {
                total += 1;
                if a & b == 0 {
                    disjoint += 1;
                }
            }
        }
    }
    (disjoint, total)
}

fn combinatorics() -> Outcome {
    let started = Instant::now();
    let p6 = conflict_probability(6);
    check(
        conflict_probability_terms(6) == (602, 3906) && (*p6.numer(), *p6.denom()) == (43, 279),
        format!("P(6) = {p6}"),
    )?;
    for n in 2..=8 {
        let (disjoint, total) = enumerate_disjoint_pairs(n);
        let p = conflict_probability(n);
        check(
            disjoint * p.denom() == total * p.numer(),
            format!("n={n}: formula {p} vs enumeration {disjoint}/{total}"),
        )?;
    }
    let value = 602.0 / 3906.0;
    check(
        (value - 0.152f64).abs() < 0.005,
        format!("P(6) = {value:.5} vs printed 0.152"),
    )?;

    let es = generate_lattice_problem(&ProblemSpec::new(6, BASE_SEED)).unwrap();
    let items = es.items();
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED);
    let (mut hits, mut sum, mut sum_sq) = (0u64, 0.0, 0.0);
    for _ in 0..draws {
        let pair: Vec<&SimpleSupport> = items.choose_multiple(&mut rng, 2).collect();
        if pair[0].focal().is_disjoint(pair[1].focal()) {
            hits += 1;
        }
        // Fresh masses per draw: the expectation is over the mass distribution.
        let x = support(pair[0].focal().bits(), rng.gen_range(0.001..=0.999));
        let y = support(pair[1].focal().bits(), rng.gen_range(0.001..=0.999));
        let c = pairwise_conflict(&x, &y);
        sum += c;
        sum_sq += c * c;
    }
    let freq = hits as f64 / draws as f64;
    let se = (value * (1.0 - value) / draws as f64).sqrt();
    check(
        (freq - value).abs() <= 3.0 * se,
        format!(
            "sampled conflict frequency {freq:.5} vs {value:.5} (3 SE = {:.5})",
            3.0 * se
        ),
    )?;

    // Random pairs: expected mean 0.25 * P(6), printed as 0.038.
    let mean_c = sum / draws as f64;
    let se_c = ((sum_sq / draws as f64 - mean_c * mean_c) / draws as f64).sqrt();
    check(
        (mean_c - 0.25 * value).abs() <= 3.0 * se_c
            && (mean_c - 0.038).abs() <= 0.0005 + 3.0 * se_c,
        format!("mean pair conflict {mean_c:.5} (3 SE = {:.5})", 3.0 * se_c),
    )?;

    // Known conflicting pairs: fresh masses on disjoint focal sets.
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let (a, b) = loop {
            let a = rng.gen_range(1u32..64);
            let b = rng.gen_range(1u32..64);
            if a & b == 0 {
                break (a, b);
            }
        };
        let x = SimpleSupport::new(
            FocalSet::from_bits(a).unwrap(),
            rng.gen_range(0.001..=0.999),
        )
        .unwrap();
        let y = SimpleSupport::new(
            FocalSet::from_bits(b).unwrap(),
            rng.gen_range(0.001..=0.999),
        )
        .unwrap();
        let c = pairwise_conflict(&x, &y);
        sum += c;
        sum_sq += c * c;
    }
    let mean_k = sum / draws as f64;
    let se_k = ((sum_sq / draws as f64 - mean_k * mean_k) / draws as f64).sqrt();
    check(
        (mean_k - 0.25).abs() <= 3.0 * se_k,
        format!(
            "mean conflicting-pair conflict {mean_k:.4} (3 SE = {:.4})",
            3.0 * se_k
        ),
    )?;
    within_budget(
        started,
        Duration::from_secs(10),
        format!(
            "P(6) = 602/3906, enumeration n<=8, freq {freq:.4}, means {mean_c:.4} / {mean_k:.4}"
        ),
    )
}

fn support(bits: u32, mass: f64) -> SimpleSupport {
    SimpleSupport::new(FocalSet::from_bits(bits).unwrap(), mass).unwrap()
}

fn random_set(width: usize, len: usize) -> impl Strategy<Value = EvidenceSet> {
    let full = (1u32 << width) - 1;
    prop::collection::vec((1..=full, 0.001f64..0.999), len).prop_map(move |items| {
        let items = items.into_iter().map(|(b, m)| support(b, m)).collect();
        EvidenceSet::new(Frame::new(width).unwrap(), items).unwrap()
    })
}

fn scenario() -> impl Strategy<Value = (EvidenceSet, usize, Vec<usize>, usize, usize)> {
    (2usize..=4, 3usize..=5, 2usize..=10).prop_flat_map(|(r, width, len)| {
        (
            random_set(width, len),
            Just(r),
            prop::collection::vec(0..r, len),
            0..len,
            1..r,
        )
    })
}

fn run_property<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(
            proptest::test_runner::RngAlgorithm::ChaCha,
        ),
    );
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn property_suites() -> Outcome {
    let started = Instant::now();
    run_property(
        "metaconflict identity",
        500,
        (0.0f64..1.0, prop::collection::vec(0.0f64..1.0, 0..8)),
        |(c0, cs)| {
            let survival = (1.0 - c0) * cs.iter().map(|c| 1.0 - c).product::<f64>();
            prop_assert!((1.0 - metaconflict(c0, &cs).unwrap() - survival).abs() <= 1e-12);
            Ok(())
        },
    )?;
    run_property(
        "weight additivity",
        500,
        (0.0f64..=0.99, 0.0f64..=0.99),
        |(a, b)| {
            let joint = weight_of_conflict(1.0 - (1.0 - a) * (1.0 - b)).unwrap();
            let sum = weight_of_conflict(a).unwrap() + weight_of_conflict(b).unwrap();
            prop_assert!((joint - sum).abs() <= 1e-9);
            Ok(())
        },
    )?;
    run_property(
        "permutation invariance",
        300,
        (random_set(4, 6), any::<u64>()),
        |(es, seed)| {
            let mut shuffled = es.items().to_vec();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(
                (combine_conflict(es.items()) - combine_conflict(&shuffled)).abs() <= 1e-12
            );
            Ok(())
        },
    )?;
    run_property(
        "favorability equivalence",
        1000,
        scenario(),
        |(es, r, assignment, q, shift)| {
            let p = Partition::new(&es, assignment, r).unwrap();
            let target = (p.cluster_of(q) + shift) % r;
            let m = p.evaluate_transfer(q, target).unwrap();
            let mut moved = p.assignment().to_vec();
            moved[q] = target;
            let direct = Partition::new(&es, moved, r).unwrap().mcf();
            prop_assert_eq!(is_favorable(&p, &m), direct < p.mcf() - 1e-15);
            Ok(())
        },
    )?;
    run_property(
        "monotone descent",
        200,
        scenario(),
        |(es, r, assignment, _, _)| {
            let start = Partition::new(&es, assignment, r).unwrap();
            let mut previous = start.mcf();
            let out = iterative_optimize(start);
            for step in &out.trace {
                prop_assert!(step.mcf < previous);
                previous = step.mcf;
            }
            prop_assert!(best_transfer(&out.partition).is_none());
            Ok(())
        },
    )?;
    run_property(
        "V range and freeze permanence",
        40,
        (3usize..=5, any::<u64>(), any::<u64>()),
        |(n, pseed, nseed)| {
            let es = generate_lattice_problem(&ProblemSpec::new(n, pseed)).unwrap();
            let params = neural::scale_params(&NetParams::default(), es.len(), n);
            let mut state = neural::init_state(es.len(), n, &params, nseed).unwrap();
            for _ in 0..200 {
                let next = neural::step(&state, &es, &params).unwrap();
                prop_assert!(next.outputs().iter().all(|v| (0.0..=1.0).contains(v)));
                for m in (0..es.len()).filter(|&m| state.is_frozen(m)) {
                    prop_assert!(next.is_frozen(m));
                    prop_assert_eq!(next.output_row(m), state.output_row(m));
                }
                state = next;
            }
            Ok(())
        },
    )?;
    run_property(
        "geometric contraction",
        200,
        (2usize..40, 2usize..8),
        |(rows, cols)| {
            let es = EvidenceSet::new(Frame::new(1).unwrap(), vec![support(1, 0.5); rows]).unwrap();
            let params = NetParams::default();
            let u00 = params.u0 * (2.0 / cols as f64 - 1.0).atanh();
            let state =
                NetState::from_inputs(rows, cols, vec![u00; rows * cols], params.u0).unwrap();
            let next = neural::step(&state, &es, &params).unwrap();
            for &u in next.inputs() {
                prop_assert!((u - (1.0 - params.eta) * u00).abs() <= 1e-12);
            }
            Ok(())
        },
    )?;
    run_property(
        "restricted pairwise overestimation",
        500,
        (
            prop::sample::subsequence((0..8).collect::<Vec<u32>>(), 2..=8),
            prop::collection::vec(0.001f64..0.999, 8),
        ),
        |(labels, masses)| {
            let items: Vec<_> = labels
                .iter()
                .map(|&l| support(1 << l, masses[l as usize]))
                .collect();
            let mut pairwise = 0.0;
            for k in 0..items.len() {
                for l in k + 1..items.len() {
                    pairwise +=
                        weight_of_conflict(pairwise_conflict(&items[k], &items[l])).unwrap();
                }
            }
            prop_assert!(pairwise >= weight_of_conflict(combine_conflict(&items)).unwrap() - 1e-12);
            Ok(())
        },
    )?;
    within_budget(started, Duration::from_secs(30), "8 property suites".into())
}

fn snapshot_shape() -> Outcome {
    let checkpoints = [1, 11, 21, 31, 41, 51];
    let options = SolveOptions {
        snapshots: checkpoints.to_vec(),
        ..SolveOptions::default()
    };
    let out = solve::solve(Problem::Lattice(5), Method::Neural, 0, BASE_SEED, &options)
        .map_err(|e| e.to_string())?;
    let r = &out.record;
    check(
        r.converged && r.iterations <= 500,
        format!(
            "n=5 seed {BASE_SEED}: converged={} after {} iterations",
            r.converged, r.iterations
        ),
    )?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    frames::write_snapshots(dir.path(), &out.snapshots).map_err(|e| e.to_string())?;
    let tsv: Vec<_> = checkpoints
        .iter()
        .map(|&i| dir.path().join(format!("{}.tsv", frames::frame_stem(i))))
        .collect();
    let rendered = frames::render(&tsv, &dir.path().join("rendered")).map_err(|e| e.to_string())?;
    for path in out_paths(dir.path(), &checkpoints)
        .into_iter()
        .chain(rendered)
    {
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let (w, h, _) =
            parse_pgm(&text).ok_or(format!("{} is not a valid P2 image", path.display()))?;
        check((w, h) == (5, 31), format!("{}: {w}x{h}", path.display()))?;
    }
    Ok(format!(
        "n=5 seed {BASE_SEED}: converged in {} iterations, Mcf {:.4}, 6 frames of 5x31",
        r.iterations,
        r.mcf.unwrap_or(f64::NAN)
    ))
}

fn out_paths(dir: &std::path::Path, checkpoints: &[usize]) -> Vec<std::path::PathBuf> {
    checkpoints
        .iter()
        .map(|&i| dir.join(format!("{}.pgm", frames::frame_stem(i))))
        .collect()
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("canonical optimum", canonical_optimum),
        ("oracle agreement", oracle_agreement),
        ("iterative quality", iterative_quality),
        ("neural quality", neural_quality),
        ("time crossover", time_crossover),
        ("combinatorics", combinatorics),
        ("property suites", property_suites),
        ("snapshot shape", snapshot_shape),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.2}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} {name}: FAIL ({detail}) [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
