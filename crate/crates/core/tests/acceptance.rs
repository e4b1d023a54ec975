//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Desk scale: 20 agents on 101x101 generated city maps with 22% blocked
//! cells, border bands and clusters of 10 cells, Δ=5, α_m=25, wait=5, r=1.

use std::collections::BTreeSet;
use std::io::Write;

use mapf_core::conflicts::{conflict_stats, detect_conflict};
use mapf_core::grid::generate_urban_map;
use mapf_core::harness::{
    emit_report, exact_min_gap, exact_oracle, run_pipeline_observed, write_solution, Allocation,
    PipelineConfig, PipelineRun, ReportFormat, ScenarioSpec, TimedSegment, TraceEvent,
};
use mapf_core::planners::validate_path;
use mapf_core::resolution::ResolutionEvent;
use mapf_core::{Cell, Grid, MapGenParams, PSolution, Path, PlannerKind, SafetyRadius};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 10;
const AGENTS: usize = 20;
const SIDE: usize = 101;
const DENSITY: f64 = 0.22;
const MARGIN: usize = 10;
const R: f64 = 1.0;

struct Case {
    seed: u64,
    kind: PlannerKind,
    alloc: Allocation,
    run: PipelineRun,
    /// Conflicting pairs found inside HEAD at iteration boundaries.
    head_violations: usize,
    boundaries: usize,
}

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn map(seed: u64) -> Grid {
    generate_urban_map(&MapGenParams::new(SIDE, SIDE, DENSITY, seed)).unwrap()
}

fn spec(n: usize, alloc: Allocation, seed: u64) -> ScenarioSpec {
    ScenarioSpec::new(n, alloc, seed)
        .with_border_margin(MARGIN)
        .with_cluster_size(MARGIN)
}

fn run_case(grid: &Grid, n: usize, kind: PlannerKind, alloc: Allocation, seed: u64) -> Case {
    let queries = mapf_core::harness::generate_scenario(grid, &spec(n, alloc, seed)).unwrap();
    let cfg = PipelineConfig::new(kind).with_label(format!("{kind}-{alloc}-{seed}"));
    let r = SafetyRadius::new(R).unwrap();
    let (mut head_violations, mut boundaries) = (0, 0);
    let run = run_pipeline_observed(grid, &queries, &cfg, |e| {
        if let ResolutionEvent::IterationBoundary { head, .. } = e {
            boundaries += 1;
            head_violations += conflict_stats(head, r).section_conflicts;
        }
    })
    .unwrap();
    Case {
        seed,
        kind,
        alloc,
        run,
        head_violations,
        boundaries,
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_1(cases: &[Case]) -> Vec<Outcome> {
    let post: usize = cases
        .iter()
        .map(|c| c.run.metrics.post_section_conflicts)
        .sum();
    let exact: usize = cases
        .iter()
        .map(|c| exact_oracle(&c.run.solution.psolutions, R).len())
        .sum();
    let failures: usize = cases.iter().map(|c| c.run.plan_failures.len()).sum();
    let sampled: usize = cases.iter().map(|c| c.run.oracle_violations.len()).sum();
    let flagged: Vec<&Case> = cases
        .iter()
        .filter(|c| !c.run.oracle_violations.is_empty())
        .collect();

    // every sampled hit is checked against the exact shared-point gap of its pair
    let mut min_gap = f64::INFINITY;
    for c in &flagged {
        let pairs: BTreeSet<(usize, usize)> = c
            .run
            .oracle_violations
            .iter()
            .map(|v| (v.agent_a, v.agent_b))
            .collect();
        for (a, b) in pairs {
            let pa = c.run.solution.get(a).unwrap().clone();
            let pb = c.run.solution.get(b).unwrap().clone();
            for v in exact_oracle(&[pa, pb], f64::INFINITY) {
                min_gap = min_gap.min(v.gap);
            }
        }
    }
    vec![
        Outcome {
            id: "1a",
            pass: post == 0 && exact == 0 && failures == 0,
            detail: format!(
                "{} runs: recomputed section conflicts {post}, exact-oracle violations {exact}, planner failures {failures}",
                cases.len()
            ),
        },
        Outcome {
            id: "1b",
            pass: sampled == 0,
            detail: format!(
                "sampled oracle (ds=0.05): {sampled} violations in {} of {} runs; smallest shared-point gap of a flagged pair {:.4} (>= r means conflict-free by g-equivalence)",
                flagged.len(),
                cases.len(),
                if flagged.is_empty() { f64::NAN } else { min_gap }
            ),
        },
    ]
}

fn criterion_2(grids: &[Grid], cases: &[Case]) -> Outcome {
    let (mut planned, mut bad, mut ac_bad, mut worst) = (0, 0, 0, 0.0f64);
    for c in cases {
        let grid = &grids[c.seed as usize];
        let alpha = c.kind.is_angle_constrained().then_some(25.0);
        for p in &c.run.planned.psolutions {
            planned += 1;
            if !validate_path(&p.path, grid, 5, alpha).is_empty() {
                bad += 1;
            }
        }
        if c.kind.is_angle_constrained() {
            for p in &c.run.solution.psolutions {
                let a = p.path.max_alteration_angle();
                worst = worst.max(a);
                if a > 25.0 {
                    ac_bad += 1;
                }
            }
        }
    }
    Outcome {
        id: "2",
        pass: bad == 0 && ac_bad == 0 && planned > 0,
        detail: format!(
            "{planned} planner outputs, {bad} invalid; resolved ac-paths over 25 deg: {ac_bad} (max {worst:.2} deg)"
        ),
    }
}

fn random_pair(rng: &mut ChaCha8Rng) -> (PSolution, PSolution) {
    let cell = |rng: &mut ChaCha8Rng| Cell::new(rng.gen_range(0..=10), rng.gen_range(0..=10));
    let a0 = cell(rng);
    let a1 = loop {
        let c = cell(rng);
        if c != a0 {
            break c;
        }
    };
    let (b0, b1) = if rng.gen_bool(0.3) {
        // on the line through a: integer multiples of the reduced direction
        let (di, dj) = (a1.i - a0.i, a1.j - a0.j);
        let g = gcd(di.abs(), dj.abs());
        let (ui, uj) = (di / g, dj / g);
        let mut k = || rng.gen_range(-12..=12);
        loop {
            let (k0, k1) = (k(), k());
            if k0 != k1 {
                break (a0.offset(k0 * ui, k0 * uj), a0.offset(k1 * ui, k1 * uj));
            }
        }
    } else {
        let b0 = cell(rng);
        loop {
            let c = cell(rng);
            if c != b0 {
                break (b0, c);
            }
        }
    };
    let pa = PSolution::new(0, Path::from_waypoints(&[a0, a1]).unwrap())
        .with_offset(rng.gen_range(0.0..8.0));
    let pb = PSolution::new(1, Path::from_waypoints(&[b0, b1]).unwrap())
        .with_offset(rng.gen_range(0.0..8.0));
    (pa, pb)
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let r = SafetyRadius::new(R).unwrap();
    let (mut agree, mut disagree, mut banded, mut positives) = (0, 0, 0, 0);
    for _ in 0..100_000 {
        let (pa, pb) = random_pair(&mut rng);
        let seg = |p: &PSolution| {
            let s = p.path.sections()[0];
            TimedSegment {
                sp: s.sp(),
                ep: s.ep(),
                g_start: p.offset,
            }
        };
        let gap = exact_min_gap(seg(&pa), seg(&pb));
        if gap.is_some_and(|g| (g - R).abs() <= 1e-6) {
            banded += 1;
            continue;
        }
        let expected = gap.is_some_and(|g| g < R);
        let got = detect_conflict(&pa, 0, &pb, 0, r).is_some();
        positives += usize::from(expected);
        if expected == got {
            agree += 1;
        } else {
            disagree += 1;
        }
    }
    Outcome {
        id: "3",
        pass: disagree == 0 && positives > 1000,
        detail: format!(
            "100000 random pairs: {agree} agree, {disagree} disagree, {banded} in the boundary band, {positives} conflicts"
        ),
    }
}

fn criterion_4(cases: &[Case], scaling: &[(usize, f64)]) -> Outcome {
    let overhead = |alloc| {
        mean(
            cases
                .iter()
                .filter(|c| c.alloc == alloc)
                .map(|c| c.run.metrics.cost_overhead),
        )
    };
    let (t1, t2) = (overhead(Allocation::Type1), overhead(Allocation::Type2));
    let monotone = scaling.windows(2).all(|w| w[1].1 >= w[0].1);
    let trend: Vec<String> = scaling
        .iter()
        .map(|(n, o)| format!("{n}: {o:.2}%"))
        .collect();
    Outcome {
        id: "4",
        pass: t1 <= 5.0 && t2 > t1 && monotone,
        detail: format!(
            "mean overhead type1 {t1:.2}% (<= 5%), type2 {t2:.2}%; theta/type1 by agents {}",
            trend.join(", ")
        ),
    }
}

fn criterion_5(cases: &[Case]) -> Outcome {
    let mut matched = 0;
    let mut more = 0;
    for c in cases.iter().filter(|c| c.alloc == Allocation::Type1) {
        let other = cases
            .iter()
            .find(|d| d.alloc == Allocation::Type2 && d.seed == c.seed && d.kind == c.kind)
            .unwrap();
        matched += 1;
        if other.run.metrics.section_conflicts > c.run.metrics.section_conflicts {
            more += 1;
        }
    }
    let ratio_ok = cases.iter().all(|c| {
        let m = &c.run.metrics;
        m.agent_conflicts == 0 || 2 * m.section_conflicts >= m.agent_conflicts
    });
    let sc = |a| {
        mean(
            cases
                .iter()
                .filter(|c| c.alloc == a)
                .map(|c| c.run.metrics.section_conflicts as f64),
        )
    };
    Outcome {
        id: "5",
        pass: more == matched && ratio_ok,
        detail: format!(
            "type2 > type1 section conflicts on {more}/{matched} matched runs (means {:.1} vs {:.1}); section >= agent/2 in every run: {ratio_ok}",
            sc(Allocation::Type2),
            sc(Allocation::Type1)
        ),
    }
}

fn criterion_6(cases: &[Case]) -> Outcome {
    let (mut head, mut tail, mut detour, mut cost) = (0, 0, 0, 0);
    let (mut boundaries, mut detours) = (0, 0);
    for c in cases {
        head += c.head_violations;
        boundaries += c.boundaries;
        let mut prev_tail: Option<usize> = None;
        let mut prev_cost = c.run.metrics.pf_cost;
        for e in &c.run.trace {
            match *e {
                TraceEvent::Boundary { tail_len, .. } => {
                    if prev_tail.is_some_and(|p| p != tail_len + 1) {
                        tail += 1;
                    }
                    prev_tail = Some(tail_len);
                }
                TraceEvent::Selected { tail_len, .. } => {
                    if prev_tail != Some(tail_len + 1) {
                        tail += 1;
                    }
                }
                TraceEvent::Detour {
                    conflict_section,
                    new_first_conflict,
                    total_cost,
                    ..
                } => {
                    detours += 1;
                    if new_first_conflict.is_some_and(|t| t <= conflict_section) {
                        detour += 1;
                    }
                    if total_cost < prev_cost - 1e-9 {
                        cost += 1;
                    }
                    prev_cost = total_cost;
                }
                TraceEvent::Offset { total_cost, .. } => {
                    if total_cost < prev_cost - 1e-9 {
                        cost += 1;
                    }
                    prev_cost = total_cost;
                }
            }
        }
        if prev_tail.is_some_and(|t| t != 0) {
            tail += 1;
        }
        if c.run.metrics.cr_cost < c.run.metrics.pf_cost
            || (c.run.metrics.cr_cost - prev_cost).abs() > 1e-6
        {
            cost += 1;
        }
    }
    Outcome {
        id: "6",
        pass: head + tail + detour + cost == 0 && boundaries > 0 && detours > 0,
        detail: format!(
            "{boundaries} boundaries with {head} HEAD conflicts; TAIL-step errors {tail}; {detours} detours, {detour} without forward progress; cost decreases {cost}"
        ),
    }
}

fn criterion_7(grids: &[Grid], cases: &[Case]) -> Outcome {
    let mut differing = 0;
    for c in cases {
        let again = run_case(&grids[c.seed as usize], AGENTS, c.kind, c.alloc, c.seed);
        let sol = |r: &PipelineRun| write_solution(&r.solution).unwrap();
        let rep = |r: &PipelineRun| {
            emit_report(&[r.metrics.clone().without_timings()], ReportFormat::Json).unwrap()
        };
        if sol(&c.run) != sol(&again.run) || rep(&c.run) != rep(&again.run) {
            differing += 1;
        }
    }
    Outcome {
        id: "7",
        pass: differing == 0,
        detail: format!(
            "{} repeated runs, {differing} with differing solution or report bytes",
            cases.len()
        ),
    }
}

#[test]
fn acceptance() {
    let grids: Vec<Grid> = (0..SEEDS).map(map).collect();
    let mut cases = Vec::new();
    for seed in 0..SEEDS {
        for kind in [PlannerKind::Theta, PlannerKind::Lian] {
            for alloc in [Allocation::Type1, Allocation::Type2] {
                cases.push(run_case(&grids[seed as usize], AGENTS, kind, alloc, seed));
            }
        }
    }
    let scaling: Vec<(usize, f64)> = [10, 20, 40]
        .into_iter()
        .map(|n| {
            let o = mean((0..SEEDS).map(|s| {
                run_case(&grids[0], n, PlannerKind::Theta, Allocation::Type1, s)
                    .run
                    .metrics
                    .cost_overhead
            }));
            (n, o)
        })
        .collect();

    let mut outcomes = criterion_1(&cases);
    outcomes.push(criterion_2(&grids, &cases));
    outcomes.push(criterion_3());
    outcomes.push(criterion_4(&cases, &scaling));
    outcomes.push(criterion_5(&cases));
    outcomes.push(criterion_6(&cases));
    outcomes.push(criterion_7(&grids, &cases));

    // written to stdout directly so the lines survive test output capture
    let mut out = std::io::stdout().lock();
    for o in &outcomes {
        writeln!(
            out,
            "criterion {:<2} {}  {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        )
        .unwrap();
    }
    drop(out);
    // 1b is a known gap between the sampled oracle and g-equivalence; it is
    // reported above but only fails the suite if a flagged pair really conflicts
    let hard: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass && o.id != "1b")
        .map(|o| o.id)
        .collect();
    assert!(hard.is_empty(), "failing criteria: {hard:?}");
    for c in &cases {
        for v in &c.run.oracle_violations {
            let pa = c.run.solution.get(v.agent_a).unwrap().clone();
            let pb = c.run.solution.get(v.agent_b).unwrap().clone();
            assert!(
                exact_oracle(&[pa, pb], R).is_empty(),
                "sampled hit is a real conflict: {v:?}"
            );
        }
    }
}
