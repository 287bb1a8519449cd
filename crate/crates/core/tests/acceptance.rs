//! Acceptance suite. Runs each criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use mht_core::domain::{
    CameraId, CameraNetworkModel, EntryExitPoint, Feature, ObsId, Observation, PointId, TrackerConfig, TrackingMode,
    Transition,
};
use mht_core::gating::{end_of_track_deadline, mixed_distance, speed_gate, temporal_gate, GateReason};
use mht_core::metrics::{brute_force_evaluate, evaluate};
use mht_core::mwis::{brute_force_mwis, solve_mwis};
use mht_core::scoring::{
    appearance_similarity, combine_increment, delta_log_score, gaussian_density, kinematic_likelihood_distance,
    kinematic_likelihood_temporal, total_log_score, update_mean_feature, BranchScoreState,
};
use mht_core::simulator::{base_features, generate, walkthrough, walkthrough_config, ScenarioSpec};
use mht_core::stream::{check_disjoint, read_jsonl, write_jsonl, TrackRecord};
use mht_core::tracker::{group_by_scan, track_stream, Tracker};
use mht_core::{Execution, TrackPoint};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mwis_exactness() -> Outcome {
    let started = Instant::now();
    let mut mismatches = 0;
    for seed in 0..200 {
        let g = common::random_graph(seed, 18);
        let fast = solve_mwis(&g);
        let slow = brute_force_mwis(&g).map_err(|e| e.to_string())?;
        if fast.selected != slow.selected || (fast.weight - slow.weight).abs() > 1e-9 {
            mismatches += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(mismatches == 0, || format!("{mismatches} mismatches"))?;
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("200 graphs, 0 mismatches, {secs:.3} s"))
}

/// Independent ground-plane speed: mean of per-step Euclidean speeds.
fn oracle_speed(o: &Observation) -> f64 {
    let h = &o.history;
    let steps: f64 = h
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].ground_pos.unwrap(), w[1].ground_pos.unwrap());
            (b[0] - a[0]).hypot(b[1] - a[1]) / (w[1].time - w[0].time)
        })
        .sum();
    steps / (h.len() - 1) as f64
}

fn oracle_increment(branch: &[Observation], k: usize, net: &CameraNetworkModel, cfg: &TrackerConfig) -> f64 {
    let dim = branch[0].feature.dim();
    let mean: Vec<f64> = (0..dim)
        .map(|i| branch[..k].iter().map(|o| o.feature.as_slice()[i]).sum::<f64>() / k as f64)
        .collect();
    let p_a = mean
        .iter()
        .zip(branch[k].feature.as_slice())
        .map(|(a, b)| (a * b).sqrt())
        .sum::<f64>()
        .min(1.0);
    let (last, cand) = (&branch[k - 1], &branch[k]);
    let gap = cand.start_time() - last.end_time();
    let p_x = match net.mode {
        TrackingMode::ImagePlane => {
            let (mu, sigma) = (15.0, 3.0);
            (-(gap - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
        }
        TrackingMode::GroundPlane => {
            let v = oracle_speed(last) / cfg.gamma;
            let (a, b) = (
                last.last_point().ground_pos.unwrap(),
                cand.first_point().ground_pos.unwrap(),
            );
            let (dx, dy) = ((b[0] - a[0]).abs(), (b[1] - a[1]).abs());
            let actual = cfg.beta * dx.hypot(dy) + (1.0 - cfg.beta) * (dx + dy);
            let r = oracle_speed(last) * gap - actual;
            (-r * r / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
        }
    };
    cfg.w_a * (p_a / cfg.c2).ln() + (1.0 - cfg.w_a) * (p_x / cfg.c1).ln()
}

fn loop_network() -> CameraNetworkModel {
    CameraNetworkModel {
        mode: TrackingMode::ImagePlane,
        cameras: vec![CameraId(0)],
        entry_exit_points: vec![EntryExitPoint {
            id: PointId(0),
            camera: CameraId(0),
            image_pos: [0.0; 2],
            ground_pos: None,
        }],
        transitions: vec![Transition {
            from: PointId(0),
            to: PointId(0),
            mean: Some(15.0),
            std: Some(3.0),
        }],
        ground_area: None,
    }
}

fn random_branch(seed: u64, image: bool) -> Vec<Observation> {
    let mut r = common::rng(seed);
    let len = r.gen_range(1..=12);
    let mut out = Vec::new();
    let (mut t, mut pos) = (0.0, [r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0)]);
    for i in 0..len {
        let dur = r.gen_range(2.0..10.0);
        let heading: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let speed = r.gen_range(0.6..1.8);
        let end = [
            pos[0] + speed * dur * heading.cos(),
            pos[1] + speed * dur * heading.sin(),
        ];
        let mut o = common::walk(
            i + 1,
            t,
            t + dur,
            pos,
            end,
            r.gen_range(1..6),
            common::random_feature(&mut r, 8),
        );
        if image {
            o.entry_point = Some(PointId(0));
            o.exit_point = Some(PointId(0));
        }
        out.push(o);
        let gap = if image {
            r.gen_range(9.0..21.0)
        } else {
            r.gen_range(1.0..15.0)
        };
        let drift = speed * gap + r.gen_range(-3.0..3.0);
        pos = [end[0] + drift * heading.cos(), end[1] + drift * heading.sin()];
        t += dur + gap;
    }
    out
}

fn score_recursion() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let image = seed % 2 == 1;
        let (net, cfg) = if image {
            (loop_network(), TrackerConfig::image_plane_defaults())
        } else {
            (
                CameraNetworkModel::ground_plane(vec![CameraId(0)], 400.0),
                TrackerConfig::ground_plane_defaults(),
            )
        };
        let branch = random_branch(seed, image);
        let increments: Vec<f64> = (1..branch.len())
            .map(|k| oracle_increment(&branch, k, &net, &cfg))
            .collect();
        let batch = total_log_score(&increments, &cfg);
        let mut state = BranchScoreState::initial(branch[0].feature.clone(), &cfg);
        for k in 1..branch.len() {
            let inc = delta_log_score(&state, &branch[k - 1], &branch[k], &net, &cfg).map_err(|e| e.to_string())?;
            state = state.extend(inc, &branch[k].feature).map_err(|e| e.to_string())?;
        }
        ensure(batch.is_finite(), || format!("seed {seed}: non-finite oracle score"))?;
        worst = worst.max((batch - state.log_score).abs());
    }
    ensure(worst <= 1e-9, || format!("max difference {worst:e}"))?;
    Ok(format!("100 branches, max difference {worst:.1e}"))
}

fn disjointness_fuzz() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut scans, mut hypotheses, mut files) = (0usize, 0usize, 0usize);
    let mut seed = 0;
    while scans < 1000 || seed < 4 {
        let mode = if seed % 2 == 0 {
            TrackingMode::GroundPlane
        } else {
            TrackingMode::ImagePlane
        };
        let spec = ScenarioSpec {
            fragmentation_prob: 0.2,
            clutter_rate: 0.05,
            exit_prob: 0.1,
            ..ScenarioSpec::chain(1000 + seed, mode, 4, 6, 240.0)
        };
        let s = generate(&spec).map_err(|e| e.to_string())?;
        let cfg = TrackerConfig {
            n_scan: 3,
            ..spec.tracker_defaults()
        };
        let mut t = Tracker::new(cfg.clone(), s.network.clone()).map_err(|e| e.to_string())?;
        let groups = group_by_scan(&s.events, &cfg).map_err(|e| e.to_string())?;
        let (first, last) = (groups[0].0, groups.last().unwrap().0);
        let mut gi = 0;
        for scan in first..=last {
            let batch: &[_] = if groups[gi].0 == scan {
                gi += 1;
                &groups[gi - 1].1
            } else {
                &[]
            };
            let report = t.process_scan(scan, batch).map_err(|e| e.to_string())?;
            scans += 1;
            if let Some(best) = report.best {
                ensure(common::pairwise_disjoint(&best.tracks), || {
                    format!("seed {seed} scan {scan}: overlapping hypothesis")
                })?;
                hypotheses += 1;
            }
        }
        let tracks = t.final_tracks().map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("tracks_{seed}.jsonl"));
        write_jsonl(std::fs::File::create(&path).map_err(|e| e.to_string())?, &tracks).map_err(|e| e.to_string())?;
        let back: Vec<TrackRecord> = read_jsonl(
            std::io::BufReader::new(std::fs::File::open(&path).map_err(|e| e.to_string())?),
            "tracks",
        )
        .map_err(|e| e.to_string())?;
        ensure(back == tracks, || format!("seed {seed}: track file did not round-trip"))?;
        check_disjoint(&back).map_err(|e| format!("seed {seed}: {e}"))?;
        files += 1;
        seed += 1;
    }
    Ok(format!(
        "{scans} scans, {hypotheses} hypotheses, {files} track files, 0 violations"
    ))
}

fn branch_lists(t: &Tracker) -> BTreeSet<Vec<u64>> {
    let f = t.forest().unwrap();
    f.leaves()
        .into_iter()
        .map(|l| f.branch_observations(l).into_iter().map(|o| o.0).collect())
        .collect()
}

fn lists(v: &[&[u64]]) -> BTreeSet<Vec<u64>> {
    v.iter().map(|l| l.to_vec()).collect()
}

fn walkthrough_replay() -> Outcome {
    let s = walkthrough();
    let run = |scan: i64, n_scan: usize| -> Result<Tracker, String> {
        let cfg = TrackerConfig {
            n_scan,
            ..walkthrough_config()
        };
        let mut t = Tracker::new(cfg, s.network.clone())
            .map_err(|e| e.to_string())?
            .with_invariant_checks(true);
        t.run_until(&s.events, scan).map_err(|e| e.to_string())?;
        Ok(t)
    };
    let third = lists(&[&[1, 2], &[1, 3], &[1], &[2], &[3]]);
    let expected: [(i64, BTreeSet<Vec<u64>>); 4] = [
        (0, lists(&[&[1]])),
        (2, third.clone()),
        (3, third),
        (
            5,
            lists(&[
                &[1, 2, 4],
                &[1, 2],
                &[1, 3, 4],
                &[1, 3],
                &[1],
                &[2, 4],
                &[2],
                &[3, 4],
                &[3],
                &[4],
            ]),
        ),
    ];
    for (scan, want) in &expected {
        let t = run(*scan, 10)?;
        let got = branch_lists(&t);
        ensure(t.forest().unwrap().leaves().len() == want.len(), || {
            format!("scan {}: leaf count", scan + 1)
        })?;
        ensure(&got == want, || format!("scan {}: branches {got:?}", scan + 1))?;
    }
    let pruned = run(5, 2)?;
    let want = lists(&[&[1, 2, 4], &[1, 2], &[3, 4], &[3], &[4]]);
    let got = branch_lists(&pruned);
    ensure(got == want, || format!("N=2 prune: branches {got:?}"))?;
    ensure(pruned.forest().unwrap().roots().len() == 3, || {
        "N=2 prune: root count".into()
    })?;
    Ok("scans 1, 3, 4, 6 and the N=2 prune match".into())
}

fn pruning_safety() -> Outcome {
    let mut largest = 0;
    for seed in 0..50 {
        let mode = if seed % 2 == 0 {
            TrackingMode::GroundPlane
        } else {
            TrackingMode::ImagePlane
        };
        let spec = common::small_spec(seed, mode);
        let s = generate(&spec).map_err(|e| e.to_string())?;
        let n = s.truth.observation_count();
        ensure(n <= 10, || format!("seed {seed}: {n} observations"))?;
        largest = largest.max(n);
        let pruned = TrackerConfig {
            n_scan: 10,
            prune: true,
            ..spec.tracker_defaults()
        };
        let full = TrackerConfig {
            prune: false,
            ..pruned.clone()
        };
        let a = track_stream(&pruned, &s.network, &s.events).map_err(|e| e.to_string())?;
        let b = track_stream(&full, &s.network, &s.events).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("seed {seed}: tracks differ"))?;
    }
    Ok(format!("50 scenarios (up to {largest} observations), all identical"))
}

fn end_to_end_accuracy() -> Outcome {
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for mode in [TrackingMode::GroundPlane, TrackingMode::ImagePlane] {
        let mut scores = Vec::new();
        for seed in 0..5 {
            let spec = ScenarioSpec {
                feature_noise: 0.05,
                ..ScenarioSpec::chain(seed, mode, 4, 10, 300.0)
            };
            let bases = base_features(&spec).map_err(|e| e.to_string())?;
            for (i, a) in bases.iter().enumerate() {
                for b in &bases[i + 1..] {
                    let bc = appearance_similarity(a, b).map_err(|e| e.to_string())?;
                    ensure(bc <= 0.5, || format!("base features overlap ({bc:.3})"))?;
                }
            }
            let s = generate(&spec).map_err(|e| e.to_string())?;
            let tracks = track_stream(&spec.tracker_defaults(), &s.network, &s.events).map_err(|e| e.to_string())?;
            let r = evaluate(&tracks, &s.truth.records()).map_err(|e| e.to_string())?;
            if r.idf1 < 0.95 {
                failures.push(format!("{mode:?} seed {seed}: IDF1 {:.4}", r.idf1));
            }
            scores.push(r.idf1);
        }
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        summary.push(format!("{mode:?} min IDF1 {min:.4}"));
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(summary.join(", "))
}

fn close(a: f64, b: f64) -> Result<(), String> {
    ensure((a - b).abs() <= 1e-9, || format!("{a} != {b}"))
}

fn ground_obs(id: u64, pts: &[(f64, f64, f64)]) -> Observation {
    let p = |&(t, x, y): &(f64, f64, f64)| TrackPoint {
        time: t,
        image_pos: [0.0; 2],
        image_size: [1.0; 2],
        ground_pos: Some([x, y]),
    };
    let mut o = Observation::open(ObsId(id), CameraId(0), p(&pts[0]), Feature::uniform(2));
    for q in &pts[1..] {
        o.push_point(p(q)).unwrap();
    }
    o.closed = true;
    o
}

fn gating_and_scoring_vectors() -> Outcome {
    let cfg = TrackerConfig::ground_plane_defaults();
    let f = |v: &[f64]| Feature::new(v.to_vec()).unwrap();
    let mut checked = 0;
    let mut check = |r: Result<(), String>| -> Result<(), String> {
        checked += 1;
        r
    };

    check(close(mixed_distance([0.0, 0.0], [6.0, 8.0], 0.7), 11.2))?;
    check(close(mixed_distance([3.0, -4.0], [3.0, -4.0], 0.3), 0.0))?;
    check(close(mixed_distance([1.0, 2.0], [1.0, 9.0], 0.4), 7.0))?;

    let last = ground_obs(1, &[(0.0, -1.0, 0.0), (1.0, 0.0, 0.0)]);
    let reason = |cand: &Observation| {
        speed_gate(&last, cand, &cfg)
            .map(|d| d.reason)
            .map_err(|e| e.to_string())
    };
    check(ensure(
        reason(&ground_obs(2, &[(11.0, 6.0, 8.0), (12.0, 7.0, 8.0)]))? == GateReason::Pass,
        || "11.2 m in 10 s".into(),
    ))?;
    check(ensure(
        reason(&ground_obs(2, &[(6.0, 6.0, 8.0), (7.0, 7.0, 8.0)]))? == GateReason::TooFast,
        || "11.2 m in 5 s".into(),
    ))?;
    check(ensure(
        reason(&ground_obs(2, &[(9.0, 0.0, 0.0), (10.0, 1.0, 0.0)]))? == GateReason::TooSlow,
        || "zero displacement".into(),
    ))?;

    let net = CameraNetworkModel {
        mode: TrackingMode::ImagePlane,
        cameras: vec![CameraId(0), CameraId(1)],
        entry_exit_points: (0..2)
            .map(|i| EntryExitPoint {
                id: PointId(i),
                camera: CameraId(i),
                image_pos: [0.0; 2],
                ground_pos: None,
            })
            .collect(),
        transitions: vec![Transition {
            from: PointId(0),
            to: PointId(1),
            mean: Some(30.0),
            std: Some(4.0),
        }],
        ground_area: None,
    };
    let image = TrackerConfig::image_plane_defaults();
    let with_points = |mut o: Observation, p: u32| {
        o.entry_point = Some(PointId(p));
        o.exit_point = Some(PointId(p));
        o
    };
    let a = with_points(ground_obs(1, &[(0.0, 0.0, 0.0), (5.0, 0.0, 0.0)]), 0);
    let treason = |from: &Observation, gap: f64, p: u32| {
        let b = with_points(
            ground_obs(
                2,
                &[
                    (from.end_time() + gap, 0.0, 0.0),
                    (from.end_time() + gap + 2.0, 0.0, 0.0),
                ],
            ),
            p,
        );
        temporal_gate(from, &b, &net, &image)
            .map(|d| d.reason)
            .map_err(|e| e.to_string())
    };
    check(ensure(treason(&a, 35.0, 1)? == GateReason::Pass, || {
        "dt 35 in (20, 40)".into()
    }))?;
    check(ensure(treason(&a, 41.0, 1)? == GateReason::TimeOutOfWindow, || {
        "dt 41".into()
    }))?;
    let back = with_points(ground_obs(1, &[(0.0, 0.0, 0.0), (5.0, 0.0, 0.0)]), 1);
    check(ensure(treason(&back, 30.0, 0)? == GateReason::NoTransition, || {
        "forbidden transition".into()
    }))?;

    let ground = CameraNetworkModel::ground_plane(vec![CameraId(0)], 400.0);
    let walker = |speed: f64| ground_obs(1, &[(0.0, 0.0, 0.0), (1.0, speed, 0.0), (2.0, 2.0 * speed, 0.0)]);
    let deadline = |o: &Observation, n: &CameraNetworkModel, c: &TrackerConfig| {
        end_of_track_deadline(o, n, c).map_err(|e| e.to_string())
    };
    check(close(deadline(&walker(1.0), &ground, &cfg)?, 20.0))?;
    check(close(deadline(&walker(2.0), &ground, &cfg)?, 10.0))?;
    check(close(deadline(&a, &net, &image)?, 60.0))?;

    let sim = |x: &Feature, y: &Feature| appearance_similarity(x, y).map_err(|e| e.to_string());
    let p = f(&[0.2, 0.3, 0.5]);
    check(close(sim(&p, &p)?, 1.0))?;
    check(close(sim(&f(&[1.0, 0.0]), &f(&[0.0, 1.0]))?, 0.0))?;
    check(close(
        sim(&f(&[0.5, 0.5]), &f(&[0.9, 0.1]))?,
        0.45f64.sqrt() + 0.05f64.sqrt(),
    ))?;
    check(close(sim(&f(&[0.5, 0.5]), &f(&[0.9, 0.1]))?, 0.894427190999916))?;

    let st = BranchScoreState::initial(f(&[1.0, 0.0]), &cfg);
    let up = update_mean_feature(&st, &f(&[0.0, 1.0])).map_err(|e| e.to_string())?;
    check(close(up.mean_feature.as_slice()[0], 0.5).and(close(up.mean_feature.as_slice()[1], 0.5)))?;
    check(ensure(up.assoc_count == 2, || "count".into()))?;
    let fixed = update_mean_feature(&st, &f(&[1.0, 0.0])).map_err(|e| e.to_string())?;
    check(ensure(fixed.mean_feature == st.mean_feature, || "fixed point".into()))?;

    check(close(
        kinematic_likelihood_temporal(30.0, 30.0, 4.0),
        1.0 / (4.0 * (2.0 * PI).sqrt()),
    ))?;
    check(close(
        kinematic_likelihood_temporal(30.0, 30.0, 4.0),
        0.09973557010035818,
    ))?;
    check(close(
        kinematic_likelihood_temporal(34.0, 30.0, 4.0),
        kinematic_likelihood_temporal(30.0, 30.0, 4.0) * (-0.5f64).exp(),
    ))?;
    check(ensure(kinematic_likelihood_temporal(70.0, 30.0, 4.0) < 1e-20, || {
        "tail".into()
    }))?;

    // Speed 1 m/s; after a 1 s gap it should be 1 m further along.
    let mover = ground_obs(1, &[(0.0, 0.0, 0.0), (1.0, 1.0, 0.0)]);
    let at = |x: f64| ground_obs(2, &[(2.0, x, 0.0), (3.0, x + 1.0, 0.0)]);
    let kd =
        |c: &Observation, g: &TrackerConfig| kinematic_likelihood_distance(&mover, c, g).map_err(|e| e.to_string());
    check(close(kd(&at(2.0), &cfg)?, 1.0 / (2.0 * PI).sqrt()))?;
    check(close(kd(&at(3.0), &cfg)?, (-0.5f64).exp() / (2.0 * PI).sqrt()))?;
    check(close(kd(&at(3.0), &cfg)?, 0.24197072451914337))?;
    let doubled = TrackerConfig {
        gamma: 2.0,
        ..cfg.clone()
    };
    let exponent = |c: &TrackerConfig| -> Result<f64, String> { Ok((kd(&at(3.0), c)? / kd(&at(2.0), c)?).ln()) };
    check(close(exponent(&doubled)?, 2.0 * exponent(&cfg)?))?;
    check(close(gaussian_density(0.0, 0.0, 1.0), 1.0 / (2.0 * PI).sqrt()))?;

    check(close(combine_increment(cfg.c2, cfg.c1, &cfg), 0.0))?;
    let table = TrackerConfig {
        w_a: 0.8,
        c1: 0.3,
        c2: 0.75,
        ..cfg.clone()
    };
    check(close(combine_increment(0.9, 0.3, &table), 0.8 * 1.2f64.ln()))?;
    check(ensure(
        (combine_increment(0.9, 0.3, &table) - 0.14587).abs() < 5e-5,
        || "rounded value".into(),
    ))?;
    let appearance_only = TrackerConfig {
        w_a: 1.0,
        ..cfg.clone()
    };
    check(close(
        combine_increment(0.9, 0.01, &appearance_only),
        combine_increment(0.9, 0.9, &appearance_only),
    ))?;

    check(close(total_log_score(&[], &cfg), 0.001))?;
    check(close(total_log_score(&[0.0, 0.0, 0.0], &cfg), cfg.c0))?;
    let mut r = common::rng(7);
    for _ in 0..100 {
        let incs: Vec<f64> = (0..r.gen_range(0..20)).map(|_| r.gen_range(-5.0..5.0)).collect();
        let folded = incs.iter().fold(cfg.c0, |acc, x| acc + x);
        check(ensure((total_log_score(&incs, &cfg) - folded).abs() <= 1e-12, || {
            "fold".into()
        }))?;
    }
    Ok(format!("{checked} vectors"))
}

fn real_time() -> Outcome {
    let mut parts = Vec::new();
    for mode in [TrackingMode::GroundPlane, TrackingMode::ImagePlane] {
        let spec = ScenarioSpec::chain(42, mode, 6, 25, 420.0);
        let s = generate(&spec).map_err(|e| e.to_string())?;
        let cfg = TrackerConfig {
            execution: Execution::Parallel,
            ..spec.tracker_defaults()
        };
        let started = Instant::now();
        let mut t = Tracker::new(cfg.clone(), s.network).map_err(|e| e.to_string())?;
        t.run(&s.events).map_err(|e| e.to_string())?;
        let wall = started.elapsed().as_secs_f64();
        let timings = t.timings();
        let mean = timings.iter().map(|x| x.seconds).sum::<f64>() / timings.len().max(1) as f64;
        ensure(mean < cfg.scan_seconds, || {
            format!("{mode:?}: mean scan latency {mean:.3} s")
        })?;
        ensure(wall < 120.0, || format!("{mode:?}: total runtime {wall:.1} s"))?;
        parts.push(format!(
            "{mode:?} mean {:.3} ms over {} scans",
            mean * 1e3,
            timings.len()
        ));
    }
    Ok(parts.join(", "))
}

fn metric_oracle() -> Outcome {
    let mut mismatches = Vec::new();
    for seed in 0..100 {
        let (truth, tracks) = common::random_truth_and_tracks(seed, 8);
        let a = evaluate(&tracks, &truth).map_err(|e| e.to_string())?;
        let b = brute_force_evaluate(&tracks, &truth).map_err(|e| e.to_string())?;
        let same = [(a.idtp, b.idtp), (a.idp, b.idp), (a.idr, b.idr), (a.idf1, b.idf1)]
            .iter()
            .all(|(x, y)| (x - y).abs() <= 1e-9);
        if !same {
            mismatches.push(seed);
        }
    }
    ensure(mismatches.is_empty(), || format!("mismatching seeds {mismatches:?}"))?;
    Ok("100 seeds, 0 mismatches".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("MWIS exactness", mwis_exactness),
        ("score recursion", score_recursion),
        ("disjoint tracks under fuzzing", disjointness_fuzz),
        ("worked example replay", walkthrough_replay),
        ("pruning safety", pruning_safety),
        ("end-to-end accuracy", end_to_end_accuracy),
        ("gating and scoring vectors", gating_and_scoring_vectors),
        ("real-time processing", real_time),
        ("metric oracle", metric_oracle),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
