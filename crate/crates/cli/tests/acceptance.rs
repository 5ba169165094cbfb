//! Acceptance suite. Each check prints one PASS or FAIL line; the process
//! exits nonzero if any check fails.
//!
//! Run with `cargo test -p vidcurate-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use vidcurate_align::*;
use vidcurate_caption::*;
use vidcurate_core::interleave::{build_format_a, build_format_b, DEFAULT_DROP_PROB};
use vidcurate_core::sample::{quantile_threshold, sample_div, sample_flt, Durations};
use vidcurate_core::score::{clipsim, score_clip, uniform_sample_indices, ClipFeatures, SAMPLED_FRAMES};
use vidcurate_core::segment::{detect_cuts, frame_time, segment_video, FrameSignature, SegmenterConfig};
use vidcurate_core::*;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let checks: Vec<Check> = vec![
        ("segmenter matches brute-force cut enumeration", segmenter_oracle),
        ("segment intervals tile the stream", tiling),
        ("InfoNCE matches the double-loop oracle", info_nce_oracle),
        ("InfoNCE gradient matches central differences", gradient_check),
        ("toy alignment training converges", toy_training),
        ("ST-Attn invariants", st_attn_invariants),
        ("patch masking is exact and uniform", masking),
        ("sampler correctness", sampler),
        ("interleave statistics", interleave_stats),
        ("scoring constants", scoring_constants),
        ("retrieval metrics match sort oracles", metrics),
        ("manifest round trip and error taxonomy", manifest_round_trip),
        ("end-to-end golden run", golden_run),
        ("caption service client contract", service_contract),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.sample::<f64, _>(StandardNormal))
}

fn batch(m: &Array2<f64>) -> EmbeddingBatch {
    EmbeddingBatch::new(m.clone()).unwrap()
}

// ---------------------------------------------------------------- segmentation

/// Frames whose signature jumps at `cuts` (far above any threshold) and by
/// exactly 27 at `edges`, with +-`jitter` alternation inside scenes.
fn stream(n: usize, dim: usize, cuts: &BTreeSet<usize>, edges: &BTreeSet<usize>, jitter: f64, rng: &mut ChaCha8Rng) -> Vec<FrameSignature> {
    let mut base: Vec<f64> = (0..dim).map(|_| f64::from(rng.random_range(60..190u8))).collect();
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        if cuts.contains(&i) {
            for b in base.iter_mut() {
                *b = 40.0 + (*b - 40.0 + f64::from(rng.random_range(60..=115u8))) % 175.0;
            }
        } else if edges.contains(&i) {
            for b in base.iter_mut() {
                *b = if *b + 27.0 <= 250.0 { *b + 27.0 } else { *b - 27.0 };
            }
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        frames.push(FrameSignature::new(i as u64, base.iter().map(|b| b + sign * jitter).collect()));
    }
    frames
}

fn oracle_deltas(frames: &[FrameSignature]) -> Vec<f64> {
    frames
        .windows(2)
        .map(|w| {
            let mut s = 0.0;
            for (a, b) in w[0].values.iter().zip(&w[1].values) {
                s += (a - b).abs();
            }
            s / w[0].values.len() as f64
        })
        .collect()
}

/// Every subset of the proposals; keeps those where a proposal is accepted
/// exactly when no accepted earlier cut lies within `min_gap` of it.
fn enumerate_cut_sets(proposals: &[usize], min_gap: usize) -> Vec<Vec<usize>> {
    let k = proposals.len();
    let mut consistent = Vec::new();
    for mask in 0u32..(1 << k) {
        let chosen: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| proposals[b]).collect();
        let ok = proposals.iter().all(|&p| {
            let blocked = chosen.iter().any(|&q| q < p && p - q < min_gap);
            chosen.contains(&p) == !blocked
        });
        if ok {
            consistent.push(chosen);
        }
    }
    consistent
}

fn segmenter_oracle() -> Outcome {
    let start = Instant::now();
    ensure!(SegmenterConfig::default().cut_threshold == 27.0, "default threshold is not 27");
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut total_cuts = 0;
    for case in 0..200 {
        let n = rng.random_range(2..=2000);
        let dim = rng.random_range(1..=6);
        let mut cuts = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for _ in 0..rng.random_range(0..=5) {
            let c = rng.random_range(1..n);
            cuts.insert(c);
            // Clustered follow-up cuts exercise the minimum spacing.
            let c2 = c + rng.random_range(1..30);
            if c2 < n {
                cuts.insert(c2);
            }
        }
        for _ in 0..rng.random_range(0..4) {
            edges.insert(rng.random_range(1..n));
        }
        let edges: BTreeSet<usize> = edges.difference(&cuts).copied().collect();
        let config = SegmenterConfig { min_scene_frames: rng.random_range(1..=40), ..Default::default() };
        let frames = stream(n, dim, &cuts, &edges, f64::from(rng.random_range(0..=5u8)), &mut rng);
        let deltas = oracle_deltas(&frames);
        let proposals: Vec<usize> = (0..deltas.len()).filter(|&i| deltas[i] > 27.0).map(|i| i + 1).collect();
        ensure!(proposals.len() <= 16, "case {case}: {} proposals", proposals.len());
        let sets = enumerate_cut_sets(&proposals, config.min_scene_frames);
        ensure!(sets.len() == 1, "case {case}: {} consistent cut sets", sets.len());
        let got = detect_cuts(&deltas, &config);
        ensure!(got == sets[0], "case {case}: detect_cuts {got:?} vs oracle {:?}", sets[0]);
        let starts: Vec<usize> = segment_video(frames, 10.0, &config)
            .map_err(|e| format!("case {case}: {e}"))?
            .iter()
            .skip(1)
            .map(|iv| iv.start_frame)
            .collect();
        ensure!(starts == sets[0], "case {case}: segment_video scenes {starts:?} vs oracle {:?}", sets[0]);
        total_cuts += got.len();
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("200 streams, {total_cuts} cuts, 0 mismatches"))
}

fn tiling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let fps_choices = [8.0, 10.0, 12.5, 23.976, 24.0, 25.0, 29.97, 30.0, 59.94, 60.0];
    let mut violations = 0;
    let mut intervals = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=1500);
        let fps = fps_choices[rng.random_range(0..fps_choices.len())];
        let cuts: BTreeSet<usize> = (0..rng.random_range(0..20)).map(|_| rng.random_range(1..n.max(2))).collect();
        let frames = stream(n, 3, &cuts, &BTreeSet::new(), f64::from(rng.random_range(0..=20u8)), &mut rng);
        let still: f64 = rng.random_range(0.0..5.0);
        let config = SegmenterConfig {
            min_scene_frames: rng.random_range(1..=30),
            min_clip: Millis(rng.random_range(0..4000)),
            still_threshold: still,
            ..Default::default()
        };
        let out = segment_video(frames, fps, &config).map_err(|e| e.to_string())?;
        intervals += out.len();
        let duration = Millis((n as f64 * 1000.0 / fps).round() as i64);
        let mut bad = out.first().is_none_or(|iv| iv.start != Millis(0) || iv.start_frame != 0);
        bad |= out.last().is_none_or(|iv| iv.end != duration || iv.end_frame != n);
        bad |= out.iter().any(|iv| iv.start >= iv.end || iv.start_frame >= iv.end_frame);
        bad |= out.iter().any(|iv| iv.start != frame_time(iv.start_frame, fps));
        bad |= out.windows(2).any(|w| w[0].end != w[1].start || w[0].end_frame != w[1].start_frame);
        violations += usize::from(bad);
    }
    ensure!(violations == 0, "{violations} runs violated tiling");
    Ok(format!("1000 runs, {intervals} intervals, 0 violations"))
}

// ---------------------------------------------------------------- contrastive loss

fn naive_info_nce(v: &Array2<f64>, t: &Array2<f64>, tau: f64) -> f64 {
    let n = v.nrows();
    let cos = |a: usize, b: usize| {
        let (mut d, mut na, mut nb) = (0.0, 0.0, 0.0);
        for k in 0..v.ncols() {
            d += v[[a, k]] * t[[b, k]];
            na += v[[a, k]] * v[[a, k]];
            nb += t[[b, k]] * t[[b, k]];
        }
        d / (na.sqrt() * nb.sqrt())
    };
    let mut total = 0.0;
    for i in 0..n {
        let (mut row, mut col) = (0.0, 0.0);
        for j in 0..n {
            row += (cos(i, j) / tau).exp();
            col += (cos(j, i) / tau).exp();
        }
        let pos = (cos(i, i) / tau).exp();
        total -= (pos / row).ln() + (pos / col).ln();
    }
    total / (2.0 * n as f64)
}

fn info_nce_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(1..=16);
        let d = rng.random_range(1..=32);
        let (v, t) = (gaussian(&mut rng, n, d), gaussian(&mut rng, n, d));
        let tau = TemperatureParam::from_tau(rng.random_range(0.05..1.0));
        let got = info_nce(&batch(&v), &batch(&t), tau).map_err(|e| e.to_string())?.loss;
        let want = naive_info_nce(&v, &t, tau.tau());
        let rel = if want == 0.0 { got.abs() } else { (got - want).abs() / want.abs() };
        ensure!(rel <= 1e-10, "case {case}: {got} vs {want}");
        worst = worst.max(rel);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let v = gaussian(&mut rng, 1, 5);
        let t = gaussian(&mut rng, 1, 5);
        let l = info_nce(&batch(&v), &batch(&t), TemperatureParam::default()).unwrap().loss;
        ensure!(l == 0.0, "N=1 loss {l}");
    }
    let same = Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]).unwrap();
    let l = info_nce(&batch(&same), &batch(&same), TemperatureParam::default()).unwrap().loss;
    ensure!((l - 2f64.ln()).abs() <= 1e-12, "uniform N=2 loss {l}");
    Ok(format!("100 batches, worst relative error {worst:.1e}; N=1 gives 0; uniform N=2 gives ln 2"))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let loss_at = |v: &Array2<f64>, t: &Array2<f64>, log_tau: f64| {
        info_nce(&batch(v), &batch(t), TemperatureParam { log_tau }).unwrap().loss
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 || (a - b).abs() <= 1e-5 * a.abs().max(b.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut entries = 0;
    for case in 0..100 {
        let n = rng.random_range(2..=8);
        let d = rng.random_range(2..=8);
        let (v, t) = (gaussian(&mut rng, n, d), gaussian(&mut rng, n, d));
        let log_tau = rng.random_range(-1.5..0.0);
        let g = info_nce_grad(&batch(&v), &batch(&t), TemperatureParam { log_tau }).map_err(|e| e.to_string())?;
        for idx in ndarray::indices((n, d)) {
            let (mut vp, mut vm) = (v.clone(), v.clone());
            vp[idx] += h;
            vm[idx] -= h;
            let num = (loss_at(&vp, &t, log_tau) - loss_at(&vm, &t, log_tau)) / (2.0 * h);
            ensure!(close(g.dv[idx], num), "case {case} dv{idx:?}: {} vs {num}", g.dv[idx]);
            let (mut tp, mut tm) = (t.clone(), t.clone());
            tp[idx] += h;
            tm[idx] -= h;
            let num = (loss_at(&v, &tp, log_tau) - loss_at(&v, &tm, log_tau)) / (2.0 * h);
            ensure!(close(g.dt[idx], num), "case {case} dt{idx:?}: {} vs {num}", g.dt[idx]);
            entries += 2;
        }
        let num = (loss_at(&v, &t, log_tau + h) - loss_at(&v, &t, log_tau - h)) / (2.0 * h);
        ensure!(close(g.dlog_tau, num), "case {case} dlog_tau: {} vs {num}", g.dlog_tau);
        entries += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("100 batches, {entries} partial derivatives within tolerance"))
}

fn toy_training() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let v = gaussian(&mut rng, 64, 32);
    let t = &v + &(gaussian(&mut rng, 64, 32) * 0.1);
    let config = AlignTrainConfig { steps: 500, learning_rate: 0.01, seed: 7, ..AlignTrainConfig::default() };
    let out = train_alignment(&batch(&v), &batch(&t), &config).map_err(|e| e.to_string())?;
    let curve = &out.loss_curve;
    ensure!(curve.len() == 501, "curve has {} points", curve.len());
    let ln64 = 64f64.ln();
    let (first, last) = (curve[0], curve[500]);
    ensure!((first - ln64).abs() <= 0.1 * ln64, "initial loss {first} vs ln 64 = {ln64}");
    ensure!(last < 0.5 * ln64, "final loss {last}");
    let smoothed: Vec<f64> = curve.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    let rises = smoothed.windows(2).filter(|w| w[1] > w[0]).count();
    ensure!(rises == 0, "smoothed curve rises {rises} times");
    Ok(format!("loss {first:.4} -> {last:.2e} over 500 steps, smoothed curve non-increasing"))
}

// ---------------------------------------------------------------- attention and masking

fn naive_attention(q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
    let d = q.ncols() as f64;
    let mut out = Array2::zeros((q.nrows(), v.ncols()));
    for i in 0..q.nrows() {
        let scores: Vec<f64> =
            (0..k.nrows()).map(|j| (0..q.ncols()).map(|c| q[[i, c]] * k[[j, c]]).sum::<f64>() / d.sqrt()).collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for j in 0..k.nrows() {
            for c in 0..v.ncols() {
                out[[i, c]] += e[j] / z * v[[j, c]];
            }
        }
    }
    out
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn st_attn_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let proj = |rng: &mut ChaCha8Rng, d: usize| Projections {
        wq: gaussian(rng, d, d),
        wk: gaussian(rng, d, d),
        wv: gaussian(rng, d, d),
    };
    let (mut dup_worst, mut loop_worst): (f64, f64) = (0.0, 0.0);
    for case in 0..100 {
        let (t_len, p, d) = (rng.random_range(1..=4), rng.random_range(1..=6), rng.random_range(1..=6));
        let frame = gaussian(&mut rng, p, d);
        let w = proj(&mut rng, d);
        let frames = Array3::from_shape_fn((t_len, p, d), |(_, r, c)| frame[[r, c]]);
        let out = st_attn(&frames, &w).map_err(|e| e.to_string())?;
        let own = naive_attention(&frame.dot(&w.wq), &frame.dot(&w.wk), &frame.dot(&w.wv));
        for t in 0..t_len {
            let diff = max_abs_diff(&out.index_axis(Axis(0), t).to_owned(), &own);
            ensure!(diff <= 1e-12, "duplication case {case} frame {t}: {diff:e}");
            dup_worst = dup_worst.max(diff);
        }
    }
    for case in 0..100 {
        let (p, d) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let frames = Array3::from_shape_simple_fn((2, p, d), || rng.random_range(-2.0..2.0));
        let w = proj(&mut rng, d);
        let out = st_attn(&frames, &w).map_err(|e| e.to_string())?;
        for t in 0..2usize {
            let prev = t.saturating_sub(1);
            let kv = Array2::from_shape_fn((2 * p, d), |(r, c)| if r < p { frames[[prev, r, c]] } else { frames[[t, r - p, c]] });
            let cur = frames.index_axis(Axis(0), t).to_owned();
            let want = naive_attention(&cur.dot(&w.wq), &kv.dot(&w.wk), &kv.dot(&w.wv));
            let diff = max_abs_diff(&out.index_axis(Axis(0), t).to_owned(), &want);
            ensure!(diff <= 1e-10, "T=2 case {case} frame {t}: {diff:e}");
            loop_worst = loop_worst.max(diff);
        }
    }
    Ok(format!("duplication worst {dup_worst:.1e}, T=2 loop worst {loop_worst:.1e}"))
}

fn masking() -> Outcome {
    let ratios = [0.0, 0.25, 0.5, 0.75, 0.9];
    let mut layouts = 0;
    for n in 1..=256usize {
        for &ratio in &ratios {
            let want = ((1.0 - ratio) * n as f64).round() as usize;
            for (frames, patches) in [(1, n), (n, 1)] {
                for has_cls in [false, true] {
                    let layout = TokenLayout { frames, patches, dim: 1, has_cls };
                    for seed in 0..3 {
                        let kept = generate_patch_mask(layout, ratio, seed).map_err(|e| e.to_string())?;
                        let patches_kept = kept.iter().filter(|&&i| !(has_cls && i == 0)).count();
                        ensure!(patches_kept == want, "n={n} ratio={ratio}: kept {patches_kept}, want {want}");
                        ensure!(!has_cls || kept.first() == Some(&0), "n={n} ratio={ratio}: cls dropped");
                        let hi = n + usize::from(has_cls);
                        ensure!(kept.windows(2).all(|w| w[0] < w[1]) && kept.iter().all(|&i| i < hi), "bad indices");
                    }
                    layouts += 1;
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (n, ratio) in [(16, 0.25), (16, 0.5), (49, 0.75), (196, 0.9)] {
        let layout = TokenLayout { frames: 1, patches: n, dim: 1, has_cls: true };
        let mut counts = vec![0u32; n + 1];
        for seed in 0..10_000u64 {
            for i in generate_patch_mask(layout, ratio, seed).unwrap() {
                counts[i] += 1;
            }
        }
        ensure!(counts[0] == 10_000, "cls kept {} times", counts[0]);
        let expected = ((1.0 - ratio) * n as f64).round() / n as f64;
        for &c in &counts[1..] {
            let dev = (f64::from(c) / 10_000.0 - expected).abs();
            ensure!(dev <= 0.02, "n={n} ratio={ratio}: frequency off by {dev}");
            worst = worst.max(dev);
        }
    }
    Ok(format!("{layouts} layouts exact; keep frequency within {worst:.4} of uniform over 10k seeds"))
}

// ---------------------------------------------------------------- sampling

fn scored_clip(video: &str, start_s: i64, len_s: i64, sim: f64) -> ClipRecord {
    let mut c = ClipRecord::new(video, Millis::from_secs(start_s), Millis::from_secs(start_s + len_s));
    c.scores = Some(ScoreSet { aesthetic: 5.0, umt_sim: sim });
    c
}

fn random_pool(rng: &mut ChaCha8Rng, max_clips: usize) -> (Vec<ClipRecord>, Durations) {
    let n_videos = rng.random_range(1..=8);
    let mut durations = Durations::new();
    let mut clips = Vec::new();
    let mut next_start = vec![0i64; n_videos];
    let n_clips = rng.random_range(n_videos..=max_clips.max(n_videos));
    for i in 0..n_clips {
        let v = if i < n_videos { i } else { rng.random_range(0..n_videos) };
        let len = rng.random_range(2..8);
        // Coarse similarities so the threshold often sits on ties.
        let sim = f64::from(rng.random_range(-4..=4i8)) / 4.0;
        clips.push(scored_clip(&format!("v{v}"), next_start[v], len, sim));
        next_start[v] += len + rng.random_range(0..3);
    }
    for (v, end) in next_start.iter().enumerate() {
        durations.insert(format!("v{v}"), Millis::from_secs(end + rng.random_range(1..100)));
    }
    (clips, durations)
}

/// Threshold from an integer percentage: the `ceil(pct * len / 100)`-th
/// largest score.
fn oracle_threshold(scores: &[f64], pct: usize) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let k = (pct * s.len()).div_ceil(100).max(1);
    s[k - 1]
}

fn chi_square(observed: &[f64], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum()
}

fn sampler() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(27);

    // Similarity filter.
    let mut violations = 0;
    for trial in 0..10_000u64 {
        let (clips, durations) = random_pool(&mut rng, 30);
        let pct = rng.random_range(1..=100);
        let n = rng.random_range(0..=clips.len() + 2);
        let sims: Vec<f64> = clips.iter().map(|c| c.scores.unwrap().umt_sim).collect();
        let threshold = oracle_threshold(&sims, pct);
        let out = sample_flt(&clips, &durations, n, trial, pct as f64 / 100.0).map_err(|e| e.to_string())?;
        let pool = sims.iter().filter(|&&s| s >= threshold).count();
        violations += out.iter().filter(|c| c.scores.unwrap().umt_sim < threshold).count();
        ensure!(out.len() == n.min(pool), "trial {trial}: {} clips from pool {pool} with n {n}", out.len());
        ensure!(out.iter().all(|c| clips.contains(c)), "trial {trial}: foreign clip");
    }
    ensure!(violations == 0, "{violations} below-threshold clips");

    let q = quantile_threshold(&(1..=10).map(f64::from).collect::<Vec<_>>(), 0.30).map_err(|e| e.to_string())?;
    ensure!(q == 8.0, "quantile of 1..10 at 0.30 is {q}");

    // One clip per video when the budget equals the video count.
    for trial in 0..2_000u64 {
        let (clips, durations) = random_pool(&mut rng, 30);
        let videos: BTreeSet<&str> = clips.iter().map(|c| c.video_id.as_str()).collect();
        let out = sample_div(&clips, &durations, videos.len(), trial).map_err(|e| e.to_string())?;
        let covered: BTreeSet<&str> = out.iter().map(|c| c.video_id.as_str()).collect();
        ensure!(out.len() == videos.len() && covered == videos, "trial {trial}: videos not covered once each");
    }

    // Weighted phase: 20 clips over 5 videos of different lengths.
    let lengths = [20i64, 45, 60, 120, 300];
    let mut clips = Vec::new();
    let mut durations = Durations::new();
    for (v, &len) in lengths.iter().enumerate() {
        durations.insert(format!("w{v}"), Millis::from_secs(len));
        for k in 0..4 {
            clips.push(scored_clip(&format!("w{v}"), 4 * k, 3, 0.0));
        }
    }
    let reps: Vec<ClipRecord> = sample_div(&clips, &durations, lengths.len(), 0).map_err(|e| e.to_string())?;
    let rest: Vec<&ClipRecord> = clips.iter().filter(|c| !reps.contains(c)).collect();
    let weight = |c: &ClipRecord| 1.0 / durations[&c.video_id].as_secs_f64();
    let total: f64 = rest.iter().map(|c| weight(c)).sum();
    let trials = 100_000u64;
    let alpha_crit = |df: usize| ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99);

    // Budget one above the video count: a single weighted draw.
    let mut counts: HashMap<String, f64> = HashMap::new();
    for seed in 0..trials {
        let out = sample_div(&clips, &durations, lengths.len() + 1, seed).unwrap();
        let extra: Vec<&ClipRecord> = out.iter().filter(|c| !reps.contains(c)).collect();
        ensure!(extra.len() == 1, "seed {seed}: {} extra clips", extra.len());
        *counts.entry(extra[0].clip_id.clone()).or_default() += 1.0;
    }
    let observed: Vec<f64> = rest.iter().map(|c| counts.get(&c.clip_id).copied().unwrap_or(0.0)).collect();
    let expected: Vec<f64> = rest.iter().map(|c| trials as f64 * weight(c) / total).collect();
    let stat1 = chi_square(&observed, &expected);
    let crit1 = alpha_crit(rest.len() - 1);
    ensure!(stat1 < crit1, "single draw: chi-square {stat1:.2} >= {crit1:.2}");

    // Two draws: unordered pair frequencies against successive weighted
    // draws without replacement, enumerated exactly.
    let mut pair_counts: HashMap<(String, String), f64> = HashMap::new();
    for seed in 0..trials {
        let out = sample_div(&clips, &durations, lengths.len() + 2, seed).unwrap();
        let mut extra: Vec<String> = out.iter().filter(|c| !reps.contains(c)).map(|c| c.clip_id.clone()).collect();
        extra.sort();
        ensure!(extra.len() == 2, "seed {seed}: {} extra clips", extra.len());
        *pair_counts.entry((extra[0].clone(), extra[1].clone())).or_default() += 1.0;
    }
    let mut exact: BTreeMap<(String, String), f64> = BTreeMap::new();
    for a in &rest {
        for b in &rest {
            if a.clip_id != b.clip_id {
                let p = weight(a) / total * weight(b) / (total - weight(a));
                let key = if a.clip_id < b.clip_id {
                    (a.clip_id.clone(), b.clip_id.clone())
                } else {
                    (b.clip_id.clone(), a.clip_id.clone())
                };
                *exact.entry(key).or_default() += p;
            }
        }
    }
    let observed: Vec<f64> = exact.keys().map(|k| pair_counts.get(k).copied().unwrap_or(0.0)).collect();
    let expected: Vec<f64> = exact.values().map(|p| p * trials as f64).collect();
    let stat2 = chi_square(&observed, &expected);
    let crit2 = alpha_crit(exact.len() - 1);
    ensure!(stat2 < crit2, "two draws: chi-square {stat2:.2} >= {crit2:.2}");

    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!(
        "filter 0 violations in 10k trials; quantile 8.0; full coverage; chi-square {stat1:.1} < {crit1:.1} and {stat2:.1} < {crit2:.1}"
    ))
}

// ---------------------------------------------------------------- interleaving and scoring

fn captioned_clips(video: &str, n: usize, asr: Option<&str>) -> Vec<ClipRecord> {
    (0..n as i64)
        .map(|i| {
            let mut c = ClipRecord::new(video, Millis::from_secs(10 * i), Millis::from_secs(10 * i + 4));
            c.caption = Some(format!("caption {i} of {video}"));
            c.asr_text = asr.map(str::to_string);
            c
        })
        .collect()
}

fn interleave_stats() -> Outcome {
    let clips = captioned_clips("vid", 10, None);
    let mut kept = 0usize;
    for seed in 0..10_000u64 {
        kept += build_format_a(&clips, DEFAULT_DROP_PROB, seed).map_err(|e| e.to_string())?.video_refs();
    }
    let fraction = kept as f64 / 100_000.0;
    ensure!(DEFAULT_DROP_PROB == 0.3, "default drop probability {DEFAULT_DROP_PROB}");
    ensure!((fraction - 0.70).abs() <= 0.02, "keep fraction {fraction}");
    for seed in 0..10_000u64 {
        for asr in [None, Some("")] {
            let clips = captioned_clips("vid", 1 + (seed % 7) as usize, asr);
            let a = build_format_a(&clips, DEFAULT_DROP_PROB, seed).unwrap().to_line();
            let b = build_format_b(&clips, DEFAULT_DROP_PROB, seed).unwrap().to_line();
            ensure!(a.as_bytes() == b.as_bytes(), "seed {seed}: {a} vs {b}");
        }
    }
    Ok(format!("keep fraction {fraction:.4} over 10k seeds; format B without transcripts equals format A"))
}

fn scoring_constants() -> Outcome {
    ensure!(SAMPLED_FRAMES == 4, "sampled frames {SAMPLED_FRAMES}");
    let idx = uniform_sample_indices(8, 4).map_err(|e| e.to_string())?;
    ensure!(idx == [1, 3, 5, 7], "indices {idx:?}");
    let cs = clipsim(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]], &[1.0, 0.0]).map_err(|e| e.to_string())?;
    ensure!(cs == 0.0, "clipsim {cs}");

    // Unsampled frames carry the extreme values; they must not matter.
    let frame_scores = vec![9.9, 4.0, 0.5, 6.5, 9.8, 5.0, 9.7, 3.0];
    let text = vec![1.0, 0.0];
    let frame_embeddings: Vec<Vec<f64>> =
        (0..8).map(|i| if i % 2 == 1 { vec![1.0, f64::from(i)] } else { vec![-50.0, 1.0] }).collect();
    let f = ClipFeatures { clip_id: "c".into(), frame_scores, frame_embeddings, text_embedding: text };
    let s = score_clip(&f).map_err(|e| e.to_string())?;
    ensure!(s.aesthetic == 6.5, "aesthetic {}", s.aesthetic);
    // Mean of frames 1,3,5,7 is (1, 4): cosine with (1, 0) is 1/sqrt(17).
    let want = 1.0 / 17f64.sqrt();
    ensure!((s.umt_sim - want).abs() < 1e-15, "umt_sim {} vs {want}", s.umt_sim);
    Ok("k=4 sampling at [1, 3, 5, 7]; aesthetic is the sampled max; clipsim of {1, 0, -1} is 0".into())
}

// ---------------------------------------------------------------- metrics

fn sort_rank(row: &[f64], target: usize) -> usize {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order.iter().position(|&j| j == target).unwrap()
}

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    for case in 0..1000 {
        let (n, m) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let coarse = rng.random_bool(0.5);
        let sim = Array2::from_shape_simple_fn((n, m), || {
            if coarse { f64::from(rng.random_range(0..5u8)) } else { rng.random_range(-1.0..1.0) }
        });
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        let k = rng.random_range(1..=m);
        let ranks: Vec<usize> = (0..n).map(|i| sort_rank(sim.row(i).as_slice().unwrap(), labels[i])).collect();
        let oracle = |k: usize| ranks.iter().filter(|&&r| r < k).count() as f64 / n as f64;
        let r = recall_at_k(&sim, &labels, k).map_err(|e| e.to_string())?;
        ensure!(r == oracle(k), "case {case}: recall@{k} {r} vs {}", oracle(k));
        let a = topk_accuracy(&sim, &labels, k).map_err(|e| e.to_string())?;
        ensure!(a == oracle(k), "case {case}: top{k} {a} vs {}", oracle(k));
        ensure!(recall_at_k(&sim, &labels, m).unwrap() == 1.0, "case {case}: k=M below 1");
        ensure!(topk_accuracy(&sim, &labels, m).unwrap() == 1.0, "case {case}: k=M below 1");
        if m >= 5 {
            let avg = avg_top1_top5(&sim, &labels).map_err(|e| e.to_string())?;
            let want = (topk_accuracy(&sim, &labels, 1).unwrap() + topk_accuracy(&sim, &labels, 5).unwrap()) / 2.0;
            ensure!(avg == want, "case {case}: avg {avg} vs {want}");
        }
    }
    Ok("1000 matrices exact, including ties; k=M gives 1.0".into())
}

// ---------------------------------------------------------------- manifest

const ALPHABET: &[char] = &['a', 'Z', '0', ' ', '"', '\\', '/', '\n', '\t', '\u{1}', 'é', '♪', '中', '🎬', '{', ',', ':'];

fn text(rng: &mut ChaCha8Rng, max: usize) -> String {
    (0..rng.random_range(0..=max)).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

fn ident(rng: &mut ChaCha8Rng) -> String {
    let s = text(rng, 12);
    if s.is_empty() { "x".into() } else { s }
}

fn extra_fields(rng: &mut ChaCha8Rng) -> String {
    const VALUES: [&str; 6] = ["1.50", "[1,2.0,\"x\"]", "{\"a\":{\"b\":null}}", "true", "\"\\u00e9\"", "-0.0"];
    (0..rng.random_range(0..3))
        .map(|i| format!(",\"x_{i}\":{}", VALUES[rng.random_range(0..VALUES.len())]))
        .collect()
}

fn random_video(rng: &mut ChaCha8Rng) -> Record {
    let duration = Millis(rng.random_range(10_000..=1_800_000));
    let mut t = 0;
    let mut asr_segments = Vec::new();
    while rng.random_bool(0.6) && t + 2 < duration.0 {
        let start = rng.random_range(t..duration.0 - 1);
        let end = rng.random_range(start + 1..=duration.0);
        asr_segments.push(AsrSegment { start: Millis(start), end: Millis(end), text: text(rng, 20) });
        t = start;
    }
    let short = rng.random_range(360..=720);
    let long = rng.random_range(short..=4096);
    let (width, height) = if rng.random_bool(0.5) { (long, short) } else { (short, long) };
    Record::Video(VideoRecord {
        video_id: ident(rng),
        duration,
        fps: rng.random_range(0.5..240.0),
        resolution: Resolution { width, height },
        category: text(rng, 10),
        language: text(rng, 3),
        title: text(rng, 40),
        asr_segments,
        extra: Default::default(),
    })
}

fn random_clip(rng: &mut ChaCha8Rng) -> Record {
    let start = Millis(rng.random_range(0..10_000_000));
    let end = Millis(start.0 + rng.random_range(2_000..600_000));
    let mut c = ClipRecord::new(&ident(rng), start, end);
    if rng.random_bool(0.5) {
        c.asr_text = Some(text(rng, 30));
    }
    if rng.random_bool(0.5) {
        c.caption = Some(text(rng, 30));
    }
    if rng.random_bool(0.5) {
        let mut idx = 0u64;
        let fine: Vec<(u64, String)> = (0..rng.random_range(0..5))
            .map(|_| {
                idx += rng.random_range(1..100);
                (idx, text(rng, 10))
            })
            .collect();
        let summary = if fine.is_empty() { String::new() } else { ident(rng) };
        c.multiscale = Some(MultiscaleCaption { fine_frame_captions: fine, fine_summary: summary, coarse_caption: text(rng, 10) });
    }
    if rng.random_bool(0.5) {
        let aesthetic = if rng.random_bool(0.5) { rng.random_range(0.0..10.0) } else { rng.random::<f64>() * 1e300 - 5e299 };
        c.scores = Some(ScoreSet { aesthetic, umt_sim: rng.random_range(-1.0..=1.0) });
    }
    Record::Clip(c)
}

fn invalid_record(line: &str) -> Option<Vec<Violation>> {
    match parse_manifest_line(line) {
        Err(ManifestError::InvalidRecord { violations, .. }) => Some(violations),
        _ => None,
    }
}

fn problems(text: &str) -> Option<Vec<String>> {
    match Manifest::read_from(text.as_bytes(), &ValidationPolicy::default()) {
        Err(ManifestError::Validation(p)) => Some(p.iter().map(|p| p.message.clone()).collect()),
        _ => None,
    }
}

fn manifest_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for i in 0..10_000 {
        let record = if rng.random_bool(0.5) { random_video(&mut rng) } else { random_clip(&mut rng) };
        let mut line = serialize_record(&record);
        line.pop();
        line.push_str(&extra_fields(&mut rng));
        line.push('}');
        let parsed = parse_manifest_line(&line).map_err(|e| format!("record {i}: {e}\n{line}"))?;
        let again = serialize_record(&parsed);
        ensure!(again == line, "record {i} changed:\n{line}\n{again}");
        let mut bare = parsed.clone();
        match &mut bare {
            Record::Video(v) => v.extra = Default::default(),
            Record::Clip(c) => c.extra = Default::default(),
        }
        ensure!(bare == record, "record {i} fields changed");
    }

    let clip = |id: &str, video: &str, s: f64, e: f64| {
        format!(r#"{{"type":"clip","clip_id":"{id}","video_id":"{video}","start_s":{s:?},"end_s":{e:?}}}"#)
    };
    let video = |id: &str, dur: f64, res: (u32, u32), asr: &str| {
        format!(
            r#"{{"type":"video","video_id":"{id}","duration_s":{dur:?},"fps":25.0,"resolution":[{},{}],"category":"c","language":"en","title":"t","asr_segments":[{asr}]}}"#,
            res.0, res.1
        )
    };
    for bad in ["", "not json", "[1]", r#"{"type":"frame"}"#, r#"{"type":"clip","clip_id":"v.000000000"}"#] {
        ensure!(matches!(parse_manifest_line(bad), Err(ManifestError::MalformedLine(_))), "{bad:?} is not malformed");
    }
    let cases: Vec<(String, Violation)> = vec![
        (clip("v.000013000", "v", 13.0, 3.0), Violation::IntervalOrdering),
        (clip("v.000000000", "v", 0.0, 1.5), Violation::ClipTooShort),
        (clip("v.000000001", "v", 0.0, 5.0), Violation::ClipIdMismatch),
        (clip("v.-00001000", "v", -1.0, 5.0), Violation::NegativeStart),
        (clip(".000000000", "", 0.0, 5.0), Violation::EmptyId),
        (clip("v.000000000", "v", 0.0, 5.0).replace('}', r#","scores":{"aesthetic":5.0,"umt_sim":1.5}}"#), Violation::SimilarityRange),
        (
            clip("v.000000000", "v", 0.0, 5.0)
                .replace('}', r#","multiscale":{"fine_frame_captions":[[3,"a"],[1,"b"]],"fine_summary":"s","coarse_caption":""}}"#),
            Violation::FrameIndexOrder,
        ),
        (
            clip("v.000000000", "v", 0.0, 5.0)
                .replace('}', r#","multiscale":{"fine_frame_captions":[],"fine_summary":"s","coarse_caption":""}}"#),
            Violation::SummaryConsistency,
        ),
        (video("v", 5.0, (640, 360), ""), Violation::DurationWindow),
        (video("v", 60.0, (320, 240), ""), Violation::ResolutionWindow),
        (video("v", 0.0, (640, 360), ""), Violation::NonpositiveDuration),
        (video("v", 60.0, (640, 360), r#"[5.0,4.0,"a"]"#), Violation::AsrInterval),
        (video("v", 60.0, (640, 360), r#"[5.0,6.0,"a"],[1.0,2.0,"b"]"#), Violation::AsrOrdering),
        (video("v", 60.0, (640, 360), r#"[50.0,61.0,"a"]"#), Violation::AsrBeyondDuration),
    ];
    for (line, want) in &cases {
        let got = invalid_record(line);
        ensure!(got.as_deref().is_some_and(|v| v.contains(want)), "{line}: expected {want:?}, got {got:?}");
    }
    let fps_zero = video("v", 60.0, (640, 360), "").replace("25.0", "0.0");
    ensure!(invalid_record(&fps_zero).is_some_and(|v| v == [Violation::NonpositiveFps]), "fps 0 accepted");

    let header = "{\"schema_version\":1}\n";
    ensure!(matches!(Manifest::read_from(&b""[..], &ValidationPolicy::default()), Err(ManifestError::MissingHeader)), "empty input");
    ensure!(
        matches!(Manifest::read_from(&b"{\"schema_version\":2}\n"[..], &ValidationPolicy::default()), Err(ManifestError::UnsupportedVersion(2))),
        "version 2 accepted"
    );
    let v = video("v", 30.0, (640, 360), "");
    let cross = [
        (format!("{header}{}\n", clip("v.000000000", "v", 0.0, 5.0)), "missing parent video"),
        (format!("{header}{v}\n{v}\n"), "duplicate video id"),
        (format!("{header}{v}\n{}\n{}\n", clip("v.000000000", "v", 0.0, 5.0), clip("v.000000000", "v", 0.0, 5.0)), "duplicate clip id"),
        (format!("{header}{v}\n{}\n{}\n", clip("v.000000000", "v", 0.0, 5.0), clip("v.000004000", "v", 4.0, 9.0)), "overlapping clips"),
        (format!("{header}{v}\n{}\n", clip("v.000028000", "v", 28.0, 31.0)), "clip beyond video duration"),
    ];
    for (text, want) in &cross {
        let got = problems(text);
        ensure!(got.as_ref().is_some_and(|p| p.iter().any(|m| m == want)), "expected {want:?}, got {got:?}");
    }
    Ok(format!("10000 records byte-exact; {} record and {} manifest error kinds reported", cases.len() + 6, cross.len() + 2))
}

// ---------------------------------------------------------------- end to end

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Runs the fixture pipeline in `dir`; returns every artifact by name.
fn pipeline(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let corpus = fixtures().join("corpus");
    let config = fixtures().join("pipeline.toml");
    let manifest = corpus.join("manifest.jsonl");
    let signatures = corpus.join("signatures");
    let steps: Vec<Vec<&str>> = vec![
        vec!["segment", "--manifest", manifest.to_str().unwrap(), "--signatures", signatures.to_str().unwrap(), "--out", "seg.jsonl"],
        vec!["caption", "--manifest", "seg.jsonl", "--out", "cap.jsonl"],
        vec!["features", "--manifest", "cap.jsonl", "--out", "feat.jsonl"],
        vec!["score", "--manifest", "cap.jsonl", "--features", "feat.jsonl", "--out", "scored.jsonl"],
        vec!["sample", "--manifest", "scored.jsonl", "--out", "sub.jsonl"],
        vec!["interleave", "--manifest", "sub.jsonl", "--out", "icl.jsonl"],
        vec!["stats", "--manifest", "scored.jsonl", "--out", "report.json"],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_vidcurate"))
            .arg("--config")
            .arg(&config)
            .args(&args)
            .current_dir(dir)
            .env_remove("VIDCURATE_PIPELINE_SEED")
            .env_remove("VIDCURATE_JOURNAL")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn golden_run() -> Outcome {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    ensure!(first == second, "two runs differ");
    for name in ["icl.jsonl", "report.json"] {
        let golden = fs::read(fixtures().join("golden").join(name)).map_err(|e| e.to_string())?;
        ensure!(first[name] == golden, "{name} differs from the checked-in golden file");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("{} artifacts identical across two runs; interleave and report match golden files", first.len()))
}

// ---------------------------------------------------------------- services

fn service_contract() -> Outcome {
    let rt = tokio::runtime::Builder::new_current_thread().enable_time().start_paused(true).build().unwrap();
    rt.block_on(async {
        let spec = |name: &str| CaptionServiceSpec::new(format!("stub://{name}"));
        let request = ServiceRequest { mode: Mode::Frame, inputs: vec!["v#0".into()], prompt: None };

        // Two failures, then success.
        let stub = Arc::new(StubService::echo("s").failing_first(vec![CallError::Timeout, CallError::Status(503, "busy".into())]));
        let c = ServiceClient::new(CaptionServiceSpec { max_retries: 3, backoff_base_ms: 200, ..spec("s") }, stub.clone())
            .map_err(|e| e.to_string())?;
        let r = c.request(request.clone(), 1).await.map_err(|f| format!("{:?}", f.last))?;
        ensure!(r.outputs == ["s v#0"], "outputs {:?}", r.outputs);
        let at: Vec<_> = stub.attempts().iter().map(|a| a.at).collect();
        let gaps: Vec<Duration> = at.windows(2).map(|w| w[1] - w[0]).collect();
        ensure!(gaps == [Duration::from_millis(200), Duration::from_millis(400)], "gaps {gaps:?}");

        // Permanent failure of one scale.
        let fine = Arc::new(StubService::fixed("a frame"));
        let sum = Arc::new(StubService::fixed("a summary"));
        let coarse = Arc::new(StubService::fixed("x").failing_always(CallError::Status(500, "down".into())));
        let retries = 2;
        let services = CaptionServices {
            fine: ServiceClient::new(spec("f"), fine.clone()).unwrap(),
            summarizer: ServiceClient::new(spec("m"), sum.clone()).unwrap(),
            coarse: ServiceClient::new(CaptionServiceSpec { max_retries: retries, ..spec("c") }, coarse.clone()).unwrap(),
        };
        let clip = ClipRecord::new("v", Millis(0), Millis(6_000));
        let frames = ClipFrames::for_clip(&clip, 25.0);
        match caption_clip(&clip, &frames, &services, &CaptionPlan::default()).await {
            Err(CaptionError::Partial(p)) => {
                ensure!(p.failed == Scale::Coarse, "failed scale {:?}", p.failed);
                ensure!(p.failure.attempts == retries + 1, "failure after {} attempts", p.failure.attempts);
                ensure!(p.clip.caption.as_deref() == Some("a summary"), "fine result lost");
            }
            other => return Err(format!("expected a partial result, got {other:?}")),
        }
        ensure!(coarse.attempts().len() == (retries + 1) as usize, "coarse saw {} attempts", coarse.attempts().len());

        // Concurrency bound.
        let limit = 3;
        let slow = || Arc::new(StubService::describer("d").with_delay(|_| Duration::from_millis(50)));
        let (fine, sum, coarse) = (slow(), slow(), slow());
        let services = CaptionServices {
            fine: ServiceClient::new(CaptionServiceSpec { max_in_flight: limit, ..spec("f") }, fine.clone()).unwrap(),
            summarizer: ServiceClient::new(CaptionServiceSpec { max_in_flight: limit, ..spec("m") }, sum.clone()).unwrap(),
            coarse: ServiceClient::new(CaptionServiceSpec { max_in_flight: limit, ..spec("c") }, coarse.clone()).unwrap(),
        };
        let jobs: Vec<(ClipRecord, ClipFrames)> = (0..12)
            .map(|i| {
                let c = ClipRecord::new("v", Millis(10_000 * i), Millis(10_000 * i + 5_000));
                let f = ClipFrames::for_clip(&c, 25.0);
                (c, f)
            })
            .collect();
        let results = caption_clips(jobs, &services, &CaptionPlan::default()).await;
        ensure!(results.iter().all(Result::is_ok), "captioning failed");
        let peaks = [fine.peak_in_flight(), sum.peak_in_flight(), coarse.peak_in_flight()];
        ensure!(peaks.iter().all(|&p| p <= limit), "peak in flight {peaks:?} above {limit}");
        ensure!(fine.peak_in_flight() == limit, "bound never reached: {peaks:?}");
        Ok(format!("retried after 200 and 400 ms; partial result after {} attempts; peak in flight {peaks:?} <= {limit}", retries + 1))
    })
}
