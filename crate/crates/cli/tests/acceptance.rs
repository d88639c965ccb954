//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure. Run with `cargo test -p pogona-cli --test acceptance`.

use std::fs;
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use pogona_core::activity::{activity_report, drift_slope, jitter};
use pogona_core::eval::{
    evaluate, map_50, map_50_95, EvalImage, EvalSettings, GroundTruth, Prediction,
};
use pogona_core::ingest::{
    parse_detection_log_str, parse_label_file, write_detection_log, ParseErrorKind,
};
use pogona_core::interpolate::{fill_gaps, Track};
use pogona_core::model::Provenance;
use pogona_core::synthgen::{generate, Scenario};
use pogona_core::{
    analyze, BBox, BehaviourKind, ClassLabel, Detection, FrameGeometry, RunConfig, Timeline,
};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AP_TOLERANCE: f64 = 0.01;
const GEOMETRY_TOLERANCE: f64 = 1e-9;
const SLOPE_TOLERANCE: f64 = 1e-9;
const C1_BUDGET_S: f64 = 10.0;
const C8_BUDGET_S: f64 = 2.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

struct Rng(ChaCha8Rng);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }
}

fn cfg() -> RunConfig {
    RunConfig::with_geometry(FrameGeometry::new(640, 480, 30.0).unwrap())
}

fn random_box(rng: &mut Rng) -> BBox {
    BBox::new(
        rng.range(0.1, 0.9),
        rng.range(0.1, 0.9),
        rng.range(0.05, 0.4),
        rng.range(0.05, 0.4),
    )
    .unwrap()
}

/// Up to 10 ground-truth boxes per class over 1..=4 images. Predictions
/// are jittered copies of ground truth or fresh boxes; confidences sit on
/// a coarse grid so ties occur.
fn micro_dataset(rng: &mut Rng) -> Vec<EvalImage> {
    let n_images = 1 + rng.below(4) as usize;
    let mut images: Vec<EvalImage> = (0..n_images)
        .map(|i| EvalImage {
            id: i.to_string(),
            predictions: Vec::new(),
            ground_truth: Vec::new(),
        })
        .collect();
    for class in ClassLabel::ALL {
        for _ in 0..rng.below(11) {
            let im = rng.below(n_images as u64) as usize;
            images[im].ground_truth.push(GroundTruth {
                class,
                bbox: random_box(rng),
            });
        }
        for _ in 0..rng.below(11) {
            let im = &mut images[rng.below(n_images as u64) as usize];
            let confidence = (1 + rng.below(20)) as f64 / 20.0;
            let same_class: Vec<BBox> = im
                .ground_truth
                .iter()
                .filter(|g| g.class == class)
                .map(|g| g.bbox)
                .collect();
            let bbox = if !same_class.is_empty() && rng.unit() < 0.7 {
                let g = same_class[rng.below(same_class.len() as u64) as usize];
                BBox {
                    cx: (g.cx + rng.range(-0.06, 0.06)).clamp(0.0, 1.0),
                    cy: (g.cy + rng.range(-0.06, 0.06)).clamp(0.0, 1.0),
                    ..g
                }
            } else {
                random_box(rng)
            };
            im.predictions.push(Prediction {
                class,
                bbox,
                confidence,
            });
        }
    }
    images
}

fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = ((a.cx + a.w / 2.0).min(b.cx + b.w / 2.0) - (a.cx - a.w / 2.0).max(b.cx - b.w / 2.0))
        .max(0.0);
    let iy = ((a.cy + a.h / 2.0).min(b.cy + b.h / 2.0) - (a.cy - a.h / 2.0).max(b.cy - b.h / 2.0))
        .max(0.0);
    let inter = ix * iy;
    let union = a.w * a.h + b.w * b.h - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Per-class TP/FP/FN plus the dataset-ranked hit list, counted by walking
/// every prediction against every ground-truth box.
struct Counts {
    tp: usize,
    fp: usize,
    fn_count: usize,
    ranked: Vec<(f64, bool)>,
}

fn brute_force(images: &[EvalImage], class: ClassLabel) -> Counts {
    let mut tagged = Vec::new();
    let (mut tp, mut fp, mut fn_count) = (0, 0, 0);
    for im in images {
        let preds: Vec<&Prediction> = im.predictions.iter().filter(|p| p.class == class).collect();
        let gts: Vec<&GroundTruth> = im
            .ground_truth
            .iter()
            .filter(|g| g.class == class)
            .collect();
        let mut order: Vec<usize> = (0..preds.len()).collect();
        order.sort_by(|&a, &b| {
            preds[b]
                .confidence
                .partial_cmp(&preds[a].confidence)
                .unwrap()
        });
        let mut taken = vec![false; gts.len()];
        let mut hit = vec![false; preds.len()];
        for pi in order {
            let mut best = None;
            let mut best_iou = 0.0;
            for (gi, g) in gts.iter().enumerate() {
                let v = oracle_iou(&preds[pi].bbox, &g.bbox);
                if !taken[gi] && v >= 0.5 && (best.is_none() || v > best_iou) {
                    best = Some(gi);
                    best_iou = v;
                }
            }
            if let Some(gi) = best {
                taken[gi] = true;
                hit[pi] = true;
            }
        }
        let found = taken.iter().filter(|&&t| t).count();
        tp += found;
        fp += preds.len() - found;
        fn_count += gts.len() - found;
        tagged.extend(preds.iter().zip(hit).map(|(p, h)| (p.confidence, h)));
    }
    tagged.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    Counts {
        tp,
        fp,
        fn_count,
        ranked: tagged,
    }
}

fn textbook_prf(tp: usize, fp: usize, fn_count: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_count == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_count) as f64
    };
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

/// Exact area under the precision envelope as a step function of recall.
fn continuous_ap(ranked: &[(f64, bool)], n_gt: usize) -> f64 {
    let mut points = Vec::new();
    let mut tp = 0;
    for (k, &(_, hit)) in ranked.iter().enumerate() {
        tp += usize::from(hit);
        points.push((tp as f64 / (k + 1) as f64, tp as f64 / n_gt as f64));
    }
    let mut area = 0.0;
    let mut prev = 0.0;
    for i in 0..points.len() {
        if points[i].1 > prev {
            let envelope = points[i..].iter().map(|p| p.0).fold(0.0, f64::max);
            area += (points[i].1 - prev) * envelope;
            prev = points[i].1;
        }
    }
    area
}

fn c1_eval_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(0xC1);
    let mut worst_ap = 0.0f64;
    for case in 0..200 {
        let images = micro_dataset(&mut rng);
        let report = evaluate(&images, EvalSettings::default());
        let (mut st, mut sf, mut sn) = (0, 0, 0);
        for (class, row) in ClassLabel::ALL.into_iter().zip(&report.classes) {
            let c = brute_force(&images, class);
            ensure!(
                (row.tp, row.fp, row.fn_count) == (c.tp, c.fp, c.fn_count),
                "case {case} {class:?}: counts {:?} vs oracle {:?}",
                (row.tp, row.fp, row.fn_count),
                (c.tp, c.fp, c.fn_count)
            );
            let (p, r, f) = textbook_prf(c.tp, c.fp, c.fn_count);
            ensure!(
                (row.precision, row.recall, row.f1) == (p, r, f),
                "case {case} {class:?}: P/R/F1 {:?} vs {:?}",
                (row.precision, row.recall, row.f1),
                (p, r, f)
            );
            st += c.tp;
            sf += c.fp;
            sn += c.fn_count;
            let n_gt = c.tp + c.fn_count;
            match row.ap50 {
                None => ensure!(
                    n_gt == 0,
                    "case {case} {class:?}: AP missing with {n_gt} ground truths"
                ),
                Some(ap) => {
                    let oracle = continuous_ap(&c.ranked, n_gt);
                    worst_ap = worst_ap.max((ap - oracle).abs());
                    ensure!(
                        (ap - oracle).abs() <= AP_TOLERANCE,
                        "case {case} {class:?}: AP {ap} vs continuous {oracle}"
                    );
                }
            }
        }
        let (p, r, f) = textbook_prf(st, sf, sn);
        ensure!(
            (report.all.precision, report.all.recall, report.all.f1) == (p, r, f),
            "case {case}: pooled P/R/F1 mismatch"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < C1_BUDGET_S, "took {elapsed:.2} s");
    Ok(format!(
        "200 datasets exact, max |AP - area| = {worst_ap:.4}, {elapsed:.2} s"
    ))
}

fn c2_degenerate() -> Outcome {
    let mut rng = Rng::new(0xC2);
    let mut checked = 0;
    for case in 0..200 {
        let images = micro_dataset(&mut rng);
        let m50 = map_50(&images);
        let m5095 = map_50_95(&images);
        ensure!(m5095 <= m50, "case {case}: mAP50-95 {m5095} > mAP50 {m50}");

        if images.iter().all(|im| im.ground_truth.is_empty()) {
            continue;
        }
        checked += 1;
        let perfect: Vec<EvalImage> = images
            .iter()
            .map(|im| EvalImage {
                predictions: im
                    .ground_truth
                    .iter()
                    .map(|g| Prediction {
                        class: g.class,
                        bbox: g.bbox,
                        confidence: 0.9,
                    })
                    .collect(),
                ..im.clone()
            })
            .collect();
        let a = evaluate(&perfect, EvalSettings::default()).all;
        let v = [a.precision, a.recall, a.f1, a.map50, a.map50_95];
        ensure!(v == [1.0; 5], "case {case}: perfect predictions gave {v:?}");
        let r = evaluate(&perfect, EvalSettings::default());
        for c in r.classes.iter().filter(|c| c.ground_truth > 0) {
            ensure!(
                c.ap50 == Some(1.0) && c.ap50_95 == Some(1.0),
                "case {case}: class AP {c:?}"
            );
        }

        let empty: Vec<EvalImage> = images
            .iter()
            .map(|im| EvalImage {
                predictions: Vec::new(),
                ..im.clone()
            })
            .collect();
        let a = evaluate(&empty, EvalSettings::default()).all;
        let v = [a.precision, a.recall, a.f1, a.map50, a.map50_95];
        ensure!(v == [0.0; 5], "case {case}: empty predictions gave {v:?}");
    }
    Ok(format!(
        "{checked} perfect/empty datasets, 200 mAP orderings"
    ))
}

fn run_scenario(s: &Scenario) -> pogona_core::AnalysisOutput {
    let g = generate(s, &cfg()).unwrap();
    analyze(&parse_detection_log_str(&g.log).unwrap(), &cfg())
}

fn c3_basking() -> Outcome {
    let out = run_scenario(&Scenario::new(BehaviourKind::Basking, 200, 1));
    let cov = out.activity_for(BehaviourKind::Basking).unwrap().coverage;
    ensure!(format!("{cov:.2}") == "100.00", "basking coverage {cov}");
    // Dragon center (0.52, 0.40), lamp center (0.50, 0.15) on 640x480.
    let dy: f64 = (0.40 - 0.15) * 480.0;
    let dx = (0.52 - 0.50) * 640.0;
    let theta = (dx / dy).atan().to_degrees();
    for f in &out.frames {
        let (Some(fdy), Some(ft)) = (f.delta_y, f.theta) else {
            return Err(format!("frame {} missing geometry", f.frame));
        };
        ensure!(
            (fdy - dy).abs() <= GEOMETRY_TOLERANCE,
            "frame {}: dy {fdy} vs {dy}",
            f.frame
        );
        ensure!(
            (ft - theta).abs() <= GEOMETRY_TOLERANCE,
            "frame {}: theta {ft} vs {theta}",
            f.frame
        );
    }

    let idle = run_scenario(&Scenario::new(BehaviourKind::Idle, 200, 1));
    let cov = idle.activity_for(BehaviourKind::Basking).unwrap().coverage;
    ensure!(format!("{cov:.2}") == "0.00", "idle basking coverage {cov}");
    ensure!(
        idle.hunting_events.is_empty(),
        "idle hunting events {:?}",
        idle.hunting_events
    );
    Ok(format!(
        "dy = {dy} px, theta = {theta:.6} deg on all 200 frames; idle 0.00%"
    ))
}

fn pogona(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pogona"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn c4_hunting() -> Outcome {
    let mut s = Scenario::new(BehaviourKind::Hunting, 200, 4);
    s.vanish_frame = Some(120);
    let out = run_scenario(&s);
    ensure!(
        out.hunting_events == [120],
        "events {:?}",
        out.hunting_events
    );

    let gamma = cfg().gamma;
    for distance in [gamma, 0.4, 0.6] {
        s.vanish_distance = distance;
        let far = run_scenario(&s);
        ensure!(
            far.hunting_events.is_empty(),
            "distance {distance}: events {:?}",
            far.hunting_events
        );
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("hunt.log");
    let o = pogona(&[
        "simulate",
        "--kind",
        "hunting",
        "--frames",
        "200",
        "--vanish-frame",
        "120",
        "--out",
        path(&log),
    ]);
    ensure!(o.status.success(), "simulate failed");
    let out_dir = dir.path().join("out");
    ensure!(
        pogona(&["analyze", "--log", path(&log), "--out", path(&out_dir)])
            .status
            .success(),
        "analyze failed"
    );
    let o = pogona(&["report", path(&out_dir.join("report.json"))]);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    let row = text
        .lines()
        .find(|l| l.starts_with("Hunting"))
        .ok_or("no hunting row")?;
    let cells: Vec<&str> = row.split_whitespace().collect();
    ensure!(cells[3..] == ["–", "–"], "hunting row {row:?}");
    Ok(format!(
        "one event at 120, none at distance >= {gamma}W, row: {}",
        cells.join(" ")
    ))
}

fn max_gap_in(log: &str, class: ClassLabel) -> u64 {
    let t = parse_detection_log_str(log).unwrap();
    let frames: Vec<u64> = t.of_class(class).map(|d| d.frame).collect();
    frames.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
}

fn random_track(rng: &mut Rng) -> Track {
    let mut t = Track::new(ClassLabel::BeardedDragon);
    let mut frame = rng.below(5);
    for _ in 0..1 + rng.below(30) {
        let b = BBox::new(
            rng.unit(),
            rng.unit(),
            rng.range(0.01, 0.5),
            rng.range(0.01, 0.5),
        )
        .unwrap();
        t.insert(Detection::observed(
            frame,
            ClassLabel::BeardedDragon,
            b,
            rng.unit(),
        ));
        frame += 1 + rng.below(25);
    }
    t
}

fn c5_interpolation() -> Outcome {
    let base = run_scenario(&Scenario::new(BehaviourKind::Basking, 400, 5));
    let base_cov = base.activity_for(BehaviourKind::Basking).unwrap().coverage;
    let mut s = Scenario::new(BehaviourKind::Basking, 400, 5);
    s.dropout_rate = 0.3;
    let g = generate(&s, &cfg()).unwrap();
    let gap = max_gap_in(&g.log, ClassLabel::BeardedDragon)
        .max(max_gap_in(&g.log, ClassLabel::HeatingLamp));
    ensure!(gap <= cfg().max_gap, "dropout produced a gap of {gap}");
    let out = analyze(&parse_detection_log_str(&g.log).unwrap(), &cfg());
    let cov = out.activity_for(BehaviourKind::Basking).unwrap().coverage;
    ensure!(cov >= 0.99 * base_cov, "coverage {cov} vs {base_cov}");

    let mut rng = Rng::new(0xC5);
    for case in 0..100 {
        let t = random_track(&mut rng);
        let max_gap = 1 + rng.below(20);
        let once = fill_gaps(&t, max_gap);
        let twice = fill_gaps(&once, max_gap);
        ensure!(once == twice, "track {case}: fill_gaps not idempotent");
        ensure!(
            t.iter().all(|d| once.get(d.frame) == Some(d)),
            "track {case}: observation altered"
        );
        ensure!(
            once.iter()
                .all(|d| d.provenance == Provenance::Observed || t.get(d.frame).is_none()),
            "track {case}: provenance"
        );
    }
    Ok(format!(
        "coverage {cov:.2}% vs {base_cov:.2}% (max gap {gap}); 100 tracks idempotent"
    ))
}

/// Slope by the normal equations, solved with Cramer's rule on raw sums.
fn cramer_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (st, sy, stt, sty) = points
        .iter()
        .fold((0.0, 0.0, 0.0, 0.0), |(a, b, c, d), &(t, y)| {
            (a + t, b + y, c + t * t, d + t * y)
        });
    (n * sty - st * sy) / (n * stt - st * st)
}

fn c6_activity() -> Outcome {
    let mut rng = Rng::new(0xC6);
    for _ in 0..20 {
        let c = rng.range(1.0, 200.0);
        let n = 2 + rng.below(100);
        let series: Vec<(u64, f64)> = (0..n).map(|f| (f, c)).collect();
        ensure!(jitter(&series) == Some(0.0), "constant jitter");
        let timed: Vec<(f64, f64)> = series.iter().map(|&(f, y)| (f as f64 / 30.0, y)).collect();
        let slope = drift_slope(&timed).unwrap();
        ensure!(slope.abs() <= SLOPE_TOLERANCE, "constant slope {slope}");
    }

    let states = vec![BehaviourKind::Basking; 90];
    let (a, b) = (100.0, -2.5);
    let dy: Vec<Option<f64>> = (0..90).map(|f| Some(a + b * f as f64 / 30.0)).collect();
    let r = activity_report(BehaviourKind::Basking, &states, &dy, 30.0);
    let slope = r.drift_slope.unwrap();
    ensure!(
        (slope - b).abs() <= SLOPE_TOLERANCE,
        "linear slope {slope} vs {b}"
    );

    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = 3 + rng.below(200) as usize;
        let points: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                (
                    i as f64 / 30.0 + rng.range(0.0, 0.01),
                    rng.range(50.0, 150.0),
                )
            })
            .collect();
        let ours = drift_slope(&points).unwrap();
        let oracle = cramer_slope(&points);
        let rel = (ours - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure!(
            rel <= SLOPE_TOLERANCE,
            "series {case}: {ours} vs {oracle} (rel {rel:e})"
        );
    }
    Ok(format!(
        "closed forms hold, max relative OLS error {worst:.1e}"
    ))
}

fn random_timeline(rng: &mut Rng) -> Timeline {
    let frame_count = 1 + rng.below(500);
    let dets = (0..rng.below(300))
        .map(|_| {
            let b = BBox::new(rng.unit(), rng.unit(), rng.unit(), rng.unit()).unwrap();
            let class = ClassLabel::ALL[rng.below(3) as usize];
            Detection::observed(rng.below(frame_count), class, b, rng.unit())
        })
        .collect();
    let geom = FrameGeometry::new(
        1 + rng.below(4000) as u32,
        1 + rng.below(4000) as u32,
        rng.range(1.0, 120.0),
    )
    .unwrap();
    Timeline::new(geom, frame_count, dets)
}

fn bits(t: &Timeline) -> Vec<[u64; 7]> {
    t.detections()
        .iter()
        .map(|d| {
            [
                d.frame,
                d.class.code().into(),
                d.bbox.cx.to_bits(),
                d.bbox.cy.to_bits(),
                d.bbox.w.to_bits(),
                d.bbox.h.to_bits(),
                d.confidence.to_bits(),
            ]
        })
        .collect()
}

fn c7_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("clip.log");
    let o = pogona(&[
        "simulate",
        "--kind",
        "hunting",
        "--frames",
        "300",
        "--seed",
        "9",
        "--noise",
        "0.004",
        "--dropout",
        "0.25",
        "--out",
        path(&log),
    ]);
    ensure!(o.status.success(), "simulate failed");
    let runs = [dir.path().join("a"), dir.path().join("b")];
    for out in &runs {
        let o = pogona(&[
            "analyze",
            "--log",
            path(&log),
            "--out",
            path(out),
            "--min-episode",
            "4",
        ]);
        ensure!(o.status.success(), "analyze failed");
    }
    for name in ["events.txt", "report.json", "frames.jsonl"] {
        let a = fs::read(runs[0].join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(runs[1].join(name)).map_err(|e| e.to_string())?;
        ensure!(a == b, "{name} differs between runs");
    }

    let mut rng = Rng::new(0xC7);
    for case in 0..100 {
        let t = random_timeline(&mut rng);
        let mut buf = Vec::new();
        write_detection_log(&t, &mut buf).unwrap();
        let back = parse_detection_log_str(std::str::from_utf8(&buf).unwrap())
            .map_err(|e| format!("{e}"))?;
        ensure!(bits(&back) == bits(&t), "timeline {case} not bit-exact");
        ensure!(
            back.geometry.fps.to_bits() == t.geometry.fps.to_bits()
                && back.frame_count == t.frame_count,
            "timeline {case} header"
        );
    }

    let alphabet = b"0123456789 .-+eE!#\tabcgnxyzinfNaN\n\r\xff\xc3";
    let mut typed = 0;
    for case in 0..10_000 {
        let len = rng.below(48) as usize;
        let line: Vec<u8> = if case % 2 == 0 {
            (0..len)
                .map(|_| alphabet[rng.below(alphabet.len() as u64) as usize])
                .collect()
        } else {
            (0..len).map(|_| rng.0.next_u64() as u8).collect()
        };
        let mut input = b"!geometry 640 480 30 100\n".to_vec();
        input.extend_from_slice(&line);
        let result = panic::catch_unwind(|| {
            let log = pogona_core::ingest::parse_detection_log(&input[..])
                .err()
                .map(|e| e.kind);
            let labels = parse_label_file(&line[..], case % 3 == 0)
                .err()
                .map(|e| e.kind);
            (log, labels)
        });
        let (log, labels) = result.map_err(|_| format!("parser panicked on {line:?}"))?;
        for kind in [log, labels].into_iter().flatten() {
            ensure!(
                !matches!(kind, ParseErrorKind::Io(_)),
                "untyped error on {line:?}"
            );
            typed += 1;
        }
    }
    Ok(format!("outputs byte-identical, 100 round-trips bit-exact, 10000 fuzz lines ({typed} typed errors, no panic)"))
}

fn c8_throughput() -> Outcome {
    let mut s = Scenario::new(BehaviourKind::Hunting, 41_000, 8);
    s.position_noise = 0.003;
    s.dropout_rate = 0.05;
    let g = generate(&s, &cfg()).unwrap();
    let lines = g.log.lines().filter(|l| !l.starts_with(['#', '!'])).count();
    ensure!(lines >= 100_000, "only {lines} detection lines");
    let start = Instant::now();
    let t = parse_detection_log_str(&g.log).map_err(|e| e.to_string())?;
    let out = analyze(&t, &cfg());
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(out.frames.len() == 41_000, "analysis incomplete");
    ensure!(elapsed < C8_BUDGET_S, "{lines} lines took {elapsed:.3} s");
    Ok(format!(
        "{lines} lines parsed and analyzed in {elapsed:.3} s"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("C1", "detection-eval oracle equivalence", c1_eval_oracle),
        ("C2", "degenerate metric conventions", c2_degenerate),
        ("C3", "basking rule", c3_basking),
        ("C4", "hunting rule", c4_hunting),
        ("C5", "interpolation continuity", c5_interpolation),
        ("C6", "activity metric closed forms", c6_activity),
        ("C7", "determinism and round-trip", c7_determinism),
        ("C8", "throughput", c8_throughput),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let outcome = panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
