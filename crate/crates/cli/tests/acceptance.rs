//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use psyling::adapt::{
    association, directives_for, synthetic_conversations, Adapter, Conversation, DirectiveKind, Lexicons, Satisfaction, Speaker,
};
use psyling::agreement::{difficulty_of, majority_vote, perfect_agreement};
use psyling::bundle::ModelBundle;
use psyling::corpus::{derive_gold, generate_synthetic, Corpus, Difficulty, GoldPolicy, Record};
use psyling::evaluate::{calibration_report, macro_prf, Band};
use psyling::model::{train_model, Inner, ModelConfig, ModelKind};
use psyling::neural::{grad_check, NeuralKind};
use psyling::{ByCharacteristic, Characteristic};
use psyling_cli::pipeline;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let code = psyling_cli::run(std::iter::once("psyling").chain(args.iter().copied()), &mut stdout, &mut stderr);
    if code == 0 {
        Ok(stdout)
    } else {
        Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&stderr)))
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=60);
        let pred: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let gold: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let report = macro_prf(&pred, &gold).map_err(err)?;
        let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mut fs = [0.0; 2];
        let mut ps = [0.0; 2];
        let mut rs = [0.0; 2];
        for (k, class) in [false, true].into_iter().enumerate() {
            let mut tp = 0;
            let mut predicted = 0;
            let mut actual = 0;
            for i in 0..n {
                tp += (pred[i] == class && gold[i] == class) as usize;
                predicted += (pred[i] == class) as usize;
                actual += (gold[i] == class) as usize;
            }
            ps[k] = div(tp, predicted);
            rs[k] = div(tp, actual);
            fs[k] = if ps[k] + rs[k] == 0.0 {
                0.0
            } else {
                2.0 * ps[k] * rs[k] / (ps[k] + rs[k])
            };
        }
        let m = report.macro_avg;
        for (got, want) in [
            (m.precision, (ps[0] + ps[1]) / 2.0),
            (m.recall, (rs[0] + rs[1]) / 2.0),
            (m.f1, (fs[0] + fs[1]) / 2.0),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let hand = macro_prf(&[true; 4], &[true, true, false, false]).map_err(err)?.macro_avg.f1;
    check(hand == 1.0 / 3.0, || format!("hand case macro-F {hand}"))?;
    Ok(format!("10000 pairs, max deviation {worst:e}; hand case {hand}"))
}

fn agreement_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut records = Vec::with_capacity(10_000);
    let mut unanimous = ByCharacteristic::<usize>::default();
    for i in 0..10_000 {
        let k = rng.random_range(2..=5);
        let votes: ByCharacteristic<Vec<bool>> = ByCharacteristic::from_fn(|_| (0..k).map(|_| rng.random_bool(0.7)).collect());
        for c in Characteristic::ALL {
            let yes = votes[c].iter().filter(|&&v| v).count();
            unanimous[c] += (yes == 0 || yes == k) as usize;
            let majority = majority_vote(&votes[c]);
            if k % 2 == 1 {
                check(majority.as_ref().ok() == Some(&(2 * yes > k)), || {
                    format!("majority of {:?}", votes[c])
                })?;
            } else {
                check(majority.is_err(), || format!("even vote count {:?} resolved", votes[c]))?;
            }
        }
        let difficulty: Vec<bool> = (0..rng.random_range(0..=4)).map(|_| rng.random()).collect();
        let hard = difficulty.iter().filter(|&&v| v).count();
        let expected = match (difficulty.len(), hard) {
            (0, _) => Difficulty::Unknown,
            (_, h) if h >= 2 => Difficulty::Difficult,
            _ => Difficulty::Easy,
        };
        check(difficulty_of(&difficulty) == expected, || format!("difficulty of {difficulty:?}"))?;
        records.push(Record {
            id: format!("r{i:05}"),
            text: format!("text {i}"),
            author_id: None,
            source: None,
            language: "en".into(),
            votes,
            difficulty_votes: None,
        });
    }
    let report = perfect_agreement(&Corpus::from_records(records).map_err(err)?);
    for c in Characteristic::ALL {
        let want = 100.0 * unanimous[c] as f64 / 10_000.0;
        check(report.per_characteristic[c] == Some(want), || {
            format!("{c}: {:?} vs {want}", report.per_characteristic[c])
        })?;
    }
    let votes = psyling::fixtures::difficulty_votes();
    let easy = votes.iter().filter(|v| difficulty_of(v) == Difficulty::Easy).count();
    let difficult = votes.iter().filter(|v| difficulty_of(v) == Difficulty::Difficult).count();
    check((easy, difficult) == (482, 518), || {
        format!("fixture gives {easy} easy / {difficult} difficult")
    })?;
    Ok(format!("10000 vote sets exact; fixture {easy} easy / {difficult} difficult"))
}

fn gradient_checks() -> Outcome {
    let t = Instant::now();
    let ccnn = grad_check(NeuralKind::CharCnn, 0).map_err(err)?;
    let seqnet = grad_check(NeuralKind::SeqNet, 0).map_err(err)?;
    let elapsed = t.elapsed();
    check(ccnn < 1e-4 && seqnet < 1e-4, || format!("ccnn {ccnn:e}, seqnet {seqnet:e}"))?;
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("max relative error ccnn {ccnn:.2e}, seqnet {seqnet:.2e}"))
}

fn separable_learning() -> Outcome {
    let t = Instant::now();
    let gold = derive_gold(&generate_synthetic(17, 1000, 1.0).map_err(err)?, GoldPolicy::PerfectOnly).map_err(err)?;
    let kinds = [ModelKind::NgSvm, ModelKind::SeqNet];
    let cells = pipeline::train_and_score(&gold, &kinds, &ModelConfig::default().with_seed(17), 200, 17).map_err(err)?;
    let elapsed = t.elapsed();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for cell in &cells {
        let (f1, base) = (cell.report.macro_avg.f1, cell.baseline.macro_avg.f1);
        let floor = if cell.kind == ModelKind::NgSvm { 0.95 } else { 0.90 };
        lines.push(format!("{}/{}={f1:.3}", cell.kind, cell.task));
        if f1 < floor || f1 - base < 0.30 {
            failures.push(format!("{} on {}: F1 {f1:.4} (baseline {base:.4})", cell.kind, cell.task));
        }
    }
    check(failures.is_empty(), || failures.join("; "))?;
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(lines.join(" "))
}

fn learning_curve_shape() -> Outcome {
    let mut lines = Vec::new();
    for kind in ["ngsvm", "ccnn", "seqnet"] {
        let args = [
            "curve",
            "--model",
            kind,
            "--task",
            "emotionality",
            "--sizes",
            "250,4000",
            "--marker-strength",
            "0.7",
            "--test-size",
            "1000",
            "--seed",
            "23",
        ];
        let first = cli(&args)?;
        let second = cli(&args)?;
        check(first == second, || format!("{kind}: curve CSV differs between runs"))?;
        let text = String::from_utf8(first).map_err(err)?;
        let f1: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| {
                l.split(',')
                    .nth(1)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| format!("bad row {l:?}"))
            })
            .collect::<Result<_, _>>()?;
        check(f1.len() == 2 && f1[1] >= f1[0], || format!("{kind}: F1 {f1:?}"))?;
        lines.push(format!("{kind} {:.3}->{:.3}", f1[0], f1[1]));
    }
    Ok(lines.join(", ") + "; CSV identical across runs")
}

fn calibration_mechanics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let n = 10_000;
    let p_no: Vec<f64> = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => [0.0, 0.4, 0.6, 0.85, 0.99, 1.0][rng.random_range(0..6)],
            _ => rng.random(),
        })
        .collect();
    let gold: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let difficulty: Vec<Difficulty> = (0..n)
        .map(|_| [Difficulty::Easy, Difficulty::Difficult, Difficulty::Unknown][rng.random_range(0..3)])
        .collect();
    let report = calibration_report(&p_no, &gold, &difficulty, &Band::DEFAULTS).map_err(err)?;
    for cell in &report.cells {
        let members: Vec<f64> = (0..n)
            .filter(|&i| difficulty[i] == cell.difficulty && gold[i] == cell.gold)
            .map(|i| p_no[i])
            .collect();
        check(cell.count == members.len(), || {
            format!("cell count {} vs {}", cell.count, members.len())
        })?;
        for (band, fraction) in Band::DEFAULTS.iter().zip(&cell.fractions) {
            let inside = members.iter().filter(|&&p| p >= band.lo && p <= band.hi).count();
            let want = (!members.is_empty()).then(|| inside as f64 / members.len() as f64);
            check(*fraction == want, || {
                format!("band [{}, {}]: {fraction:?} vs {want:?}", band.lo, band.hi)
            })?;
        }
    }
    let unknown = difficulty.iter().filter(|&&d| d == Difficulty::Unknown).count();
    check(report.excluded_unknown == unknown, || "unknown count".into())?;

    let gold = derive_gold(&generate_synthetic(31, 600, 0.8).map_err(err)?, GoldPolicy::PerfectOnly).map_err(err)?;
    let data: Vec<_> = gold.iter().filter_map(|g| g.labeled(Characteristic::ActionSeeking)).collect();
    let model = train_model(ModelKind::NgSvm, Characteristic::ActionSeeking, &data, &ModelConfig::default()).map_err(err)?;
    let Inner::NgSvm { model, .. } = &model.inner else {
        return Err("ngsvm model has a non-linear body".into());
    };
    let cal = model.calibration;
    let sweep: Vec<f64> = (0..1000).map(|i| cal.probability(-3.0 + 6.0 * i as f64 / 999.0)).collect();
    let increasing = sweep.windows(2).all(|w| w[1] > w[0]);
    check(increasing, || {
        format!("calibrated probability not strictly increasing (a = {}, b = {})", cal.a, cal.b)
    })?;
    Ok(format!(
        "10000 draws exact; sweep {:.4}..{:.4} strictly increasing",
        sweep[0], sweep[999]
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(err)?;
    let root = dir.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let run_twice = |name: &str, args: &dyn Fn(&Path) -> Vec<String>, artifacts: &[&str]| -> Result<usize, String> {
        let mut digests = Vec::new();
        for round in 0..2 {
            let out = root.join(format!("{name}-{round}"));
            let args = args(&out);
            let stdout = cli(&args.iter().map(String::as_str).collect::<Vec<_>>())?;
            let mut hashes = vec![psyling::sha256_hex(&stdout)];
            for a in artifacts {
                let path = if a.is_empty() { out.clone() } else { out.join(a) };
                hashes.push(psyling::sha256_hex(
                    &std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?,
                ));
            }
            digests.push(hashes);
        }
        check(digests[0] == digests[1], || format!("{name}: artifacts differ between runs"))?;
        Ok(digests[0].len())
    };
    let corpus = root.join("corpus.jsonl");
    cli(&["synth", "--n", "400", "--seed", "41", "--out", &s(&corpus)])?;
    let mut checked = run_twice(
        "synth",
        &|out| ["synth", "--n", "400", "--seed", "41", "--out", &s(out)].map(String::from).to_vec(),
        &[""],
    )?;
    checked += run_twice(
        "split",
        &|out| {
            [
                "split",
                "--input",
                &s(&corpus),
                "--task",
                "information_seeking",
                "--test-size",
                "80",
                "--seed",
                "41",
                "--out",
                &s(out),
            ]
            .map(String::from)
            .to_vec()
        },
        &["train.jsonl", "test.jsonl", "stats.json"],
    )?;
    for kind in ["ngsvm", "ccnn", "seqnet"] {
        checked += run_twice(
            &format!("train-{kind}"),
            &|out| {
                [
                    "train",
                    "--task",
                    "self_revealing",
                    "--model",
                    kind,
                    "--train",
                    &s(&corpus),
                    "--seed",
                    "41",
                    "--out",
                    &s(out),
                ]
                .map(String::from)
                .to_vec()
            },
            &[""],
        )?;
        let model = root.join(format!("train-{kind}-0"));
        checked += run_twice(
            &format!("evaluate-{kind}"),
            &|out| {
                ["evaluate", "--model", &s(&model), "--test", &s(&corpus), "--out", &s(out)]
                    .map(String::from)
                    .to_vec()
            },
            &[""],
        )?;
    }
    let files: Vec<String> = Characteristic::ALL
        .iter()
        .map(|c| format!("{}.bin", c.key()))
        .chain(["bundle.json".into()])
        .collect();
    checked += run_twice(
        "bundle",
        &|out| {
            [
                "train",
                "--task",
                "all",
                "--model",
                "ngsvm",
                "--train",
                &s(&corpus),
                "--seed",
                "41",
                "--out",
                &s(out),
            ]
            .map(String::from)
            .to_vec()
        },
        &files.iter().map(String::as_str).collect::<Vec<_>>(),
    )?;
    Ok(format!(
        "{checked} artifact hashes identical across repeated synth/split/train/evaluate runs"
    ))
}

fn recount(adapter: &Adapter, conversation: &Conversation) -> Result<(usize, usize), String> {
    let (mut detected, mut matched) = (0, 0);
    let turns = &conversation.turns;
    for i in 0..turns.len() {
        if turns[i].speaker != Speaker::User || turns.get(i + 1).map(|t| t.speaker) != Some(Speaker::Agent) {
            continue;
        }
        let labels = adapter.profile(&turns[i].text).map_err(err)?.labels;
        let reply = &turns[i + 1].text;
        let reply_labels = adapter.profile(reply).map_err(err)?.labels;
        for d in directives_for(&labels) {
            detected += 1;
            let hit = match d.kind {
                DirectiveKind::MirrorEmotionality { target } => reply_labels.emotionality == target,
                DirectiveKind::SecondPersonAcknowledgement => adapter.lexicons.second_person.hits(reply),
                DirectiveKind::ConciseFactual => reply.split_whitespace().count() <= 40 && reply_labels.fact_oriented,
                DirectiveKind::AssuranceWords => adapter.lexicons.assurance.hits(reply),
            };
            matched += hit as usize;
        }
    }
    Ok((detected, matched))
}

fn rank_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let ranks = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn adaptation_engine() -> Outcome {
    let gold = derive_gold(&generate_synthetic(53, 1000, 1.0).map_err(err)?, GoldPolicy::PerfectOnly).map_err(err)?;
    let models = ByCharacteristic::from_fn(|c| c).try_map(|_, &c| {
        let data: Vec<_> = gold.iter().filter_map(|g| g.labeled(c)).collect();
        train_model(ModelKind::NgSvm, c, &data, &ModelConfig::default())
    });
    let dir = tempfile::TempDir::new().map_err(err)?;
    ModelBundle::save_dir(dir.path(), &models.map_err(err)?).map_err(err)?;
    let adapter = Adapter::new(ModelBundle::load_dir(dir.path()).map_err(err)?, Lexicons::bundled());

    let conversations = synthetic_conversations(59, 200).map_err(err)?;
    let mut scored = 0;
    for c in &conversations {
        let report = adapter.matching_level(c).map_err(err)?;
        let (detected, matched) = recount(&adapter, c)?;
        let want = (detected > 0).then(|| 100.0 * matched as f64 / detected as f64);
        check(report.matching_level == want && report.detected == detected, || {
            format!("{}: level {:?} vs recount {want:?}", c.id, report.matching_level)
        })?;
        scored += want.is_some() as usize;
    }

    let on = |cs: &[Characteristic]| ByCharacteristic::from_fn(|c| cs.contains(&c));
    let kinds = |cs: &[Characteristic]| directives_for(&on(cs)).into_iter().map(|d| d.kind).collect::<Vec<_>>();
    use Characteristic::*;
    let emotional_profile = kinds(&[Emotionality, SelfRevealing, InformationSeeking]);
    check(
        emotional_profile
            == [
                DirectiveKind::MirrorEmotionality { target: true },
                DirectiveKind::SecondPersonAcknowledgement,
                DirectiveKind::AssuranceWords,
            ],
        || format!("emotional/self-revealing/information-seeking gives {emotional_profile:?}"),
    )?;
    let factual_profile = kinds(&[FactOriented, ActionSeeking, InformationSeeking]);
    check(
        factual_profile
            == [
                DirectiveKind::MirrorEmotionality { target: false },
                DirectiveKind::ConciseFactual,
                DirectiveKind::AssuranceWords,
            ],
        || format!("fact-oriented/action/information-seeking gives {factual_profile:?}"),
    )?;

    let classes = [Satisfaction::Dissatisfied, Satisfaction::Neutral, Satisfaction::Satisfied];
    let up: Vec<_> = (0..9).map(|i| (Some(10.0 + 40.0 * (i / 3) as f64), classes[i / 3])).collect();
    let down: Vec<_> = (0..9).map(|i| (Some(90.0 - 40.0 * (i / 3) as f64), classes[i / 3])).collect();
    let (a_up, a_down) = (association(&up).map_err(err)?.spearman, association(&down).map_err(err)?.spearman);
    check(a_up == Some(1.0) && a_down == Some(-1.0), || {
        format!("monotone fixtures give {a_up:?} / {a_down:?}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(5..80);
        let pairs: Vec<(Option<f64>, Satisfaction)> = (0..n)
            .map(|_| {
                (
                    Some(100.0 * rng.random_range(0..=12) as f64 / 12.0),
                    classes[rng.random_range(0..3)],
                )
            })
            .collect();
        let x: Vec<f64> = pairs.iter().map(|p| p.0.unwrap()).collect();
        let y: Vec<f64> = pairs
            .iter()
            .map(|p| classes.iter().position(|c| *c == p.1).unwrap() as f64)
            .collect();
        let got = association(&pairs).map_err(err)?.spearman;
        match (got, rank_oracle(&x, &y)) {
            (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
            (None, None) => {}
            (g, w) => return Err(format!("association {g:?} vs oracle {w:?}")),
        }
    }
    check(worst <= 1e-9, || format!("max deviation from rank oracle {worst:e}"))?;
    Ok(format!(
        "200 conversations recounted ({scored} scored); directive sets match; monotone ±1; 200 batches within {worst:.1e}"
    ))
}

fn pipeline_demo() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(err)?;
    let out = dir.path().join("demo");
    let t = Instant::now();
    let stdout = cli(&["demo", "--seed", "71", "--out", out.to_str().unwrap()])?;
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    let grid = std::fs::read_to_string(out.join("grid.csv")).map_err(err)?;
    let rows: Vec<Vec<&str>> = grid.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for kind in ModelKind::ALL {
        for task in Characteristic::ALL {
            let row = rows.iter().find(|r| r[0] == kind.key() && r[1] == task.key());
            check(
                row.is_some_and(|r| r.len() == 5 && r[2..].iter().all(|v| v.parse::<f64>().is_ok_and(|v| (0.0..=1.0).contains(&v)))),
                || format!("grid lacks P/R/F for {kind} on {task}"),
            )?;
        }
    }
    let curve = std::fs::read_to_string(out.join("curve.csv")).map_err(err)?;
    check(curve.starts_with("model,task,size,f1,seed\n") && curve.lines().count() > 1, || {
        "empty curve CSV".into()
    })?;
    check(!stdout.is_empty(), || "no grid on stdout".into())?;
    print!("{}", String::from_utf8_lossy(&stdout));
    Ok(format!(
        "grid 3 models x 5 tasks x P/R/F, {} curve rows, {:.0?}",
        curve.lines().count() - 1,
        elapsed
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric oracle", metric_oracle),
        ("agreement oracle", agreement_oracle),
        ("gradient checks", gradient_checks),
        ("separable synthetic learning", separable_learning),
        ("learning curve shape", learning_curve_shape),
        ("calibration mechanics", calibration_mechanics),
        ("determinism", determinism),
        ("adaptation engine", adaptation_engine),
        ("pipeline demo", pipeline_demo),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<30} {secs:>7.1}s  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<30} {secs:>7.1}s  {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
