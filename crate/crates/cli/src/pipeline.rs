//! Multi-model experiment drivers shared by `curve`, `demo` and the
//! acceptance suite.

use std::fmt::Write as _;

use psyling::corpus::{derive_gold, generate_synthetic, stratified_split, GoldInstance, GoldPolicy, LabeledText};
use psyling::evaluate::{learning_curve, macro_prf, majority_baseline, EvalReport, Grid, GridRow, LearningCurve, Prf};
use psyling::model::{train_model, ModelConfig, ModelKind, TrainedModel};
use psyling::{ByCharacteristic, Characteristic, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DemoConfig;

/// Stratified train/test division of the instances labelled for `task`.
pub fn task_split(
    gold: &[GoldInstance],
    task: Characteristic,
    test_size: usize,
    seed: u64,
) -> Result<(Vec<LabeledText>, Vec<LabeledText>)> {
    let pool: Vec<LabeledText> = gold.iter().filter_map(|g| g.labeled(task)).collect();
    let split = stratified_split(&pool, |t| t.label, test_size, seed)?;
    Ok(split.select(&pool))
}

pub fn predict(model: &TrainedModel, texts: &[LabeledText]) -> Result<Vec<bool>> {
    Ok(model
        .prob_yes_batch(&texts.iter().map(|t| t.text.as_str()).collect::<Vec<_>>())?
        .into_iter()
        .map(|p| p >= 0.5)
        .collect())
}

pub fn evaluate(model: &TrainedModel, test: &[LabeledText]) -> Result<EvalReport> {
    macro_prf(&predict(model, test)?, &test.iter().map(|t| t.label).collect::<Vec<_>>())
}

/// A fitted model and its score on one task's test partition.
#[derive(Debug, Clone)]
pub struct Cell {
    pub kind: ModelKind,
    pub task: Characteristic,
    pub report: EvalReport,
    pub baseline: EvalReport,
    pub model: TrainedModel,
}

/// Trains every kind on every task, one job per (kind, task), jobs in
/// parallel.
pub fn train_and_score(gold: &[GoldInstance], kinds: &[ModelKind], config: &ModelConfig, test_size: usize, seed: u64) -> Result<Vec<Cell>> {
    let splits: Vec<_> = Characteristic::ALL
        .iter()
        .map(|&task| task_split(gold, task, test_size, seed).map(|s| (task, s)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(ModelKind, usize)> = kinds.iter().flat_map(|&k| (0..splits.len()).map(move |i| (k, i))).collect();
    jobs.par_iter()
        .map(|&(kind, i)| {
            let (task, (train, test)) = &splits[i];
            let model = train_model(kind, *task, train, config)?;
            log::info!("trained {kind} for {task}");
            Ok(Cell {
                kind,
                task: *task,
                report: evaluate(&model, test)?,
                baseline: majority_baseline(&test.iter().map(|t| t.label).collect::<Vec<_>>())?,
                model,
            })
        })
        .collect()
}

fn prf(r: &EvalReport) -> Prf {
    r.macro_avg
}

/// Baseline row first, then one row per kind in the order given.
pub fn grid_of(cells: &[Cell], kinds: &[ModelKind]) -> Grid {
    let find = |k: ModelKind, t: Characteristic| cells.iter().find(|c| c.kind == k && c.task == t).expect("cell present");
    let mut rows = vec![GridRow {
        model: "baseline".into(),
        scores: ByCharacteristic::from_fn(|t| prf(&find(kinds[0], t).baseline)),
    }];
    rows.extend(kinds.iter().map(|&k| GridRow {
        model: k.key().into(),
        scores: ByCharacteristic::from_fn(|t| prf(&find(k, t).report)),
    }));
    Grid { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub kind: ModelKind,
    pub task: Characteristic,
    pub curve: LearningCurve,
}

/// Learning curve of one kind on one task.
pub fn curve_for(
    kind: ModelKind,
    task: Characteristic,
    pool: &[LabeledText],
    test: &[LabeledText],
    sizes: &[usize],
    config: &ModelConfig,
    seed: u64,
) -> Result<LearningCurve> {
    learning_curve(
        |train, test| predict(&train_model(kind, task, train, config)?, test),
        pool,
        test,
        sizes,
        seed,
    )
}

/// One curve per (kind, task), computed in parallel.
pub fn curves(
    gold: &[GoldInstance],
    kinds: &[ModelKind],
    tasks: &[Characteristic],
    sizes: &[usize],
    test_size: usize,
    config: &ModelConfig,
    seed: u64,
) -> Result<Vec<CurveSet>> {
    let splits: Vec<_> = tasks
        .iter()
        .map(|&task| task_split(gold, task, test_size, seed))
        .collect::<Result<_>>()?;
    let jobs: Vec<(ModelKind, usize)> = kinds.iter().flat_map(|&k| (0..tasks.len()).map(move |i| (k, i))).collect();
    jobs.par_iter()
        .map(|&(kind, i)| {
            let (pool, test) = &splits[i];
            Ok(CurveSet {
                kind,
                task: tasks[i],
                curve: curve_for(kind, tasks[i], pool, test, sizes, config, seed)?,
            })
        })
        .collect()
}

/// `model,task,size,f1,seed`.
pub fn curves_csv(sets: &[CurveSet]) -> String {
    let mut out = String::from("model,task,size,f1,seed\n");
    for s in sets {
        for p in &s.curve.points {
            let _ = writeln!(out, "{},{},{},{:?},{}", s.kind, s.task, p.train_size, p.macro_f1, p.seed);
        }
    }
    out
}

pub struct DemoOutput {
    pub grid: Grid,
    pub cells: Vec<Cell>,
    pub curves: Vec<CurveSet>,
}

/// Synthetic corpus → gold → per-task split → all kinds on all tasks, plus
/// learning curves on a noisier corpus.
pub fn demo(demo: &DemoConfig, config: &ModelConfig, seed: u64) -> Result<DemoOutput> {
    let gold = derive_gold(&generate_synthetic(seed, demo.n, demo.marker_strength)?, GoldPolicy::PerfectOnly)?;
    let kinds = ModelKind::ALL;
    let cells = train_and_score(&gold, &kinds, config, demo.test_size, seed)?;
    let grid = grid_of(&cells, &kinds);
    let max = demo.curve_sizes.iter().copied().max().unwrap_or(0);
    let curve_gold = derive_gold(
        &generate_synthetic(seed.wrapping_add(1), max + demo.curve_test_size, demo.curve_marker_strength)?,
        GoldPolicy::PerfectOnly,
    )?;
    let curves = curves(
        &curve_gold,
        &kinds,
        &Characteristic::ALL,
        &demo.curve_sizes,
        demo.curve_test_size,
        config,
        seed,
    )?;
    Ok(DemoOutput { grid, cells, curves })
}
