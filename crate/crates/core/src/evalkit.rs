//! Scoring flat clusterings against gold-standard modules.
//!
//! Scores are pairwise: a gene pair is gold-positive when both genes share
//! at least one gold module (gold modules may overlap) and predicted-positive
//! when they share a predicted module. Pairs are counted over the genes
//! covered by both the prediction and the gold standard.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{ConfusionCounts, GeneId, Module, ModuleSet, RocCurve, RocPoint};

fn choose2(k: usize) -> u64 {
    let k = k as u64;
    k * k.saturating_sub(1) / 2
}

/// Modules restricted to a gene universe (as universe indices), empty ones dropped.
fn restrict(ms: &ModuleSet, index: &HashMap<&GeneId, u32>) -> Vec<Vec<u32>> {
    ms.modules()
        .iter()
        .map(|m| {
            m.genes
                .iter()
                .filter_map(|g| index.get(g).copied())
                .collect::<Vec<u32>>()
        })
        .filter(|m| !m.is_empty())
        .collect()
}

fn pair_set(modules: &[Vec<u32>]) -> HashSet<(u32, u32)> {
    let mut s = HashSet::new();
    for m in modules {
        for (a, &i) in m.iter().enumerate() {
            for &j in &m[a + 1..] {
                s.insert((i.min(j), i.max(j)));
            }
        }
    }
    s
}

fn labels(modules: &[Vec<u32>], g: usize) -> Vec<u32> {
    let mut l = vec![u32::MAX; g];
    for (k, m) in modules.iter().enumerate() {
        for &i in m {
            l[i as usize] = k as u32;
        }
    }
    l
}

/// Pairwise confusion counts of a prediction against a gold standard.
pub fn pair_confusion(pred: &ModuleSet, gold: &ModuleSet) -> Result<ConfusionCounts> {
    let gold_genes: HashSet<GeneId> = gold.genes().into_iter().collect();
    let universe: Vec<GeneId> = pred.genes().into_iter().filter(|g| gold_genes.contains(g)).collect();
    let g = universe.len();
    if g < 2 {
        return Err(Error::EmptyUniverse);
    }
    let index: HashMap<&GeneId, u32> = universe.iter().enumerate().map(|(i, g)| (g, i as u32)).collect();
    let p = restrict(pred, &index);
    let q = restrict(gold, &index);
    let total = choose2(g);

    let (pred_pos, gold_pos, tp) = match (pred.overlapping(), gold.overlapping()) {
        (false, false) => {
            // contingency counting, no pair materialization
            let lp = labels(&p, g);
            let lq = labels(&q, g);
            let mut cells: HashMap<(u32, u32), usize> = HashMap::new();
            for i in 0..g {
                *cells.entry((lp[i], lq[i])).or_insert(0) += 1;
            }
            let tp = cells.values().map(|&c| choose2(c)).sum();
            (
                p.iter().map(|m| choose2(m.len())).sum(),
                q.iter().map(|m| choose2(m.len())).sum(),
                tp,
            )
        }
        (false, true) => {
            let lp = labels(&p, g);
            let gs = pair_set(&q);
            let tp = gs.iter().filter(|&&(i, j)| lp[i as usize] == lp[j as usize]).count() as u64;
            (p.iter().map(|m| choose2(m.len())).sum(), gs.len() as u64, tp)
        }
        (true, false) => {
            let lq = labels(&q, g);
            let ps = pair_set(&p);
            let tp = ps.iter().filter(|&&(i, j)| lq[i as usize] == lq[j as usize]).count() as u64;
            (ps.len() as u64, q.iter().map(|m| choose2(m.len())).sum(), tp)
        }
        (true, true) => {
            let ps = pair_set(&p);
            let gs = pair_set(&q);
            let tp = ps.intersection(&gs).count() as u64;
            (ps.len() as u64, gs.len() as u64, tp)
        }
    };
    let fp = pred_pos - tp;
    let fn_ = gold_pos - tp;
    Ok(ConfusionCounts {
        tp,
        fp,
        tn: total - tp - fp - fn_,
        fn_,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

pub fn precision_recall_f(c: &ConfusionCounts) -> Scores {
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores { precision, recall, f }
}

/// ROC curve of a threshold sweep, with `(0,0)` and `(1,1)` endpoints added.
pub fn roc(sweep: &[(f64, ModuleSet)], gold: &ModuleSet) -> Result<RocCurve> {
    if sweep.is_empty() {
        return Err(Error::InvalidParameter("empty sweep".into()));
    }
    let counts: Vec<ConfusionCounts> = sweep
        .par_iter()
        .map(|(_, ms)| pair_confusion(ms, gold))
        .collect::<Result<_>>()?;
    // Endpoints go first and last so that equal-rate real points sort between them.
    let mut points = Vec::with_capacity(sweep.len() + 2);
    let (mut pos, mut neg) = (0, 0);
    for ((eps, _), c) in sweep.iter().zip(&counts) {
        pos = c.tp + c.fn_;
        neg = c.fp + c.tn;
        if pos == 0 {
            return Err(Error::DegenerateGold("positive"));
        }
        if neg == 0 {
            return Err(Error::DegenerateGold("negative"));
        }
        points.push(RocPoint {
            threshold: Some(*eps),
            fpr: c.fp as f64 / neg as f64,
            tpr: c.tp as f64 / pos as f64,
            counts: *c,
        });
    }
    points.insert(
        0,
        RocPoint {
            threshold: None,
            fpr: 0.0,
            tpr: 0.0,
            counts: ConfusionCounts {
                tp: 0,
                fp: 0,
                tn: neg,
                fn_: pos,
            },
        },
    );
    points.push(RocPoint {
        threshold: None,
        fpr: 1.0,
        tpr: 1.0,
        counts: ConfusionCounts {
            tp: pos,
            fp: neg,
            tn: 0,
            fn_: 0,
        },
    });
    RocCurve::new(points)
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points()
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestF {
    pub epsilon: f64,
    pub counts: ConfusionCounts,
    pub scores: Scores,
}

/// Sweep point with the highest F; ties go to the larger threshold.
pub fn best_f(sweep: &[(f64, ModuleSet)], gold: &ModuleSet) -> Result<BestF> {
    let scored: Vec<BestF> = sweep
        .par_iter()
        .map(|(eps, ms)| {
            let counts = pair_confusion(ms, gold)?;
            Ok(BestF {
                epsilon: *eps,
                counts,
                scores: precision_recall_f(&counts),
            })
        })
        .collect::<Result<_>>()?;
    best_of(&scored).ok_or_else(|| Error::InvalidParameter("empty sweep".into()))
}

pub(crate) fn best_of(scored: &[BestF]) -> Option<BestF> {
    scored.iter().copied().reduce(|best, cur| {
        if cur.scores.f > best.scores.f || (cur.scores.f == best.scores.f && cur.epsilon > best.epsilon) {
            cur
        } else {
            best
        }
    })
}

/// Angles (radians) at each interior point of a curve after scaling both
/// axes to `[0, 1]`. Entry `i` is the angle at point `i + 1`.
pub fn interior_angles(curve: &RocCurve) -> Vec<f64> {
    let pts = curve.points();
    let span = |f: fn(&RocPoint) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (x0, xs) = span(|p| p.fpr);
    let (y0, ys) = span(|p| p.tpr);
    let norm: Vec<(f64, f64)> = pts.iter().map(|p| ((p.fpr - x0) / xs, (p.tpr - y0) / ys)).collect();
    norm.windows(3)
        .map(|w| {
            let a = (w[0].0 - w[1].0, w[0].1 - w[1].1);
            let b = (w[2].0 - w[1].0, w[2].1 - w[1].1);
            let cross = a.0 * b.1 - a.1 * b.0;
            let dot = a.0 * b.0 + a.1 * b.1;
            if (a.0 == 0.0 && a.1 == 0.0) || (b.0 == 0.0 && b.1 == 0.0) {
                std::f64::consts::PI
            } else {
                cross.abs().atan2(dot)
            }
        })
        .collect()
}

/// Angles closer than this are treated as ties.
pub const KNEE_ANGLE_TIE: f64 = 1e-12;

/// Index of the knee: the interior point with the sharpest turn (smallest
/// angle to its neighbours). Ties go to the smallest FPR.
pub fn knee(curve: &RocCurve) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::TooFewPoints(curve.len()));
    }
    let angles = interior_angles(curve);
    let mut best = 0;
    for (i, &a) in angles.iter().enumerate().skip(1) {
        if a < angles[best] - KNEE_ANGLE_TIE {
            best = i;
        }
    }
    Ok(best + 1)
}

/// Regulator → targets map, keeping first-appearance order.
fn targets_by_regulator(edges: &[(GeneId, GeneId)]) -> Vec<(GeneId, Vec<GeneId>)> {
    let mut order: Vec<(GeneId, Vec<GeneId>)> = Vec::new();
    let mut slot: HashMap<GeneId, usize> = HashMap::new();
    for (r, t) in edges {
        let k = *slot.entry(r.clone()).or_insert_with(|| {
            order.push((r.clone(), Vec::new()));
            order.len() - 1
        });
        if !order[k].1.contains(t) {
            order[k].1.push(t.clone());
        }
    }
    order
}

/// One module per regulator holding all its targets; modules smaller than
/// two genes are dropped and identical target sets are kept once.
pub fn minimal_modules(edges: &[(GeneId, GeneId)]) -> Result<ModuleSet> {
    let mut seen: HashSet<Vec<GeneId>> = HashSet::new();
    let mut modules = Vec::new();
    for (reg, targets) in targets_by_regulator(edges) {
        if targets.len() < 2 {
            continue;
        }
        let mut key = targets.clone();
        key.sort();
        if seen.insert(key) {
            modules.push(Module {
                id: reg.to_string(),
                genes: targets,
            });
        }
    }
    ModuleSet::new(modules, true)
}

/// Targets grouped by their exact regulator set; singleton groups dropped.
/// Module ids join the sorted regulator names with `+`.
pub fn strict_modules(edges: &[(GeneId, GeneId)]) -> Result<ModuleSet> {
    let mut regs_of: BTreeMap<&GeneId, Vec<&GeneId>> = BTreeMap::new();
    let mut target_order: Vec<&GeneId> = Vec::new();
    for (r, t) in edges {
        let regs = regs_of.entry(t).or_insert_with(|| {
            target_order.push(t);
            Vec::new()
        });
        if !regs.contains(&r) {
            regs.push(r);
        }
    }
    let mut groups: Vec<(Vec<&GeneId>, Vec<GeneId>)> = Vec::new();
    let mut slot: HashMap<Vec<&GeneId>, usize> = HashMap::new();
    for t in target_order {
        let mut key = regs_of[t].clone();
        key.sort();
        let k = *slot.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push(t.clone());
    }
    let modules = groups
        .into_iter()
        .filter(|(_, genes)| genes.len() >= 2)
        .map(|(regs, genes)| Module {
            id: regs.iter().map(|r| r.as_str()).collect::<Vec<_>>().join("+"),
            genes,
        })
        .collect();
    ModuleSet::new(modules, false)
}
