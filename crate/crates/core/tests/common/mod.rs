#![allow(dead_code)]

use sidelink::model::{GainTable, ProblemInstance};

pub fn instance(h1: Vec<Vec<f64>>, h2: Vec<f64>) -> ProblemInstance {
    let (n_o, n_i) = (h1.len(), h2.len());
    ProblemInstance::new(GainTable {
        h1,
        h2,
        p_outer: vec![1.0; n_o],
        p_inner: vec![1.0; n_i],
        noise: 1.0,
    })
    .unwrap()
}

/// Objective recomputed from scratch, straight from the rate formulas.
pub fn oracle_objective(inst: &ProblemInstance, assign: &[Option<usize>]) -> f64 {
    let g = &inst.gains;
    let mut total = 0.0;
    for i in 0..assign.len() {
        if let Some(j) = assign[i] {
            let mut denom = g.noise;
            for k in 0..assign.len() {
                if k != i && assign[k].is_some() {
                    denom += g.p_outer[k] * g.h1[k][j];
                }
            }
            let c1 = (g.p_outer[i] * g.h1[i][j] / denom + 1.0).ln() / std::f64::consts::LN_2;
            let c2 = (g.p_inner[j] * g.h2[j] / g.noise + 1.0).ln() / std::f64::consts::LN_2;
            let r = if c1 < c2 - inst.relay_traffic[j] { c1 } else { c2 - inst.relay_traffic[j] };
            total += inst.weights[i] * if r > 0.0 { r } else { 0.0 };
        }
    }
    total
}

/// Recursive brute force over every injective partial assignment.
/// Returns the best value and the lexicographically smallest maximizer.
pub fn brute_force(inst: &ProblemInstance) -> (f64, Vec<Option<usize>>) {
    fn rec(
        inst: &ProblemInstance,
        pos: usize,
        cur: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Option<(f64, Vec<Option<usize>>)>,
    ) {
        if pos == cur.len() {
            let v = oracle_objective(inst, cur);
            let replace = match best {
                None => true,
                // Visiting order is lexicographic, so only strict gains replace.
                Some((b, _)) => v > *b + 1e-12,
            };
            if replace {
                *best = Some((v, cur.clone()));
            }
            return;
        }
        cur[pos] = None;
        rec(inst, pos + 1, cur, used, best);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur[pos] = Some(j);
                rec(inst, pos + 1, cur, used, best);
                used[j] = false;
            }
        }
        cur[pos] = None;
    }
    let mut best = None;
    rec(
        inst,
        0,
        &mut vec![None; inst.n_outer()],
        &mut vec![false; inst.n_inner()],
        &mut best,
    );
    best.unwrap()
}
