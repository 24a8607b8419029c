//! Logistic loss and analytic gradients, in per-triplet and 1-N form.

use std::collections::BTreeMap;

use super::{sigmoid, ModelError, ModelParams, Table};
use crate::triplet::Triplet;
use crate::vocab::{EntityId, RelationId};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs.
const CLAMP: f64 = 1e-12;

/// One labeled triplet: `fact` is true for positives, false for negatives.
#[derive(Debug, Clone, Copy)]
pub struct TrainingExample {
    pub triplet: Triplet,
    pub fact: bool,
}

impl TrainingExample {
    pub fn positive(t: Triplet) -> Self {
        TrainingExample { triplet: t, fact: true }
    }

    pub fn negative(t: Triplet) -> Self {
        TrainingExample { triplet: t, fact: false }
    }
}

/// Sparse gradient tables: only rows touched by the batch appear. BTreeMaps
/// keep every accumulation and traversal order deterministic.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub entity_re: BTreeMap<EntityId, Vec<f64>>,
    pub entity_im: BTreeMap<EntityId, Vec<f64>>,
    pub relation_re: BTreeMap<RelationId, Vec<f64>>,
    pub relation_im: BTreeMap<RelationId, Vec<f64>>,
}

fn row_of(map: &mut BTreeMap<u32, Vec<f64>>, id: u32, dim: usize) -> &mut [f64] {
    map.entry(id).or_insert_with(|| vec![0.0; dim])
}

impl Gradients {
    pub fn is_empty(&self) -> bool {
        self.entity_re.is_empty()
            && self.entity_im.is_empty()
            && self.relation_re.is_empty()
            && self.relation_im.is_empty()
    }
}

fn clamped(psi: f64) -> f64 {
    psi.clamp(CLAMP, 1.0 - CLAMP)
}

/// Adds the L2 penalty over the rows already touched by the batch (each
/// distinct row once) and its gradient contribution.
fn apply_l2(params: &ModelParams, grads: &mut Gradients, l2: f64) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let mut penalty = 0.0;
    let dim = params.dim();
    let entity_ids: Vec<EntityId> = grads.entity_re.keys().copied().collect();
    for id in entity_ids {
        let row = id as usize;
        for (table, grad_map) in [
            (Table::EntityRe, &mut grads.entity_re),
            (Table::EntityIm, &mut grads.entity_im),
        ] {
            let values = params.table(table).row(row);
            let g = row_of(grad_map, id, dim);
            for i in 0..dim {
                penalty += values[i] * values[i];
                g[i] += 2.0 * l2 * values[i];
            }
        }
    }
    let relation_ids: Vec<RelationId> = grads.relation_re.keys().copied().collect();
    for id in relation_ids {
        let row = id as usize;
        for (table, grad_map) in [
            (Table::RelationRe, &mut grads.relation_re),
            (Table::RelationIm, &mut grads.relation_im),
        ] {
            let values = params.table(table).row(row);
            let g = row_of(grad_map, id, dim);
            for i in 0..dim {
                penalty += values[i] * values[i];
                g[i] += 2.0 * l2 * values[i];
            }
        }
    }
    l2 * penalty
}

/// Negative log-likelihood of the batch plus the L2 penalty, with analytic
/// gradients for every touched row.
pub fn loss_and_grads(
    params: &ModelParams,
    batch: &[TrainingExample],
    l2: f64,
) -> Result<(f64, Gradients), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Argument("batch must be nonempty".into()));
    }
    let dim = params.dim();
    let mut grads = Gradients::default();
    let mut loss = 0.0;
    for ex in batch {
        let Triplet { s, r, o } = ex.triplet;
        let raw = params.raw_score(s, r, o)?;
        let psi = clamped(sigmoid(raw));
        let t = if ex.fact { 1.0 } else { 0.0 };
        loss -= t * psi.ln() + (1.0 - t) * (1.0 - psi).ln();
        let g = psi - t;

        let a = params.table(Table::EntityRe).row(s as usize);
        let b = params.table(Table::EntityIm).row(s as usize);
        let c = params.table(Table::RelationRe).row(r as usize);
        let d = params.table(Table::RelationIm).row(r as usize);
        let e = params.table(Table::EntityRe).row(o as usize);
        let f = params.table(Table::EntityIm).row(o as usize);

        let gs_re = row_of(&mut grads.entity_re, s, dim);
        for i in 0..dim {
            gs_re[i] += g * (c[i] * e[i] + d[i] * f[i]);
        }
        let gs_im = row_of(&mut grads.entity_im, s, dim);
        for i in 0..dim {
            gs_im[i] += g * (c[i] * f[i] - d[i] * e[i]);
        }
        let gr_re = row_of(&mut grads.relation_re, r, dim);
        for i in 0..dim {
            gr_re[i] += g * (a[i] * e[i] + b[i] * f[i]);
        }
        let gr_im = row_of(&mut grads.relation_im, r, dim);
        for i in 0..dim {
            gr_im[i] += g * (a[i] * f[i] - b[i] * e[i]);
        }
        let go_re = row_of(&mut grads.entity_re, o, dim);
        for i in 0..dim {
            go_re[i] += g * (a[i] * c[i] - b[i] * d[i]);
        }
        let go_im = row_of(&mut grads.entity_im, o, dim);
        for i in 0..dim {
            go_im[i] += g * (a[i] * d[i] + b[i] * c[i]);
        }
    }
    let penalty = apply_l2(params, &mut grads, l2);
    Ok((loss + penalty, grads))
}

/// 1-N loss: each `(s, r)` pair is scored against every entity; `positives`
/// lists the object ids labeled 1 for the aligned pair (sorted). Equals
/// `loss_and_grads` over the expanded example set.
pub fn loss_and_grads_1n(
    params: &ModelParams,
    pairs: &[(EntityId, RelationId)],
    positives: &[&[EntityId]],
    l2: f64,
) -> Result<(f64, Gradients), ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::Argument("batch must be nonempty".into()));
    }
    if pairs.len() != positives.len() {
        return Err(ModelError::Argument("pairs and label rows must be aligned".into()));
    }
    let dim = params.dim();
    let ne = params.n_entities();
    let mut grads = Gradients::default();
    let mut loss = 0.0;

    for (&(s, r), pos) in pairs.iter().zip(positives) {
        if (s as usize) >= ne || (r as usize) >= params.n_relations() {
            return Err(ModelError::Argument(format!("pair ({s}, {r}) out of range")));
        }
        if let Some(&bad) = pos.iter().find(|&&o| (o as usize) >= ne) {
            return Err(ModelError::Argument(format!("label object {bad} out of range")));
        }
        let (p, q) = params.sr_factors(s, r);
        // o-weighted entity sums feeding the s and r gradients.
        let mut ge = vec![0.0; dim];
        let mut gf = vec![0.0; dim];
        for o in 0..ne {
            let raw = params.raw_from_factors(&p, &q, o);
            let psi = clamped(sigmoid(raw));
            let t = if pos.binary_search(&(o as EntityId)).is_ok() { 1.0 } else { 0.0 };
            loss -= t * psi.ln() + (1.0 - t) * (1.0 - psi).ln();
            let g = psi - t;
            let e = params.table(Table::EntityRe).row(o);
            let f = params.table(Table::EntityIm).row(o);
            let go_re = row_of(&mut grads.entity_re, o as EntityId, dim);
            for i in 0..dim {
                go_re[i] += g * p[i];
            }
            let go_im = row_of(&mut grads.entity_im, o as EntityId, dim);
            for i in 0..dim {
                go_im[i] += g * q[i];
            }
            for i in 0..dim {
                ge[i] += g * e[i];
                gf[i] += g * f[i];
            }
        }
        let a = params.table(Table::EntityRe).row(s as usize);
        let b = params.table(Table::EntityIm).row(s as usize);
        let c = params.table(Table::RelationRe).row(r as usize);
        let d = params.table(Table::RelationIm).row(r as usize);
        let gs_re = row_of(&mut grads.entity_re, s, dim);
        for i in 0..dim {
            gs_re[i] += c[i] * ge[i] + d[i] * gf[i];
        }
        let gs_im = row_of(&mut grads.entity_im, s, dim);
        for i in 0..dim {
            gs_im[i] += c[i] * gf[i] - d[i] * ge[i];
        }
        let gr_re = row_of(&mut grads.relation_re, r, dim);
        for i in 0..dim {
            gr_re[i] += a[i] * ge[i] + b[i] * gf[i];
        }
        let gr_im = row_of(&mut grads.relation_im, r, dim);
        for i in 0..dim {
            gr_im[i] += a[i] * gf[i] - b[i] * ge[i];
        }
    }
    let penalty = apply_l2(params, &mut grads, l2);
    Ok((loss + penalty, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{init_params, Table};
    use crate::vocab::Vocabulary;

    fn random_model(ne: usize, dim: usize, seed: u64) -> ModelParams {
        init_params(&Vocabulary::from_entities((0..ne).map(|i| format!("e{i:03}"))), dim, seed)
            .unwrap()
    }

    #[test]
    fn single_example_at_half_is_ln2() {
        // zero params -> psi = 0.5 -> loss = ln 2
        let vocab = Vocabulary::from_entities(["a", "b"]);
        let nr = vocab.n_relations();
        let m = ModelParams::from_parts(
            vocab,
            3,
            vec![0.0; 6],
            vec![0.0; 6],
            vec![0.0; nr * 3],
            vec![0.0; nr * 3],
        )
        .unwrap();
        let batch = [TrainingExample::positive(Triplet::new(0, 0, 1))];
        let (loss, _) = loss_and_grads(&m, &batch, 0.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn saturated_positive_has_vanishing_loss() {
        // large raw score and t=1: loss -> 0 (clamp keeps it finite)
        let vocab = Vocabulary::from_entities(["a", "b"]);
        let nr = vocab.n_relations();
        let mut relation_re = vec![0.0; nr];
        relation_re[0] = 100.0;
        let m = ModelParams::from_parts(
            vocab,
            1,
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            relation_re,
            vec![0.0; nr],
        )
        .unwrap();
        let batch = [TrainingExample::positive(Triplet::new(0, 0, 1))];
        let (loss, _) = loss_and_grads(&m, &batch, 0.0).unwrap();
        assert!(loss >= 0.0 && loss < 1e-9, "{loss}");
    }

    #[test]
    fn empty_batch_is_an_error() {
        let m = random_model(3, 2, 0);
        assert!(loss_and_grads(&m, &[], 0.0).is_err());
        assert!(loss_and_grads_1n(&m, &[], &[], 0.0).is_err());
    }

    /// Central finite differences over every touched parameter.
    fn finite_diff_check<F>(params: &ModelParams, loss_fn: F, grads: &Gradients, tol: f64)
    where
        F: Fn(&ModelParams) -> f64,
    {
        let h = 1e-5;
        let mut checked = 0usize;
        let entries: Vec<(Table, u32, &Vec<f64>)> = grads
            .entity_re
            .iter()
            .map(|(&id, v)| (Table::EntityRe, id, v))
            .chain(grads.entity_im.iter().map(|(&id, v)| (Table::EntityIm, id, v)))
            .chain(grads.relation_re.iter().map(|(&id, v)| (Table::RelationRe, id, v)))
            .chain(grads.relation_im.iter().map(|(&id, v)| (Table::RelationIm, id, v)))
            .collect();
        for (table, row, grad_row) in entries {
            for (col, &analytic) in grad_row.iter().enumerate() {
                let mut plus = params.clone();
                *plus.component_mut(table, row as usize, col) += h;
                let mut minus = params.clone();
                *minus.component_mut(table, row as usize, col) -= h;
                let numeric = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * h);
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                let rel = (analytic - numeric).abs() / denom;
                assert!(
                    rel < tol,
                    "{table:?}[{row},{col}]: analytic {analytic} vs numeric {numeric} (rel {rel})"
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = random_model(6, 4, 42);
        let batch = [
            TrainingExample::positive(Triplet::new(0, 0, 1)),
            TrainingExample::negative(Triplet::new(0, 0, 2)),
            TrainingExample::positive(Triplet::new(3, 2, 3)), // s == o
            TrainingExample::negative(Triplet::new(5, 4, 0)),
        ];
        for l2 in [0.0, 0.01] {
            let (_, grads) = loss_and_grads(&m, &batch, l2).unwrap();
            finite_diff_check(&m, |p| loss_and_grads(p, &batch, l2).unwrap().0, &grads, 1e-4);
        }
    }

    #[test]
    fn one_to_n_gradients_match_finite_differences() {
        let m = random_model(5, 3, 7);
        let pairs = [(0u32, 0u32), (2, 3)];
        let pos0: Vec<u32> = vec![1, 4];
        let pos1: Vec<u32> = vec![2];
        let positives: Vec<&[u32]> = vec![&pos0, &pos1];
        for l2 in [0.0, 0.02] {
            let (_, grads) = loss_and_grads_1n(&m, &pairs, &positives, l2).unwrap();
            finite_diff_check(
                &m,
                |p| loss_and_grads_1n(p, &pairs, &positives, l2).unwrap().0,
                &grads,
                1e-4,
            );
        }
    }

    /// Expands a 1-N pair into per-triplet examples over all entities.
    fn expand(pairs: &[(u32, u32)], positives: &[&[u32]], ne: usize) -> Vec<TrainingExample> {
        let mut out = Vec::new();
        for (&(s, r), pos) in pairs.iter().zip(positives) {
            for o in 0..ne as u32 {
                out.push(TrainingExample {
                    triplet: Triplet::new(s, r, o),
                    fact: pos.binary_search(&o).is_ok(),
                });
            }
        }
        out
    }

    #[test]
    fn one_to_n_equals_expanded_loss() {
        let m = random_model(7, 4, 11);
        let pairs = [(0u32, 0u32), (3, 1), (6, 4)];
        let pos: Vec<Vec<u32>> = vec![vec![1, 2], vec![], vec![0, 5, 6]];
        let positives: Vec<&[u32]> = pos.iter().map(Vec::as_slice).collect();
        for l2 in [0.0, 0.05] {
            let (l1n, g1n) = loss_and_grads_1n(&m, &pairs, &positives, l2).unwrap();
            let expanded = expand(&pairs, &positives, 7);
            let (l11, g11) = loss_and_grads(&m, &expanded, l2).unwrap();
            assert!((l1n - l11).abs() < 1e-9, "{l1n} vs {l11}");
            for (a, b) in [(&g1n.entity_re, &g11.entity_re), (&g1n.entity_im, &g11.entity_im)] {
                assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
                for (id, row) in a {
                    for (i, v) in row.iter().enumerate() {
                        assert!((v - b[id][i]).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn all_negative_zero_params_loss_is_e_ln2_per_pair() {
        let vocab = Vocabulary::from_entities((0..9).map(|i| format!("e{i}")));
        let nr = vocab.n_relations();
        let m = ModelParams::from_parts(
            vocab,
            2,
            vec![0.0; 18],
            vec![0.0; 18],
            vec![0.0; nr * 2],
            vec![0.0; nr * 2],
        )
        .unwrap();
        let pairs = [(0u32, 0u32), (1, 1)];
        let empty: &[u32] = &[];
        let (loss, _) = loss_and_grads_1n(&m, &pairs, &[empty, empty], 0.0).unwrap();
        assert!((loss - 2.0 * 9.0 * std::f64::consts::LN_2).abs() < 1e-9, "{loss}");
    }
}
