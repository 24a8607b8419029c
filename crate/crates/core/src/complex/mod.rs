//! ComplEx embedding model: trilinear scoring, logistic loss with analytic
//! gradients, Adam training, and checkpoint persistence.
//!
//! A triplet `(s, r, o)` is scored `sigmoid(Re(<e_s, e_r, conj(e_o)>))` where
//! `<x, y, z> = sum_i x_i y_i z_i` over complex n-vectors, so a single score
//! costs one pass over the `n` components. Complex vectors are stored as
//! paired real/imaginary rows of row-major `f64` matrices.

mod checkpoint;
mod loss;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{loss_and_grads, loss_and_grads_1n, Gradients, TrainingExample};
pub use train::{adam_step, init_params, train, AdamState, TrainConfig, TrainMode};

use thiserror::Error;

use crate::vocab::{EntityId, RelationId, Vocabulary};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub(crate) fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub(crate) fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Which of the four embedding tables a component lives in. Used by tests
/// and oracles that need to perturb single parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    EntityRe,
    EntityIm,
    RelationRe,
    RelationIm,
}

/// Complex entity and relation embeddings plus the vocabulary they index.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dim: usize,
    vocab: Vocabulary,
    entity_re: Mat,
    entity_im: Mat,
    relation_re: Mat,
    relation_im: Mat,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ModelParams {
    /// Builds params from flat row-major arrays. Shapes must match the
    /// vocabulary counts and all values must be finite.
    pub fn from_parts(
        vocab: Vocabulary,
        dim: usize,
        entity_re: Vec<f64>,
        entity_im: Vec<f64>,
        relation_re: Vec<f64>,
        relation_im: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let ne = vocab.n_entities();
        let nr = vocab.n_relations();
        if dim == 0 {
            return Err(ModelError::Argument("dim must be >= 1".into()));
        }
        for (name, arr, want) in [
            ("entity_re", &entity_re, ne * dim),
            ("entity_im", &entity_im, ne * dim),
            ("relation_re", &relation_re, nr * dim),
            ("relation_im", &relation_im, nr * dim),
        ] {
            if arr.len() != want {
                return Err(ModelError::Argument(format!(
                    "{name} has {} values, expected {want}",
                    arr.len()
                )));
            }
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Argument(format!("{name} contains non-finite values")));
            }
        }
        Ok(ModelParams {
            dim,
            vocab,
            entity_re: Mat::from_vec(ne, dim, entity_re),
            entity_im: Mat::from_vec(ne, dim, entity_im),
            relation_re: Mat::from_vec(nr, dim, relation_re),
            relation_im: Mat::from_vec(nr, dim, relation_im),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_entities(&self) -> usize {
        self.vocab.n_entities()
    }

    pub fn n_relations(&self) -> usize {
        self.vocab.n_relations()
    }

    fn check_ids(&self, s: EntityId, r: RelationId, o: EntityId) -> Result<(), ModelError> {
        if (s as usize) < self.n_entities()
            && (r as usize) < self.n_relations()
            && (o as usize) < self.n_entities()
        {
            Ok(())
        } else {
            Err(ModelError::Argument(format!(
                "ids out of range: ({s}, {r}, {o}) for |E|={}, |R|={}",
                self.n_entities(),
                self.n_relations()
            )))
        }
    }

    /// `Re(<e_s, e_r, conj(e_o)>)` before the sigmoid.
    pub fn raw_score(&self, s: EntityId, r: RelationId, o: EntityId) -> Result<f64, ModelError> {
        self.check_ids(s, r, o)?;
        let (a, b) = (self.entity_re.row(s as usize), self.entity_im.row(s as usize));
        let (c, d) = (self.relation_re.row(r as usize), self.relation_im.row(r as usize));
        let (e, f) = (self.entity_re.row(o as usize), self.entity_im.row(o as usize));
        let mut acc = 0.0;
        // Same per-component expression as the 1-N path so both agree
        // bitwise: ((a*c - b*d) * e + (a*d + b*c) * f).
        for i in 0..self.dim {
            acc += (a[i] * c[i] - b[i] * d[i]) * e[i] + (a[i] * d[i] + b[i] * c[i]) * f[i];
        }
        Ok(acc)
    }

    /// Probability that `(s, r, o)` is a fact, in (0, 1).
    pub fn score(&self, s: EntityId, r: RelationId, o: EntityId) -> Result<f64, ModelError> {
        Ok(sigmoid(self.raw_score(s, r, o)?))
    }

    /// The combined `(s, r)` factors: `p = a*c - b*d`, `q = a*d + b*c`.
    pub(crate) fn sr_factors(&self, s: EntityId, r: RelationId) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = (self.entity_re.row(s as usize), self.entity_im.row(s as usize));
        let (c, d) = (self.relation_re.row(r as usize), self.relation_im.row(r as usize));
        let mut p = vec![0.0; self.dim];
        let mut q = vec![0.0; self.dim];
        for i in 0..self.dim {
            p[i] = a[i] * c[i] - b[i] * d[i];
            q[i] = a[i] * d[i] + b[i] * c[i];
        }
        (p, q)
    }

    #[inline]
    pub(crate) fn raw_from_factors(&self, p: &[f64], q: &[f64], o: usize) -> f64 {
        let e = self.entity_re.row(o);
        let f = self.entity_im.row(o);
        let mut acc = 0.0;
        for i in 0..self.dim {
            acc += p[i] * e[i] + q[i] * f[i];
        }
        acc
    }

    /// Scores `(s, r)` against every entity in one pass over the entity
    /// tables. Element `o` equals `score(s, r, o)` exactly.
    pub fn score_1n(&self, s: EntityId, r: RelationId) -> Result<Vec<f64>, ModelError> {
        if (s as usize) >= self.n_entities() || (r as usize) >= self.n_relations() {
            return Err(ModelError::Argument(format!(
                "ids out of range: ({s}, {r}) for |E|={}, |R|={}",
                self.n_entities(),
                self.n_relations()
            )));
        }
        let (p, q) = self.sr_factors(s, r);
        Ok((0..self.n_entities())
            .map(|o| sigmoid(self.raw_from_factors(&p, &q, o)))
            .collect())
    }

    pub(crate) fn tables(&self) -> [&Mat; 4] {
        [&self.entity_re, &self.entity_im, &self.relation_re, &self.relation_im]
    }

    pub(crate) fn table_mut(&mut self, t: Table) -> &mut Mat {
        match t {
            Table::EntityRe => &mut self.entity_re,
            Table::EntityIm => &mut self.entity_im,
            Table::RelationRe => &mut self.relation_re,
            Table::RelationIm => &mut self.relation_im,
        }
    }

    pub(crate) fn table(&self, t: Table) -> &Mat {
        match t {
            Table::EntityRe => &self.entity_re,
            Table::EntityIm => &self.entity_im,
            Table::RelationRe => &self.relation_re,
            Table::RelationIm => &self.relation_im,
        }
    }

    /// Reads one parameter component; rows index entities or relations
    /// depending on the table.
    pub fn component(&self, t: Table, row: usize, col: usize) -> f64 {
        self.table(t).row(row)[col]
    }

    /// Mutates one parameter component. Exposed for finite-difference
    /// oracles and planted test models.
    pub fn component_mut(&mut self, t: Table, row: usize, col: usize) -> &mut f64 {
        &mut self.table_mut(t).row_mut(row)[col]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// dim-1 model over two entities and one extra relation-less vocab.
    fn tiny(e_s: (f64, f64), e_r: (f64, f64), e_o: (f64, f64)) -> ModelParams {
        let vocab = Vocabulary::from_entities(["a", "b"]);
        let nr = vocab.n_relations();
        let mut relation_re = vec![0.0; nr];
        let mut relation_im = vec![0.0; nr];
        relation_re[0] = e_r.0;
        relation_im[0] = e_r.1;
        ModelParams::from_parts(
            vocab,
            1,
            vec![e_s.0, e_o.0],
            vec![e_s.1, e_o.1],
            relation_re,
            relation_im,
        )
        .unwrap()
    }

    #[test]
    fn zero_embeddings_score_half() {
        let m = tiny((0.0, 0.0), (0.0, 0.0), (0.0, 0.0));
        assert_eq!(m.score(0, 0, 1).unwrap(), 0.5);
        let all = m.score_1n(0, 0).unwrap();
        assert!(all.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn unit_real_embeddings_score_sigmoid_one() {
        let m = tiny((1.0, 0.0), (1.0, 0.0), (1.0, 0.0));
        let got = m.score(0, 0, 1).unwrap();
        assert!((got - 0.7310586).abs() < 1e-7, "{got}");
    }

    #[test]
    fn orthogonal_object_scores_half() {
        // e_o = i: Re(<1, 1, conj(i)>) = 0
        let m = tiny((1.0, 0.0), (1.0, 0.0), (0.0, 1.0));
        assert_eq!(m.score(0, 0, 1).unwrap(), 0.5);
    }

    #[test]
    fn one_to_n_matches_per_triplet_bitwise() {
        let m = crate::complex::init_params(&Vocabulary::from_entities((0..40).map(|i| format!("e{i}"))), 7, 99).unwrap();
        for (s, r) in [(0u32, 0u32), (3, 2), (39, 4)] {
            let all = m.score_1n(s, r).unwrap();
            for o in 0..m.n_entities() as u32 {
                let one = m.score(s, r, o).unwrap();
                assert_eq!(all[o as usize], one, "s={s} r={r} o={o}");
                assert!(one > 0.0 && one < 1.0);
            }
        }
    }

    #[test]
    fn out_of_range_ids_error() {
        let m = tiny((0.0, 0.0), (0.0, 0.0), (0.0, 0.0));
        assert!(m.score(5, 0, 0).is_err());
        assert!(m.score(0, 99, 0).is_err());
        assert!(m.score_1n(0, 99).is_err());
    }

    #[test]
    fn one_to_n_beats_repeated_single_scores() {
        use std::time::Instant;
        let vocab = Vocabulary::from_entities((0..10_000).map(|i| format!("e{i}")));
        let m = crate::complex::init_params(&vocab, 16, 5).unwrap();
        // warm up
        let _ = m.score_1n(0, 0).unwrap();
        let t0 = Instant::now();
        let batch = m.score_1n(0, 0).unwrap();
        let t_batch = t0.elapsed();
        let t1 = Instant::now();
        let mut acc = 0.0;
        for o in 0..10_000u32 {
            acc += m.score(0, 0, o).unwrap();
        }
        let t_single = t1.elapsed();
        assert!(acc.is_finite() && batch.len() == 10_000);
        assert!(
            t_batch < t_single,
            "1-N {t_batch:?} should beat 10k singles {t_single:?}"
        );
    }
}
