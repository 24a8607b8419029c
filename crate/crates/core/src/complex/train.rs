//! Parameter initialization, Adam updates, and the training loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{loss_and_grads, loss_and_grads_1n, Gradients, Mat, ModelError, ModelParams, TrainingExample};
use crate::triplet::{Triplet, TripletStore};
use crate::vocab::Vocabulary;

/// Negative example regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Score each `(s, r)` pair against all entities at once.
    OneToN,
    /// Draw `ratio` corrupted-object negatives per positive.
    NegativeSampling { ratio: usize },
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub mode: TrainMode,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            batch_size: 128,
            learning_rate: 1e-3,
            epochs: 100,
            seed: 0,
            mode: TrainMode::OneToN,
            l2: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::Argument("dim must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Argument("batch_size must be >= 1".into()));
        }
        if let TrainMode::NegativeSampling { ratio } = self.mode {
            if ratio == 0 {
                return Err(ModelError::Argument("negative sampling ratio must be >= 1".into()));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::Argument("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Draws all embeddings i.i.d. Gaussian(0, 1/sqrt(dim)), deterministic per
/// seed. The scale keeps initial raw scores O(1).
pub fn init_params(vocab: &Vocabulary, dim: usize, seed: u64) -> Result<ModelParams, ModelError> {
    if vocab.n_entities() == 0 || vocab.n_relations() == 0 {
        return Err(ModelError::Argument("vocabulary must be nonempty".into()));
    }
    if dim == 0 {
        return Err(ModelError::Argument("dim must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (dim as f64).sqrt().recip())
        .map_err(|e| ModelError::Argument(e.to_string()))?;
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| normal.sample(&mut rng)).collect() };
    let ne = vocab.n_entities() * dim;
    let nr = vocab.n_relations() * dim;
    let entity_re = draw(ne);
    let entity_im = draw(ne);
    let relation_re = draw(nr);
    let relation_im = draw(nr);
    ModelParams::from_parts(vocab.clone(), dim, entity_re, entity_im, relation_re, relation_im)
}

/// First/second moment estimates for every parameter table plus the shared
/// step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: [Mat; 4],
    v: [Mat; 4],
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let shapes = params.tables().map(|t| (t.rows, t.cols));
        AdamState {
            m: shapes.map(|(r, c)| Mat::zeros(r, c)),
            v: shapes.map(|(r, c)| Mat::zeros(r, c)),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update over the touched rows. Untouched rows keep
/// their moments (lazy sparse update); the step counter is shared.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ModelParams,
    grads: &Gradients,
    cfg: &TrainConfig,
) -> Result<(), ModelError> {
    state.step += 1;
    let t = state.step;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);

    let tables = [
        super::Table::EntityRe,
        super::Table::EntityIm,
        super::Table::RelationRe,
        super::Table::RelationIm,
    ];
    for (ti, table) in tables.into_iter().enumerate() {
        let rows: Vec<(&u32, &Vec<f64>)> = match table {
            super::Table::EntityRe => grads.entity_re.iter().collect(),
            super::Table::EntityIm => grads.entity_im.iter().collect(),
            super::Table::RelationRe => grads.relation_re.iter().collect(),
            super::Table::RelationIm => grads.relation_im.iter().collect(),
        };
        for (&id, grad_row) in rows {
            if let Some(bad) = grad_row.iter().find(|g| !g.is_finite()) {
                return Err(ModelError::Training(format!(
                    "non-finite gradient {bad} in {table:?} row {id}"
                )));
            }
            let m_row = state.m[ti].row_mut(id as usize);
            let v_row = state.v[ti].row_mut(id as usize);
            let p_row = params.table_mut(table).row_mut(id as usize);
            for i in 0..grad_row.len() {
                let g = grad_row[i];
                m_row[i] = cfg.beta1 * m_row[i] + (1.0 - cfg.beta1) * g;
                v_row[i] = cfg.beta2 * v_row[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m_row[i] / bc1;
                let v_hat = v_row[i] / bc2;
                p_row[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
    Ok(())
}

/// Trains a fresh model on the store. Deterministic for fixed
/// `(store, cfg)`: reruns produce bitwise-identical parameters.
pub fn train(
    vocab: &Vocabulary,
    store: &TripletStore,
    cfg: &TrainConfig,
) -> Result<ModelParams, ModelError> {
    cfg.validate()?;
    if store.is_empty() {
        return Err(ModelError::Argument("triplet store is empty".into()));
    }
    let mut params = init_params(vocab, cfg.dim, cfg.seed)?;
    let mut state = AdamState::new(&params);
    // Separate stream from init so reordering epochs cannot alias draws.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let ne = vocab.n_entities();

    match cfg.mode {
        TrainMode::OneToN => {
            let mut items = store.sr_pairs();
            for epoch in 0..cfg.epochs {
                items.shuffle(&mut rng);
                let mut epoch_loss = 0.0;
                for chunk in items.chunks(cfg.batch_size) {
                    let positives: Vec<&[u32]> =
                        chunk.iter().map(|&(s, r)| store.objects(s, r)).collect();
                    let (loss, grads) = loss_and_grads_1n(&params, chunk, &positives, cfg.l2)?;
                    if !loss.is_finite() {
                        return Err(ModelError::Training(format!(
                            "loss diverged at epoch {epoch}"
                        )));
                    }
                    epoch_loss += loss;
                    adam_step(&mut state, &mut params, &grads, cfg)?;
                }
                log::info!("epoch {epoch}: loss {epoch_loss:.6}");
            }
        }
        TrainMode::NegativeSampling { ratio } => {
            let mut items = store.sorted();
            for epoch in 0..cfg.epochs {
                items.shuffle(&mut rng);
                let mut epoch_loss = 0.0;
                for chunk in items.chunks(cfg.batch_size) {
                    let mut batch = Vec::with_capacity(chunk.len() * (1 + ratio));
                    for &t in chunk {
                        batch.push(TrainingExample::positive(t));
                        for _ in 0..ratio {
                            // Corrupt the object slot; resample on collision
                            // with a known fact, bounded to stay total.
                            let mut attempts = 0;
                            loop {
                                let o = rng.random_range(0..ne as u32);
                                if !store.contains(t.s, t.r, o) {
                                    batch.push(TrainingExample::negative(Triplet::new(t.s, t.r, o)));
                                    break;
                                }
                                attempts += 1;
                                if attempts >= 1000 {
                                    log::warn!(
                                        "could not sample a negative for ({}, {}); skipping",
                                        t.s,
                                        t.r
                                    );
                                    break;
                                }
                            }
                        }
                    }
                    let (loss, grads) = loss_and_grads(&params, &batch, cfg.l2)?;
                    if !loss.is_finite() {
                        return Err(ModelError::Training(format!(
                            "loss diverged at epoch {epoch}"
                        )));
                    }
                    epoch_loss += loss;
                    adam_step(&mut state, &mut params, &grads, cfg)?;
                }
                log::info!("epoch {epoch}: loss {epoch_loss:.6}");
            }
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Table;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_entities((0..n).map(|i| format!("e{i:02}")))
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let v = vocab(17);
        let a = init_params(&v, 8, 3).unwrap();
        let b = init_params(&v, 8, 3).unwrap();
        assert_eq!(a, b);
        let c = init_params(&v, 8, 4).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.dim(), 8);
        assert_eq!(a.n_entities(), 17);
        assert_eq!(a.n_relations(), 5);
    }

    #[test]
    fn init_sample_mean_is_near_zero() {
        let v = vocab(100);
        let dim = 50;
        let m = init_params(&v, dim, 12).unwrap();
        let sigma = (dim as f64).sqrt().recip();
        for table in [Table::EntityRe, Table::EntityIm] {
            let data = m.table(table).data();
            let mean: f64 = data.iter().sum::<f64>() / data.len() as f64;
            let bound = 3.0 * sigma / (data.len() as f64).sqrt();
            assert!(mean.abs() < bound, "mean {mean} exceeds {bound}");
        }
    }

    #[test]
    fn zero_counts_or_dim_error() {
        assert!(init_params(&Vocabulary::new(), 4, 0).is_err());
        assert!(init_params(&vocab(3), 0, 0).is_err());
    }

    #[test]
    fn adam_zero_gradients_leave_params_unchanged() {
        let mut params = init_params(&vocab(4), 3, 9).unwrap();
        let before = params.clone();
        let mut state = AdamState::new(&params);
        let grads = Gradients::default();
        adam_step(&mut state, &mut params, &grads, &TrainConfig::default()).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn adam_first_step_magnitude_is_learning_rate() {
        let mut params = init_params(&vocab(2), 2, 1).unwrap();
        let before0 = params.component(Table::EntityRe, 0, 0);
        let before1 = params.component(Table::EntityRe, 0, 1);
        let mut state = AdamState::new(&params);
        let mut grads = Gradients::default();
        grads.entity_re.insert(0, vec![0.37, -2.4]);
        let cfg = TrainConfig { learning_rate: 0.01, ..TrainConfig::default() };
        adam_step(&mut state, &mut params, &grads, &cfg).unwrap();
        // step 1 with constant g: m_hat = g, v_hat = g^2, update = lr * g/(|g| + eps)
        let delta = before0 - params.component(Table::EntityRe, 0, 0);
        assert!((delta - 0.01).abs() < 1e-6, "{delta}");
        let delta2 = params.component(Table::EntityRe, 0, 1) - before1;
        assert!((delta2 - 0.01).abs() < 1e-6, "negative gradient must increase the parameter by lr");
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut params = init_params(&vocab(2), 2, 1).unwrap();
        let mut state = AdamState::new(&params);
        let mut grads = Gradients::default();
        grads.entity_re.insert(0, vec![f64::NAN, 0.0]);
        let err = adam_step(&mut state, &mut params, &grads, &TrainConfig::default());
        assert!(matches!(err, Err(ModelError::Training(_))));
    }

    fn block_store(v: &Vocabulary) -> TripletStore {
        // 0..3 all relate to 3..6 under relation 0
        let mut store = TripletStore::new();
        for s in 0..3u32 {
            for o in 3..6u32 {
                store.insert(Triplet::new(s, 0, o));
            }
        }
        let _ = v;
        store
    }

    #[test]
    fn train_is_deterministic() {
        let v = vocab(6);
        let store = block_store(&v);
        let cfg = TrainConfig { dim: 4, epochs: 5, batch_size: 2, learning_rate: 0.05, seed: 21, ..TrainConfig::default() };
        let a = train(&v, &store, &cfg).unwrap();
        let b = train(&v, &store, &cfg).unwrap();
        assert_eq!(a, b);
        let ns_cfg = TrainConfig { mode: TrainMode::NegativeSampling { ratio: 2 }, ..cfg };
        let c = train(&v, &store, &ns_cfg).unwrap();
        let d = train(&v, &store, &ns_cfg).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let v = vocab(6);
        let store = block_store(&v);
        let cfg = TrainConfig { dim: 4, epochs: 0, seed: 5, ..TrainConfig::default() };
        let got = train(&v, &store, &cfg).unwrap();
        assert_eq!(got, init_params(&v, 4, 5).unwrap());
    }

    #[test]
    fn empty_store_is_an_error() {
        let v = vocab(2);
        let cfg = TrainConfig::default();
        assert!(train(&v, &TripletStore::new(), &cfg).is_err());
    }

    #[test]
    fn training_memorizes_small_store() {
        let v = vocab(6);
        let store = block_store(&v);
        let cfg = TrainConfig {
            dim: 8,
            epochs: 120,
            batch_size: 4,
            learning_rate: 0.05,
            seed: 3,
            ..TrainConfig::default()
        };
        let m = train(&v, &store, &cfg).unwrap();
        let mean: f64 = store
            .sorted()
            .iter()
            .map(|t| m.score(t.s, t.r, t.o).unwrap())
            .sum::<f64>()
            / store.len() as f64;
        assert!(mean >= 0.8, "training facts should score high, got {mean}");
    }
}
