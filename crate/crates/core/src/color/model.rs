use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pairs::ColorSample;
use crate::nn::{batched_gradient, Activation, Adam, LayerRecord, Mlp, BATCH_CHUNK};
use crate::{par, schema, Error, Result};

/// Layer widths: RGB in, two hidden layers of 32, RGB out.
pub const LAYER_SIZES: [usize; 4] = [3, 32, 32, 3];

/// Smooth hidden units fit the power-law tone curves of typical renderers
/// far more closely than ReLU at this width.
pub const ACTIVATION: Activation = Activation::Tanh;

const MIN_PAIRS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColorTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Learning rate reached at `max_epochs` under cosine decay.
    pub min_learning_rate: f64,
    /// Epochs without a held-out improvement before training stops.
    pub patience: usize,
    /// Fraction of pairs held out for early stopping and error reporting.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for ColorTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 2000,
            min_learning_rate: 1e-6,
            patience: 200,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    /// Mean per-sample `‖C′ − N(C)‖` on the training split.
    pub final_loss: f64,
    /// Mean absolute per-channel error on the held-out split.
    pub held_out_error: f64,
    pub training_pairs: usize,
    pub held_out_pairs: usize,
}

/// Trained inverse-renderer network.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorCorrector {
    pub mlp: Mlp,
    pub metadata: TrainingMetadata,
}

impl ColorCorrector {
    /// Raw network output, unclamped.
    pub fn predict(&self, c: [f64; 3]) -> [f64; 3] {
        let y = self.mlp.forward(&c);
        [y[0], y[1], y[2]]
    }

    pub fn correct(&self, c: [f64; 3]) -> [f64; 3] {
        self.predict(c).map(|x| x.clamp(0.0, 1.0))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: ColorModelDocument = schema::read_json(path, schema::COLOR_MODEL)?;
        doc.into_model()
    }

    pub fn write(&self, path: &Path, provenance: Option<serde_json::Value>) -> Result<()> {
        schema::write_json(path, &ColorModelDocument::new(self, provenance))
    }
}

pub fn correct_color(model: &ColorCorrector, c: [f64; 3]) -> [f64; 3] {
    model.correct(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorModelDocument {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    pub activation: Activation,
    pub layers: Vec<LayerRecord>,
    pub metadata: TrainingMetadata,
}

impl ColorModelDocument {
    pub fn new(model: &ColorCorrector, provenance: Option<serde_json::Value>) -> Self {
        Self {
            schema: schema::COLOR_MODEL.into(),
            provenance,
            activation: model.mlp.activation(),
            layers: model.mlp.to_layers(),
            metadata: model.metadata.clone(),
        }
    }

    pub fn into_model(self) -> Result<ColorCorrector> {
        let mlp = Mlp::from_layers(&self.layers, self.activation)?;
        if mlp.sizes() != LAYER_SIZES {
            return Err(Error::Model(format!(
                "color model must have layer widths {LAYER_SIZES:?}, found {:?}",
                mlp.sizes()
            )));
        }
        Ok(ColorCorrector {
            mlp,
            metadata: self.metadata,
        })
    }
}

fn cosine_lr(config: &ColorTrainConfig, epoch: usize) -> f64 {
    let t = (epoch - 1) as f64 / config.max_epochs.max(1) as f64;
    let (hi, lo) = (config.learning_rate, config.min_learning_rate);
    lo + 0.5 * (hi - lo) * (1.0 + (std::f64::consts::PI * t).cos())
}

fn held_out_error(mlp: &Mlp, samples: &[ColorSample]) -> f64 {
    let chunks: Vec<&[ColorSample]> = samples.chunks(BATCH_CHUNK).collect();
    let sums = par::map_slice(&chunks, |chunk| {
        let x: Vec<f64> = chunk.iter().flat_map(|s| s.rendered).collect();
        let acts = mlp.forward_batch(&x, chunk.len());
        let y = acts.last().unwrap();
        chunk
            .iter()
            .enumerate()
            .map(|(r, s)| (0..3).map(|c| (y[3 * r + c].clamp(0.0, 1.0) - s.source[c]).abs()).sum::<f64>())
            .sum::<f64>()
    });
    sums.iter().sum::<f64>() / (3 * samples.len()) as f64
}

/// Fits `N` so that `N(C) ≈ C′` by minimizing `Σ ‖C′ − N(C)‖` with Adam.
///
/// Pairs are split once (seeded) into training and held-out sets. Each epoch
/// reshuffles the training set; the best held-out parameters are kept. The
/// learning rate follows a cosine decay over `max_epochs` and training stops
/// early after `patience` epochs without held-out improvement.
pub fn train_corrector(pairs: &[ColorSample], config: &ColorTrainConfig) -> Result<ColorCorrector> {
    if pairs.len() < MIN_PAIRS {
        return Err(Error::Invalid(format!(
            "need at least {MIN_PAIRS} color pairs, got {}",
            pairs.len()
        )));
    }
    if pairs
        .iter()
        .flat_map(|p| p.source.iter().chain(&p.rendered))
        .any(|x| !(0.0..=1.0).contains(x))
    {
        return Err(Error::Invalid("color pair channel outside [0, 1]".into()));
    }
    if config.batch_size == 0 || !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(Error::Invalid("batch size must be positive and validation fraction in [0, 1)".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((pairs.len() as f64 * config.validation_fraction).round() as usize).min(pairs.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val: Vec<ColorSample> = val_idx.iter().map(|&i| pairs[i]).collect();
    let train: Vec<ColorSample> = train_idx.iter().map(|&i| pairs[i]).collect();
    // With no held-out split, early stopping watches the training set.
    let monitor = if val.is_empty() { &train } else { &val };

    let mut mlp = Mlp::new(&LAYER_SIZES, ACTIVATION, &mut rng);
    let mut adam = Adam::new(mlp.params().len(), config.learning_rate);
    let mut best = (f64::INFINITY, mlp.clone(), 0usize, f64::NAN);
    let mut since_best = 0;
    let mut idx: Vec<usize> = (0..train.len()).collect();
    let dim = mlp.params().len();
    let mut epochs = 0;

    for epoch in 1..=config.max_epochs {
        adam.lr = cosine_lr(config, epoch);
        idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in idx.chunks(config.batch_size) {
            let (loss, mut grad) = batched_gradient(batch, dim, |chunk, g| {
                let x: Vec<f64> = chunk.iter().flat_map(|&i| train[i].rendered).collect();
                let acts = mlp.forward_batch(&x, chunk.len());
                let y = acts.last().unwrap();
                let mut gout = vec![0.0; 3 * chunk.len()];
                let mut loss = 0.0;
                for (r, &i) in chunk.iter().enumerate() {
                    let e: [f64; 3] = std::array::from_fn(|c| y[3 * r + c] - train[i].source[c]);
                    let norm = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
                    if norm > 1e-12 {
                        for c in 0..3 {
                            gout[3 * r + c] = e[c] / norm;
                        }
                    }
                    loss += norm;
                }
                mlp.backward_batch(&acts, chunk.len(), &gout, g);
                loss
            });
            if !loss.is_finite() {
                return Err(Error::TrainingFailure(format!(
                    "color loss became {loss} in epoch {epoch} (learning rate {:e})",
                    adam.lr
                )));
            }
            epoch_loss += loss;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(mlp.params_mut(), &grad);
        }
        epochs = epoch;
        let err = held_out_error(&mlp, monitor);
        if !err.is_finite() {
            return Err(Error::TrainingFailure(format!("held-out error became {err} in epoch {epoch}")));
        }
        if err < best.0 {
            best = (err, mlp.clone(), epoch, epoch_loss / train.len() as f64);
            since_best = 0;
        } else {
            since_best += 1;
        }
        log::debug!("color epoch {epoch}: loss {:.6e}, held-out {err:.6e}", epoch_loss / train.len() as f64);
        if since_best >= config.patience {
            break;
        }
    }
    let (held_out, mlp, best_epoch, final_loss) = best;
    log::info!("color training: {epochs} epochs, best held-out error {held_out:.3e} at epoch {best_epoch}");
    Ok(ColorCorrector {
        mlp,
        metadata: TrainingMetadata {
            seed: config.seed,
            epochs,
            final_loss,
            held_out_error: held_out,
            training_pairs: train.len(),
            held_out_pairs: val.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::{generate_training_pairs, OraclePreset, PairConfig};

    fn quick() -> ColorTrainConfig {
        ColorTrainConfig {
            max_epochs: 5,
            ..Default::default()
        }
    }

    #[test]
    fn too_few_pairs_is_invalid() {
        let pairs = generate_training_pairs(&OraclePreset::Identity, 50, &PairConfig::default()).unwrap();
        assert!(matches!(train_corrector(&pairs, &quick()), Err(Error::Invalid(_))));
    }

    #[test]
    fn training_is_reproducible() {
        let pairs = generate_training_pairs(&OraclePreset::default(), 400, &PairConfig::default()).unwrap();
        let a = train_corrector(&pairs, &quick()).unwrap();
        let b = train_corrector(&pairs, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outputs_are_clamped() {
        let pairs = generate_training_pairs(&OraclePreset::Identity, 200, &PairConfig::default()).unwrap();
        let model = train_corrector(&pairs, &quick()).unwrap();
        for c in [[0.0; 3], [1.0; 3]] {
            assert!(model.correct(c).iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn nan_pairs_are_rejected() {
        let mut pairs = generate_training_pairs(&OraclePreset::Identity, 200, &PairConfig::default()).unwrap();
        pairs[3].rendered[1] = f64::NAN;
        assert!(train_corrector(&pairs, &quick()).is_err());
    }

    #[test]
    fn document_round_trip() {
        let pairs = generate_training_pairs(&OraclePreset::Identity, 200, &PairConfig::default()).unwrap();
        let model = train_corrector(&pairs, &quick()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.write(&path, None).unwrap();
        assert_eq!(ColorCorrector::read(&path).unwrap(), model);
    }
}
