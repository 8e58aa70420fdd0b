use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{rec_loss, vel_loss};
use super::track::{AudioFeatureTrack, RigCoefficientTrack};
use crate::nn::{Activation, Adam, LayerRecord, Mlp, BATCH_CHUNK};
use crate::{par, schema, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaceTrainConfig {
    /// Frames of context on each side of the predicted frame.
    pub window: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// Learning rate reached at `max_epochs` under cosine decay.
    pub min_learning_rate: f64,
    /// Frames per optimizer step.
    pub batch_frames: usize,
    /// Length of the contiguous runs that make up a batch. The velocity
    /// term only sees frame pairs inside one run.
    pub segment_frames: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Tail fraction of every track held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for FaceTrainConfig {
    fn default() -> Self {
        Self {
            window: 4,
            hidden: vec![128, 128],
            learning_rate: 3e-3,
            min_learning_rate: 1e-6,
            batch_frames: 64,
            segment_frames: 64,
            max_epochs: 200,
            patience: 30,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceTrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    /// Mean `L_rec + L_vel` per training frame, unclamped outputs.
    pub train_loss: f64,
    /// Held-out `L_rec` and `L_vel` per frame-control entry.
    pub held_out_rec: f64,
    pub held_out_vel: f64,
    pub training_frames: usize,
    pub held_out_frames: usize,
}

/// Per-frame decoder over a `±window` frame feature window.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceRegressor {
    pub mlp: Mlp,
    pub window: usize,
    pub fps: f64,
    pub controls: Vec<String>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub metadata: FaceTrainingMetadata,
}

/// Losses of a model's clamped output against reference tracks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceEvaluation {
    pub rec: f64,
    pub vel: f64,
    pub frames: usize,
    pub rec_per_entry: f64,
    pub vel_per_entry: f64,
}

impl FaceRegressor {
    pub fn feature_dim(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn control_count(&self) -> usize {
        self.controls.len()
    }

    fn input_dim(&self) -> usize {
        (2 * self.window + 1) * self.feature_dim()
    }

    /// Unclamped outputs for every frame.
    pub fn predict_raw(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some((t, f)) = features.iter().enumerate().find(|(_, f)| f.len() != self.feature_dim()) {
            return Err(Error::Model(format!(
                "feature frame {t} has dimension {}, model expects {}",
                f.len(),
                self.feature_dim()
            )));
        }
        let x = window_rows(features, &self.feature_mean, &self.feature_scale, self.window, 0..features.len());
        Ok(forward_rows(&self.mlp, &x, self.input_dim()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: FaceModelDocument = schema::read_json(path, schema::FACE_MODEL)?;
        doc.into_model().map_err(|e| Error::schema(path, e))
    }

    pub fn write(&self, path: &Path, provenance: Option<serde_json::Value>) -> Result<()> {
        schema::write_json(path, &FaceModelDocument::new(self, provenance))
    }
}

fn forward_rows(mlp: &Mlp, x: &[f64], input_dim: usize) -> Vec<Vec<f64>> {
    let chunks: Vec<&[f64]> = x.chunks(BATCH_CHUNK * input_dim.max(1)).collect();
    let n = mlp.output_dim();
    par::map_slice(&chunks, |c| {
        let rows = c.len() / input_dim;
        let acts = mlp.forward_batch(c, rows);
        acts.last().unwrap().chunks(n).map(<[f64]>::to_vec).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Normalized, edge-replicated feature windows for frames in `range`,
/// row-major.
fn window_rows(
    frames: &[Vec<f64>],
    mean: &[f64],
    scale: &[f64],
    w: usize,
    range: std::ops::Range<usize>,
) -> Vec<f64> {
    let last = frames.len() as isize - 1;
    let mut out = Vec::with_capacity(range.len() * (2 * w + 1) * mean.len());
    for t in range {
        for o in -(w as isize)..=w as isize {
            let f = &frames[(t as isize + o).clamp(0, last) as usize];
            out.extend(f.iter().zip(mean).zip(scale).map(|((x, m), s)| (x - m) / s));
        }
    }
    out
}

/// Single batched pass over all frames, clamped to `[0, 1]`.
pub fn drive_face(model: &FaceRegressor, features: &AudioFeatureTrack) -> Result<RigCoefficientTrack> {
    if (features.fps - model.fps).abs() > 1e-9 {
        log::warn!("feature rate {} Hz differs from the model's {} Hz", features.fps, model.fps);
    }
    let values = model
        .predict_raw(&features.frames)?
        .into_iter()
        .map(|r| r.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
        .collect();
    RigCoefficientTrack::new(features.fps, model.controls.clone(), values)
}

pub fn evaluate(
    model: &FaceRegressor,
    features: &[AudioFeatureTrack],
    targets: &[RigCoefficientTrack],
) -> Result<FaceEvaluation> {
    check_pairs(features, targets)?;
    let (mut rec, mut vel, mut frames) = (0.0, 0.0, 0);
    for (f, b) in features.iter().zip(targets) {
        let out = drive_face(model, f)?;
        rec += rec_loss(&out.values, &b.values)?;
        vel += vel_loss(&out.values, &b.values)?;
        frames += b.frame_count();
    }
    let entries = (frames * model.control_count()) as f64;
    Ok(FaceEvaluation {
        rec,
        vel,
        frames,
        rec_per_entry: rec / entries,
        vel_per_entry: vel / entries,
    })
}

fn check_pairs(features: &[AudioFeatureTrack], targets: &[RigCoefficientTrack]) -> Result<()> {
    if features.is_empty() || features.len() != targets.len() {
        return Err(Error::Invalid(format!(
            "need matching, non-empty feature and target lists ({} vs {})",
            features.len(),
            targets.len()
        )));
    }
    let (d, n) = (features[0].dimension(), targets[0].control_count());
    for (k, (f, b)) in features.iter().zip(targets).enumerate() {
        if f.frame_count() != b.frame_count() {
            return Err(Error::Dimension(format!(
                "pair {k}: {} feature frames vs {} coefficient frames",
                f.frame_count(),
                b.frame_count()
            )));
        }
        if f.dimension() != d || b.control_count() != n {
            return Err(Error::Dimension(format!(
                "pair {k}: feature dimension {} and {} controls, first pair has {d} and {n}",
                f.dimension(),
                b.control_count()
            )));
        }
    }
    Ok(())
}

/// Contiguous run of training frames in one track.
#[derive(Debug, Clone, Copy)]
struct Run {
    track: usize,
    start: usize,
    len: usize,
}

struct Prepared<'a> {
    inputs: Vec<Vec<f64>>,
    targets: &'a [RigCoefficientTrack],
    input_dim: usize,
    controls: usize,
}

impl Prepared<'_> {
    /// `(L_rec + L_vel, gradient)` of one run with raw outputs.
    fn run_gradient(&self, mlp: &Mlp, run: Run) -> (f64, Vec<f64>) {
        let x = &self.inputs[run.track][run.start * self.input_dim..(run.start + run.len) * self.input_dim];
        let acts = mlp.forward_batch(x, run.len);
        let y = acts.last().unwrap();
        let n = self.controls;
        let b = &self.targets[run.track].values[run.start..run.start + run.len];
        let mut g = vec![0.0; run.len * n];
        let mut loss = 0.0;
        for r in 0..run.len {
            for i in 0..n {
                let e = y[r * n + i] - b[r][i];
                loss += e * e;
                g[r * n + i] += 2.0 * e;
                if r > 0 {
                    let d = (y[r * n + i] - y[(r - 1) * n + i]) - (b[r][i] - b[r - 1][i]);
                    loss += d * d;
                    g[r * n + i] += 2.0 * d;
                    g[(r - 1) * n + i] -= 2.0 * d;
                }
            }
        }
        let mut grad = vec![0.0; mlp.params().len()];
        mlp.backward_batch(&acts, run.len, &g, &mut grad);
        (loss, grad)
    }

    /// Per-entry `(L_rec, L_vel)` of clamped outputs over `runs`.
    fn held_out(&self, mlp: &Mlp, runs: &[Run]) -> (f64, f64) {
        let (mut rec, mut vel, mut entries) = (0.0, 0.0, 0usize);
        for run in runs {
            let x = &self.inputs[run.track][run.start * self.input_dim..(run.start + run.len) * self.input_dim];
            let y: Vec<Vec<f64>> = forward_rows(mlp, x, self.input_dim)
                .into_iter()
                .map(|r| r.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
                .collect();
            let b = &self.targets[run.track].values[run.start..run.start + run.len];
            rec += rec_loss(&y, b).expect("shapes match");
            vel += vel_loss(&y, b).expect("shapes match");
            entries += run.len * self.controls;
        }
        let e = entries.max(1) as f64;
        (rec / e, vel / e)
    }
}

/// Output weights start this much smaller than the hidden layers', with
/// the bias at the mean target, so early steps refine instead of undoing a
/// large random offset.
const OUTPUT_INIT_SCALE: f64 = 0.1;

fn cosine_lr(config: &FaceTrainConfig, epoch: usize) -> f64 {
    let t = (epoch - 1) as f64 / config.max_epochs.max(1) as f64;
    let (hi, lo) = (config.learning_rate, config.min_learning_rate);
    lo + 0.5 * (hi - lo) * (1.0 + (std::f64::consts::PI * t).cos())
}

fn feature_stats(features: &[AudioFeatureTrack]) -> (Vec<f64>, Vec<f64>) {
    let d = features[0].dimension();
    let frames: Vec<&Vec<f64>> = features.iter().flat_map(|f| &f.frames).collect();
    let count = frames.len() as f64;
    let mean: Vec<f64> = (0..d).map(|k| frames.iter().map(|f| f[k]).sum::<f64>() / count).collect();
    let scale = (0..d)
        .map(|k| {
            let var = frames.iter().map(|f| (f[k] - mean[k]).powi(2)).sum::<f64>() / count;
            if var.sqrt() > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Minimizes `Σ (L_rec + L_vel)` over all pairs with Adam on shuffled
/// contiguous runs, keeping the parameters with the best held-out loss.
pub fn train_face_model(
    features: &[AudioFeatureTrack],
    targets: &[RigCoefficientTrack],
    config: &FaceTrainConfig,
) -> Result<FaceRegressor> {
    check_pairs(features, targets)?;
    if !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(Error::Invalid(format!(
            "validation fraction {} must be in [0, 1)",
            config.validation_fraction
        )));
    }
    if config.segment_frames == 0 || config.batch_frames == 0 || config.max_epochs == 0 {
        return Err(Error::Invalid("segment_frames, batch_frames and max_epochs must be positive".into()));
    }
    for (f, b) in features.iter().zip(targets) {
        if (f.fps - b.fps).abs() > 1e-9 {
            return Err(Error::Invalid(format!("feature rate {} Hz vs coefficient rate {} Hz", f.fps, b.fps)));
        }
    }
    let (mean, scale) = feature_stats(features);
    let d = mean.len();
    let n = targets[0].control_count();
    let input_dim = (2 * config.window + 1) * d;
    let prepared = Prepared {
        inputs: features
            .iter()
            .map(|f| window_rows(&f.frames, &mean, &scale, config.window, 0..f.frame_count()))
            .collect(),
        targets,
        input_dim,
        controls: n,
    };

    let mut train_len = Vec::with_capacity(targets.len());
    let mut validation = Vec::new();
    for (k, b) in targets.iter().enumerate() {
        let t = b.frame_count();
        let held = ((t as f64 * config.validation_fraction).floor() as usize).min(t.saturating_sub(1));
        train_len.push(t - held);
        if held > 0 {
            validation.push(Run {
                track: k,
                start: t - held,
                len: held,
            });
        }
    }
    let training_frames: usize = train_len.iter().sum();
    let held_out_frames: usize = validation.iter().map(|r| r.len).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sizes = vec![input_dim];
    sizes.extend(&config.hidden);
    sizes.push(n);
    let mut mlp = Mlp::new(&sizes, Activation::Relu, &mut rng);
    let frames: Vec<&Vec<f64>> = targets.iter().flat_map(|b| &b.values).collect();
    let target_mean: Vec<f64> =
        (0..n).map(|i| frames.iter().map(|r| r[i]).sum::<f64>() / frames.len() as f64).collect();
    mlp.reset_output(OUTPUT_INIT_SCALE, &target_mean);
    let mut adam = Adam::new(mlp.params().len(), config.learning_rate);
    let seg = config.segment_frames;

    let mut best = (f64::INFINITY, mlp.params().to_vec(), 0usize, 0.0);
    let mut since_best = 0;
    let mut epochs = 0;
    for epoch in 1..=config.max_epochs {
        epochs = epoch;
        adam.lr = cosine_lr(config, epoch);
        let mut runs = Vec::new();
        for (track, &len) in train_len.iter().enumerate() {
            let offset = rng.random_range(0..seg.min(len));
            if offset > 0 {
                runs.push(Run { track, start: 0, len: offset });
            }
            let mut start = offset;
            while start < len {
                let l = seg.min(len - start);
                runs.push(Run { track, start, len: l });
                start += l;
            }
        }
        runs.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut i = 0;
        while i < runs.len() {
            let mut j = i;
            let mut frames = 0;
            while j < runs.len() && frames < config.batch_frames {
                frames += runs[j].len;
                j += 1;
            }
            let partials = par::map_slice(&runs[i..j], |&r| prepared.run_gradient(&mlp, r));
            let mut grad = vec![0.0; mlp.params().len()];
            let mut loss = 0.0;
            for (l, g) in partials {
                loss += l;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            if !loss.is_finite() {
                return Err(Error::TrainingFailure(format!("non-finite loss at epoch {epoch}")));
            }
            epoch_loss += loss;
            let inv = 1.0 / frames as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.step(mlp.params_mut(), &grad);
            i = j;
        }
        let train_loss = epoch_loss / training_frames as f64;
        let score = if validation.is_empty() {
            train_loss
        } else {
            let (r, v) = prepared.held_out(&mlp, &validation);
            r + v
        };
        if score < best.0 {
            best = (score, mlp.params().to_vec(), epoch, train_loss);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
        if epoch % 25 == 0 {
            log::debug!("face epoch {epoch}: train {train_loss:.3e}, held-out {score:.3e}");
        }
    }
    mlp.params_mut().copy_from_slice(&best.1);
    let (held_out_rec, held_out_vel) = prepared.held_out(&mlp, &validation);
    log::info!("face model: best epoch {} of {epochs}, held-out L_rec/entry {held_out_rec:.3e}", best.2);
    Ok(FaceRegressor {
        mlp,
        window: config.window,
        fps: features[0].fps,
        controls: targets[0].controls.clone(),
        feature_mean: mean,
        feature_scale: scale,
        metadata: FaceTrainingMetadata {
            seed: config.seed,
            epochs,
            train_loss: best.3,
            held_out_rec,
            held_out_vel,
            training_frames,
            held_out_frames,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceModelDocument {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    pub activation: Activation,
    pub window: usize,
    pub fps: f64,
    pub controls: Vec<String>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub layers: Vec<LayerRecord>,
    pub metadata: FaceTrainingMetadata,
}

impl FaceModelDocument {
    pub fn new(model: &FaceRegressor, provenance: Option<serde_json::Value>) -> Self {
        Self {
            schema: schema::FACE_MODEL.into(),
            provenance,
            activation: model.mlp.activation(),
            window: model.window,
            fps: model.fps,
            controls: model.controls.clone(),
            feature_mean: model.feature_mean.clone(),
            feature_scale: model.feature_scale.clone(),
            layers: model.mlp.to_layers(),
            metadata: model.metadata.clone(),
        }
    }

    pub fn into_model(self) -> Result<FaceRegressor> {
        let mlp = Mlp::from_layers(&self.layers, self.activation)?;
        let d = self.feature_mean.len();
        if self.feature_scale.len() != d || mlp.input_dim() != (2 * self.window + 1) * d {
            return Err(Error::Model(format!(
                "input width {} does not match window {} over {d} features",
                mlp.input_dim(),
                self.window
            )));
        }
        if mlp.output_dim() != self.controls.len() {
            return Err(Error::Model(format!(
                "{} outputs for {} controls",
                mlp.output_dim(),
                self.controls.len()
            )));
        }
        Ok(FaceRegressor {
            mlp,
            window: self.window,
            fps: self.fps,
            controls: self.controls,
            feature_mean: self.feature_mean,
            feature_scale: self.feature_scale,
            metadata: self.metadata,
        })
    }
}
