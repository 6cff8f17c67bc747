use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::comnet::{
    comnet_forward_batch, design_matrix, loss_and_gradients, rmse, BnMode, ComNetShape,
    DropoutMasks, ForwardMode, MlpParams,
};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::pose::Pose3dFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_drop_factor: f64,
    pub lr_drop_every: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub shape: ComNetShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            initial_lr: 5e-4,
            lr_drop_factor: 0.25,
            lr_drop_every: 5,
            batch_size: 256,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            shape: ComNetShape::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs > 0
            && self.initial_lr > 0.0
            && self.lr_drop_factor > 0.0
            && self.lr_drop_every > 0
            && self.batch_size > 1
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_eps > 0.0
            && self.shape.width > 0
            && (0.0..1.0).contains(&self.shape.dropout);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad training config {self:?}")))
        }
    }

    /// Piecewise-constant learning rate for a zero-based epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.initial_lr * self.lr_drop_factor.powi((epoch / self.lr_drop_every) as i32)
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(params: &MlpParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut MlpParams, grads: &[Vec<f64>], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (k, p) in params.slices_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.adam_eps);
            }
        }
    }
}

/// Trained parameters plus the mean mini-batch loss of each epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub epoch_losses: Vec<f64>,
    /// Loss of the final optimisation step.
    pub last_step_loss: f64,
}

fn gather(m: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

pub fn comnet_train(dataset: &[(Pose3dFrame, Point3)], cfg: &TrainConfig) -> Result<MlpParams> {
    Ok(comnet_train_with_history(dataset, cfg)?.params)
}

pub fn comnet_train_with_history(
    dataset: &[(Pose3dFrame, Point3)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let Some((first, _)) = dataset.first() else {
        return Err(Error::EmptyDataset);
    };
    let layout = first.layout;
    let (raw, targets) = design_matrix(dataset, layout)?;
    let mut params = MlpParams::init(layout, cfg.shape, raw.view(), targets.view(), cfg.seed)?;
    let x = params.normalize_inputs(raw.view());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05ee_d0fb_a7c4);
    let mut adam = Adam::new(&params);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut last_step_loss = f64::NAN;
    let momentum = cfg.shape.bn_momentum;
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            // a single-row batch has no batch statistics
            if chunk.len() < 2 {
                continue;
            }
            let xb = gather(x.view(), chunk);
            let yb = gather(targets.view(), chunk);
            let masks = (cfg.shape.dropout > 0.0)
                .then(|| DropoutMasks::sample(chunk.len(), cfg.shape.width, cfg.shape.dropout, &mut rng));
            let (loss, grads, stats) =
                loss_and_gradients(&params, xb.view(), yb.view(), BnMode::Batch, masks.as_ref());
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, loss });
            }
            adam.step(&mut params, &grads.0, lr, cfg);
            let b = chunk.len() as f64;
            for (norm, (mean, var)) in params.norms.iter_mut().zip(stats.expect("batch mode")) {
                norm.running_mean *= 1.0 - momentum;
                norm.running_mean.scaled_add(momentum, &mean);
                norm.running_var *= 1.0 - momentum;
                norm.running_var.scaled_add(momentum * b / (b - 1.0), &var);
            }
            sum += loss;
            batches += 1;
            step += 1;
            last_step_loss = loss;
        }
        if batches == 0 {
            return Err(Error::EmptyDataset);
        }
        epoch_losses.push(sum / batches as f64);
    }
    Ok(TrainOutcome {
        params,
        epoch_losses,
        last_step_loss,
    })
}

/// Eval-mode RMSE (mm) of world CoM predictions over a labelled set.
pub fn evaluate_rmse(params: &MlpParams, dataset: &[(Pose3dFrame, Point3)]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let poses: Vec<Pose3dFrame> = dataset.iter().map(|(p, _)| p.clone()).collect();
    let pred = comnet_forward_batch(&poses, params, ForwardMode::Eval)?;
    let n = dataset.len();
    let mut p = Array2::zeros((n, 3));
    let mut t = Array2::zeros((n, 3));
    for (i, (q, (_, gt))) in pred.iter().zip(dataset).enumerate() {
        p.row_mut(i).assign(&ndarray::arr1(&q.to_array()));
        t.row_mut(i).assign(&ndarray::arr1(&gt.to_array()));
    }
    Ok(rmse(p.view(), t.view()))
}
