//! CoMNet: a fully connected regressor from a hip-centred 3D pose to the
//! hip-relative centre of mass.
//!
//! Layout: input linear (D -> W), hidden linear (W -> W), output linear
//! (W -> 3); each non-output layer is followed by batch norm, ReLU and
//! dropout. Inputs are z-scored with training-split statistics and the
//! output head is de-normalized with the training-split target mean/std,
//! so the loss and predictions are in millimetres.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::pose::{hip_center, Layout, Pose3dFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComNetShape {
    pub width: usize,
    pub dropout: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for ComNetShape {
    fn default() -> Self {
        Self {
            width: 3072,
            dropout: 0.5,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// out x in
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

/// Full network state including normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layout: Layout,
    pub shape: ComNetShape,
    pub input_mean: Array1<f64>,
    pub input_std: Array1<f64>,
    pub target_mean: Array1<f64>,
    pub target_std: Array1<f64>,
    /// input, hidden, output
    pub dense: [Dense; 3],
    /// after input and hidden
    pub norms: [BatchNorm; 2],
}

/// How batch norm is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Batch statistics (training).
    Batch,
    /// Running statistics (inference, or a frozen-statistics gradient check).
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Batch statistics and seeded dropout.
    Train { seed: u64 },
    /// Running statistics, no dropout; deterministic.
    Eval,
}

pub fn input_dim(layout: Layout) -> usize {
    3 * layout.len()
}

/// Hip-centred, flattened joint coordinates (x, y, z per joint).
pub fn pose_features(pose: &Pose3dFrame) -> Result<(Vec<f64>, Point3)> {
    let hip = hip_center(pose)?;
    if !pose.all_valid() {
        let missing: Vec<String> = pose.invalid_joints().iter().map(|j| j.to_string()).collect();
        return Err(Error::MissingObservation(format!(
            "frame {}: {}",
            pose.frame_index,
            missing.join(", ")
        )));
    }
    let mut f = Vec::with_capacity(3 * pose.joints.len());
    for j in &pose.joints {
        let d = j.position - hip;
        f.extend_from_slice(&[d.x, d.y, d.z]);
    }
    Ok((f, hip))
}

fn column_stats(m: ArrayView2<'_, f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = m.mean_axis(Axis(0)).expect("non-empty");
    let std = m.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-8 { s } else { 1.0 });
    (mean, std)
}

impl MlpParams {
    /// He-initialised network with normalization statistics from
    /// `features` (N x D) and `targets` (N x 3).
    pub fn init(
        layout: Layout,
        shape: ComNetShape,
        features: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        seed: u64,
    ) -> Result<Self> {
        let d = input_dim(layout);
        if features.ncols() != d || targets.ncols() != 3 || features.nrows() != targets.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "features {:?} / targets {:?} for layout {layout} (D = {d})",
                features.shape(),
                targets.shape()
            )));
        }
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if !(0.0..1.0).contains(&shape.dropout) || shape.width == 0 {
            return Err(Error::InvalidConfig(format!("bad network shape {shape:?}")));
        }
        let (input_mean, input_std) = column_stats(features);
        let (target_mean, target_std) = column_stats(targets);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = shape.width;
        let mut dense_layer = |out: usize, inp: usize, gain: f64| {
            let normal = Normal::new(0.0, (gain / inp as f64).sqrt()).expect("finite std");
            Dense {
                weight: Array2::from_shape_simple_fn((out, inp), || normal.sample(&mut rng)),
                bias: Array1::zeros(out),
            }
        };
        let dense = [dense_layer(w, d, 2.0), dense_layer(w, w, 2.0), dense_layer(3, w, 1.0)];
        let bn = || BatchNorm {
            scale: Array1::ones(w),
            shift: Array1::zeros(w),
            running_mean: Array1::zeros(w),
            running_var: Array1::ones(w),
        };
        Ok(Self {
            layout,
            shape,
            input_mean,
            input_std,
            target_mean,
            target_std,
            dense,
            norms: [bn(), bn()],
        })
    }

    /// All-zero weights and biases: the network predicts the hip centre.
    pub fn zeros(layout: Layout, shape: ComNetShape) -> Self {
        let d = input_dim(layout);
        let w = shape.width;
        let zero_dense = |out, inp| Dense {
            weight: Array2::zeros((out, inp)),
            bias: Array1::zeros(out),
        };
        let bn = || BatchNorm {
            scale: Array1::zeros(w),
            shift: Array1::zeros(w),
            running_mean: Array1::zeros(w),
            running_var: Array1::ones(w),
        };
        Self {
            layout,
            shape,
            input_mean: Array1::zeros(d),
            input_std: Array1::ones(d),
            target_mean: Array1::zeros(3),
            target_std: Array1::ones(3),
            dense: [zero_dense(w, d), zero_dense(w, w), zero_dense(3, w)],
            norms: [bn(), bn()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = input_dim(self.layout);
        let w = self.shape.width;
        let shapes_ok = self.dense[0].weight.dim() == (w, d)
            && self.dense[1].weight.dim() == (w, w)
            && self.dense[2].weight.dim() == (3, w)
            && self.dense[0].bias.len() == w
            && self.dense[1].bias.len() == w
            && self.dense[2].bias.len() == 3
            && self.input_mean.len() == d
            && self.input_std.len() == d
            && self.target_mean.len() == 3
            && self.target_std.len() == 3
            && self.norms.iter().all(|n| {
                n.scale.len() == w && n.shift.len() == w && n.running_mean.len() == w && n.running_var.len() == w
            });
        if !shapes_ok {
            return Err(Error::ShapeMismatch("parameter shapes disagree with layout/width".into()));
        }
        let finite = self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
            && self.input_mean.iter().chain(&self.input_std).chain(&self.target_mean).chain(&self.target_std).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite network parameter".into()));
        }
        if self.norms.iter().any(|n| n.running_var.iter().any(|&v| !(v > 0.0))) {
            return Err(Error::InvalidConfig("running variance must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.shape.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.shape.dropout)));
        }
        Ok(())
    }

    /// Trainable tensors in a fixed order (see [`PARAM_GROUPS`]).
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(10);
        for i in 0..3 {
            out.push(self.dense[i].weight.as_slice().expect("standard layout"));
            out.push(self.dense[i].bias.as_slice().expect("standard layout"));
            if i < 2 {
                out.push(self.norms[i].scale.as_slice().expect("standard layout"));
                out.push(self.norms[i].shift.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let [d0, d1, d2] = &mut self.dense;
        let [n0, n1] = &mut self.norms;
        vec![
            d0.weight.as_slice_mut().expect("standard layout"),
            d0.bias.as_slice_mut().expect("standard layout"),
            n0.scale.as_slice_mut().expect("standard layout"),
            n0.shift.as_slice_mut().expect("standard layout"),
            d1.weight.as_slice_mut().expect("standard layout"),
            d1.bias.as_slice_mut().expect("standard layout"),
            n1.scale.as_slice_mut().expect("standard layout"),
            n1.shift.as_slice_mut().expect("standard layout"),
            d2.weight.as_slice_mut().expect("standard layout"),
            d2.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// z-scores raw features (N x D).
    pub fn normalize_inputs(&self, raw: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut x = raw.to_owned();
        Zip::from(x.rows_mut()).for_each(|mut row| {
            row -= &self.input_mean;
            row /= &self.input_std;
        });
        x
    }
}

/// Names of the trainable tensors, matching [`MlpParams::slices`].
pub const PARAM_GROUPS: [&str; 10] = [
    "input.weight",
    "input.bias",
    "input_bn.scale",
    "input_bn.shift",
    "hidden.weight",
    "hidden.bias",
    "hidden_bn.scale",
    "hidden_bn.shift",
    "output.weight",
    "output.bias",
];

/// Dropout keep-masks (already scaled by 1/(1-p)) for the two hidden blocks.
#[derive(Debug, Clone)]
pub struct DropoutMasks(pub [Array2<f64>; 2]);

impl DropoutMasks {
    pub fn sample(rows: usize, width: usize, p: f64, rng: &mut impl Rng) -> Self {
        let keep = 1.0 / (1.0 - p);
        let mut draw = || {
            Array2::from_shape_simple_fn((rows, width), || if rng.random::<f64>() < p { 0.0 } else { keep })
        };
        let a = draw();
        let b = draw();
        DropoutMasks([a, b])
    }
}

struct BlockCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    /// BN output before ReLU
    pre_relu: Array2<f64>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
}

pub(crate) struct ForwardCache {
    blocks: Vec<BlockCache>,
    last_input: Array2<f64>,
    /// predictions in mm, N x 3
    pub output: Array2<f64>,
}

fn add_row(m: &mut Array2<f64>, v: &Array1<f64>) {
    Zip::from(m.rows_mut()).for_each(|mut row| row += v);
}

/// Forward pass over normalized inputs (N x D). Returns predictions in mm.
pub(crate) fn forward(
    params: &MlpParams,
    x: ArrayView2<'_, f64>,
    bn: BnMode,
    masks: Option<&DropoutMasks>,
) -> ForwardCache {
    let eps = params.shape.bn_eps;
    let mut blocks = Vec::with_capacity(2);
    let mut a = x.to_owned();
    for i in 0..2 {
        let layer = &params.dense[i];
        let norm = &params.norms[i];
        let mut z = a.dot(&layer.weight.t());
        add_row(&mut z, &layer.bias);
        let (mean, var) = match bn {
            BnMode::Batch => {
                let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                let var = z.var_axis(Axis(0), 0.0);
                (mean, var)
            }
            BnMode::Running => (norm.running_mean.clone(), norm.running_var.clone()),
        };
        let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
        let mut xhat = z;
        Zip::from(xhat.rows_mut()).for_each(|mut row| {
            row -= &mean;
            row *= &inv_std;
        });
        let mut y = xhat.clone();
        Zip::from(y.rows_mut()).for_each(|mut row| {
            row *= &norm.scale;
            row += &norm.shift;
        });
        let mut next = y.mapv(|v| v.max(0.0));
        if let Some(m) = masks {
            next *= &m.0[i];
        }
        blocks.push(BlockCache {
            input: a,
            xhat,
            inv_std,
            pre_relu: y,
            batch_mean: mean,
            batch_var: var,
        });
        a = next;
    }
    let head = &params.dense[2];
    let mut out = a.dot(&head.weight.t());
    add_row(&mut out, &head.bias);
    Zip::from(out.rows_mut()).for_each(|mut row| {
        row *= &params.target_std;
        row += &params.target_mean;
    });
    ForwardCache {
        blocks,
        last_input: a,
        output: out,
    }
}

/// Root of the mean squared error over all N x 3 entries.
pub fn rmse(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> f64 {
    let n = pred.len() as f64;
    let se: f64 = Zip::from(&pred).and(&target).fold(0.0, |acc, &p, &t| acc + (p - t) * (p - t));
    (se / n).sqrt()
}

/// Gradients with the same layout as [`MlpParams::slices`].
#[derive(Debug, Clone)]
pub struct Gradients(pub Vec<Vec<f64>>);

/// RMSE loss and its exact gradient for one mini-batch.
pub fn loss_and_gradients(
    params: &MlpParams,
    x: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    bn: BnMode,
    masks: Option<&DropoutMasks>,
) -> (f64, Gradients, Option<[(Array1<f64>, Array1<f64>); 2]>) {
    let cache = forward(params, x, bn, masks);
    let loss = rmse(cache.output.view(), target);
    let n = cache.output.len() as f64;
    let mut d_out = &cache.output - &target;
    if loss > 0.0 {
        d_out /= n * loss;
    } else {
        d_out.fill(0.0);
    }
    Zip::from(d_out.rows_mut()).for_each(|mut row| row *= &params.target_std);

    let head = &params.dense[2];
    let mut grads: Vec<Vec<f64>> = vec![Vec::new(); 10];
    grads[8] = d_out.t().dot(&cache.last_input).into_raw_vec_and_offset().0;
    grads[9] = d_out.sum_axis(Axis(0)).to_vec();
    let mut d_a = d_out.dot(&head.weight);

    for i in (0..2).rev() {
        let block = &cache.blocks[i];
        let norm = &params.norms[i];
        if let Some(m) = masks {
            d_a *= &m.0[i];
        }
        // ReLU
        Zip::from(&mut d_a).and(&block.pre_relu).for_each(|g, &y| {
            if y <= 0.0 {
                *g = 0.0;
            }
        });
        let d_y = d_a;
        let d_scale = (&d_y * &block.xhat).sum_axis(Axis(0));
        let d_shift = d_y.sum_axis(Axis(0));
        let mut d_xhat = d_y;
        Zip::from(d_xhat.rows_mut()).for_each(|mut row| row *= &norm.scale);
        let d_z = match bn {
            BnMode::Running => {
                let mut d = d_xhat;
                Zip::from(d.rows_mut()).for_each(|mut row| row *= &block.inv_std);
                d
            }
            BnMode::Batch => {
                let b = d_xhat.nrows() as f64;
                let sum_d = d_xhat.sum_axis(Axis(0));
                let sum_dx = (&d_xhat * &block.xhat).sum_axis(Axis(0));
                let mut d = d_xhat * b;
                Zip::from(d.rows_mut()).and(block.xhat.rows()).for_each(|mut row, xh| {
                    Zip::from(&mut row)
                        .and(&xh)
                        .and(&sum_d)
                        .and(&sum_dx)
                        .and(&block.inv_std)
                        .for_each(|g, &xh, &sd, &sdx, &is| *g = (*g - sd - xh * sdx) * is / b);
                });
                d
            }
        };
        let layer = &params.dense[i];
        grads[4 * i] = d_z.t().dot(&block.input).into_raw_vec_and_offset().0;
        grads[4 * i + 1] = d_z.sum_axis(Axis(0)).to_vec();
        grads[4 * i + 2] = d_scale.to_vec();
        grads[4 * i + 3] = d_shift.to_vec();
        d_a = d_z.dot(&layer.weight);
    }

    let batch_stats = match bn {
        BnMode::Batch => Some([
            (cache.blocks[0].batch_mean.clone(), cache.blocks[0].batch_var.clone()),
            (cache.blocks[1].batch_mean.clone(), cache.blocks[1].batch_var.clone()),
        ]),
        BnMode::Running => None,
    };
    (loss, Gradients(grads), batch_stats)
}

/// Loss only (no gradient), used by finite-difference checks.
pub fn loss(
    params: &MlpParams,
    x: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    bn: BnMode,
    masks: Option<&DropoutMasks>,
) -> f64 {
    rmse(forward(params, x, bn, masks).output.view(), target)
}

fn check_layout(pose: &Pose3dFrame, params: &MlpParams) -> Result<()> {
    if pose.layout != params.layout || pose.joints.len() != params.layout.len() {
        return Err(Error::ShapeMismatch(format!(
            "pose layout {} vs network layout {}",
            pose.layout, params.layout
        )));
    }
    Ok(())
}

/// World CoM predictions for a batch of poses.
pub fn comnet_forward_batch(
    poses: &[Pose3dFrame],
    params: &MlpParams,
    mode: ForwardMode,
) -> Result<Vec<Point3>> {
    if poses.is_empty() {
        return Ok(Vec::new());
    }
    let d = input_dim(params.layout);
    let mut raw = Array2::zeros((poses.len(), d));
    let mut hips = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        check_layout(pose, params)?;
        let (f, hip) = pose_features(pose)?;
        raw.row_mut(i).assign(&Array1::from(f));
        hips.push(hip);
    }
    let x = params.normalize_inputs(raw.view());
    let out = match mode {
        ForwardMode::Eval => forward(params, x.view(), BnMode::Running, None).output,
        ForwardMode::Train { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let masks = DropoutMasks::sample(poses.len(), params.shape.width, params.shape.dropout, &mut rng);
            forward(params, x.view(), BnMode::Batch, Some(&masks)).output
        }
    };
    Ok(hips
        .into_iter()
        .enumerate()
        .map(|(i, hip)| hip + Point3::new(out[(i, 0)], out[(i, 1)], out[(i, 2)]))
        .collect())
}

/// World CoM for one pose: predicted hip-relative offset plus hip centre.
pub fn comnet_forward(pose: &Pose3dFrame, params: &MlpParams, mode: ForwardMode) -> Result<Point3> {
    Ok(comnet_forward_batch(std::slice::from_ref(pose), params, mode)?[0])
}

/// Row-stacked features and hip-relative targets.
pub fn design_matrix(
    dataset: &[(Pose3dFrame, Point3)],
    layout: Layout,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let d = input_dim(layout);
    let mut x = Array2::zeros((dataset.len(), d));
    let mut y = Array2::zeros((dataset.len(), 3));
    for (i, (pose, com)) in dataset.iter().enumerate() {
        if pose.layout != layout {
            return Err(Error::ShapeMismatch(format!(
                "dataset mixes layouts {} and {layout}",
                pose.layout
            )));
        }
        let (f, hip) = pose_features(pose)?;
        x.row_mut(i).assign(&Array1::from(f));
        let off = *com - hip;
        y.slice_mut(s![i, ..]).assign(&Array1::from(vec![off.x, off.y, off.z]));
    }
    Ok((x, y))
}
