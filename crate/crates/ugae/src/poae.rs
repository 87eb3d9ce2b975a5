//! Attribute enhancement at the decoder: a small network predicts a
//! per-point RGB residual from the point's reconstructed color, the
//! colors of its nearest neighbors, and their relative positions; the
//! residual is added to the decoded color and the sum clamped back to
//! valid 8-bit channels.
//!
//! Features live in the decoded YUV domain while residuals are predicted
//! in RGB — both domains are fixed here so no caller can mix them up.
//! Training targets are the recolored attributes the encoder produced,
//! not the original capture, and the loss is the error-weighted MSE so
//! hard (usually high-frequency) points dominate the fit.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::color::rgb_to_yuv;
use crate::learner::{
    wmse_loss, wmse_weights, Activation, AdamW, AdamWConfig, Gradients, LearnerError, Mlp,
    WmseConfig,
};
use crate::spatial::{SpatialIndex, SpatialError};

/// Default neighbor count m for attribute features.
pub const DEFAULT_ATTR_NEIGHBORS: usize = 8;

/// Feature vector length for a given neighbor count.
pub fn attr_feature_len(m: usize) -> usize {
    3 + 6 * m
}

#[derive(Debug, Error)]
pub enum PoaeError {
    #[error("cloud has no attributes")]
    MissingAttributes,
    #[error("training pair elements live on different geometry")]
    GeometryMismatch,
    #[error("model expects features of length {expected}, extractor produces {got}")]
    FeatureLengthMismatch { expected: usize, got: usize },
    #[error("model input length {0} does not match any feature length 3 + 6m")]
    BadModelInput(usize),
    #[error("residual model must output 3 channels, has {0}")]
    BadOutputArity(usize),
    #[error("training requires at least one usable pair")]
    EmptyTrainingSet,
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// Feature extractor bound to one reconstructed cloud.
///
/// Layout per point: the point's own decoded YUV (3 entries), then one
/// block of 6 entries per neighbor slot — the neighbor's decoded YUV
/// followed by its coordinate offset from the query, each axis divided
/// by the window radius (the distance to the farthest retrieved
/// neighbor). Neighbors appear in the spatial total order; slots beyond
/// the available neighbors stay all-zero, which doubles as the absence
/// flag because no valid color maps to YUV (0, 0, 0).
pub struct AttrFeatureContext<'a> {
    index: SpatialIndex<'a>,
    coords: &'a [[u32; 3]],
    yuv: Vec<[f64; 3]>,
    m: usize,
}

impl<'a> AttrFeatureContext<'a> {
    pub fn new(cloud: &'a PointCloud, m: usize) -> Result<Self, PoaeError> {
        assert!(m >= 1, "attribute features require m >= 1");
        let attrs = cloud.attrs().ok_or(PoaeError::MissingAttributes)?;
        let yuv = attrs
            .iter()
            .map(|&rgb| {
                let c = rgb_to_yuv(rgb);
                [c.y, c.u, c.v]
            })
            .collect();
        Ok(AttrFeatureContext {
            index: SpatialIndex::build(cloud)?,
            coords: cloud.coords(),
            yuv,
            m,
        })
    }

    pub fn feature_len(&self) -> usize {
        attr_feature_len(self.m)
    }

    /// Write the feature vector for point `i` into `out`, which must
    /// have length [`Self::feature_len`].
    pub fn extract_into(&self, i: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.feature_len());
        out.fill(0.0);
        out[..3].copy_from_slice(&self.yuv[i]);
        let hood = self.index.knn_where(self.coords[i], self.m, |j| j != i);
        let radius = match hood.sq_dists.last() {
            Some(&sq) if sq > 0 => (sq as f64).sqrt(),
            _ => 1.0,
        };
        for (slot, &j) in hood.indices.iter().enumerate() {
            let base = 3 + 6 * slot;
            out[base..base + 3].copy_from_slice(&self.yuv[j]);
            for axis in 0..3 {
                let d = self.coords[j][axis] as i64 - self.coords[i][axis] as i64;
                out[base + 3 + axis] = d as f64 / radius;
            }
        }
    }

    pub fn extract(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.feature_len()];
        self.extract_into(i, &mut out);
        out
    }
}

/// One-shot feature extraction; builds a throwaway spatial index, so use
/// [`AttrFeatureContext`] directly when extracting for many points.
pub fn extract_attr_features(
    index: usize,
    cloud: &PointCloud,
    m: usize,
) -> Result<Vec<f64>, PoaeError> {
    Ok(AttrFeatureContext::new(cloud, m)?.extract(index))
}

/// Raw RGB residual for one feature vector; no clamping.
pub fn predict_residual(model: &Mlp, feature: &[f64]) -> Result<[f64; 3], PoaeError> {
    if model.output_len() != 3 {
        return Err(PoaeError::BadOutputArity(model.output_len()));
    }
    if feature.len() != model.input_len() {
        return Err(PoaeError::FeatureLengthMismatch {
            expected: model.input_len(),
            got: feature.len(),
        });
    }
    let out = model.forward(feature)?;
    Ok([out[0], out[1], out[2]])
}

/// Residual addition in floating point, then clamp to [0, 255], then
/// round half up.
fn finalize(decoded: [u8; 3], residual: [f64; 3]) -> [u8; 3] {
    [0, 1, 2].map(|c| {
        let v = (decoded[c] as f64 + residual[c]).clamp(0.0, 255.0);
        (v + 0.5).floor().min(255.0) as u8
    })
}

/// Apply the residual model to every point of a reconstructed cloud.
/// Output attributes align with the cloud's point order. The neighbor
/// count is derived from the model's input width.
pub fn enhance_attributes(model: &Mlp, cloud: &PointCloud) -> Result<Vec<[u8; 3]>, PoaeError> {
    if model.output_len() != 3 {
        return Err(PoaeError::BadOutputArity(model.output_len()));
    }
    let width = model.input_len();
    if width < 9 || (width - 3) % 6 != 0 {
        return Err(PoaeError::BadModelInput(width));
    }
    let m = (width - 3) / 6;
    let attrs = cloud.attrs().ok_or(PoaeError::MissingAttributes)?;
    let ctx = AttrFeatureContext::new(cloud, m)?;
    let mut feature = vec![0.0; ctx.feature_len()];
    let mut out = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        ctx.extract_into(i, &mut feature);
        let residual = model.forward(&feature)?;
        out.push(finalize(attrs[i], [residual[0], residual[1], residual[2]]));
    }
    Ok(out)
}

/// One training example: the decoder-side reconstruction (enhanced
/// geometry with decoded attributes) and the encoder-side recoloring of
/// the same geometry, which is what the decoded attributes approximate.
#[derive(Debug, Clone)]
pub struct AttrPair {
    pub reconstructed: PointCloud,
    pub target: PointCloud,
}

#[derive(Debug, Clone)]
pub struct PoaeTrainConfig {
    /// Neighbor count m in the feature vector.
    pub neighbors: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Per-pair cap on training points, subsampled deterministically.
    pub max_samples_per_pair: usize,
    pub wmse: WmseConfig,
    pub seed: u64,
}

impl Default for PoaeTrainConfig {
    fn default() -> Self {
        PoaeTrainConfig {
            neighbors: DEFAULT_ATTR_NEIGHBORS,
            hidden: vec![48, 48],
            epochs: 60,
            learning_rate: 0.003,
            batch_size: 256,
            max_samples_per_pair: 8192,
            wmse: WmseConfig::default(),
            seed: 0,
        }
    }
}

/// Train a residual predictor with the error-weighted MSE; weights are
/// recomputed per batch from the current prediction errors, so the
/// hardest points in each batch get the high weight. Returns the model
/// and the mean training loss per epoch.
pub fn train_poae(
    pairs: &[AttrPair],
    config: &PoaeTrainConfig,
) -> Result<(Mlp, Vec<f64>), PoaeError> {
    if pairs.is_empty() {
        return Err(PoaeError::EmptyTrainingSet);
    }
    config.wmse.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<[f64; 3]> = Vec::new();
    for pair in pairs {
        if pair.reconstructed.coords() != pair.target.coords() {
            return Err(PoaeError::GeometryMismatch);
        }
        let decoded = pair.reconstructed.attrs().ok_or(PoaeError::MissingAttributes)?;
        let wanted = pair.target.attrs().ok_or(PoaeError::MissingAttributes)?;
        let ctx = AttrFeatureContext::new(&pair.reconstructed, config.neighbors)?;
        let mut picks: Vec<usize> = (0..pair.reconstructed.len()).collect();
        picks.shuffle(&mut rng);
        picks.truncate(config.max_samples_per_pair);
        picks.sort_unstable();
        for i in picks {
            features.push(ctx.extract(i));
            targets.push([0, 1, 2].map(|c| wanted[i][c] as f64 - decoded[i][c] as f64));
        }
    }
    if features.is_empty() {
        return Err(PoaeError::EmptyTrainingSet);
    }

    let mut sizes = vec![attr_feature_len(config.neighbors)];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(3);
    let mut model = Mlp::new(&sizes, Activation::Identity, config.seed);
    let mut optimizer = AdamW::new(
        AdamWConfig {
            lr: config.learning_rate,
            ..AdamWConfig::default()
        },
        &model,
    );
    let mut grads = Gradients::zeros_like(&model);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..features.len()).collect();

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut tapes = Vec::with_capacity(batch.len());
            let mut preds: Vec<[f64; 3]> = Vec::with_capacity(batch.len());
            let mut batch_targets: Vec<[f64; 3]> = Vec::with_capacity(batch.len());
            for &i in batch {
                let tape = model.forward_cached(&features[i])?;
                preds.push([tape.output[0], tape.output[1], tape.output[2]]);
                tapes.push(tape);
                batch_targets.push(targets[i]);
            }
            let errors: Vec<f64> = preds
                .iter()
                .zip(&batch_targets)
                .map(|(p, t)| (0..3).map(|c| (p[c] - t[c]).powi(2)).sum())
                .collect();
            let weights = wmse_weights(&errors, &config.wmse);
            let (loss, grad) = wmse_loss(&preds, &batch_targets, &weights)?;
            grads.clear();
            for (tape, g) in tapes.iter().zip(&grad) {
                model.backprop(tape, g, &mut grads)?;
            }
            optimizer.step(&mut model, &grads);
            epoch_loss += loss * batch.len() as f64;
        }
        epoch_losses.push(epoch_loss / features.len() as f64);
    }
    Ok((model, epoch_losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{classify_frequency, classify_loss, overlap_ratio};
    use crate::spatial::{morton_encode_unchecked, sq_dist};
    use crate::synth::{generate, ShapeKind, ShapeSpec, TextureKind};

    fn checkered(count: usize, depth: u8, seed: u64) -> PointCloud {
        generate(&ShapeSpec {
            shape: ShapeKind::Cube,
            count,
            depth,
            texture: TextureKind::Checker,
            period: 8,
            seed,
        })
    }

    /// Neighborhood-mean smoothing: the kind of damage recoloring after
    /// lossy geometry inflicts, concentrated at color boundaries.
    fn blurred_attrs(cloud: &PointCloud, k: usize) -> Vec<[u8; 3]> {
        let attrs = cloud.attrs().unwrap();
        let index = SpatialIndex::build(cloud).unwrap();
        cloud
            .coords()
            .iter()
            .map(|&c| {
                let hood = index.knn(c, k);
                let mut sum = [0.0f64; 3];
                for &j in &hood.indices {
                    for ch in 0..3 {
                        sum[ch] += attrs[j][ch] as f64;
                    }
                }
                [0, 1, 2].map(|ch| (sum[ch] / hood.indices.len() as f64 + 0.5).floor() as u8)
            })
            .collect()
    }

    fn blurred_pair(count: usize, depth: u8, seed: u64) -> AttrPair {
        let target = checkered(count, depth, seed);
        let decoded = blurred_attrs(&target, 6);
        let reconstructed =
            PointCloud::new(target.coords().to_vec(), Some(decoded), depth).unwrap();
        AttrPair {
            reconstructed,
            target,
        }
    }

    fn yuv_mse(a: &[[u8; 3]], b: &[[u8; 3]]) -> f64 {
        let n = a.len() as f64;
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let (x, y) = (rgb_to_yuv(x), rgb_to_yuv(y));
                (x.y - y.y).powi(2) + (x.u - y.u).powi(2) + (x.v - y.v).powi(2)
            })
            .sum::<f64>()
            / n
    }

    #[test]
    fn one_point_cloud_zero_pads_every_neighbor_slot() {
        let cloud =
            PointCloud::new(vec![[5, 5, 5]], Some(vec![[200, 10, 30]]), 4).unwrap();
        let f = extract_attr_features(0, &cloud, DEFAULT_ATTR_NEIGHBORS).unwrap();
        assert_eq!(f.len(), attr_feature_len(DEFAULT_ATTR_NEIGHBORS));
        let yuv = rgb_to_yuv([200, 10, 30]);
        assert_eq!(&f[..3], &[yuv.y, yuv.u, yuv.v]);
        assert!(f[3..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_color_cloud_repeats_that_color_in_every_slot() {
        let base = checkered(400, 5, 1);
        let cloud = PointCloud::new(
            base.coords().to_vec(),
            Some(vec![[77, 150, 9]; base.len()]),
            5,
        )
        .unwrap();
        let yuv = rgb_to_yuv([77, 150, 9]);
        let ctx = AttrFeatureContext::new(&cloud, 4).unwrap();
        for i in [0, cloud.len() / 2, cloud.len() - 1] {
            let f = ctx.extract(i);
            assert_eq!(&f[..3], &[yuv.y, yuv.u, yuv.v]);
            for slot in 0..4 {
                assert_eq!(&f[3 + 6 * slot..6 + 6 * slot], &[yuv.y, yuv.u, yuv.v]);
            }
        }
    }

    #[test]
    fn feature_length_is_3_plus_6m() {
        let cloud = checkered(100, 5, 2);
        for m in [1, 2, 5, 8] {
            let f = extract_attr_features(7, &cloud, m).unwrap();
            assert_eq!(f.len(), 3 + 6 * m);
        }
    }

    #[test]
    fn neighbor_slots_follow_the_spatial_total_order() {
        let cloud = checkered(300, 5, 3);
        let attrs = cloud.attrs().unwrap();
        let coords = cloud.coords();
        let ctx = AttrFeatureContext::new(&cloud, 5).unwrap();
        for i in (0..cloud.len()).step_by(37) {
            // Independent oracle: full sort by (distance, Morton, index).
            let mut order: Vec<usize> = (0..cloud.len()).filter(|&j| j != i).collect();
            order.sort_by_key(|&j| {
                (
                    sq_dist(coords[i], coords[j]),
                    morton_encode_unchecked(coords[j]),
                    j,
                )
            });
            let f = ctx.extract(i);
            let radius = (sq_dist(coords[i], coords[order[4]]) as f64).sqrt();
            for (slot, &j) in order[..5].iter().enumerate() {
                let yuv = rgb_to_yuv(attrs[j]);
                let base = 3 + 6 * slot;
                assert_eq!(&f[base..base + 3], &[yuv.y, yuv.u, yuv.v]);
                for axis in 0..3 {
                    let d = coords[j][axis] as i64 - coords[i][axis] as i64;
                    assert!((f[base + 3 + axis] - d as f64 / radius).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_model_predicts_zero_and_enhances_to_identity() {
        let cloud = checkered(200, 5, 4);
        let mut model = Mlp::new(&[attr_feature_len(4), 8, 3], Activation::Identity, 7);
        for p in model.params_mut() {
            *p = 0.0;
        }
        let f = extract_attr_features(3, &cloud, 4).unwrap();
        assert_eq!(predict_residual(&model, &f).unwrap(), [0.0, 0.0, 0.0]);
        let out = enhance_attributes(&model, &cloud).unwrap();
        assert_eq!(out.as_slice(), cloud.attrs().unwrap());
    }

    #[test]
    fn prediction_is_deterministic() {
        let cloud = checkered(200, 5, 5);
        let model = Mlp::new(&[attr_feature_len(8), 16, 3], Activation::Identity, 8);
        let f = extract_attr_features(11, &cloud, 8).unwrap();
        let a = predict_residual(&model, &f).unwrap();
        for _ in 0..5 {
            assert_eq!(predict_residual(&model, &f).unwrap(), a);
        }
    }

    #[test]
    fn single_linear_layer_is_homogeneous_once_bias_is_zero() {
        let mut model = Mlp::new(&[9, 3], Activation::Identity, 9);
        let weight_count = 9 * 3;
        for (idx, p) in model.params_mut().into_iter().enumerate() {
            if idx >= weight_count {
                *p = 0.0; // biases sit after the row-major weights
            }
        }
        let f: Vec<f64> = (0..9).map(|i| 0.3 * i as f64 - 1.0).collect();
        let doubled: Vec<f64> = f.iter().map(|&x| 2.0 * x).collect();
        let once = predict_residual(&model, &f).unwrap();
        let twice = predict_residual(&model, &doubled).unwrap();
        for c in 0..3 {
            assert!((twice[c] - 2.0 * once[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_positive_residual_clamps_to_channel_max() {
        // Single affine layer with all-zero weights and bias (300, 0, -300):
        // every point gets that residual before clamping.
        let mut model = Mlp::new(&[9, 3], Activation::Identity, 10);
        let weight_count = 9 * 3;
        for (idx, p) in model.params_mut().into_iter().enumerate() {
            *p = match idx.checked_sub(weight_count) {
                Some(0) => 300.0,
                Some(2) => -300.0,
                _ => 0.0,
            };
        }
        let cloud = PointCloud::new(
            vec![[0, 0, 0], [1, 0, 0]],
            Some(vec![[200, 128, 40], [10, 0, 255]]),
            1,
        )
        .unwrap();
        let out = enhance_attributes(&model, &cloud).unwrap();
        assert_eq!(out, vec![[255, 128, 0], [255, 0, 0]]);
    }

    #[test]
    fn rounding_after_clamp_is_half_up() {
        assert_eq!(finalize([10, 10, 10], [0.5, 0.49, -0.5]), [11, 10, 10]);
        assert_eq!(finalize([254, 0, 255], [0.7, -0.2, 5.0]), [255, 0, 255]);
        assert_eq!(finalize([3, 3, 3], [-4.0, 252.49, 252.5]), [0, 255, 255]);
    }

    #[test]
    fn degenerate_training_learns_the_zero_residual() {
        let target = checkered(600, 5, 6);
        let pairs = [AttrPair {
            reconstructed: target.clone(),
            target,
        }];
        let config = PoaeTrainConfig {
            neighbors: 4,
            hidden: vec![16],
            epochs: 150,
            batch_size: 64,
            max_samples_per_pair: 600,
            ..PoaeTrainConfig::default()
        };
        let (model, _) = train_poae(&pairs, &config).unwrap();
        let cloud = &pairs[0].reconstructed;
        let ctx = AttrFeatureContext::new(cloud, 4).unwrap();
        let mean_abs: f64 = (0..cloud.len())
            .map(|i| {
                let r = predict_residual(&model, &ctx.extract(i)).unwrap();
                (r[0].abs() + r[1].abs() + r[2].abs()) / 3.0
            })
            .sum::<f64>()
            / cloud.len() as f64;
        assert!(mean_abs < 1.0, "mean |residual| = {mean_abs}");
    }

    #[test]
    fn training_loss_decreases_on_a_toy_corpus() {
        let pairs = [blurred_pair(800, 5, 7)];
        let config = PoaeTrainConfig {
            neighbors: 4,
            hidden: vec![16],
            epochs: 30,
            max_samples_per_pair: 800,
            ..PoaeTrainConfig::default()
        };
        let (_, losses) = train_poae(&pairs, &config).unwrap();
        assert_eq!(losses.len(), 30);
        assert!(losses.last().unwrap() < &losses[0]);
    }

    #[test]
    fn same_seed_trains_identical_checkpoints() {
        let pairs = [blurred_pair(300, 5, 8)];
        let config = PoaeTrainConfig {
            neighbors: 4,
            hidden: vec![8],
            epochs: 8,
            max_samples_per_pair: 300,
            seed: 3,
            ..PoaeTrainConfig::default()
        };
        let (a, _) = train_poae(&pairs, &config).unwrap();
        let (b, _) = train_poae(&pairs, &config).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn trained_model_improves_held_out_yuv_mse() {
        let train_pairs = [blurred_pair(2000, 6, 20), blurred_pair(2000, 6, 21)];
        let held_out = blurred_pair(2000, 6, 22);
        let config = PoaeTrainConfig {
            epochs: 80,
            max_samples_per_pair: 2000,
            seed: 1,
            ..PoaeTrainConfig::default()
        };
        let (model, _) = train_poae(&train_pairs, &config).unwrap();

        let decoded = held_out.reconstructed.attrs().unwrap();
        let wanted = held_out.target.attrs().unwrap();
        let enhanced = enhance_attributes(&model, &held_out.reconstructed).unwrap();
        let before = yuv_mse(decoded, wanted);
        let after = yuv_mse(&enhanced, wanted);
        assert!(
            after < before,
            "YUV MSE should drop: before {before}, after {after}"
        );
    }

    #[test]
    fn enhancement_does_not_raise_high_loss_high_frequency_overlap() {
        let pair = blurred_pair(2500, 6, 30);
        let config = PoaeTrainConfig {
            epochs: 80,
            max_samples_per_pair: 2500,
            seed: 2,
            ..PoaeTrainConfig::default()
        };
        let (model, _) = train_poae(&[pair.clone()], &config).unwrap();
        let enhanced = enhance_attributes(&model, &pair.reconstructed).unwrap();

        let freq = classify_frequency(&pair.target, 8, 0.5).unwrap();
        let coords = pair.target.coords();
        let wanted = pair.target.attrs().unwrap();
        let pre = classify_loss(
            coords,
            wanted,
            pair.reconstructed.attrs().unwrap(),
            0.5,
        )
        .unwrap();
        let post = classify_loss(coords, wanted, &enhanced, 0.5).unwrap();
        let overlap_pre = overlap_ratio(&pre, &freq).unwrap();
        let overlap_post = overlap_ratio(&post, &freq).unwrap();
        assert!(
            overlap_post <= overlap_pre,
            "overlap rose: {overlap_pre} -> {overlap_post}"
        );
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let cloud = checkered(50, 5, 9).without_attrs();
        assert!(matches!(
            extract_attr_features(0, &cloud, 4),
            Err(PoaeError::MissingAttributes)
        ));

        let with_attrs = checkered(50, 5, 9);
        let model = Mlp::new(&[10, 3], Activation::Identity, 1);
        assert!(matches!(
            enhance_attributes(&model, &with_attrs),
            Err(PoaeError::BadModelInput(10))
        ));
        let two_out = Mlp::new(&[9, 2], Activation::Identity, 1);
        assert!(matches!(
            enhance_attributes(&two_out, &with_attrs),
            Err(PoaeError::BadOutputArity(2))
        ));

        let other_geometry = checkered(60, 5, 10);
        let pair = AttrPair {
            reconstructed: with_attrs,
            target: other_geometry,
        };
        assert!(matches!(
            train_poae(&[pair], &PoaeTrainConfig::default()),
            Err(PoaeError::GeometryMismatch)
        ));
        assert!(matches!(
            train_poae(&[], &PoaeTrainConfig::default()),
            Err(PoaeError::EmptyTrainingSet)
        ));
    }
}
