//! Geometry enhancement after lossy decoding: every lossy voxel expands
//! into its exact quantization-preimage cell, a small network scores each
//! candidate's occupancy probability from local occupancy context, and
//! the top K candidates become the enhanced geometry.
//!
//! Every stage is order-fixed (Morton), so the encoder and decoder reach
//! bit-identical enhanced geometry from the same lossy cloud, model, and
//! K — the property the attribute path depends on.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cloud::{grid_max, PointCloud};
use crate::codec::round_half_down;
use crate::learner::{bce_loss, Activation, AdamW, AdamWConfig, Gradients, LearnerError, Mlp};
use crate::spatial::morton_encode_unchecked;

/// Occupancy-window scales used for candidate features.
pub const FEATURE_SCALES: [u32; 2] = [1, 2];

/// Feature vector length: one 3x3x3 occupancy window per scale plus the
/// candidate's normalized position inside its preimage cell.
pub const FEATURE_LEN: usize = 27 * FEATURE_SCALES.len() + 3;

#[derive(Debug, Error)]
pub enum PogeError {
    #[error("quantization scale {0} must lie in (0, 1]")]
    BadScale(f64),
    #[error("lossy cloud must be non-empty and Morton-sorted without duplicates")]
    BadLossyCloud,
    #[error("model expects features of length {expected}, extractor produces {got}")]
    FeatureLengthMismatch { expected: usize, got: usize },
    #[error("training requires at least one usable (lossy, original) pair")]
    EmptyTrainingSet,
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Candidate voxels in the original grid, Morton-sorted and duplicate-free,
/// each tagged with the index of the lossy voxel whose preimage produced it.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    coords: Vec<[u32; 3]>,
    parents: Vec<u32>,
}

impl CandidateSet {
    pub fn coords(&self) -> &[[u32; 3]] {
        &self.coords
    }

    pub fn parents(&self) -> &[u32] {
        &self.parents
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Geometry selected by [`select_topk`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnhancedGeometry {
    /// Morton-sorted voxels in the original grid.
    pub coords: Vec<[u32; 3]>,
    /// Number of candidates actually selected (min(K, candidate count)).
    pub k_selected: usize,
}

fn validate_lossy(lossy: &PointCloud) -> Result<(), PogeError> {
    if lossy.is_empty() {
        return Err(PogeError::BadLossyCloud);
    }
    let mut prev = None;
    for &c in lossy.coords() {
        let key = morton_encode_unchecked(c);
        if prev.is_some_and(|p| p >= key) {
            return Err(PogeError::BadLossyCloud);
        }
        prev = Some(key);
    }
    Ok(())
}

/// Inclusive range of original-grid coordinates that quantize to `v` on
/// one axis, clipped to the grid; `None` when the preimage misses the
/// grid entirely (possible only for corrupt lossy input).
///
/// The bounds come from a closed-form guess refined by the forward map
/// itself, so they agree exactly with geometry quantization.
fn preimage_range(v: u32, pqs: f64, max: u32) -> Option<(u32, u32)> {
    let maps = |u: i64| round_half_down(u as f64 * pqs) == v as f64;
    let lo_guess = ((((v as f64 - 0.5) / pqs).floor() as i64) - 2).max(0);
    let hi_guess = ((((v as f64 + 0.5) / pqs).floor() as i64) + 2).min(max as i64);
    let lo = (lo_guess..=hi_guess).find(|&u| maps(u))?;
    let mut hi = lo;
    while hi + 1 <= hi_guess && maps(hi + 1) {
        hi += 1;
    }
    Some((lo as u32, hi as u32))
}

/// Expand every lossy voxel into its quantization-preimage cell in the
/// depth-`original_depth` grid.
pub fn generate_candidates(
    lossy: &PointCloud,
    pqs: f64,
    original_depth: u8,
) -> Result<CandidateSet, PogeError> {
    if !(pqs > 0.0 && pqs <= 1.0) || !pqs.is_finite() {
        return Err(PogeError::BadScale(pqs));
    }
    validate_lossy(lossy)?;
    let max = grid_max(original_depth);

    let mut tagged: Vec<(u64, [u32; 3], u32)> = Vec::new();
    for (parent, &v) in lossy.coords().iter().enumerate() {
        let ranges = [
            preimage_range(v[0], pqs, max),
            preimage_range(v[1], pqs, max),
            preimage_range(v[2], pqs, max),
        ];
        let (Some(rx), Some(ry), Some(rz)) = (ranges[0], ranges[1], ranges[2]) else {
            continue;
        };
        for z in rz.0..=rz.1 {
            for y in ry.0..=ry.1 {
                for x in rx.0..=rx.1 {
                    let c = [x, y, z];
                    tagged.push((morton_encode_unchecked(c), c, parent as u32));
                }
            }
        }
    }
    // Preimage cells of distinct voxels are disjoint, so sorting by key
    // both orders and (vacuously) deduplicates.
    tagged.sort_unstable_by_key(|&(key, _, _)| key);
    let mut coords = Vec::with_capacity(tagged.len());
    let mut parents = Vec::with_capacity(tagged.len());
    for (_, c, p) in tagged {
        coords.push(c);
        parents.push(p);
    }
    Ok(CandidateSet { coords, parents })
}

/// Feature extractor bound to one lossy cloud: occupancy windows around
/// each candidate's parent at every scale, plus the candidate's position
/// inside its preimage cell normalized to `[0, 1]` per axis (0.5 when the
/// cell is a single voxel wide on an axis).
///
/// Layout per candidate: for each scale in [`FEATURE_SCALES`] order, 27
/// occupancy indicators with offset index (dz*3 + dy)*3 + dx (each delta
/// in {-scale, 0, +scale} mapped to {0, 1, 2}); then the three normalized
/// offsets in x, y, z order.
pub struct GeoFeatureContext {
    keys: Vec<u64>,
    lossy_coords: Vec<[u32; 3]>,
    lossy_max: u32,
    cell_ranges: Vec<[(u32, u32); 3]>,
}

impl GeoFeatureContext {
    pub fn new(
        lossy: &PointCloud,
        pqs: f64,
        original_depth: u8,
    ) -> Result<Self, PogeError> {
        if !(pqs > 0.0 && pqs <= 1.0) || !pqs.is_finite() {
            return Err(PogeError::BadScale(pqs));
        }
        validate_lossy(lossy)?;
        let max = grid_max(original_depth);
        let keys: Vec<u64> = lossy
            .coords()
            .iter()
            .map(|&c| morton_encode_unchecked(c))
            .collect();
        let cell_ranges: Vec<[(u32, u32); 3]> = lossy
            .coords()
            .iter()
            .map(|&v| {
                [0, 1, 2].map(|axis| {
                    preimage_range(v[axis], pqs, max).unwrap_or((0, 0))
                })
            })
            .collect();
        Ok(GeoFeatureContext {
            keys,
            lossy_coords: lossy.coords().to_vec(),
            lossy_max: grid_max(lossy.depth()),
            cell_ranges,
        })
    }

    pub fn feature_len(&self) -> usize {
        FEATURE_LEN
    }

    fn occupied(&self, c: [i64; 3]) -> bool {
        if c.iter().any(|&v| v < 0 || v > self.lossy_max as i64) {
            return false;
        }
        let key = morton_encode_unchecked([c[0] as u32, c[1] as u32, c[2] as u32]);
        self.keys.binary_search(&key).is_ok()
    }

    /// Write the feature vector for `candidate` (produced by parent index
    /// `parent`) into `out`, which must have length [`FEATURE_LEN`].
    pub fn extract_into(&self, candidate: [u32; 3], parent: u32, out: &mut [f64]) {
        assert_eq!(out.len(), FEATURE_LEN);
        let p = self.lossy_coords[parent as usize];
        let mut w = 0;
        for &scale in &FEATURE_SCALES {
            let s = scale as i64;
            for dz in [-s, 0, s] {
                for dy in [-s, 0, s] {
                    for dx in [-s, 0, s] {
                        let c = [
                            p[0] as i64 + dx,
                            p[1] as i64 + dy,
                            p[2] as i64 + dz,
                        ];
                        out[w] = if self.occupied(c) { 1.0 } else { 0.0 };
                        w += 1;
                    }
                }
            }
        }
        let ranges = self.cell_ranges[parent as usize];
        for axis in 0..3 {
            let (lo, hi) = ranges[axis];
            out[w] = if hi > lo {
                (candidate[axis] - lo) as f64 / (hi - lo) as f64
            } else {
                0.5
            };
            w += 1;
        }
    }

    pub fn extract(&self, candidate: [u32; 3], parent: u32) -> Vec<f64> {
        let mut out = vec![0.0; FEATURE_LEN];
        self.extract_into(candidate, parent, &mut out);
        out
    }
}

/// Anything that can score candidate occupancy. The network implementation
/// ignores the coordinate; test oracles may ignore the feature.
pub trait OccupancyPredictor {
    /// Feature length the predictor requires, if it consumes features.
    fn expected_feature_len(&self) -> Option<usize> {
        None
    }

    /// Occupancy probability in [0, 1].
    fn predict(&self, candidate: [u32; 3], feature: &[f64]) -> f64;
}

impl OccupancyPredictor for Mlp {
    fn expected_feature_len(&self) -> Option<usize> {
        Some(self.input_len())
    }

    fn predict(&self, _candidate: [u32; 3], feature: &[f64]) -> f64 {
        self.forward(feature).expect("feature length pre-checked")[0]
    }
}

/// Keep the `k` highest-probability candidates; equal probabilities are
/// admitted in ascending Morton order. Output stays Morton-sorted.
pub fn select_topk(candidates: &CandidateSet, probs: &[f64], k: usize) -> EnhancedGeometry {
    assert_eq!(candidates.len(), probs.len(), "one probability per candidate");
    assert!(k >= 1, "selection requires k >= 1");
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // Candidates are Morton-sorted, so index order is Morton order.
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let take = k.min(candidates.len());
    let mut chosen: Vec<usize> = order[..take].to_vec();
    chosen.sort_unstable();
    EnhancedGeometry {
        coords: chosen.iter().map(|&i| candidates.coords[i]).collect(),
        k_selected: take,
    }
}

/// Full enhancement: expand, score, select. Deterministic for fixed
/// inputs; the decoder calls this with the same model, lossy cloud, and
/// K as the encoder and reconstructs identical geometry.
pub fn enhance_geometry(
    predictor: &dyn OccupancyPredictor,
    lossy: &PointCloud,
    pqs: f64,
    original_depth: u8,
    k: usize,
) -> Result<EnhancedGeometry, PogeError> {
    let candidates = generate_candidates(lossy, pqs, original_depth)?;
    let ctx = GeoFeatureContext::new(lossy, pqs, original_depth)?;
    if let Some(expected) = predictor.expected_feature_len() {
        if expected != ctx.feature_len() {
            return Err(PogeError::FeatureLengthMismatch {
                expected,
                got: ctx.feature_len(),
            });
        }
    }
    let mut feature = vec![0.0; FEATURE_LEN];
    let mut probs = Vec::with_capacity(candidates.len());
    for (i, &c) in candidates.coords.iter().enumerate() {
        ctx.extract_into(c, candidates.parents[i], &mut feature);
        probs.push(predictor.predict(c, &feature));
    }
    Ok(select_topk(&candidates, &probs, k))
}

/// One training example: a cloud and its lossy geometry at some scale.
#[derive(Debug, Clone)]
pub struct GeometryPair {
    pub original: PointCloud,
    pub lossy: PointCloud,
    pub pqs: f64,
}

#[derive(Debug, Clone)]
pub struct PogeTrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Per-pair cap on training candidates, sampled with balanced labels.
    pub max_samples_per_pair: usize,
    pub seed: u64,
}

impl Default for PogeTrainConfig {
    fn default() -> Self {
        PogeTrainConfig {
            hidden: vec![32, 32],
            epochs: 50,
            learning_rate: 0.006,
            batch_size: 256,
            max_samples_per_pair: 8192,
            seed: 0,
        }
    }
}

/// Train an occupancy scorer on (lossy, original) pairs with binary
/// cross-entropy against ground-truth candidate membership. Returns the
/// model and the mean training loss per epoch.
pub fn train_poge(
    pairs: &[GeometryPair],
    config: &PogeTrainConfig,
) -> Result<(Mlp, Vec<f64>), PogeError> {
    if pairs.is_empty() {
        return Err(PogeError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Assemble a balanced, capped sample set per pair.
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for pair in pairs {
        let candidates = generate_candidates(&pair.lossy, pair.pqs, pair.original.depth())?;
        if candidates.is_empty() {
            continue;
        }
        let ctx = GeoFeatureContext::new(&pair.lossy, pair.pqs, pair.original.depth())?;
        let mut truth: Vec<u64> = pair
            .original
            .coords()
            .iter()
            .map(|&c| morton_encode_unchecked(c))
            .collect();
        truth.sort_unstable();

        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (i, &c) in candidates.coords().iter().enumerate() {
            if truth.binary_search(&morton_encode_unchecked(c)).is_ok() {
                positives.push(i);
            } else {
                negatives.push(i);
            }
        }
        positives.shuffle(&mut rng);
        negatives.shuffle(&mut rng);
        // Balanced classes, capped per pair; a pair with only one class
        // present (e.g. unit scale, where everything is true) still
        // contributes what it has.
        let half = config.max_samples_per_pair / 2;
        let (n_pos, n_neg) = if negatives.is_empty() {
            (positives.len().min(config.max_samples_per_pair), 0)
        } else if positives.is_empty() {
            (0, negatives.len().min(config.max_samples_per_pair))
        } else {
            let n = positives.len().min(negatives.len()).min(half);
            (n, n)
        };
        for (&i, label) in positives[..n_pos]
            .iter()
            .map(|i| (i, 1.0))
            .chain(negatives[..n_neg].iter().map(|i| (i, 0.0)))
        {
            features.push(ctx.extract(candidates.coords()[i], candidates.parents()[i]));
            labels.push(label);
        }
    }
    if features.is_empty() {
        return Err(PogeError::EmptyTrainingSet);
    }

    let mut sizes = vec![FEATURE_LEN];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(1);
    let mut model = Mlp::new(&sizes, Activation::Logistic, config.seed);
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
            let mut probs = Vec::with_capacity(batch.len());
            let mut batch_labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let tape = model.forward_cached(&features[i])?;
                probs.push(tape.output[0]);
                tapes.push(tape);
                batch_labels.push(labels[i]);
            }
            let (loss, grad) = bce_loss(&probs, &batch_labels)?;
            grads.clear();
            for (tape, g) in tapes.iter().zip(&grad) {
                model.backprop(tape, &[*g], &mut grads)?;
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
    use crate::codec::{quantize_geometry, dequantize_geometry, RateLevel};
    use crate::metrics::{d1_psnr, Psnr};
    use crate::spatial::MortonKey;
    use crate::synth::{generate, ShapeKind, ShapeSpec, TextureKind};

    /// Scores 1 for members of a fixed coordinate set, 0 otherwise.
    struct MembershipOracle {
        keys: Vec<u64>,
    }

    impl MembershipOracle {
        fn new(cloud: &PointCloud) -> Self {
            let mut keys: Vec<u64> = cloud
                .coords()
                .iter()
                .map(|&c| morton_encode_unchecked(c))
                .collect();
            keys.sort_unstable();
            MembershipOracle { keys }
        }
    }

    impl OccupancyPredictor for MembershipOracle {
        fn predict(&self, candidate: [u32; 3], _feature: &[f64]) -> f64 {
            if self
                .keys
                .binary_search(&morton_encode_unchecked(candidate))
                .is_ok()
            {
                1.0
            } else {
                0.0
            }
        }
    }

    fn sphere(count: usize, depth: u8, seed: u64) -> PointCloud {
        generate(&ShapeSpec {
            shape: ShapeKind::Sphere,
            count,
            depth,
            texture: TextureKind::Gradient,
            period: 4,
            seed,
        })
    }

    #[test]
    fn unit_scale_candidates_are_the_lossy_voxels() {
        let cloud = sphere(500, 6, 1).without_attrs();
        let lossy = quantize_geometry(&cloud, 1.0).unwrap();
        let cand = generate_candidates(&lossy, 1.0, 6).unwrap();
        assert_eq!(cand.coords(), lossy.coords());
        let parents: Vec<u32> = (0..lossy.len() as u32).collect();
        assert_eq!(cand.parents(), parents.as_slice());
    }

    #[test]
    fn half_scale_preimage_is_the_expected_block() {
        let lossy = PointCloud::new(vec![[1, 1, 1]], None, 1).unwrap();
        let cand = generate_candidates(&lossy, 0.5, 2).unwrap();
        let mut want = Vec::new();
        for z in 2..=3u32 {
            for y in 2..=3u32 {
                for x in 2..=3u32 {
                    want.push([x, y, z]);
                }
            }
        }
        want.sort_by_key(|&c| MortonKey(morton_encode_unchecked(c)));
        assert_eq!(cand.coords(), want.as_slice());
        assert_eq!(cand.len(), 8);
    }

    #[test]
    fn candidates_match_full_grid_scan() {
        // Independent oracle: apply the forward quantizer to every voxel
        // of the grid and keep those mapping onto an occupied lossy voxel.
        let depth = 5;
        let max = grid_max(depth);
        for level in RateLevel::ALL {
            let pqs = level.pqs();
            let cloud = sphere(400, depth, 2).without_attrs();
            let lossy = quantize_geometry(&cloud, pqs).unwrap();
            let occupied: std::collections::HashSet<[u32; 3]> =
                lossy.coords().iter().copied().collect();
            let mut want = Vec::new();
            for x in 0..=max {
                for y in 0..=max {
                    for z in 0..=max {
                        let v = [
                            round_half_down(x as f64 * pqs) as u32,
                            round_half_down(y as f64 * pqs) as u32,
                            round_half_down(z as f64 * pqs) as u32,
                        ];
                        if occupied.contains(&v) {
                            want.push([x, y, z]);
                        }
                    }
                }
            }
            want.sort_by_key(|&c| MortonKey(morton_encode_unchecked(c)));

            let cand = generate_candidates(&lossy, pqs, depth).unwrap();
            assert_eq!(cand.coords(), want.as_slice(), "{level}");
            // Parent tags point back at the producing voxel.
            for (i, &c) in cand.coords().iter().enumerate() {
                let v = [
                    round_half_down(c[0] as f64 * pqs) as u32,
                    round_half_down(c[1] as f64 * pqs) as u32,
                    round_half_down(c[2] as f64 * pqs) as u32,
                ];
                assert_eq!(lossy.coords()[cand.parents()[i] as usize], v);
            }
        }
    }

    #[test]
    fn original_points_are_always_candidates() {
        for seed in 0..3 {
            let cloud = sphere(800, 6, seed).without_attrs();
            for pqs in [0.125, 0.25, 0.5, 0.75, 0.875] {
                let lossy = quantize_geometry(&cloud, pqs).unwrap();
                let cand = generate_candidates(&lossy, pqs, 6).unwrap();
                let set: std::collections::HashSet<[u32; 3]> =
                    cand.coords().iter().copied().collect();
                for &c in cloud.coords() {
                    assert!(set.contains(&c), "pqs {pqs}: {c:?} missing");
                }
            }
        }
    }

    #[test]
    fn isolated_parent_lights_only_the_window_centers() {
        let lossy = PointCloud::new(vec![[8, 8, 8]], None, 5).unwrap();
        let ctx = GeoFeatureContext::new(&lossy, 0.5, 6).unwrap();
        let cand = generate_candidates(&lossy, 0.5, 6).unwrap();
        let f = ctx.extract(cand.coords()[0], 0);
        assert_eq!(f.len(), FEATURE_LEN);
        for scale_idx in 0..2 {
            let window = &f[scale_idx * 27..(scale_idx + 1) * 27];
            assert_eq!(window[13], 1.0, "center of scale window {scale_idx}");
            let lit: usize = window.iter().map(|&x| x as usize).sum();
            assert_eq!(lit, 1, "scale window {scale_idx}");
        }
        for &offset in &f[54..] {
            assert!((0.0..=1.0).contains(&offset));
        }
    }

    #[test]
    fn saturated_neighborhood_lights_all_indicators() {
        let mut coords = Vec::new();
        for x in 6..=10u32 {
            for y in 6..=10u32 {
                for z in 6..=10u32 {
                    coords.push([x, y, z]);
                }
            }
        }
        let lossy = crate::cloud::merge_voxels(&coords, None, 5);
        let ctx = GeoFeatureContext::new(&lossy, 0.5, 6).unwrap();
        let parent = lossy
            .coords()
            .iter()
            .position(|&c| c == [8, 8, 8])
            .unwrap() as u32;
        let f = ctx.extract([16, 16, 16], parent);
        assert!(f[..54].iter().all(|&x| x == 1.0));
    }

    #[test]
    fn topk_breaks_probability_ties_by_morton_order() {
        let cand = CandidateSet {
            coords: vec![[0, 0, 0], [1, 0, 0], [1, 1, 1]],
            parents: vec![0, 0, 1],
        };
        let picked = select_topk(&cand, &[0.9, 0.5, 0.9], 2);
        assert_eq!(picked.coords, vec![[0, 0, 0], [1, 1, 1]]);
        assert_eq!(picked.k_selected, 2);
    }

    #[test]
    fn topk_matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0604);
        let cloud = sphere(300, 5, 3).without_attrs();
        let lossy = quantize_geometry(&cloud, 0.5).unwrap();
        let cand = generate_candidates(&lossy, 0.5, 5).unwrap();
        for _ in 0..20 {
            // Coarse probabilities force plenty of ties.
            let probs: Vec<f64> = (0..cand.len())
                .map(|_| rng.gen_range(0..=4) as f64 / 4.0)
                .collect();
            let k = rng.gen_range(1..=cand.len() + 10);
            let got = select_topk(&cand, &probs, k);

            let mut order: Vec<usize> = (0..cand.len()).collect();
            order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
            let mut want: Vec<usize> = order[..k.min(cand.len())].to_vec();
            want.sort_unstable();
            let want: Vec<[u32; 3]> = want.iter().map(|&i| cand.coords()[i]).collect();
            assert_eq!(got.coords, want);
        }
    }

    #[test]
    fn oracle_model_recovers_the_original_cloud() {
        let cloud = sphere(600, 6, 4).without_attrs();
        let lossy = quantize_geometry(&cloud, 0.5).unwrap();
        let oracle = MembershipOracle::new(&cloud);
        let enhanced = enhance_geometry(&oracle, &lossy, 0.5, 6, cloud.len()).unwrap();
        assert_eq!(enhanced.coords, cloud.morton_sorted().coords());
    }

    #[test]
    fn unit_scale_any_model_returns_the_lossy_geometry() {
        let cloud = sphere(400, 6, 5).without_attrs();
        let lossy = quantize_geometry(&cloud, 1.0).unwrap();
        let model = Mlp::new(&[FEATURE_LEN, 4, 1], Activation::Logistic, 9);
        let enhanced = enhance_geometry(&model, &lossy, 1.0, 6, cloud.len()).unwrap();
        assert_eq!(enhanced.coords, lossy.coords());
    }

    #[test]
    fn enhancement_is_deterministic_across_runs() {
        let cloud = sphere(500, 6, 6).without_attrs();
        let lossy = quantize_geometry(&cloud, 0.25).unwrap();
        let model = Mlp::new(&[FEATURE_LEN, 8, 1], Activation::Logistic, 11);
        let runs: Vec<EnhancedGeometry> = (0..3)
            .map(|_| enhance_geometry(&model, &lossy, 0.25, 6, cloud.len()).unwrap())
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[1], runs[2]);
        // Selection is a subset of the candidate set with exactly K points.
        let cand: std::collections::HashSet<[u32; 3]> =
            generate_candidates(&lossy, 0.25, 6)
                .unwrap()
                .coords()
                .iter()
                .copied()
                .collect();
        assert_eq!(runs[0].coords.len(), cloud.len().min(cand.len()));
        assert!(runs[0].coords.iter().all(|c| cand.contains(c)));
    }

    #[test]
    fn feature_dimension_mismatch_is_reported() {
        let cloud = sphere(100, 5, 7).without_attrs();
        let lossy = quantize_geometry(&cloud, 0.5).unwrap();
        let model = Mlp::new(&[10, 4, 1], Activation::Logistic, 1);
        assert!(matches!(
            enhance_geometry(&model, &lossy, 0.5, 5, 10),
            Err(PogeError::FeatureLengthMismatch { expected: 10, .. })
        ));
    }

    #[test]
    fn all_positive_pair_trains_to_low_loss() {
        // pqs = 1: every candidate is a true point, learnable by bias.
        let cloud = sphere(300, 5, 8).without_attrs();
        let lossy = quantize_geometry(&cloud, 1.0).unwrap();
        let pairs = [GeometryPair {
            original: cloud,
            lossy,
            pqs: 1.0,
        }];
        let config = PogeTrainConfig {
            hidden: vec![8],
            epochs: 200,
            max_samples_per_pair: 512,
            ..PogeTrainConfig::default()
        };
        let (_, losses) = train_poge(&pairs, &config).unwrap();
        assert_eq!(losses.len(), 200);
        let last = *losses.last().unwrap();
        assert!(last < 0.1, "final loss {last}");
        assert!(last < losses[0]);
    }

    #[test]
    fn training_loss_decreases_on_a_small_corpus() {
        let pairs: Vec<GeometryPair> = (0..2)
            .map(|seed| {
                let original = sphere(500, 6, 20 + seed).without_attrs();
                let lossy = quantize_geometry(&original, 0.5).unwrap();
                GeometryPair {
                    original,
                    lossy,
                    pqs: 0.5,
                }
            })
            .collect();
        let config = PogeTrainConfig {
            hidden: vec![16],
            epochs: 30,
            max_samples_per_pair: 2048,
            ..PogeTrainConfig::default()
        };
        let (_, losses) = train_poge(&pairs, &config).unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
    }

    #[test]
    fn same_seed_trains_identical_checkpoints() {
        let original = sphere(300, 5, 30).without_attrs();
        let lossy = quantize_geometry(&original, 0.5).unwrap();
        let pairs = [GeometryPair {
            original,
            lossy,
            pqs: 0.5,
        }];
        let config = PogeTrainConfig {
            hidden: vec![8],
            epochs: 10,
            max_samples_per_pair: 512,
            seed: 77,
            ..PogeTrainConfig::default()
        };
        let (a, _) = train_poge(&pairs, &config).unwrap();
        let (b, _) = train_poge(&pairs, &config).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn trained_enhancement_does_not_degrade_d1() {
        // Quality-gain property on a toy setup: enhanced geometry must be
        // at least as close to the original as the dequantized baseline.
        let original = sphere(3000, 6, 40).without_attrs();
        let pqs = 0.5;
        let lossy = quantize_geometry(&original, pqs).unwrap();
        let pairs = [GeometryPair {
            original: original.clone(),
            lossy: lossy.clone(),
            pqs,
        }];
        let config = PogeTrainConfig {
            epochs: 150,
            seed: 5,
            ..PogeTrainConfig::default()
        };
        let (model, _) = train_poge(&pairs, &config).unwrap();
        let enhanced = enhance_geometry(&model, &lossy, pqs, 6, original.len()).unwrap();
        let enhanced_cloud = PointCloud::new(enhanced.coords, None, 6).unwrap();
        let baseline = dequantize_geometry(&lossy, pqs, 6).unwrap();

        let peak = grid_max(6);
        let d1_enhanced = d1_psnr(&original, &enhanced_cloud, peak).unwrap();
        let d1_baseline = d1_psnr(&original, &baseline, peak).unwrap();
        let db = |p: Psnr| p.db_or(f64::INFINITY);
        assert!(
            db(d1_enhanced) >= db(d1_baseline),
            "enhanced {d1_enhanced:?} vs baseline {d1_baseline:?}"
        );
    }

    #[test]
    fn corrupt_lossy_input_is_rejected() {
        let unsorted = PointCloud::new(vec![[1, 1, 1], [0, 0, 0]], None, 2).unwrap();
        assert!(matches!(
            generate_candidates(&unsorted, 0.5, 3),
            Err(PogeError::BadLossyCloud)
        ));
        let sorted = PointCloud::new(vec![[0, 0, 0]], None, 2).unwrap();
        assert!(matches!(
            generate_candidates(&sorted, 0.0, 3),
            Err(PogeError::BadScale(_))
        ));
        assert!(train_poge(&[], &PogeTrainConfig::default()).is_err());
    }
}
