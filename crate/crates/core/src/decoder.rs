//! Probabilistic error decoder and leave-one-subject-out evaluation.
//!
//! A two-class linear softmax model over binned epoch features, trained with
//! mini-batch gradient descent on mean cross-entropy plus an L2 penalty on
//! the weights. Features are normalized with statistics computed on the
//! training set only. Once trained, a model is immutable.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::signal::{generate_epoch, Label, Preprocessor, SubjectProfile};
use crate::{Error, Result};

/// Labeled feature set for one subject.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    /// n × d feature matrix.
    pub features: Array2<f64>,
    /// Binary labels; `true` marks an error trial.
    pub labels: Vec<bool>,
    pub subject_id: u32,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn check_trainable(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Training("empty training set".into()));
        }
        let pos = self.labels.iter().filter(|&&l| l).count();
        if pos == 0 || pos == self.len() {
            return Err(Error::Training(format!(
                "training set for subject {} contains a single class",
                self.subject_id
            )));
        }
        Ok(())
    }

    /// Stacks several sets into one (labels concatenated in order).
    pub fn pooled(sets: &[&LabeledSet]) -> Result<LabeledSet> {
        let d = sets
            .first()
            .ok_or_else(|| Error::Training("no sets to pool".into()))?
            .features
            .ncols();
        let total: usize = sets.iter().map(|s| s.len()).sum();
        let mut features = Array2::zeros((total, d));
        let mut labels = Vec::with_capacity(total);
        let mut row = 0;
        for s in sets {
            for (r, &l) in s.features.rows().into_iter().zip(&s.labels) {
                features.row_mut(row).assign(&r);
                labels.push(l);
                row += 1;
            }
        }
        Ok(LabeledSet {
            features,
            labels,
            subject_id: 0,
        })
    }
}

/// Decoder training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderHyper {
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    /// Shuffling seed for mini-batch order.
    pub seed: u64,
}

impl Default for DecoderHyper {
    fn default() -> Self {
        DecoderHyper {
            l2: 1e-4,
            epochs: 40,
            lr: 0.5,
            batch: 64,
            seed: 17,
        }
    }
}

/// Trained two-class softmax model.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    /// 2 × d logit weights; row 0 scores non-error, row 1 scores error.
    pub weights: Array2<f64>,
    /// Per-class bias.
    pub bias: [f64; 2],
    pub feature_mean: Array1<f64>,
    pub feature_std: Array1<f64>,
    pub meta: DecoderMeta,
}

/// Provenance and training record carried with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderMeta {
    pub training_subjects: Vec<u32>,
    pub hyper: DecoderHyper,
    pub final_loss: f64,
    pub feature_dim: usize,
}

impl DecoderModel {
    pub fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn normalize(&self, features: &[f64]) -> Array1<f64> {
        let mut z = Array1::zeros(features.len());
        for (i, &f) in features.iter().enumerate() {
            z[i] = (f - self.feature_mean[i]) / self.feature_std[i];
        }
        z
    }

    /// P(error) for one feature vector.
    pub fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_dim() {
            return Err(Error::contract(format!(
                "feature dimension {} does not match model dimension {}",
                features.len(),
                self.feature_dim()
            )));
        }
        let z = self.normalize(features);
        let logit_non = self.weights.row(0).dot(&z) + self.bias[0];
        let logit_err = self.weights.row(1).dot(&z) + self.bias[1];
        // Two-class softmax reduces to a logistic on the logit difference.
        let d = logit_err - logit_non;
        Ok(1.0 / (1.0 + (-d).exp()))
    }

    /// Fraction of correctly classified rows at threshold 0.5.
    pub fn accuracy(&self, set: &LabeledSet) -> Result<f64> {
        if set.is_empty() {
            return Err(Error::contract("accuracy over an empty set"));
        }
        let mut hits = 0usize;
        for (row, &label) in set.features.rows().into_iter().zip(&set.labels) {
            let p = self.predict_proba(row.as_slice().unwrap())?;
            if (p > 0.5) == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / set.len() as f64)
    }
}

/// Mean cross-entropy + l2·‖w‖² and its gradient at the given parameters.
///
/// `features` must already be normalized. Returns (loss, d/dweights, d/dbias).
pub fn loss_and_gradient(
    weights: &Array2<f64>,
    bias: &[f64; 2],
    features: &Array2<f64>,
    labels: &[bool],
    l2: f64,
) -> (f64, Array2<f64>, [f64; 2]) {
    let n = labels.len();
    let logits = features.dot(&weights.t()); // n × 2
    let mut loss = 0.0;
    let mut dlogits = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        let z0 = logits[[i, 0]] + bias[0];
        let z1 = logits[[i, 1]] + bias[1];
        let m = z0.max(z1);
        let e0 = (z0 - m).exp();
        let e1 = (z1 - m).exp();
        let sum = e0 + e1;
        let p1 = e1 / sum;
        let y = labels[i];
        loss -= if y { p1.max(1e-300).ln() } else { (1.0 - p1).max(1e-300).ln() };
        let t1 = if y { 1.0 } else { 0.0 };
        dlogits[[i, 0]] = ((1.0 - p1) - (1.0 - t1)) / n as f64;
        dlogits[[i, 1]] = (p1 - t1) / n as f64;
    }
    loss /= n as f64;
    loss += l2 * weights.iter().map(|w| w * w).sum::<f64>();
    let mut dw = dlogits.t().dot(features);
    dw.scaled_add(2.0 * l2, weights);
    let db_arr = dlogits.sum_axis(Axis(0));
    (loss, dw, [db_arr[0], db_arr[1]])
}

/// Trains a decoder on one labeled set.
///
/// Both classes must be present. Deterministic for a fixed
/// [`DecoderHyper::seed`].
pub fn train_decoder(train: &LabeledSet, hyper: &DecoderHyper) -> Result<DecoderModel> {
    train.check_trainable()?;
    let n = train.len();
    let d = train.features.ncols();

    // Normalization statistics from the training data only.
    let mean = train.features.mean_axis(Axis(0)).unwrap();
    let mut std = Array1::<f64>::zeros(d);
    for j in 0..d {
        let col = train.features.column(j);
        let var = col.iter().map(|v| (v - mean[j]) * (v - mean[j])).sum::<f64>() / n as f64;
        std[j] = var.sqrt().max(1e-8);
    }
    let mut normalized = train.features.clone();
    for mut row in normalized.rows_mut() {
        for j in 0..d {
            row[j] = (row[j] - mean[j]) / std[j];
        }
    }

    let mut weights = Array2::<f64>::zeros((2, d));
    let mut bias = [0.0, 0.0];
    let mut rng: ChaCha8Rng = stream(hyper.seed, &["decoder-train"]);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = hyper.batch.max(1).min(n);
    let mut final_loss = f64::NAN;
    for _epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut feats = Array2::zeros((chunk.len(), d));
            let mut labels = Vec::with_capacity(chunk.len());
            for (k, &i) in chunk.iter().enumerate() {
                feats.row_mut(k).assign(&normalized.row(i));
                labels.push(train.labels[i]);
            }
            let (_, dw, db) = loss_and_gradient(&weights, &bias, &feats, &labels, hyper.l2);
            weights.scaled_add(-hyper.lr, &dw);
            bias[0] -= hyper.lr * db[0];
            bias[1] -= hyper.lr * db[1];
        }
        let (loss, _, _) = loss_and_gradient(&weights, &bias, &normalized, &train.labels, hyper.l2);
        final_loss = loss;
    }

    Ok(DecoderModel {
        weights,
        bias,
        feature_mean: mean,
        feature_std: std,
        meta: DecoderMeta {
            training_subjects: vec![train.subject_id],
            hyper: hyper.clone(),
            final_loss,
            feature_dim: d,
        },
    })
}

// ---------------------------------------------------------------------------
// Subject datasets and LOSO
// ---------------------------------------------------------------------------

/// Calibration and streaming splits generated from one subject profile.
#[derive(Debug, Clone)]
pub struct SubjectDataset {
    pub subject_id: u32,
    pub calibration: LabeledSet,
    pub online: LabeledSet,
}

/// Generates balanced calibration and online splits for a subject.
///
/// Each split holds `per_class` epochs of each class, interleaved, run
/// through the full preprocessing chain.
pub fn build_subject_dataset(
    profile: &SubjectProfile,
    pre: &Preprocessor,
    per_class: usize,
    master_seed: u64,
) -> Result<SubjectDataset> {
    profile.validate()?;
    let sid = profile.id.to_string();
    let make = |split: &str| -> LabeledSet {
        let mut rng = stream(master_seed, &["dataset", &sid, split]);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * per_class);
        let mut labels = Vec::with_capacity(2 * per_class);
        for i in 0..per_class {
            for label in [Label::Error, Label::NonError] {
                let epoch = generate_epoch(profile, label, i as u64, &mut rng);
                rows.push(pre.features(&epoch));
                labels.push(label == Label::Error);
            }
        }
        let d = rows[0].len();
        let mut features = Array2::zeros((rows.len(), d));
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                features[[i, j]] = v;
            }
        }
        LabeledSet {
            features,
            labels,
            subject_id: profile.id,
        }
    };
    Ok(SubjectDataset {
        subject_id: profile.id,
        calibration: make("calibration"),
        online: make("online"),
    })
}

/// Per-subject LOSO fold outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LosoFold {
    pub subject: u32,
    pub pretrain_acc: f64,
    pub online_acc: f64,
}

/// Leave-one-subject-out evaluation.
///
/// For each held-out subject the model trains on the pooled calibration
/// splits of every other subject, then scores the held-out calibration split
/// (pretraining accuracy) and the held-out online split (online accuracy).
pub fn loso_evaluate(subjects: &[SubjectDataset], hyper: &DecoderHyper) -> Result<Vec<LosoFold>> {
    if subjects.len() < 2 {
        return Err(Error::config(
            "leave-one-subject-out needs at least 2 subjects",
        ));
    }
    let mut folds = Vec::with_capacity(subjects.len());
    for held in 0..subjects.len() {
        let train_sets: Vec<&LabeledSet> = subjects
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held)
            .map(|(_, s)| &s.calibration)
            .collect();
        let mut pooled = LabeledSet::pooled(&train_sets)?;
        pooled.subject_id = 0;
        let mut model = train_decoder(&pooled, hyper)?;
        model.meta.training_subjects = subjects
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held)
            .map(|(_, s)| s.subject_id)
            .collect();
        folds.push(LosoFold {
            subject: subjects[held].subject_id,
            pretrain_acc: model.accuracy(&subjects[held].calibration)?,
            online_acc: model.accuracy(&subjects[held].online)?,
        });
    }
    Ok(folds)
}

/// Trains one pooled model over every subject's calibration split except the
/// held-out subject; used to drive feedback for that subject's runs.
pub fn train_loso_model(
    subjects: &[SubjectDataset],
    held_out: u32,
    hyper: &DecoderHyper,
) -> Result<DecoderModel> {
    let train_sets: Vec<&LabeledSet> = subjects
        .iter()
        .filter(|s| s.subject_id != held_out)
        .map(|s| &s.calibration)
        .collect();
    if train_sets.len() == subjects.len() {
        return Err(Error::config(format!(
            "held-out subject {held_out} not found in dataset"
        )));
    }
    if train_sets.is_empty() {
        return Err(Error::config(
            "cannot train a decoder with zero training subjects",
        ));
    }
    let pooled = LabeledSet::pooled(&train_sets)?;
    let mut model = train_decoder(&pooled, hyper)?;
    model.meta.training_subjects = subjects
        .iter()
        .filter(|s| s.subject_id != held_out)
        .map(|s| s.subject_id)
        .collect();
    Ok(model)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    meta: DecoderMeta,
    bias: [f64; 2],
    feature_dim: usize,
}

/// Writes a model: a length-prefixed JSON header followed by the weight,
/// mean and std blocks as little-endian f64.
pub fn write_model<W: Write>(model: &DecoderModel, mut w: W) -> Result<()> {
    let header = ModelHeader {
        meta: model.meta.clone(),
        bias: model.bias,
        feature_dim: model.feature_dim(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let blocks = [
        model.weights.as_slice().unwrap(),
        model.feature_mean.as_slice().unwrap(),
        model.feature_std.as_slice().unwrap(),
    ];
    for block in blocks {
        for &v in block {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a model written by [`write_model`].
pub fn read_model<R: Read>(mut r: R) -> Result<DecoderModel> {
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)?;
    let json_len = u64::from_le_bytes(len8) as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)?;
    let header: ModelHeader =
        serde_json::from_slice(&json).map_err(|e| Error::Format(e.to_string()))?;
    let d = header.feature_dim;
    let mut read_block = |len: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut b = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut b)?;
            out.push(f64::from_le_bytes(b));
        }
        Ok(out)
    };
    let weights = Array2::from_shape_vec((2, d), read_block(2 * d)?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mean = Array1::from_vec(read_block(d)?);
    let std = Array1::from_vec(read_block(d)?);
    Ok(DecoderModel {
        weights,
        bias: header.bias,
        feature_mean: mean,
        feature_std: std,
        meta: header.meta,
    })
}
