//! Decimated feature vectors for the decoder.

use super::EegEpoch;

/// Bin width in samples for temporal decimation.
pub const BIN_WIDTH: usize = 8;

/// Per-channel means over consecutive 8-sample bins, flattened channel-major.
///
/// A trailing partial bin is averaged over however many samples it holds.
/// Output length is `n_channels * ceil(n_samples / 8)`.
pub fn extract_features(epoch: &EegEpoch) -> Vec<f64> {
    let n_samples = epoch.n_samples();
    let n_bins = n_samples.div_ceil(BIN_WIDTH);
    let mut out = Vec::with_capacity(epoch.n_channels() * n_bins);
    for row in epoch.data.rows() {
        for b in 0..n_bins {
            let lo = b * BIN_WIDTH;
            let hi = ((b + 1) * BIN_WIDTH).min(n_samples);
            let mean = row.slice(ndarray::s![lo..hi]).sum() / (hi - lo) as f64;
            out.push(mean);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Label;
    use ndarray::Array2;

    fn epoch_from(data: Array2<f64>) -> EegEpoch {
        EegEpoch {
            data,
            rate: 256.0,
            onset_step: 0,
            true_label: Label::Unknown,
        }
    }

    #[test]
    fn zero_epoch_gives_zero_vector() {
        let e = epoch_from(Array2::zeros((4, 64)));
        let f = extract_features(&e);
        assert_eq!(f.len(), 4 * 8);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_epoch_gives_constant_vector() {
        let e = epoch_from(Array2::from_elem((3, 40), 2.5));
        let f = extract_features(&e);
        assert_eq!(f.len(), 3 * 5);
        assert!(f.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn full_size_epoch_dimension() {
        let e = epoch_from(Array2::zeros((32, 512)));
        assert_eq!(extract_features(&e).len(), 2048);
    }

    #[test]
    fn trailing_partial_bin_is_averaged() {
        // 10 samples: one full bin of 8, then a partial bin of 2.
        let mut data = Array2::zeros((1, 10));
        for s in 0..10 {
            data[[0, s]] = s as f64;
        }
        let f = extract_features(&epoch_from(data));
        assert_eq!(f, vec![3.5, 8.5]);
    }
}
