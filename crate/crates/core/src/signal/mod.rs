//! Synthetic per-subject EEG epochs and the preprocessing chain.
//!
//! An epoch is a 2-second, 32-channel window aligned to an event onset.
//! Error epochs carry a biphasic deflection (negativity near 265 ms, late
//! positivity near 400 ms) weighted toward fronto-central channels; non-error
//! epochs carry only a low-amplitude baseline bump. Both ride on 1/f-shaped
//! background noise whose level, together with the deflection gain, differs
//! per subject.
//!
//! The deflection waveforms themselves ship as a fixed data table
//! (`data/errp_template.csv`) compiled into the crate.

pub mod dsp;
pub mod features;
pub mod io;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
pub use dsp::{BandpassFilter, Biquad, Resampler};
pub use features::extract_features;

/// Raw acquisition rate of generated epochs, Hz.
pub const RAW_RATE: f64 = 1000.0;
/// Epoch length, seconds.
pub const EPOCH_SECS: f64 = 2.0;

/// Per-subject generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectProfile {
    /// Subject id, 1-based.
    pub id: u32,
    /// Scale on the error deflection template (dimensionless).
    pub errp_gain: f64,
    /// Background noise level, µV-equivalent.
    pub noise_amp: f64,
    /// Std-dev of per-epoch component latency jitter, milliseconds.
    pub latency_jitter_ms: f64,
    /// Electrode count.
    #[serde(default = "default_channels")]
    pub n_channels: usize,
}

fn default_channels() -> usize {
    32
}

impl SubjectProfile {
    /// Checks the profile invariants. `noise_amp = 0` is allowed and yields
    /// noiseless epochs (used by calibration and tests).
    pub fn validate(&self) -> Result<()> {
        if !(self.errp_gain >= 0.0 && self.errp_gain.is_finite()) {
            return Err(Error::config(format!(
                "subject {}: errp_gain must be finite and >= 0",
                self.id
            )));
        }
        if !(self.noise_amp >= 0.0 && self.noise_amp.is_finite()) {
            return Err(Error::config(format!(
                "subject {}: noise_amp must be finite and >= 0",
                self.id
            )));
        }
        if !(self.latency_jitter_ms >= 0.0 && self.latency_jitter_ms.is_finite()) {
            return Err(Error::config(format!(
                "subject {}: latency_jitter_ms must be finite and >= 0",
                self.id
            )));
        }
        if self.n_channels < 2 {
            return Err(Error::config(format!(
                "subject {}: n_channels must be >= 2",
                self.id
            )));
        }
        Ok(())
    }
}

/// The default 12-subject ladder. Gains fall and noise rises with the id so
/// decoder accuracy spans a wide band across the cohort.
pub fn default_subjects() -> Vec<SubjectProfile> {
    let gains = [
        0.28, 0.27, 0.25, 0.24, 0.22, 0.21, 0.20, 0.18, 0.17, 0.16, 0.15, 0.13,
    ];
    let noise = [
        2.00, 2.04, 2.08, 2.12, 2.16, 2.20, 2.24, 2.28, 2.32, 2.36, 2.40, 2.44,
    ];
    let jitter = [
        12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 25.0, 26.0, 28.0, 29.0, 30.0,
    ];
    (0..12)
        .map(|i| SubjectProfile {
            id: i as u32 + 1,
            errp_gain: gains[i],
            noise_amp: noise[i],
            latency_jitter_ms: jitter[i],
            n_channels: 32,
        })
        .collect()
}

/// Epoch label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    NonError,
    Error,
    Unknown,
}

impl Label {
    pub fn code(self) -> u8 {
        match self {
            Label::NonError => 0,
            Label::Error => 1,
            Label::Unknown => 2,
        }
    }
    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Label::NonError),
            1 => Ok(Label::Error),
            2 => Ok(Label::Unknown),
            other => Err(Error::Format(format!("unknown label code {other}"))),
        }
    }
}

/// A channels × samples EEG window, µV.
#[derive(Debug, Clone, PartialEq)]
pub struct EegEpoch {
    pub data: Array2<f64>,
    /// Sampling rate, Hz.
    pub rate: f64,
    /// Environment step the epoch is aligned to.
    pub onset_step: u64,
    pub true_label: Label,
}

impl EegEpoch {
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }
    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }
}

// ---------------------------------------------------------------------------
// Deflection templates
// ---------------------------------------------------------------------------

/// Fixed deflection waveforms at the raw rate, peak-channel scale (µV).
#[derive(Debug, Clone)]
pub struct Templates {
    pub error: Vec<f64>,
    pub baseline: Vec<f64>,
}

static TEMPLATE_CSV: &str = include_str!("../../data/errp_template.csv");

fn parse_templates() -> Templates {
    let mut error = Vec::with_capacity(2000);
    let mut baseline = Vec::with_capacity(2000);
    for line in TEMPLATE_CSV.lines().skip(1) {
        let mut cols = line.split(',');
        let _t = cols.next();
        let e: f64 = cols.next().unwrap().parse().unwrap();
        let b: f64 = cols.next().unwrap().parse().unwrap();
        error.push(e);
        baseline.push(b);
    }
    Templates { error, baseline }
}

/// The shipped deflection templates (2000 samples at 1000 Hz).
pub fn templates() -> &'static Templates {
    use std::sync::OnceLock;
    static CACHE: OnceLock<Templates> = OnceLock::new();
    CACHE.get_or_init(parse_templates)
}

/// Spatial weight of each channel: a bump centered on a fronto-central
/// electrode index (`n/8`), width `n/10`.
pub fn channel_weights(n_channels: usize) -> Vec<f64> {
    let center = n_channels as f64 / 8.0;
    let sigma = n_channels as f64 / 10.0;
    (0..n_channels)
        .map(|c| {
            let d = c as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// Channels with spatial weight >= 0.5; used by feature diagnostics and
/// template measurements.
pub fn fronto_central_channels(n_channels: usize) -> Vec<usize> {
    channel_weights(n_channels)
        .iter()
        .enumerate()
        .filter(|(_, &w)| w >= 0.5)
        .map(|(c, _)| c)
        .collect()
}

/// Mean over the 250–350 ms window of the peak-channel error template minus
/// the baseline template: the defined deflection separating the classes.
pub fn template_window_separation() -> f64 {
    let t = templates();
    let lo = (0.25 * RAW_RATE) as usize;
    let hi = (0.35 * RAW_RATE) as usize;
    let err: f64 = t.error[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    let base: f64 = t.baseline[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    err - base
}

// ---------------------------------------------------------------------------
// Epoch generation
// ---------------------------------------------------------------------------

/// Paul Kellet's economy 1/f filter over unit white noise. The output is
/// rescaled so its long-run standard deviation is about one.
struct PinkNoise {
    b0: f64,
    b1: f64,
    b2: f64,
}

impl PinkNoise {
    fn new() -> Self {
        PinkNoise {
            b0: 0.0,
            b1: 0.0,
            b2: 0.0,
        }
    }

    fn next(&mut self, white: f64) -> f64 {
        self.b0 = 0.99765 * self.b0 + white * 0.0990460;
        self.b1 = 0.96300 * self.b1 + white * 0.2965164;
        self.b2 = 0.57000 * self.b2 + white * 1.0526913;
        (self.b0 + self.b1 + self.b2 + white * 0.1848) / 2.55
    }
}

use crate::rng::standard_normal;

/// Generates one raw epoch (2 s at 1000 Hz) for the given subject and label.
///
/// With `noise_amp = 0` and `latency_jitter_ms = 0` the result is exactly the
/// spatially weighted template.
pub fn generate_epoch(
    profile: &SubjectProfile,
    label: Label,
    onset_step: u64,
    rng: &mut ChaCha8Rng,
) -> EegEpoch {
    let n_samples = (RAW_RATE * EPOCH_SECS).round() as usize;
    let n_ch = profile.n_channels;
    let weights = channel_weights(n_ch);
    let t = templates();
    let (wave, gain) = match label {
        Label::Error => (&t.error, profile.errp_gain),
        _ => (&t.baseline, 1.0),
    };

    // Per-epoch latency jitter (whole samples) and mild amplitude jitter.
    let jitter_samples = if profile.latency_jitter_ms > 0.0 {
        (standard_normal(rng) * profile.latency_jitter_ms / 1000.0 * RAW_RATE).round() as i64
    } else {
        0
    };
    let amp_jitter = if profile.noise_amp > 0.0 {
        (1.0 + 0.1 * standard_normal(rng)).max(0.3)
    } else {
        1.0
    };

    let mut data = Array2::<f64>::zeros((n_ch, n_samples));

    // Shared 1/f component with a spatial gradient (survives re-referencing).
    let mut shared = vec![0.0; n_samples];
    if profile.noise_amp > 0.0 {
        let mut pink = PinkNoise::new();
        for _ in 0..200 {
            pink.next(standard_normal(rng));
        }
        for s in shared.iter_mut() {
            *s = pink.next(standard_normal(rng));
        }
    }

    for ch in 0..n_ch {
        let coupling = 0.5 + ch as f64 / (n_ch - 1) as f64;
        if profile.noise_amp > 0.0 {
            let mut pink = PinkNoise::new();
            for _ in 0..200 {
                pink.next(standard_normal(rng));
            }
            for s in 0..n_samples {
                let independent = pink.next(standard_normal(rng));
                data[[ch, s]] =
                    profile.noise_amp * independent + 0.35 * profile.noise_amp * coupling * shared[s];
            }
        }
        let w = weights[ch] * gain * amp_jitter;
        if w != 0.0 {
            for s in 0..n_samples {
                let src = s as i64 - jitter_samples;
                if src >= 0 && (src as usize) < wave.len() {
                    data[[ch, s]] += w * wave[src as usize];
                }
            }
        }
    }

    EegEpoch {
        data,
        rate: RAW_RATE,
        onset_step,
        true_label: label,
    }
}

// ---------------------------------------------------------------------------
// Preprocessing operations
// ---------------------------------------------------------------------------

/// Zero-phase band-pass of every channel.
pub fn bandpass_filter(epoch: &EegEpoch, low: f64, high: f64) -> Result<EegEpoch> {
    let filter = BandpassFilter::design(low, high, epoch.rate)?;
    Ok(bandpass_with(epoch, &filter))
}

/// Same as [`bandpass_filter`] with a pre-designed filter.
pub fn bandpass_with(epoch: &EegEpoch, filter: &BandpassFilter) -> EegEpoch {
    let mut out = epoch.clone();
    for mut row in out.data.rows_mut() {
        let filtered = filter.filtfilt(row.as_slice().expect("row-major layout"));
        row.as_slice_mut().unwrap().copy_from_slice(&filtered);
    }
    out
}

/// Rational-ratio resampling of every channel.
pub fn resample(epoch: &EegEpoch, to_rate: f64) -> Result<EegEpoch> {
    let resampler = Resampler::design(epoch.rate, to_rate)?;
    Ok(resample_with(epoch, &resampler, to_rate))
}

/// Same as [`resample`] with a pre-designed resampler.
pub fn resample_with(epoch: &EegEpoch, resampler: &Resampler, to_rate: f64) -> EegEpoch {
    let n_out = resampler.output_len(epoch.n_samples());
    let mut data = Array2::<f64>::zeros((epoch.n_channels(), n_out));
    for (ch, row) in epoch.data.rows().into_iter().enumerate() {
        let y = resampler.apply(row.as_slice().expect("row-major layout"));
        for (s, v) in y.into_iter().enumerate() {
            data[[ch, s]] = v;
        }
    }
    EegEpoch {
        data,
        rate: to_rate,
        onset_step: epoch.onset_step,
        true_label: epoch.true_label,
    }
}

/// Common-average re-reference: subtracts the per-sample channel mean.
pub fn rereference_car(epoch: &EegEpoch) -> EegEpoch {
    let mut out = epoch.clone();
    let n_ch = out.n_channels() as f64;
    for s in 0..out.n_samples() {
        let mean: f64 = out.data.column(s).sum() / n_ch;
        for ch in 0..out.n_channels() {
            out.data[[ch, s]] -= mean;
        }
    }
    out
}

/// Pre-designed preprocessing chain: band-pass, resample, re-reference,
/// binned features. Designing the filters once matters in the training loop,
/// where an epoch is decoded every few environment steps.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    band: BandpassFilter,
    resampler: Resampler,
    to_rate: f64,
}

impl Preprocessor {
    pub fn new(low: f64, high: f64, raw_rate: f64, to_rate: f64) -> Result<Self> {
        Ok(Preprocessor {
            band: BandpassFilter::design(low, high, raw_rate)?,
            resampler: Resampler::design(raw_rate, to_rate)?,
            to_rate,
        })
    }

    /// Runs the full chain, returning the preprocessed epoch.
    pub fn run(&self, epoch: &EegEpoch) -> EegEpoch {
        let filtered = bandpass_with(epoch, &self.band);
        let resampled = resample_with(&filtered, &self.resampler, self.to_rate);
        rereference_car(&resampled)
    }

    /// Full chain plus feature extraction.
    pub fn features(&self, epoch: &EegEpoch) -> Vec<f64> {
        extract_features(&self.run(epoch))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn quiet_profile() -> SubjectProfile {
        SubjectProfile {
            id: 1,
            errp_gain: 1.0,
            noise_amp: 0.0,
            latency_jitter_ms: 0.0,
            n_channels: 32,
        }
    }

    #[test]
    fn zero_noise_error_epoch_is_the_template() {
        let mut rng = stream(1, &["sig"]);
        let e = generate_epoch(&quiet_profile(), Label::Error, 0, &mut rng);
        let w = channel_weights(32);
        let t = templates();
        for ch in 0..32 {
            for s in 0..e.n_samples() {
                assert_eq!(e.data[[ch, s]], w[ch] * t.error[s]);
            }
        }
        assert_eq!(e.true_label, Label::Error);
    }

    #[test]
    fn zero_noise_nonerror_epoch_is_the_baseline_and_window_separates() {
        let mut rng = stream(1, &["sig"]);
        let e = generate_epoch(&quiet_profile(), Label::NonError, 0, &mut rng);
        let w = channel_weights(32);
        let t = templates();
        for ch in 0..32 {
            for s in 0..e.n_samples() {
                assert_eq!(e.data[[ch, s]], w[ch] * t.baseline[s]);
            }
        }
        // The 250-350 ms fronto-central window differs from the error
        // template by the template separation, per channel weight.
        let err = generate_epoch(&quiet_profile(), Label::Error, 0, &mut rng);
        let lo = 250;
        let hi = 350;
        let fc = fronto_central_channels(32);
        let mean_over = |ep: &EegEpoch| -> f64 {
            let mut acc = 0.0;
            for &ch in &fc {
                for s in lo..hi {
                    acc += ep.data[[ch, s]];
                }
            }
            acc / (fc.len() * (hi - lo)) as f64
        };
        let expected_w: f64 = fc.iter().map(|&c| w[c]).sum::<f64>() / fc.len() as f64;
        let gap = mean_over(&err) - mean_over(&e);
        let want = expected_w * template_window_separation();
        assert!((gap - want).abs() < 1e-9, "gap {gap} vs {want}");
        assert!(gap < -1.0, "classes are not separated: {gap}");
    }

    #[test]
    fn grand_averages_separate_by_three_standard_errors() {
        // Monte-Carlo oracle: 200 epochs per label on a default profile.
        let profile = &default_subjects()[5];
        let fc = fronto_central_channels(profile.n_channels);
        let window_mean = |ep: &EegEpoch| -> f64 {
            let mut acc = 0.0;
            for &ch in &fc {
                for s in 250..350 {
                    acc += ep.data[[ch, s]];
                }
            }
            acc / (fc.len() * 100) as f64
        };
        let mut rng = stream(42, &["grand-average"]);
        let mut collect = |label: Label| -> (f64, f64) {
            let vals: Vec<f64> = (0..200)
                .map(|i| window_mean(&generate_epoch(profile, label, i, &mut rng)))
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64;
            (mean, (var / vals.len() as f64).sqrt())
        };
        let (m_err, se_err) = collect(Label::Error);
        let (m_non, se_non) = collect(Label::NonError);
        let se = (se_err * se_err + se_non * se_non).sqrt();
        assert!(
            m_err < m_non - 3.0 * se,
            "error {m_err} vs non-error {m_non}, se {se}"
        );
    }

    #[test]
    fn preprocess_chain_is_deterministic() {
        let profile = &default_subjects()[0];
        let pre = Preprocessor::new(1.0, 20.0, RAW_RATE, 256.0).unwrap();
        let mut r1 = stream(9, &["det"]);
        let mut r2 = stream(9, &["det"]);
        let a = pre.features(&generate_epoch(profile, Label::Error, 3, &mut r1));
        let b = pre.features(&generate_epoch(profile, Label::Error, 3, &mut r2));
        assert_eq!(a, b);
    }

    #[test]
    fn filtering_and_car_are_linear() {
        let mut rng = stream(11, &["lin"]);
        let profile = quiet_profile();
        let mk = |rng: &mut ChaCha8Rng| {
            let mut e = generate_epoch(&profile, Label::Error, 0, rng);
            for v in e.data.iter_mut() {
                *v += standard_normal(rng);
            }
            e
        };
        let x = mk(&mut rng);
        let y = mk(&mut rng);
        let alpha = 0.7;
        let beta = -1.3;
        let mut combo = x.clone();
        for (c, (a, b)) in combo.data.iter_mut().zip(x.data.iter().zip(y.data.iter())) {
            *c = alpha * a + beta * b;
        }
        let filter = BandpassFilter::design(1.0, 20.0, RAW_RATE).unwrap();
        let fx = rereference_car(&bandpass_with(&x, &filter));
        let fy = rereference_car(&bandpass_with(&y, &filter));
        let fc = rereference_car(&bandpass_with(&combo, &filter));
        for ((a, b), c) in fx.data.iter().zip(fy.data.iter()).zip(fc.data.iter()) {
            assert!((alpha * a + beta * b - c).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_keeps_epoch_contract() {
        let mut rng = stream(3, &["rs"]);
        let e = generate_epoch(&default_subjects()[0], Label::NonError, 0, &mut rng);
        let r = resample(&e, 256.0).unwrap();
        assert_eq!(r.n_samples(), 512);
        assert_eq!(r.rate, 256.0);
        assert_eq!(r.true_label, Label::NonError);
        assert!(resample(&e, 1000.0).is_err());
        assert!(resample(&e, 2000.0).is_err());
    }
}
