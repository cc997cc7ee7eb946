//! Filtering and rate-conversion primitives for epoch preprocessing.
//!
//! The band-pass is an order-4 Butterworth (two biquad sections derived from
//! an order-2 analog prototype via band transform + bilinear mapping),
//! applied forward-backward for zero phase. Resampling is polyphase FIR with
//! a Kaiser-windowed sinc prototype whose branches are normalized to unit DC
//! gain.

use crate::{Error, Result};

/// One second-order section, direct form II transposed.
/// Coefficients are `[b0, b1, b2]` / `[1, a1, a2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Filters in place, starting from the steady-state response to a
    /// constant equal to the first sample. This removes the startup step
    /// transient that a zero initial state would inject.
    fn filter_in_place(&self, x: &mut [f64]) {
        if x.is_empty() {
            return;
        }
        let dc_gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[1] + self.a[2]);
        let mut z1 = (dc_gain - self.b[0]) * x[0];
        let mut z2 = (self.b[2] - self.a[2] * dc_gain) * x[0];
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[1] * out + z2;
            z2 = self.b[2] * input - self.a[2] * out;
            *v = out;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
    fn scale(self, s: f64) -> Complex {
        Complex::new(self.re * s, self.im * s)
    }
    fn div(self, o: Complex) -> Complex {
        let d = o.re * o.re + o.im * o.im;
        Complex::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
    fn sqrt(self) -> Complex {
        let r = (self.re * self.re + self.im * self.im).sqrt();
        let theta = self.im.atan2(self.re);
        Complex::new(
            r.sqrt() * (theta / 2.0).cos(),
            r.sqrt() * (theta / 2.0).sin(),
        )
    }
    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Order-4 Butterworth band-pass as a cascade of two biquads.
#[derive(Debug, Clone)]
pub struct BandpassFilter {
    sections: Vec<Biquad>,
    rate: f64,
    low: f64,
    high: f64,
}

impl BandpassFilter {
    /// Designs the band-pass for the given edges.
    ///
    /// Requires `0 < low < high < rate/2`.
    pub fn design(low: f64, high: f64, rate: f64) -> Result<Self> {
        if !(low > 0.0 && low < high && high < rate / 2.0) {
            return Err(Error::config(format!(
                "band edges must satisfy 0 < low < high < rate/2, got low={low}, high={high}, rate={rate}"
            )));
        }
        // Pre-warped analog edges for the bilinear transform.
        let fs2 = 2.0 * rate;
        let w1 = fs2 * (std::f64::consts::PI * low / rate).tan();
        let w2 = fs2 * (std::f64::consts::PI * high / rate).tan();
        let bw = w2 - w1;
        let w0_sq = w1 * w2;

        // Order-2 Butterworth prototype poles (left half plane).
        let proto = [
            Complex::new(-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
            Complex::new(-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
        ];

        // Low-pass -> band-pass: each prototype pole p yields the two roots of
        // s^2 - bw*p*s + w0^2 = 0.
        let mut analog_poles = Vec::with_capacity(4);
        for p in proto {
            let bp = p.scale(bw);
            let disc = bp.mul(bp).sub(Complex::new(4.0 * w0_sq, 0.0)).sqrt();
            analog_poles.push(bp.add(disc).scale(0.5));
            analog_poles.push(bp.sub(disc).scale(0.5));
        }

        // Bilinear: z = (fs2 + s) / (fs2 - s).
        let digital_poles: Vec<Complex> = analog_poles
            .iter()
            .map(|&s| Complex::new(fs2, 0.0).add(s).div(Complex::new(fs2, 0.0).sub(s)))
            .collect();

        // Pair conjugates: keep poles with positive imaginary part, each one
        // defines a real biquad. Zeros are at z = +1 and z = -1 (one pair per
        // section), from the analog zeros at s = 0 and s = inf.
        let mut upper: Vec<Complex> = digital_poles.iter().copied().filter(|p| p.im > 0.0).collect();
        upper.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        if upper.len() != 2 {
            return Err(Error::config("band-pass pole pairing failed".to_string()));
        }
        let mut sections: Vec<Biquad> = upper
            .iter()
            .map(|p| Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -2.0 * p.re, p.abs2()],
            })
            .collect();

        // Normalize overall gain to 1 at the (digital) center frequency.
        let wc = 2.0 * (w0_sq.sqrt() / fs2).atan();
        let mut filter = BandpassFilter {
            sections: sections.clone(),
            rate,
            low,
            high,
        };
        let g = filter.response_magnitude(wc);
        let correction = (1.0 / g).sqrt();
        for s in &mut sections {
            for b in &mut s.b {
                *b *= correction;
            }
        }
        filter.sections = sections;
        Ok(filter)
    }

    /// The designed second-order sections.
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn band(&self) -> (f64, f64) {
        (self.low, self.high)
    }

    /// Single-pass magnitude response at digital angular frequency `omega`
    /// (radians/sample).
    pub fn response_magnitude(&self, omega: f64) -> f64 {
        let z1 = Complex::new(omega.cos(), -omega.sin());
        let z2 = z1.mul(z1);
        let mut mag = 1.0;
        for s in &self.sections {
            let num = Complex::new(s.b[0], 0.0)
                .add(z1.scale(s.b[1]))
                .add(z2.scale(s.b[2]));
            let den = Complex::new(1.0, 0.0)
                .add(z1.scale(s.a[1]))
                .add(z2.scale(s.a[2]));
            mag *= (num.abs2() / den.abs2()).sqrt();
        }
        mag
    }

    /// Zero-phase (forward-backward) filtering of one channel.
    ///
    /// The input is extended at both ends by odd reflection (up to 250
    /// samples) before filtering so the IIR state settles off the signal
    /// proper; the extension is stripped afterwards, preserving length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (n - 1).min(250);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 0..pad {
            ext.push(2.0 * x[n - 1] - x[n - 2 - i]);
        }
        for s in &self.sections {
            s.filter_in_place(&mut ext);
        }
        ext.reverse();
        for s in &self.sections {
            s.filter_in_place(&mut ext);
        }
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Polyphase rational resampler with a Kaiser-windowed sinc prototype.
///
/// Each polyphase branch is normalized to sum to one, so constant signals
/// pass through exactly.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
    half: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Modified Bessel function of the first kind, order zero (series expansion).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..=40 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

impl Resampler {
    /// Designs a resampler converting `from_rate` to `to_rate` (both Hz).
    ///
    /// Requires `to_rate < from_rate`.
    pub fn design(from_rate: f64, to_rate: f64) -> Result<Self> {
        if !(to_rate > 0.0 && to_rate < from_rate) {
            return Err(Error::config(format!(
                "resample target must satisfy 0 < to_rate < from_rate, got {to_rate} -> {from_rate}"
            )));
        }
        // Rational reduction; rates are expected to be integral Hz.
        let fr = from_rate.round() as usize;
        let to = to_rate.round() as usize;
        if fr == 0 || to == 0 || (from_rate - fr as f64).abs() > 1e-9 || (to_rate - to as f64).abs() > 1e-9 {
            return Err(Error::config(format!(
                "resample rates must be integral Hz, got {from_rate} -> {to_rate}"
            )));
        }
        let g = gcd(fr, to);
        let up = to / g;
        let down = fr / g;

        let max_ratio = up.max(down);
        let half = 10 * max_ratio;
        let n_taps = 2 * half + 1;
        let beta = 8.6;
        let cutoff = 1.0 / max_ratio as f64; // relative to upsampled Nyquist
        let i0_beta = bessel_i0(beta);
        let mut taps = Vec::with_capacity(n_taps);
        for i in 0..n_taps {
            let t = i as f64 - half as f64;
            let frac = t / half as f64;
            let window = bessel_i0(beta * (1.0 - frac * frac).max(0.0).sqrt()) / i0_beta;
            taps.push(cutoff * sinc(cutoff * t) * window);
        }
        // Unit DC gain per polyphase branch.
        for phase in 0..up {
            let mut sum = 0.0;
            let mut idx = phase;
            while idx < n_taps {
                sum += taps[idx];
                idx += up;
            }
            let mut idx = phase;
            while idx < n_taps {
                taps[idx] /= sum;
                idx += up;
            }
        }
        Ok(Resampler {
            up,
            down,
            taps,
            half,
        })
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    /// Output sample count for an input of length `n`: `round(n * up/down)`.
    pub fn output_len(&self, n: usize) -> usize {
        (2 * n * self.up + self.down) / (2 * self.down)
    }

    /// Resamples one channel. Edges are handled by replicating the first and
    /// last input samples.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let m_out = self.output_len(n);
        let mut y = Vec::with_capacity(m_out);
        let n_taps = self.taps.len() as isize;
        let up = self.up as isize;
        let down = self.down as isize;
        let half = self.half as isize;
        let last = n as isize - 1;
        for m in 0..m_out as isize {
            let anchor = m * down + half;
            // Smallest j with tap index anchor - j*up < n_taps.
            let num = anchor - n_taps + 1;
            let mut j = num.div_euclid(up);
            if num.rem_euclid(up) != 0 {
                j += 1;
            }
            let mut acc = 0.0;
            let mut t = anchor - j * up;
            while t >= 0 {
                let xi = if j < 0 {
                    x[0]
                } else if j > last {
                    x[n - 1]
                } else {
                    x[j as usize]
                };
                acc += self.taps[t as usize] * xi;
                j += 1;
                t -= up;
            }
            y.push(acc);
        }
        y
    }

    /// Prototype FIR magnitude response at digital angular frequency `omega`
    /// (radians/sample at the upsampled rate), normalized to unit DC gain.
    pub fn prototype_response(&self, omega: f64) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &h) in self.taps.iter().enumerate() {
            let ph = omega * i as f64;
            re += h * ph.cos();
            im -= h * ph.sin();
        }
        (re * re + im * im).sqrt() / self.up as f64
    }
}

/// Subtracts the per-sample mean across channels (common-average reference).
///
/// `data` is indexed `[channel][sample]`; all channels must share a length.
pub fn common_average_reference(data: &mut [Vec<f64>]) {
    if data.is_empty() {
        return;
    }
    let n_ch = data.len() as f64;
    let n_samp = data[0].len();
    for s in 0..n_samp {
        let mean: f64 = data.iter().map(|ch| ch[s]).sum::<f64>() / n_ch;
        for ch in data.iter_mut() {
            ch[s] -= mean;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate).sin())
            .collect()
    }

    /// Least-squares amplitude of a known-frequency sinusoid over a slice.
    fn fit_amplitude(x: &[f64], freq: f64, rate: f64, offset: usize) -> f64 {
        let mut cs = 0.0;
        let mut sn = 0.0;
        for (i, &v) in x.iter().enumerate() {
            let t = (offset + i) as f64 / rate;
            let ph = 2.0 * std::f64::consts::PI * freq * t;
            cs += v * ph.cos();
            sn += v * ph.sin();
        }
        let n = x.len() as f64;
        2.0 * (cs * cs + sn * sn).sqrt() / n
    }

    #[test]
    fn dc_is_rejected() {
        let f = BandpassFilter::design(1.0, 20.0, 1000.0).unwrap();
        let x = vec![5.0; 2000];
        let y = f.filtfilt(&x);
        // Interior, away from edge transients.
        let peak = y[300..1700].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(peak < 0.05, "interior residual {peak} too large");
    }

    #[test]
    fn passband_sine_matches_response_oracle() {
        let rate = 1000.0;
        let f = BandpassFilter::design(1.0, 20.0, rate).unwrap();
        let x = sine(10.0, rate, 2000);
        let y = f.filtfilt(&x);
        let measured = fit_amplitude(&y[300..1700], 10.0, rate, 300);
        let omega = 2.0 * std::f64::consts::PI * 10.0 / rate;
        // filtfilt applies the magnitude twice.
        let expected = f.response_magnitude(omega).powi(2);
        assert!(
            (measured - expected).abs() < 0.005,
            "measured {measured} vs oracle {expected}"
        );
        assert!((measured - 1.0).abs() < 0.05, "10 Hz amplitude {measured}");
    }

    #[test]
    fn stopband_sine_attenuated_40db() {
        let rate = 1000.0;
        let f = BandpassFilter::design(1.0, 20.0, rate).unwrap();
        let x = sine(60.0, rate, 2000);
        let y = f.filtfilt(&x);
        let measured = fit_amplitude(&y[300..1700], 60.0, rate, 300);
        let omega = 2.0 * std::f64::consts::PI * 60.0 / rate;
        let expected = f.response_magnitude(omega).powi(2);
        assert!(
            (measured - expected).abs() < 0.2 * expected + 1e-6,
            "measured {measured} vs oracle {expected}"
        );
        let db = -20.0 * measured.log10();
        assert!(db >= 40.0, "60 Hz attenuation {db:.2} dB");
    }

    #[test]
    fn invalid_band_rejected() {
        assert!(BandpassFilter::design(20.0, 1.0, 1000.0).is_err());
        assert!(BandpassFilter::design(0.0, 20.0, 1000.0).is_err());
        assert!(BandpassFilter::design(1.0, 600.0, 1000.0).is_err());
    }

    #[test]
    fn resampler_counts_and_ratio() {
        let r = Resampler::design(1000.0, 256.0).unwrap();
        assert_eq!(r.ratio(), (32, 125));
        assert_eq!(r.output_len(2000), 512);
    }

    #[test]
    fn resampler_preserves_constant() {
        let r = Resampler::design(1000.0, 256.0).unwrap();
        let x = vec![3.25; 2000];
        let y = r.apply(&x);
        assert_eq!(y.len(), 512);
        for &v in &y {
            assert!((v - 3.25).abs() < 1e-9, "constant drifted to {v}");
        }
    }

    #[test]
    fn resampler_tracks_5hz_sine() {
        let r = Resampler::design(1000.0, 256.0).unwrap();
        let x = sine(5.0, 1000.0, 2000);
        let y = r.apply(&x);
        // Compare interior samples against the analytic sine at output times.
        let mut worst = 0.0f64;
        for (m, &v) in y.iter().enumerate().skip(40).take(y.len() - 80) {
            let t = m as f64 / 256.0;
            let want = (2.0 * std::f64::consts::PI * 5.0 * t).sin();
            worst = worst.max((v - want).abs());
        }
        assert!(worst < 0.01, "5 Hz worst-case error {worst}");
    }

    #[test]
    fn resample_rejects_upsampling() {
        assert!(Resampler::design(256.0, 1000.0).is_err());
    }

    #[test]
    fn car_zeroes_identical_channels() {
        let mut data = vec![vec![1.0, 2.0, 3.0]; 4];
        common_average_reference(&mut data);
        for ch in &data {
            for &v in ch {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn car_two_channels() {
        let mut data = vec![vec![4.0, 0.0], vec![2.0, 2.0]];
        common_average_reference(&mut data);
        assert_eq!(data[0], vec![1.0, -1.0]);
        assert_eq!(data[1], vec![-1.0, 1.0]);
    }
}
