//! Simulated observer, streaming epoch ring and reward composition.
//!
//! Every `cadence_k` steps the observer judges the last transition: a
//! collision, a clearance violation or regression along the ideal path reads
//! as an error. The judgment selects which synthetic epoch the "observer's
//! brain" emits; the epoch flows through the ring buffer and the frozen
//! decoder, and the decoded error probability becomes a reward
//! `r = 1 - p_err`, blended into the composite as `r_sparse + w_hf * r`.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::DecoderModel;
use crate::envsim::{EnvEvents, Environment, RewardMode};
use crate::signal::{generate_epoch, EegEpoch, Label, Preprocessor, SubjectProfile};
use crate::{Error, Result};

/// Observer predicate parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverParams {
    /// Steps between judgments.
    pub cadence_k: u32,
    /// Clearance the observer expects, workspace units (shared with the
    /// layout).
    pub d_safe: f64,
    /// Allowed backward motion along the ideal path before it reads as an
    /// error.
    pub regress_tol: f64,
}

impl ObserverParams {
    pub fn validate(&self) -> Result<()> {
        if self.cadence_k < 1 {
            return Err(Error::config("observer cadence_k must be >= 1"));
        }
        if self.regress_tol < 0.0 {
            return Err(Error::config("observer regress_tol must be >= 0"));
        }
        Ok(())
    }
}

/// Outcome of one observer look.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Judgment {
    Error,
    NonError,
    NoJudgment,
}

/// Judges the transition that produced `events` at (1-based) `step_index`.
///
/// Only steps with `step_index % cadence_k == 0` are judged.
pub fn observer_judgment(step_index: u32, events: &EnvEvents, params: &ObserverParams) -> Judgment {
    if step_index == 0 || step_index % params.cadence_k != 0 {
        return Judgment::NoJudgment;
    }
    let erroneous = events.collision
        || events.clearance < params.d_safe
        || events.progress_delta < -params.regress_tol;
    if erroneous {
        Judgment::Error
    } else {
        Judgment::NonError
    }
}

/// Bounded FIFO of time-aligned epochs.
#[derive(Debug, Clone)]
pub struct EpochRing {
    capacity: usize,
    entries: VecDeque<(EegEpoch, u64)>,
    dropped: u64,
    pushes: u64,
    polls: u64,
}

impl EpochRing {
    pub fn new(capacity: usize) -> Self {
        EpochRing {
            capacity: capacity.max(1),
            entries: VecDeque::new(),
            dropped: 0,
            pushes: 0,
            polls: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Epochs discarded because the ring was full.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn polls(&self) -> u64 {
        self.polls
    }

    /// Appends; a full ring drops its oldest entry.
    pub fn push_epoch(&mut self, epoch: EegEpoch, onset_step: u64) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
            self.dropped += 1;
        }
        self.entries.push_back((epoch, onset_step));
        self.pushes += 1;
    }

    /// Removes and returns the oldest entry.
    pub fn poll_epoch(&mut self) -> Option<(EegEpoch, u64)> {
        let e = self.entries.pop_front();
        if e.is_some() {
            self.polls += 1;
        }
        e
    }
}

/// Per-step reward decomposition; any condition's return can be rebuilt from
/// these fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_sparse: f64,
    pub r_dense_shaping: f64,
    pub p_errp: Option<f64>,
    pub r_errp: Option<f64>,
    pub r_composite: f64,
    pub r_unified_eval: f64,
}

impl RewardBreakdown {
    /// Breakdown of a step with no decoded feedback.
    pub fn environmental(env: &Environment, events: &EnvEvents) -> Self {
        let r_sparse = env.env_reward(events, RewardMode::Sparse);
        let dense = env.env_reward(events, RewardMode::Dense);
        RewardBreakdown {
            r_sparse,
            r_dense_shaping: dense - r_sparse,
            p_errp: None,
            r_errp: None,
            r_composite: r_sparse,
            r_unified_eval: dense,
        }
    }

    pub fn r_dense(&self) -> f64 {
        self.r_sparse + self.r_dense_shaping
    }
}

/// Decoded error probability to scalar reward.
pub fn errp_reward(p_errp: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_errp) {
        return Err(Error::contract(format!(
            "error probability {p_errp} outside [0, 1]"
        )));
    }
    Ok(1.0 - p_errp)
}

/// Sparse reward plus the weighted neural term, when one is attributed to
/// this step. With `center` the neural term is `w_hf * (2r - 1)` instead.
pub fn composite_reward(
    r_sparse: f64,
    r_errp: Option<f64>,
    w_hf: f64,
    center: bool,
) -> Result<f64> {
    if w_hf < 0.0 {
        return Err(Error::config(format!("w_hf must be >= 0, got {w_hf}")));
    }
    Ok(match r_errp {
        Some(r) if center => r_sparse + w_hf * (2.0 * r - 1.0),
        Some(r) => r_sparse + w_hf * r,
        None => r_sparse,
    })
}

/// Feedback pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    pub cadence_k: u32,
    pub regress_tol: f64,
    pub ring_capacity: usize,
    /// Use the centered transform `w_hf * (2r - 1)` in the composite.
    pub center_errp: bool,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            cadence_k: 8,
            regress_tol: 0.0,
            ring_capacity: 16,
            center_errp: false,
        }
    }
}

/// The per-run feedback pipeline: observer → epoch synthesis → ring →
/// preprocessing → frozen decoder → reward composition.
#[derive(Debug, Clone)]
pub struct FeedbackChannel {
    subject: SubjectProfile,
    model: DecoderModel,
    ring: EpochRing,
    pre: Preprocessor,
    observer: ObserverParams,
    w_hf: f64,
    center_errp: bool,
}

impl FeedbackChannel {
    pub fn new(
        subject: SubjectProfile,
        model: DecoderModel,
        pre: Preprocessor,
        cfg: &FeedbackConfig,
        d_safe: f64,
        w_hf: f64,
    ) -> Result<Self> {
        subject.validate()?;
        if w_hf < 0.0 {
            return Err(Error::config(format!("w_hf must be >= 0, got {w_hf}")));
        }
        let observer = ObserverParams {
            cadence_k: cfg.cadence_k,
            d_safe,
            regress_tol: cfg.regress_tol,
        };
        observer.validate()?;
        Ok(FeedbackChannel {
            subject,
            model,
            ring: EpochRing::new(cfg.ring_capacity),
            pre,
            observer,
            w_hf,
            center_errp: cfg.center_errp,
        })
    }

    pub fn w_hf(&self) -> f64 {
        self.w_hf
    }

    pub fn ring(&self) -> &EpochRing {
        &self.ring
    }

    pub fn model(&self) -> &DecoderModel {
        &self.model
    }

    /// Processes one completed transition.
    ///
    /// On judgment steps this synthesizes the epoch matching the judgment,
    /// routes it through the ring and the decoder, and credits the neural
    /// reward at this step. Other steps pass the sparse reward through.
    pub fn tick(
        &mut self,
        env: &Environment,
        step_index: u32,
        events: &EnvEvents,
        rng: &mut ChaCha8Rng,
    ) -> Result<RewardBreakdown> {
        let mut breakdown = RewardBreakdown::environmental(env, events);
        let judgment = observer_judgment(step_index, events, &self.observer);
        let label = match judgment {
            Judgment::NoJudgment => return Ok(breakdown),
            Judgment::Error => Label::Error,
            Judgment::NonError => Label::NonError,
        };
        let epoch = generate_epoch(&self.subject, label, step_index as u64, rng);
        self.ring.push_epoch(epoch, step_index as u64);
        let (epoch, _onset) = self
            .ring
            .poll_epoch()
            .expect("ring cannot be empty immediately after a push");
        let features = self.pre.features(&epoch);
        let p = self.model.predict_proba(&features)?;
        let r = errp_reward(p)?;
        breakdown.p_errp = Some(p);
        breakdown.r_errp = Some(r);
        breakdown.r_composite =
            composite_reward(breakdown.r_sparse, Some(r), self.w_hf, self.center_errp)?;
        Ok(breakdown)
    }
}

/// Writes per-step reward breakdowns as an audit CSV.
pub fn write_breakdown_csv<W: std::io::Write>(
    rows: &[(u64, RewardBreakdown)],
    mut w: W,
) -> Result<()> {
    writeln!(
        w,
        "step,judgment,p_errp,r_errp,r_sparse,r_composite,r_unified_eval"
    )?;
    for (step, b) in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            step,
            u8::from(b.p_errp.is_some()),
            fmt_opt(b.p_errp),
            fmt_opt(b.r_errp),
            b.r_sparse,
            b.r_composite,
            b.r_unified_eval
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::signal::RAW_RATE;

    fn quiet_events() -> EnvEvents {
        EnvEvents {
            collision: false,
            clearance: 0.2,
            grasp_event: false,
            success_event: false,
            progress_delta: 0.001,
            deviation: 0.0,
        }
    }

    fn params() -> ObserverParams {
        ObserverParams {
            cadence_k: 8,
            d_safe: 0.05,
            regress_tol: 0.0,
        }
    }

    #[test]
    fn judgment_rules() {
        let p = params();
        let collided = EnvEvents {
            collision: true,
            ..quiet_events()
        };
        assert_eq!(observer_judgment(8, &collided, &p), Judgment::Error);
        let close = EnvEvents {
            clearance: 0.025,
            ..quiet_events()
        };
        assert_eq!(observer_judgment(16, &close, &p), Judgment::Error);
        let regress = EnvEvents {
            progress_delta: -0.004,
            ..quiet_events()
        };
        assert_eq!(observer_judgment(24, &regress, &p), Judgment::Error);
        assert_eq!(observer_judgment(32, &quiet_events(), &p), Judgment::NonError);
        // Off-cadence steps produce no judgment at all.
        assert_eq!(observer_judgment(33, &collided, &p), Judgment::NoJudgment);
        assert_eq!(observer_judgment(0, &collided, &p), Judgment::NoJudgment);
    }

    #[test]
    fn judgment_count_over_an_episode() {
        let p = params();
        let n = (1..=1000)
            .filter(|&i| observer_judgment(i, &quiet_events(), &p) != Judgment::NoJudgment)
            .count();
        assert_eq!(n, 125);
    }

    #[test]
    fn ring_fifo_and_drop_accounting() {
        let profile = crate::signal::default_subjects()[0].clone();
        let mut rng = stream(3, &["ring"]);
        let mut ring = EpochRing::new(2);
        assert!(ring.poll_epoch().is_none());
        for i in 0..3u64 {
            let e = generate_epoch(&profile, Label::Error, i, &mut rng);
            ring.push_epoch(e, i);
        }
        assert_eq!(ring.len(), 2);
        assert_eq!(ring.dropped(), 1);
        let (_, onset) = ring.poll_epoch().unwrap();
        assert_eq!(onset, 1, "oldest surviving entry is epoch 1");
        let (_, onset) = ring.poll_epoch().unwrap();
        assert_eq!(onset, 2);
        assert!(ring.poll_epoch().is_none());
        // dropped == pushes - polls - len
        assert_eq!(ring.dropped(), ring.pushes() - ring.polls() - ring.len() as u64);
    }

    #[test]
    fn errp_reward_is_one_minus_p() {
        assert_eq!(errp_reward(0.0).unwrap(), 1.0);
        assert_eq!(errp_reward(1.0).unwrap(), 0.0);
        assert_eq!(errp_reward(0.3).unwrap(), 0.7);
        assert!(errp_reward(-0.1).is_err());
        assert!(errp_reward(1.1).is_err());
    }

    #[test]
    fn composite_weighting() {
        assert_eq!(composite_reward(1.5, Some(0.9), 0.0, false).unwrap(), 1.5);
        assert_eq!(composite_reward(0.0, Some(1.0), 0.7, false).unwrap(), 0.7);
        assert_eq!(composite_reward(2.0, None, 0.7, false).unwrap(), 2.0);
        // Centered transform maps r in [0,1] to [-w, +w] around the sparse term.
        assert_eq!(composite_reward(0.0, Some(0.25), 0.4, true).unwrap(), -0.2);
        assert!(composite_reward(0.0, Some(0.5), -0.1, false).is_err());
    }

    #[test]
    fn tick_credits_feedback_on_judgment_steps_only() {
        use crate::decoder::{build_subject_dataset, train_decoder, DecoderHyper};
        use crate::envsim::{EnvConfig, Environment};

        let env = Environment::new(EnvConfig::default()).unwrap();
        // Near-noiseless subject so the decoder is close to perfect.
        let subject = SubjectProfile {
            id: 1,
            errp_gain: 1.0,
            noise_amp: 0.15,
            latency_jitter_ms: 2.0,
            n_channels: 16,
        };
        let pre = Preprocessor::new(1.0, 20.0, RAW_RATE, 256.0).unwrap();
        let data = build_subject_dataset(&subject, &pre, 12, 5).unwrap();
        let model = train_decoder(&data.calibration, &DecoderHyper::default()).unwrap();
        let mut channel = FeedbackChannel::new(
            subject,
            model,
            pre,
            &FeedbackConfig::default(),
            env.config().layout.d_safe,
            0.1,
        )
        .unwrap();
        let mut rng = stream(77, &["tick"]);

        // Non-judgment step: breakdown passes the sparse reward through.
        let b = channel.tick(&env, 3, &quiet_events(), &mut rng).unwrap();
        assert!(b.p_errp.is_none() && b.r_errp.is_none());
        assert_eq!(b.r_composite, b.r_sparse);

        // Judgment on a clean transition: near-perfect decoder puts p below
        // one half and the reward above it.
        let b = channel.tick(&env, 8, &quiet_events(), &mut rng).unwrap();
        let p = b.p_errp.unwrap();
        let r = b.r_errp.unwrap();
        assert!(p < 0.5, "clean transition decoded as error (p = {p})");
        assert!(r > 0.5);
        assert_eq!(r, 1.0 - p);
        assert!((b.r_composite - (b.r_sparse + 0.1 * r)).abs() < 1e-15);

        // Judgment on a collision: decoded as an error.
        let collided = EnvEvents {
            collision: true,
            clearance: 0.0,
            ..quiet_events()
        };
        let b = channel.tick(&env, 16, &collided, &mut rng).unwrap();
        assert!(b.p_errp.unwrap() > 0.5);
    }
}
