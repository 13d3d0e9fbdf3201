//! Sine-superposition deck motion models.
//!
//! A [`WaveModel`] holds, for each of heave, pitch and roll, a list of sine
//! components; the channel value at time `t` is the sum of
//! `amplitude * sin(omega * t + phase)` over that list. Two fixed models are
//! built in (the Knox training model and a sea-state-5 reference model),
//! and [`random_sea_state_model`] draws new models inside the ranges of a
//! [`SeaStateSpec`].

use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Sample;

/// Motion channel, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Heave,
    Pitch,
    Roll,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Heave, Channel::Pitch, Channel::Roll];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Heave => "heave",
            Channel::Pitch => "pitch",
            Channel::Roll => "roll",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub omega: f64,
    /// Phase in rad.
    pub phase: f64,
}

impl SineComponent {
    pub fn new(amplitude: f64, omega: f64, phase: f64) -> Result<Self> {
        let c = SineComponent {
            amplitude,
            omega,
            phase,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::InvalidModel(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidModel(format!(
                "angular frequency must be positive, got {}",
                self.omega
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidModel("phase must be finite".into()));
        }
        Ok(())
    }

    /// Period `2π/ω` in seconds.
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t + self.phase).sin()
    }
}

/// Zero-phase components from `(amplitude, omega)` pairs.
fn zero_phase(terms: &[(f64, f64)]) -> Vec<SineComponent> {
    terms
        .iter()
        .map(|&(amplitude, omega)| SineComponent {
            amplitude,
            omega,
            phase: 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WaveModelDoc", into = "WaveModelDoc")]
pub struct WaveModel {
    label: String,
    channels: [Vec<SineComponent>; 3],
}

impl WaveModel {
    pub fn new(
        label: impl Into<String>,
        heave: Vec<SineComponent>,
        pitch: Vec<SineComponent>,
        roll: Vec<SineComponent>,
    ) -> Result<Self> {
        let model = WaveModel {
            label: label.into(),
            channels: [heave, pitch, roll],
        };
        for ch in Channel::ALL {
            let comps = model.channel(ch);
            if comps.is_empty() {
                return Err(Error::InvalidModel(format!("{ch} channel has no components")));
            }
            comps.iter().try_for_each(SineComponent::validate)?;
        }
        Ok(model)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn channel(&self, ch: Channel) -> &[SineComponent] {
        &self.channels[ch.index()]
    }

    pub fn heave(&self) -> &[SineComponent] {
        self.channel(Channel::Heave)
    }

    pub fn pitch(&self) -> &[SineComponent] {
        self.channel(Channel::Pitch)
    }

    pub fn roll(&self) -> &[SineComponent] {
        self.channel(Channel::Roll)
    }

    /// Sum of a channel's amplitudes, an upper bound on `|channel(t)|`.
    pub fn amplitude_sum(&self, ch: Channel) -> f64 {
        self.channel(ch).iter().map(|c| c.amplitude).sum()
    }

    /// Copy of the model with every amplitude multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let scale = |v: &Vec<SineComponent>| {
            v.iter()
                .map(|c| SineComponent {
                    amplitude: c.amplitude * k,
                    ..*c
                })
                .collect::<Vec<_>>()
        };
        WaveModel::new(
            self.label.clone(),
            scale(&self.channels[0]),
            scale(&self.channels[1]),
            scale(&self.channels[2]),
        )
    }

    /// `[heave, pitch, roll]` at time `t` seconds.
    pub fn evaluate(&self, t: f64) -> Sample {
        let mut out = [0.0; 3];
        for (slot, comps) in out.iter_mut().zip(&self.channels) {
            *slot = comps.iter().map(|c| c.value(t)).sum();
        }
        out
    }
}

/// Free-function form of [`WaveModel::evaluate`].
pub fn evaluate_model(model: &WaveModel, t: f64) -> Sample {
    model.evaluate(t)
}

#[derive(Serialize, Deserialize)]
struct WaveModelDoc {
    label: String,
    channels: ChannelsDoc,
}

#[derive(Serialize, Deserialize)]
struct ChannelsDoc {
    heave: Vec<SineComponent>,
    pitch: Vec<SineComponent>,
    roll: Vec<SineComponent>,
}

impl TryFrom<WaveModelDoc> for WaveModel {
    type Error = Error;

    fn try_from(doc: WaveModelDoc) -> Result<Self> {
        let ChannelsDoc { heave, pitch, roll } = doc.channels;
        WaveModel::new(doc.label, heave, pitch, roll)
    }
}

impl From<WaveModel> for WaveModelDoc {
    fn from(m: WaveModel) -> Self {
        let [heave, pitch, roll] = m.channels;
        WaveModelDoc {
            label: m.label,
            channels: ChannelsDoc { heave, pitch, roll },
        }
    }
}

/// The Knox frigate model used for training.
pub fn knox_training_model() -> WaveModel {
    WaveModel {
        label: "knox".into(),
        channels: [
            zero_phase(&[(0.2172, 0.4), (0.4714, 0.5), (0.3592, 0.6), (0.2227, 0.7)]),
            zero_phase(&[(0.005, 0.46), (0.00946, 0.58), (0.00725, 0.7), (0.00845, 0.82)]),
            zero_phase(&[(0.021, 0.46), (0.0431, 0.54), (0.029, 0.62), (0.022, 0.67)]),
        ],
    }
}

/// The representative sea-state-5 model used for validation.
pub fn sea_state5_reference_model() -> WaveModel {
    WaveModel {
        label: "seastate5".into(),
        channels: [
            zero_phase(&[(0.25, 0.785), (0.35, 0.9), (0.45, 1.1), (0.5, 1.256)]),
            zero_phase(&[(0.35, 0.8), (0.45, 0.85), (0.55, 0.95), (0.625, 1.156)]),
            zero_phase(&[(2.6, 0.483), (1.8, 0.5), (2.5, 0.6), (3.0, 0.785)]),
        ],
    }
}

/// Open interval `(low, high)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl Range {
    pub const fn new(low: f64, high: f64) -> Self {
        Range { low, high }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low < x && x < self.high
    }

    fn is_valid(&self) -> bool {
        self.low.is_finite() && self.high.is_finite() && 0.0 < self.low && self.low < self.high
    }

    /// Uniform draw strictly inside the interval.
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        loop {
            let x = rng.random_range(self.low..self.high);
            if x > self.low {
                return x;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Range for the sum of the channel's component amplitudes.
    pub amplitude_sum_range: Range,
    /// Range for each component period, seconds.
    pub period_range: Range,
    pub components_per_channel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeaStateSpec {
    pub heave: ChannelSpec,
    pub pitch: ChannelSpec,
    pub roll: ChannelSpec,
}

impl SeaStateSpec {
    pub fn channel(&self, ch: Channel) -> &ChannelSpec {
        match ch {
            Channel::Heave => &self.heave,
            Channel::Pitch => &self.pitch,
            Channel::Roll => &self.roll,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ch in Channel::ALL {
            let c = self.channel(ch);
            if !c.amplitude_sum_range.is_valid() {
                return Err(Error::InvalidSpec(format!(
                    "{ch} amplitude range {:?} must satisfy 0 < low < high",
                    c.amplitude_sum_range
                )));
            }
            if !c.period_range.is_valid() {
                return Err(Error::InvalidSpec(format!(
                    "{ch} period range {:?} must satisfy 0 < low < high",
                    c.period_range
                )));
            }
            if c.components_per_channel == 0 {
                return Err(Error::InvalidSpec(format!("{ch} needs at least one component")));
            }
        }
        Ok(())
    }

    /// Check a model against every amplitude-sum and period constraint.
    /// Returns a description of each violation.
    pub fn violations(&self, model: &WaveModel) -> Vec<String> {
        let mut out = Vec::new();
        for ch in Channel::ALL {
            let spec = self.channel(ch);
            let comps = model.channel(ch);
            if comps.len() != spec.components_per_channel {
                out.push(format!(
                    "{ch}: {} components, expected {}",
                    comps.len(),
                    spec.components_per_channel
                ));
            }
            let sum = model.amplitude_sum(ch);
            if !spec.amplitude_sum_range.contains(sum) {
                out.push(format!(
                    "{ch}: amplitude sum {sum} outside {:?}",
                    spec.amplitude_sum_range
                ));
            }
            for c in comps {
                if !spec.period_range.contains(c.period()) {
                    out.push(format!("{ch}: period {} outside {:?}", c.period(), spec.period_range));
                }
            }
        }
        out
    }
}

/// Sea state 5 reference ranges.
pub fn table1_spec() -> SeaStateSpec {
    let ch = |amp: (f64, f64), period: (f64, f64)| ChannelSpec {
        amplitude_sum_range: Range::new(amp.0, amp.1),
        period_range: Range::new(period.0, period.1),
        components_per_channel: 4,
    };
    SeaStateSpec {
        heave: ch((1.0, 1.9), (5.0, 8.0)),
        pitch: ch((1.3, 2.5), (5.0, 8.0)),
        roll: ch((6.3, 12.0), (8.0, 13.0)),
    }
}

/// Zero-phase random model inside `spec`, deterministic in `(spec, seed)`.
pub fn random_sea_state_model(spec: &SeaStateSpec, seed: u64) -> Result<WaveModel> {
    random_sea_state_model_with(spec, seed, false)
}

/// Like [`random_sea_state_model`], optionally drawing phases uniformly
/// from `[0, 2π)`.
///
/// Per channel the amplitude sum is drawn uniformly from its range and
/// split across components by relative weights from `(0.5, 1.5)`; each
/// period is drawn uniformly from the period range and `ω = 2π/T`.
pub fn random_sea_state_model_with(spec: &SeaStateSpec, seed: u64, random_phases: bool) -> Result<WaveModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight_range = Range::new(0.5, 1.5);

    let mut channels: [Vec<SineComponent>; 3] = Default::default();
    for ch in Channel::ALL {
        let cs = spec.channel(ch);
        let n = cs.components_per_channel;
        let total = cs.amplitude_sum_range.sample(&mut rng);
        let periods: Vec<f64> = (0..n).map(|_| cs.period_range.sample(&mut rng)).collect();
        let weights: Vec<f64> = (0..n).map(|_| weight_range.sample(&mut rng)).collect();
        let weight_sum: f64 = weights.iter().sum();

        channels[ch.index()] = periods
            .iter()
            .zip(&weights)
            .map(|(&period, &w)| SineComponent {
                amplitude: total * w / weight_sum,
                omega: TAU / period,
                phase: if random_phases { rng.random_range(0.0..TAU) } else { 0.0 },
            })
            .collect();
    }
    let [heave, pitch, roll] = channels;
    WaveModel::new(format!("random-{seed}"), heave, pitch, roll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn knox_first_heave_term() {
        let m = knox_training_model();
        assert_eq!(
            m.heave()[0],
            SineComponent {
                amplitude: 0.2172,
                omega: 0.4,
                phase: 0.0
            }
        );
        for ch in Channel::ALL {
            assert_eq!(m.channel(ch).len(), 4);
        }
        assert_eq!(m.evaluate(0.0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn knox_heave_at_one_second() {
        // mpmath, 40 digits: 0.656869718238790679...
        let h = knox_training_model().evaluate(1.0)[0];
        assert_abs_diff_eq!(h, 0.656_869_718_238_790_7, epsilon = 1e-14);
    }

    #[test]
    fn reference_model_sums() {
        let m = sea_state5_reference_model();
        assert_eq!(
            m.roll()[3],
            SineComponent {
                amplitude: 3.0,
                omega: 0.785,
                phase: 0.0
            }
        );
        assert_abs_diff_eq!(m.amplitude_sum(Channel::Heave), 1.55, epsilon = 1e-12);
        assert_abs_diff_eq!(m.amplitude_sum(Channel::Pitch), 1.975, epsilon = 1e-12);
        assert_abs_diff_eq!(m.amplitude_sum(Channel::Roll), 9.9, epsilon = 1e-12);
        let spec = table1_spec();
        for ch in Channel::ALL {
            assert!(spec.channel(ch).amplitude_sum_range.contains(m.amplitude_sum(ch)));
        }
    }

    #[test]
    fn reference_roll_periods_match_rounded_table_range() {
        // ω is 2π/T rounded to three decimals, so the extreme periods land
        // a few milliseconds outside the open range.
        let m = sea_state5_reference_model();
        for c in m.roll() {
            let t = c.period();
            assert!(t > 8.0 - 0.01 && t < 13.0 + 0.01, "period {t}");
        }
        assert_abs_diff_eq!(m.roll()[0].period(), 13.008_665_232_255_873, epsilon = 1e-12);
        assert_abs_diff_eq!(m.roll()[3].period(), 8.004_057_716_152_339, epsilon = 1e-12);
    }

    #[test]
    fn table1_ranges() {
        let s = table1_spec();
        assert_eq!(s.roll.period_range, Range::new(8.0, 13.0));
        assert_eq!(s.pitch.amplitude_sum_range, Range::new(1.3, 2.5));
        assert_eq!(s.heave.amplitude_sum_range, Range::new(1.0, 1.9));
        s.validate().unwrap();
    }

    #[test]
    fn rejects_inverted_spec() {
        let mut s = table1_spec();
        s.pitch.period_range = Range::new(8.0, 5.0);
        assert!(matches!(random_sea_state_model(&s, 1), Err(Error::InvalidSpec(_))));
        let mut s = table1_spec();
        s.heave.amplitude_sum_range = Range::new(0.0, 1.0);
        assert!(random_sea_state_model(&s, 1).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let s = table1_spec();
        assert_eq!(
            random_sea_state_model(&s, 7).unwrap(),
            random_sea_state_model(&s, 7).unwrap()
        );
        assert_ne!(
            random_sea_state_model(&s, 7).unwrap(),
            random_sea_state_model(&s, 8).unwrap()
        );
    }

    #[test]
    fn random_phases_are_in_range() {
        let m = random_sea_state_model_with(&table1_spec(), 3, true).unwrap();
        for ch in Channel::ALL {
            for c in m.channel(ch) {
                assert!((0.0..TAU).contains(&c.phase));
            }
        }
        assert!(table1_spec().violations(&m).is_empty());
    }

    #[test]
    fn rejects_bad_components() {
        assert!(SineComponent::new(0.0, 1.0, 0.0).is_err());
        assert!(SineComponent::new(1.0, -1.0, 0.0).is_err());
        assert!(WaveModel::new("x", vec![], zero_phase(&[(1.0, 1.0)]), zero_phase(&[(1.0, 1.0)])).is_err());
    }

    #[test]
    fn json_shape() {
        let m = knox_training_model();
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["label"], "knox");
        assert_eq!(v["channels"]["pitch"][1]["amplitude"], 0.00946);
        assert_eq!(v["channels"]["roll"][0]["omega"], 0.46);
        let back: WaveModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);

        let bad = r#"{"label":"x","channels":{"heave":[],"pitch":[],"roll":[]}}"#;
        assert!(serde_json::from_str::<WaveModel>(bad).is_err());
    }
}
