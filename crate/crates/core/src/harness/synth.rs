//! Synthetic datasets with known ground truth.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::{stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::series::z_normalize;
use crate::Series;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Class `k` is a sinusoid at frequency `class_frequencies[k]`.
    #[default]
    FreqDisc,
    /// Zero background with class-dependent rectangular events, z-normalized.
    EventLevel,
    /// Random walk with a class-specific ramp at a random position.
    NonstationaryShapelet,
    /// Linear trend plus two seasonal cycles plus a class-specific shapelet.
    TrendSeasonShapelet,
}

impl SynthKind {
    pub const ALL: [SynthKind; 4] = [
        SynthKind::FreqDisc,
        SynthKind::EventLevel,
        SynthKind::NonstationaryShapelet,
        SynthKind::TrendSeasonShapelet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::FreqDisc => "freq_disc",
            SynthKind::EventLevel => "event_level",
            SynthKind::NonstationaryShapelet => "nonstationary_shapelet",
            SynthKind::TrendSeasonShapelet => "trend_season_shapelet",
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown synthetic kind {s:?}")))
    }
}

/// Kind-specific knobs. Fields that do not apply to the chosen kind are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Cycles per series for each class of `freq_disc`; its length sets the class count.
    pub class_frequencies: Vec<f64>,
    /// Class count for the shapelet kinds, between 2 and 4; defaults to 3
    /// for `nonstationary_shapelet` and 4 for `trend_season_shapelet`.
    pub shapelet_classes: Option<usize>,
    /// Height of `event_level` events.
    pub event_amplitude: f64,
    /// Length of each `event_level` event; defaults to `N / 16`.
    pub event_len: Option<usize>,
    /// Shapelet length; defaults to `N / 32` for `nonstationary_shapelet`
    /// and `N / 16` for `trend_season_shapelet`, but at least 2.
    pub shapelet_len: Option<usize>,
    /// Shapelet height; defaults to 3 for `nonstationary_shapelet` and 4
    /// for `trend_season_shapelet`.
    pub shapelet_amplitude: Option<f64>,
    /// Standard deviation of each random-walk step.
    pub walk_sigma: f64,
    /// Range of the total trend change over the series.
    pub trend_range: (f64, f64),
    /// Periods of the two seasonal cycles; default to `N / 4` and `N / 16`.
    pub season_periods: Option<(f64, f64)>,
    pub season_amplitudes: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            class_frequencies: vec![5.0, 12.0],
            shapelet_classes: None,
            event_amplitude: 1.0,
            event_len: None,
            shapelet_len: None,
            shapelet_amplitude: None,
            walk_sigma: 0.05,
            trend_range: (-3.0, 3.0),
            season_periods: None,
            season_amplitudes: (1.0, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_samples: usize,
    pub length: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub params: SynthParams,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::FreqDisc,
            n_samples: 200,
            length: 128,
            noise_sigma: 0.1,
            seed: 0,
            params: SynthParams::default(),
        }
    }
}

impl SynthSpec {
    pub fn new(kind: SynthKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn num_classes(&self) -> usize {
        match self.kind {
            SynthKind::FreqDisc => self.params.class_frequencies.len(),
            SynthKind::EventLevel => 2,
            SynthKind::NonstationaryShapelet => self.params.shapelet_classes.unwrap_or(3),
            SynthKind::TrendSeasonShapelet => self.params.shapelet_classes.unwrap_or(4),
        }
    }

    fn event_len(&self) -> usize {
        self.params.event_len.unwrap_or((self.length / 16).max(1))
    }

    fn shapelet_len(&self) -> usize {
        let divisor = if self.kind == SynthKind::NonstationaryShapelet {
            32
        } else {
            16
        };
        self.params
            .shapelet_len
            .unwrap_or((self.length / divisor).max(2))
    }

    fn shapelet_amplitude(&self) -> f64 {
        let default = if self.kind == SynthKind::NonstationaryShapelet {
            3.0
        } else {
            4.0
        };
        self.params.shapelet_amplitude.unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_samples < 2 {
            return bad(format!(
                "n_samples must be at least 2, got {}",
                self.n_samples
            ));
        }
        if self.length < 16 {
            return bad(format!("length must be at least 16, got {}", self.length));
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative".into());
        }
        let p = &self.params;
        match self.kind {
            SynthKind::FreqDisc => {
                if p.class_frequencies.len() < 2 {
                    return bad("freq_disc needs at least two class frequencies".into());
                }
                if p.class_frequencies.iter().any(|f| !(*f > 0.0)) {
                    return bad("class frequencies must be positive".into());
                }
            }
            SynthKind::EventLevel => {
                // class 1 places two events without overlap
                if self.event_len() == 0 || 2 * self.event_len() > self.length {
                    return bad("event_len does not fit twice in the series".into());
                }
                if !(p.event_amplitude > 0.0) {
                    return bad("event_amplitude must be positive".into());
                }
            }
            SynthKind::NonstationaryShapelet | SynthKind::TrendSeasonShapelet => {
                let l = self.shapelet_len();
                if l < 2 || l > self.length {
                    return bad(format!("shapelet_len {l} must lie in [2, {}]", self.length));
                }
                let classes = self.num_classes();
                if !(2..=4).contains(&classes) {
                    return bad(format!(
                        "shapelet_classes must lie in [2, 4], got {classes}"
                    ));
                }
                if !self.shapelet_amplitude().is_finite() {
                    return bad("shapelet_amplitude must be finite".into());
                }
                if !(p.walk_sigma >= 0.0) {
                    return bad("walk_sigma must be non-negative".into());
                }
                if let Some((a, b)) = p.season_periods {
                    if !(a > 0.0 && b > 0.0) {
                        return bad("season periods must be positive".into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset together with the class-specific signal planted in
/// every sample, aligned with `dataset.train` and `dataset.test`.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub train_truth: Vec<Vec<f64>>,
    pub test_truth: Vec<Vec<f64>>,
}

/// Discriminative shapelet of class `label`: a half-sine bump, a two-cycle
/// zigzag, a half-sine dip and a single sine cycle for classes 0 to 3.
pub fn shapelet(label: usize, len: usize, amplitude: f64) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let u = (i as f64 + 0.5) / len as f64;
            amplitude
                * match label % 4 {
                    0 => (PI * u).sin(),
                    1 => (4.0 * PI * u).sin(),
                    2 => -(PI * u).sin(),
                    _ => (2.0 * PI * u).sin(),
                }
        })
        .collect()
}

/// Level shift of class `label` spread linearly over `len` steps from
/// `start`: class 0 rises by `amplitude`, class 1 falls by it, and further
/// classes alternate with growing heights. The shift persists afterwards.
pub fn ramp(label: usize, n: usize, start: usize, len: usize, amplitude: f64) -> Vec<f64> {
    let sign = if label.is_multiple_of(2) { 1.0 } else { -1.0 };
    let height = sign * amplitude * (1 + label / 2) as f64;
    (0..n)
        .map(|t| {
            if t < start {
                0.0
            } else if t < start + len {
                height * (t - start + 1) as f64 / len as f64
            } else {
                height
            }
        })
        .collect()
}

struct Generated {
    values: Vec<f64>,
    truth: Vec<f64>,
}

fn generate(spec: &SynthSpec, label: usize, rng: &mut ChaCha8Rng) -> Generated {
    let n = spec.length;
    let p = &spec.params;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = |rng: &mut ChaCha8Rng| spec.noise_sigma * unit.sample(rng);
    match spec.kind {
        SynthKind::FreqDisc => {
            let f = p.class_frequencies[label];
            let phase = rng.random_range(0.0..2.0 * PI);
            let truth: Vec<f64> = (0..n)
                .map(|t| (2.0 * PI * f * t as f64 / n as f64 + phase).sin())
                .collect();
            let values = truth.iter().map(|v| v + noise(rng)).collect();
            Generated { values, truth }
        }
        SynthKind::EventLevel => {
            let len = spec.event_len();
            let mut raw = vec![0.0; n];
            let count = label + 1;
            let mut placed: Vec<usize> = Vec::new();
            while placed.len() < count {
                let start = rng.random_range(0..=n - len);
                if placed.iter().all(|&s| start + len <= s || s + len <= start) {
                    placed.push(start);
                }
            }
            for &s in &placed {
                let height = p.event_amplitude * rng.random_range(0.8..1.2);
                for v in &mut raw[s..s + len] {
                    *v = (height + noise(rng)).max(0.0);
                }
            }
            Generated {
                values: z_normalize(&raw),
                truth: raw,
            }
        }
        SynthKind::NonstationaryShapelet => {
            let len = spec.shapelet_len();
            let step = Normal::new(0.0, p.walk_sigma).expect("finite sigma");
            let mut level = 0.0;
            let mut values: Vec<f64> = (0..n)
                .map(|_| {
                    level += step.sample(rng);
                    level
                })
                .collect();
            let start = rng.random_range(0..=n - len);
            let truth = ramp(label, n, start, len, spec.shapelet_amplitude());
            for (v, s) in values.iter_mut().zip(&truth) {
                *v += s + noise(rng);
            }
            Generated { values, truth }
        }
        SynthKind::TrendSeasonShapelet => {
            let len = spec.shapelet_len();
            let (p1, p2) = p
                .season_periods
                .unwrap_or((n as f64 / 4.0, n as f64 / 16.0));
            let slope = rng.random_range(p.trend_range.0..=p.trend_range.1);
            let (ph1, ph2) = (
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
            );
            let start = rng.random_range(0..=n - len);
            let mut truth = vec![0.0; n];
            truth[start..start + len].copy_from_slice(&shapelet(
                label,
                len,
                spec.shapelet_amplitude(),
            ));
            let values = (0..n)
                .map(|t| {
                    let tf = t as f64;
                    slope * tf / n as f64
                        + p.season_amplitudes.0 * (2.0 * PI * tf / p1 + ph1).sin()
                        + p.season_amplitudes.1 * (2.0 * PI * tf / p2 + ph2).sin()
                        + truth[t]
                        + noise(rng)
                })
                .collect();
            Generated { values, truth }
        }
    }
}

/// Generates the dataset described by `spec` with a stratified 80/20
/// train/test split, keeping the planted ground truth.
pub fn synth_with_truth(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes = spec.num_classes();
    let labels: Vec<usize> = (0..spec.n_samples).map(|i| i % classes).collect();
    let mut series = Vec::with_capacity(labels.len());
    let mut truth = Vec::with_capacity(labels.len());
    for &label in &labels {
        let g = generate(spec, label, &mut rng);
        series.push(Series::labeled(g.values, label)?);
        truth.push(g.truth);
    }
    let (train_idx, test_idx) = stratified_split(&labels, 0.2, &mut rng);
    let pick = |idx: &[usize]| -> (Vec<Series>, Vec<Vec<f64>>) {
        idx.iter()
            .map(|&i| (series[i].clone(), truth[i].clone()))
            .unzip()
    };
    let (train, train_truth) = pick(&train_idx);
    let (test, test_truth) = pick(&test_idx);
    Ok(SynthOutput {
        dataset: Dataset { train, test },
        train_truth,
        test_truth,
    })
}

/// Generates the dataset described by `spec` with a stratified 80/20 split.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset> {
    Ok(synth_with_truth(spec)?.dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{SpaceConfig, SpaceKind};

    #[test]
    fn deterministic_and_split() {
        for kind in SynthKind::ALL {
            let spec = SynthSpec {
                n_samples: 60,
                seed: 9,
                ..SynthSpec::new(kind)
            };
            let a = synth_dataset(&spec).unwrap();
            assert_eq!(a, synth_dataset(&spec).unwrap());
            assert_eq!(a.train.len(), 48);
            assert_eq!(a.test.len(), 12);
            assert_eq!(a.num_classes(), spec.num_classes());
            assert_eq!(a.series_len(), Some(128));
        }
    }

    #[test]
    fn freq_disc_energy_sits_in_class_bin() {
        let spec = SynthSpec {
            n_samples: 10,
            noise_sigma: 0.0,
            ..SynthSpec::new(SynthKind::FreqDisc)
        };
        let data = synth_dataset(&spec).unwrap();
        let space = SpaceConfig::new(SpaceKind::Frequency, 128).build().unwrap();
        for s in data.train.iter().chain(&data.test) {
            let bin = spec.params.class_frequencies[s.label.unwrap()] as usize;
            let z = space.forward(s.values()).unwrap();
            let energy = |i: usize| z[i] * z[i];
            let total: f64 = (0..z.len()).map(energy).sum();
            let in_bin = energy(2 * bin - 1) + energy(2 * bin);
            assert!(in_bin >= 0.99 * total);
        }
    }

    #[test]
    fn event_level_raw_signal_has_exact_zero_background() {
        let spec = SynthSpec {
            n_samples: 20,
            ..SynthSpec::new(SynthKind::EventLevel)
        };
        let out = synth_with_truth(&spec).unwrap();
        let space = SpaceConfig::new(SpaceKind::MinZero, 128).build().unwrap();
        for raw in out.train_truth.iter().chain(&out.test_truth) {
            assert_eq!(raw.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            let z = space.forward(raw).unwrap();
            assert_eq!(z[128], 0.0);
            for (zi, ri) in z.iter().zip(raw) {
                if *ri == 0.0 {
                    assert_eq!(*zi, 0.0);
                }
            }
        }
        for s in &out.dataset.train {
            let mean = s.values().iter().sum::<f64>() / 128.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn shapelet_truth_is_planted() {
        let spec = SynthSpec {
            n_samples: 10,
            noise_sigma: 0.0,
            params: SynthParams {
                walk_sigma: 0.0,
                shapelet_len: Some(16),
                shapelet_amplitude: Some(1.0),
                ..Default::default()
            },
            ..SynthSpec::new(SynthKind::NonstationaryShapelet)
        };
        let out = synth_with_truth(&spec).unwrap();
        for (s, t) in out.dataset.train.iter().zip(&out.train_truth) {
            assert_eq!(s.values(), &t[..]);
            let label = s.label.unwrap();
            let sign = if label.is_multiple_of(2) { 1.0 } else { -1.0 };
            assert_eq!(*t.last().unwrap(), sign * (1 + label / 2) as f64);
            let moving = t.windows(2).filter(|w| w[1] != w[0]).count();
            assert!(moving == 16 || (moving == 15 && t[0] != 0.0));
        }
    }

    #[test]
    fn shapelet_defaults_depend_on_kind() {
        let ns = SynthSpec::new(SynthKind::NonstationaryShapelet);
        let ts = SynthSpec::new(SynthKind::TrendSeasonShapelet);
        assert_eq!(
            (ns.num_classes(), ns.shapelet_len(), ns.shapelet_amplitude()),
            (3, 4, 3.0)
        );
        assert_eq!(
            (ts.num_classes(), ts.shapelet_len(), ts.shapelet_amplitude()),
            (4, 8, 4.0)
        );
        let labels: Vec<usize> = synth_dataset(&ts)
            .unwrap()
            .test
            .iter()
            .map(|s| s.label.unwrap())
            .collect();
        assert!((0..4).all(|c| labels.contains(&c)));
    }

    #[test]
    fn invalid_specs() {
        let short = SynthSpec {
            length: 8,
            ..Default::default()
        };
        assert!(synth_dataset(&short).is_err());
        let few = SynthSpec {
            n_samples: 1,
            ..Default::default()
        };
        assert!(synth_dataset(&few).is_err());
        let long_shapelet = SynthSpec {
            params: SynthParams {
                shapelet_len: Some(500),
                ..Default::default()
            },
            ..SynthSpec::new(SynthKind::TrendSeasonShapelet)
        };
        assert!(synth_dataset(&long_shapelet).is_err());
        let many = SynthSpec {
            params: SynthParams {
                shapelet_classes: Some(5),
                ..Default::default()
            },
            ..SynthSpec::new(SynthKind::NonstationaryShapelet)
        };
        assert!(synth_dataset(&many).is_err());
        assert!("sawtooth".parse::<SynthKind>().is_err());
    }
}
