//! Pinch gesture detection from accelerometer magnitude transients.
//!
//! A pinch lands as a sharp transient in the accelerometer. The detector
//! keeps a running rate-of-change score
//!
//! ```text
//! c_t = (1/D) * c_{t-1} + | ||a_t|| - ||a_{t-1}|| |
//! ```
//!
//! and emits an event when the score crosses the threshold from below.
//! The defaults (D = 1.07, threshold 4.9 m/s^2) assume the nominal 427 Hz
//! sample rate; both scale with rate and must be retuned if it changes.

use crate::ekf::ImuSample;

/// Discrete pinch event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchEvent {
    /// Timestamp of the sample whose score crossed the threshold.
    pub t: f64,
    /// Score value at the crossing.
    pub score: f64,
}

/// Running-score state. A plain value; `update` is pure.
#[derive(Debug, Clone, Copy)]
pub struct PinchDetector {
    /// Running rate-of-change score, m/s^2. Non-negative.
    pub score: f64,
    /// Exponential reduction factor, > 1.
    pub reduction: f64,
    /// Event threshold, m/s^2.
    pub threshold: f64,
    /// Minimum spacing between events, seconds.
    pub refractory: f64,
    last_mag: Option<f64>,
    last_event_t: Option<f64>,
    above: bool,
}

impl Default for PinchDetector {
    fn default() -> Self {
        Self::new(1.07, 4.9, 0.2)
    }
}

impl PinchDetector {
    pub fn new(reduction: f64, threshold: f64, refractory: f64) -> Self {
        assert!(reduction > 1.0 && threshold > 0.0 && refractory >= 0.0);
        Self {
            score: 0.0,
            reduction,
            threshold,
            refractory,
            last_mag: None,
            last_event_t: None,
            above: false,
        }
    }

    /// Absorbs one sample; returns the updated detector and an event if the
    /// score crossed the threshold from below outside the refractory window.
    ///
    /// The first sample only seeds the previous magnitude.
    pub fn update(mut self, sample: &ImuSample) -> (Self, Option<PinchEvent>) {
        let mag = sample.accel.norm();
        let Some(prev) = self.last_mag else {
            self.last_mag = Some(mag);
            return (self, None);
        };
        self.last_mag = Some(mag);
        self.score = self.score / self.reduction + (mag - prev).abs();

        let was_above = self.above;
        self.above = self.score > self.threshold;
        let crossed = self.above && !was_above;
        let clear_of_refractory = match self.last_event_t {
            Some(t0) => sample.t - t0 >= self.refractory,
            None => true,
        };
        if crossed && clear_of_refractory {
            self.last_event_t = Some(sample.t);
            let event = PinchEvent { t: sample.t, score: self.score };
            (self, Some(event))
        } else {
            (self, None)
        }
    }
}

/// Runs the detector over a whole stream, collecting events.
pub fn detect_pinches(samples: &[ImuSample], detector: PinchDetector) -> Vec<PinchEvent> {
    let mut det = detector;
    let mut events = Vec::new();
    for s in samples {
        let (next, ev) = det.update(s);
        det = next;
        if let Some(ev) = ev {
            events.push(ev);
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::rng::Rng;

    const RATE: f64 = 427.0;

    fn sample(k: usize, mag: f64) -> ImuSample {
        ImuSample {
            t: k as f64 / RATE,
            accel: Vec3::new(0.0, 0.0, mag),
            gyro: Vec3::ZERO,
        }
    }

    /// Independent reference evaluation of the recurrence.
    fn reference_scores(mags: &[f64], d: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(mags.len().saturating_sub(1));
        let mut c = 0.0;
        for w in mags.windows(2) {
            c = c / d + (w[1] - w[0]).abs();
            out.push(c);
        }
        out
    }

    #[test]
    fn constant_magnitude_never_fires() {
        let samples: Vec<ImuSample> = (0..500).map(|k| sample(k, 9.81)).collect();
        let events = detect_pinches(&samples, PinchDetector::default());
        assert!(events.is_empty());
    }

    #[test]
    fn single_large_step_fires_once() {
        // |delta mag| = 10 from c = 0 gives c = 10 > 4.9
        let mut samples = vec![sample(0, 9.81), sample(1, 19.81)];
        samples.extend((2..100).map(|k| sample(k, 19.81)));
        let events = detect_pinches(&samples, PinchDetector::default());
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].t, samples[1].t);
        assert!((events[0].score - 10.0).abs() < 1e-12);
    }

    #[test]
    fn recurrence_matches_reference_on_random_streams() {
        let mut rng = Rng::new(12);
        for _ in 0..20 {
            let mags: Vec<f64> = (0..400).map(|_| 9.81 + rng.normal() * 2.0).collect();
            let expected = reference_scores(&mags, 1.07);
            let mut det = PinchDetector::default();
            let mut got = Vec::new();
            for (k, &m) in mags.iter().enumerate() {
                let (next, _) = det.update(&sample(k, m));
                det = next;
                if k > 0 {
                    got.push(det.score);
                }
            }
            assert_eq!(got.len(), expected.len());
            for (a, b) in got.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synthetic_burst_fires_exactly_once_at_the_impulse() {
        // smooth sinusoidal sway plus one sharp impulse
        let impulse_at = 260usize;
        let mags: Vec<f64> = (0..500)
            .map(|k| {
                let t = k as f64 / RATE;
                let mut m = 9.81 + 0.8 * (2.0 * std::f64::consts::PI * 1.5 * t).sin();
                if k == impulse_at {
                    m += 9.0;
                }
                m
            })
            .collect();
        // oracle: evaluate the recurrence directly and find crossings
        let scores = reference_scores(&mags, 1.07);
        let crossings: Vec<usize> = scores
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] <= 4.9 && w[1] > 4.9)
            .map(|(i, _)| i + 1)
            .collect();
        let first_above = scores.iter().position(|&c| c > 4.9);
        assert_eq!(first_above, Some(impulse_at - 1)); // scores[i] pairs samples i, i+1
        assert_eq!(crossings.len(), 1);

        let samples: Vec<ImuSample> = mags.iter().enumerate().map(|(k, &m)| sample(k, m)).collect();
        let events = detect_pinches(&samples, PinchDetector::default());
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].t, samples[impulse_at].t);
    }

    #[test]
    fn refractory_window_suppresses_double_fire() {
        // two impulses 50 samples (~117 ms) apart: second is inside refractory
        let mut mags = vec![9.81; 400];
        mags[100] += 9.0;
        mags[150] += 9.0;
        let samples: Vec<ImuSample> = mags.iter().enumerate().map(|(k, &m)| sample(k, m)).collect();
        let events = detect_pinches(&samples, PinchDetector::default());
        assert_eq!(events.len(), 1);
        // spaced beyond 0.2 s they both fire
        let mut mags = vec![9.81; 400];
        mags[100] += 9.0;
        mags[300] += 9.0;
        let samples: Vec<ImuSample> = mags.iter().enumerate().map(|(k, &m)| sample(k, m)).collect();
        let events = detect_pinches(&samples, PinchDetector::default());
        assert_eq!(events.len(), 2);
        assert!(events[1].t - events[0].t >= 0.2);
    }

    #[test]
    fn score_scales_linearly_with_input() {
        let mut rng = Rng::new(31);
        let deltas: Vec<f64> = (0..300).map(|_| rng.uniform() * 1.5).collect();
        // build magnitude streams whose |delta| sequence is deltas and k*deltas
        let k = 3.7;
        let mut base = vec![10.0];
        let mut scaled = vec![10.0];
        for (i, &d) in deltas.iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            base.push(base.last().unwrap() + sign * d);
            scaled.push(scaled.last().unwrap() + sign * d * k);
        }
        let a = reference_scores(&base, 1.07);
        let b = reference_scores(&scaled, 1.07);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((y - k * x).abs() < 1e-9 * y.abs().max(1.0));
        }
        // crossing sets match for scaled thresholds
        let cross = |scores: &[f64], thr: f64| -> Vec<usize> {
            let mut above = false;
            let mut out = Vec::new();
            for (i, &c) in scores.iter().enumerate() {
                let now = c > thr;
                if now && !above {
                    out.push(i);
                }
                above = now;
            }
            out
        };
        assert_eq!(cross(&a, 4.9), cross(&b, 4.9 * k));
    }

    #[test]
    fn geometric_decay_half_life() {
        // with zero increments the score halves every ln2/ln(1.07) steps
        let mut det = PinchDetector::default();
        let (d0, _) = det.update(&sample(0, 9.81)); // seed
        det = d0;
        let (d1, _) = det.update(&sample(1, 19.81)); // kick the score to 10
        det = d1;
        let c0 = det.score;
        let steps = 200;
        for k in 0..steps {
            let (next, _) = det.update(&sample(2 + k, 19.81));
            det = next;
        }
        let expect = c0 * (1.0f64 / 1.07).powi(steps as i32);
        assert!((det.score - expect).abs() <= 1e-12 * expect.max(1.0));
        // empirical half-life from the simulated decay
        let half_life = steps as f64 * std::f64::consts::LN_2 / (c0 / det.score).ln();
        let closed_form = std::f64::consts::LN_2 / 1.07f64.ln();
        assert!((half_life - closed_form).abs() / closed_form < 1e-9);
        assert!((closed_form - 10.24).abs() < 0.01, "half life {closed_form}");
    }
}
