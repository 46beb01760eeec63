//! Signal analysis over recorded traces: dominant frequency, peak and
//! integrated current, settling time, touchdown detection, and hop
//! periodicity statistics.
//!
//! Everything here is a pure function over immutable traces and safe for
//! concurrent evaluation.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::robot::{Joint, JointMap};

/// Default touchdown detection threshold on summed normal force (N).
pub const TOUCHDOWN_THRESHOLD_N: f64 = 0.1;
/// Default touchdown debounce interval (s).
pub const TOUCHDOWN_DEBOUNCE_S: f64 = 0.020;
/// Default settling band around the final value (deg).
pub const SETTLING_BAND_DEG: f64 = 2.0;
/// Default settling hold duration (s).
pub const SETTLING_HOLD_S: f64 = 0.2;

#[derive(Debug, Clone, thiserror::Error)]
pub enum AnalysisError {
    #[error("signal too short: {duration_s:.3} s of samples, need at least {required_s:.3} s")]
    TooShort { duration_s: f64, required_s: f64 },
    #[error("insufficient events: {found} touchdowns, need at least {required}")]
    InsufficientEvents { found: usize, required: usize },
    #[error("window [{t0_s}, {t1_s}] contains no samples")]
    EmptyWindow { t0_s: f64, t1_s: f64 },
}

/// Per-joint recorded channels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointChannels {
    pub q_deg: Vec<f64>,
    pub qd_dps: Vec<f64>,
    pub motor_deg: Vec<f64>,
    pub spring_nm: Vec<f64>,
    pub i_ma: Vec<f64>,
}

/// Uniformly sampled simulation trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub t_s: Vec<f64>,
    pub z_m: Vec<f64>,
    pub zd_mps: Vec<f64>,
    pub joints: JointMap<JointChannels>,
    pub fn_heel_n: Vec<f64>,
    pub fn_toe_n: Vec<f64>,
    pub ft_heel_n: Vec<f64>,
    pub ft_toe_n: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.t_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_s.is_empty()
    }

    /// Sample period, assuming at least two samples (s).
    pub fn sample_period_s(&self) -> f64 {
        if self.t_s.len() < 2 {
            return 0.0;
        }
        (self.t_s[self.t_s.len() - 1] - self.t_s[0]) / (self.t_s.len() - 1) as f64
    }

    pub fn sample_rate_hz(&self) -> f64 {
        let period = self.sample_period_s();
        if period > 0.0 {
            1.0 / period
        } else {
            0.0
        }
    }

    /// Summed ground normal force per sample (N).
    pub fn total_normal_force_n(&self) -> Vec<f64> {
        self.fn_heel_n
            .iter()
            .zip(&self.fn_toe_n)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Index range covering `[t0, t1]`, or the whole trace if `window` is
    /// `None`.
    pub fn window_indices(&self, window: Option<Window>) -> Result<(usize, usize), AnalysisError> {
        match window {
            None => {
                if self.is_empty() {
                    Err(AnalysisError::EmptyWindow { t0_s: 0.0, t1_s: 0.0 })
                } else {
                    Ok((0, self.len()))
                }
            }
            Some(w) => {
                let start = self.t_s.partition_point(|&t| t < w.t0_s);
                let end = self.t_s.partition_point(|&t| t <= w.t1_s);
                if start >= end {
                    Err(AnalysisError::EmptyWindow { t0_s: w.t0_s, t1_s: w.t1_s })
                } else {
                    Ok((start, end))
                }
            }
        }
    }
}

/// Closed time window in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t0_s: f64,
    pub t1_s: f64,
}

/// Dominant frequency of a signal via a zero-padded magnitude spectrum.
///
/// The mean is removed, the signal is zero-padded to the next power of
/// two, and the largest non-DC bin wins, ties broken toward the lower
/// frequency. The peak is refined by quadratic interpolation over the
/// three bins around it. Returns `None` for an all-zero (or constant)
/// signal; requires at least two seconds of samples.
pub fn dominant_frequency(signal: &[f64], sample_rate_hz: f64) -> Result<Option<f64>, AnalysisError> {
    let duration = signal.len() as f64 / sample_rate_hz;
    if duration < 2.0 {
        return Err(AnalysisError::TooShort { duration_s: duration, required_s: 2.0 });
    }

    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let scale = signal.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    if signal.iter().all(|&x| (x - mean).abs() < 1e-12 * scale) {
        return Ok(None);
    }

    let padded_len = signal.len().next_power_of_two();
    let mut buffer: Vec<Complex<f64>> = signal
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(padded_len)
        .collect();
    FftPlanner::new().plan_fft_forward(padded_len).process(&mut buffer);

    let half = padded_len / 2;
    let magnitude: Vec<f64> = buffer[..=half].iter().map(|c| c.norm()).collect();
    let mut peak = 1;
    for (i, &m) in magnitude.iter().enumerate().skip(1) {
        if m > magnitude[peak] {
            peak = i;
        }
    }

    let bin_hz = sample_rate_hz / padded_len as f64;
    let refined = if peak > 1 && peak + 1 < magnitude.len() {
        let (lo, mid, hi) = (magnitude[peak - 1], magnitude[peak], magnitude[peak + 1]);
        let denom = lo - 2.0 * mid + hi;
        if denom.abs() > 0.0 {
            let delta = 0.5 * (lo - hi) / denom;
            (peak as f64 + delta.clamp(-0.5, 0.5)) * bin_hz
        } else {
            peak as f64 * bin_hz
        }
    } else {
        peak as f64 * bin_hz
    };
    Ok(Some(refined))
}

/// Signed value of the largest-magnitude current sample within the window
/// (mA). Ties go to the earliest sample.
pub fn peak_current(
    trace: &Trace,
    joint: Joint,
    window: Option<Window>,
) -> Result<f64, AnalysisError> {
    let (start, end) = trace.window_indices(window)?;
    let slice = &trace.joints[joint].i_ma[start..end];
    let mut best = slice[0];
    for &x in slice {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    Ok(best)
}

/// Trapezoidal integral of |i(t)| over the window (A·s).
pub fn integrated_current(
    trace: &Trace,
    joint: Joint,
    window: Option<Window>,
) -> Result<f64, AnalysisError> {
    let (start, end) = trace.window_indices(window)?;
    let i_ma = &trace.joints[joint].i_ma;
    let t = &trace.t_s;
    let mut total = 0.0;
    for k in start..end.saturating_sub(1) {
        let dt = t[k + 1] - t[k];
        total += 0.5 * (i_ma[k].abs() + i_ma[k + 1].abs()) * dt;
    }
    Ok(total * 1e-3)
}

/// Largest spring deflection magnitude |motor − joint| within the window
/// (deg).
pub fn max_spring_deflection(
    trace: &Trace,
    joint: Joint,
    window: Option<Window>,
) -> Result<f64, AnalysisError> {
    let (start, end) = trace.window_indices(window)?;
    let ch = &trace.joints[joint];
    let mut best = 0.0f64;
    for k in start..end {
        best = best.max((ch.motor_deg[k] - ch.q_deg[k]).abs());
    }
    Ok(best)
}

/// Settling classification of one joint angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Settling {
    /// Time from the reference instant until the angle stays within the
    /// band for the hold duration (s).
    Settled(f64),
    Unsettled,
}

impl Settling {
    pub fn as_seconds(&self) -> Option<f64> {
        match self {
            Settling::Settled(s) => Some(*s),
            Settling::Unsettled => None,
        }
    }
}

/// Core settling scan over a uniformly sampled signal.
///
/// Finds the earliest sample index `k ≥ start` such that the signal stays
/// within ±band of its final value for at least `hold_s`, and returns the
/// elapsed time from `start` to `k`.
pub fn settling_time_from(
    signal: &[f64],
    sample_period_s: f64,
    start: usize,
    band: f64,
    hold_s: f64,
) -> Settling {
    if signal.is_empty() || start >= signal.len() {
        return Settling::Unsettled;
    }
    let final_value = *signal.last().expect("non-empty");
    let hold_samples = (hold_s / sample_period_s).round() as usize;
    let mut run_start: Option<usize> = None;
    for k in start..signal.len() {
        if (signal[k] - final_value).abs() <= band {
            let begin = *run_start.get_or_insert(k);
            if k - begin >= hold_samples {
                return Settling::Settled((begin - start) as f64 * sample_period_s);
            }
        } else {
            run_start = None;
        }
    }
    Settling::Unsettled
}

/// Settling time of a joint angle measured from the first touchdown.
pub fn settling_time(
    trace: &Trace,
    joint: Joint,
    band_deg: f64,
    hold_s: f64,
) -> Result<Settling, AnalysisError> {
    let touchdowns = detect_touchdowns(trace, TOUCHDOWN_THRESHOLD_N);
    let first = touchdowns
        .first()
        .copied()
        .ok_or(AnalysisError::InsufficientEvents { found: 0, required: 1 })?;
    let start = trace.t_s.partition_point(|&t| t < first);
    Ok(settling_time_from(
        &trace.joints[joint].q_deg,
        trace.sample_period_s(),
        start,
        band_deg,
        hold_s,
    ))
}

/// Rising edges of the summed normal force through the threshold, with a
/// 20 ms debounce (s).
pub fn detect_touchdowns(trace: &Trace, force_threshold_n: f64) -> Vec<f64> {
    let force = trace.total_normal_force_n();
    let mut events = Vec::new();
    let mut last_event = f64::NEG_INFINITY;
    for k in 1..force.len() {
        let rising = force[k - 1] < force_threshold_n && force[k] >= force_threshold_n;
        if rising && trace.t_s[k] - last_event >= TOUCHDOWN_DEBOUNCE_S {
            events.push(trace.t_s[k]);
            last_event = trace.t_s[k];
        }
    }
    events
}

/// Periodicity statistics of a hopping trace.
#[derive(Debug, Clone, PartialEq)]
pub struct HopStats {
    pub touchdown_times_s: Vec<f64>,
    /// Per joint: maximum pairwise difference of the joint angle sampled
    /// at the touchdown instants (deg).
    pub pose_repeatability_deg: JointMap<f64>,
    /// Joint angles at each touchdown (deg).
    pub touchdown_poses_deg: Vec<JointMap<f64>>,
    /// Intervals between consecutive touchdowns (s).
    pub periods_s: Vec<f64>,
    /// Peak body height between consecutive touchdowns (m).
    pub apex_heights_m: Vec<f64>,
}

/// Touchdown-pose repeatability, inter-touchdown periods and apex heights.
/// Requires at least two touchdowns.
pub fn hop_periodicity(trace: &Trace) -> Result<HopStats, AnalysisError> {
    let touchdowns = detect_touchdowns(trace, TOUCHDOWN_THRESHOLD_N);
    if touchdowns.len() < 2 {
        return Err(AnalysisError::InsufficientEvents { found: touchdowns.len(), required: 2 });
    }

    let index_of = |time: f64| trace.t_s.partition_point(|&t| t < time).min(trace.len() - 1);
    let poses: Vec<JointMap<f64>> = touchdowns
        .iter()
        .map(|&td| {
            let k = index_of(td);
            JointMap::from_fn(|j| trace.joints[j].q_deg[k])
        })
        .collect();

    let pose_repeatability_deg = JointMap::from_fn(|j| {
        let mut worst = 0.0f64;
        for a in 0..poses.len() {
            for b in (a + 1)..poses.len() {
                worst = worst.max((poses[a][j] - poses[b][j]).abs());
            }
        }
        worst
    });

    let periods_s = touchdowns.windows(2).map(|w| w[1] - w[0]).collect();
    let apex_heights_m = touchdowns
        .windows(2)
        .map(|w| {
            let (a, b) = (index_of(w[0]), index_of(w[1]));
            trace.z_m[a..=b].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    Ok(HopStats {
        touchdown_times_s: touchdowns,
        pose_repeatability_deg,
        touchdown_poses_deg: poses,
        periods_s,
        apex_heights_m,
    })
}

/// Scalar metrics derived from one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub peak_current_ma: JointMap<f64>,
    pub integrated_current_as: JointMap<f64>,
    pub settling: JointMap<Settling>,
    pub max_spring_deflection_deg: JointMap<f64>,
    pub touchdown_times_s: Vec<f64>,
    pub periods_s: Vec<f64>,
    pub apex_heights_m: Vec<f64>,
    pub pose_repeatability_deg: Option<JointMap<f64>>,
}

impl MetricsReport {
    /// Compute the standard metrics over `window` (default: whole trace).
    /// Current metrics use the window; settling is referenced to the
    /// first touchdown; periodicity needs two touchdowns and is omitted
    /// otherwise.
    pub fn compute(trace: &Trace, window: Option<Window>) -> Result<Self, AnalysisError> {
        let mut peak = JointMap::uniform(0.0);
        let mut integrated = JointMap::uniform(0.0);
        let mut deflection = JointMap::uniform(0.0);
        let mut settling = JointMap::uniform(Settling::Unsettled);
        for j in Joint::ALL {
            peak[j] = peak_current(trace, j, window)?;
            integrated[j] = integrated_current(trace, j, window)?;
            deflection[j] = max_spring_deflection(trace, j, window)?;
            settling[j] = settling_time(trace, j, SETTLING_BAND_DEG, SETTLING_HOLD_S)
                .unwrap_or(Settling::Unsettled);
        }
        let touchdowns = detect_touchdowns(trace, TOUCHDOWN_THRESHOLD_N);
        let hops = hop_periodicity(trace).ok();
        Ok(Self {
            peak_current_ma: peak,
            integrated_current_as: integrated,
            settling,
            max_spring_deflection_deg: deflection,
            touchdown_times_s: touchdowns,
            periods_s: hops.as_ref().map(|h| h.periods_s.clone()).unwrap_or_default(),
            apex_heights_m: hops.as_ref().map(|h| h.apex_heights_m.clone()).unwrap_or_default(),
            pose_repeatability_deg: hops.map(|h| h.pose_repeatability_deg),
        })
    }

    /// Flat `key = value` text block.
    pub fn to_kv_block(&self) -> String {
        let mut out = String::new();
        for j in Joint::ALL {
            out.push_str(&format!("{j}.peak_current_ma = {:.3}\n", self.peak_current_ma[j]));
            out.push_str(&format!(
                "{j}.integrated_current_as = {:.6}\n",
                self.integrated_current_as[j]
            ));
            match self.settling[j] {
                Settling::Settled(s) => out.push_str(&format!("{j}.settling_s = {s:.4}\n")),
                Settling::Unsettled => out.push_str(&format!("{j}.settling_s = unsettled\n")),
            }
            out.push_str(&format!(
                "{j}.max_spring_deflection_deg = {:.4}\n",
                self.max_spring_deflection_deg[j]
            ));
        }
        out.push_str(&format!("touchdowns = {}\n", self.touchdown_times_s.len()));
        for (i, td) in self.touchdown_times_s.iter().enumerate() {
            out.push_str(&format!("touchdown_{i}_s = {td:.4}\n"));
        }
        for (i, p) in self.periods_s.iter().enumerate() {
            out.push_str(&format!("period_{i}_s = {p:.4}\n"));
        }
        for (i, a) in self.apex_heights_m.iter().enumerate() {
            out.push_str(&format!("apex_{i}_m = {a:.5}\n"));
        }
        if let Some(rep) = &self.pose_repeatability_deg {
            for j in Joint::ALL {
                out.push_str(&format!("{j}.touchdown_repeatability_deg = {:.4}\n", rep[j]));
            }
        }
        out
    }

    pub fn csv_header() -> String {
        let mut cols = Vec::new();
        for j in Joint::ALL {
            cols.push(format!("{j}_peak_ma"));
            cols.push(format!("{j}_integrated_as"));
            cols.push(format!("{j}_settling_s"));
            cols.push(format!("{j}_max_deflection_deg"));
        }
        cols.push("touchdowns".into());
        cols.push("first_touchdown_s".into());
        cols.push("mean_period_s".into());
        cols.push("mean_apex_m".into());
        for j in Joint::ALL {
            cols.push(format!("{j}_repeatability_deg"));
        }
        cols.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        let mut cols = Vec::new();
        for j in Joint::ALL {
            cols.push(format!("{:.3}", self.peak_current_ma[j]));
            cols.push(format!("{:.6}", self.integrated_current_as[j]));
            cols.push(match self.settling[j] {
                Settling::Settled(s) => format!("{s:.4}"),
                Settling::Unsettled => String::new(),
            });
            cols.push(format!("{:.4}", self.max_spring_deflection_deg[j]));
        }
        cols.push(format!("{}", self.touchdown_times_s.len()));
        cols.push(
            self.touchdown_times_s
                .first()
                .map(|t| format!("{t:.4}"))
                .unwrap_or_default(),
        );
        let mean = |v: &[f64]| {
            if v.is_empty() {
                String::new()
            } else {
                format!("{:.5}", v.iter().sum::<f64>() / v.len() as f64)
            }
        };
        cols.push(mean(&self.periods_s));
        cols.push(mean(&self.apex_heights_m));
        for j in Joint::ALL {
            cols.push(
                self.pose_repeatability_deg
                    .as_ref()
                    .map(|r| format!("{:.4}", r[j]))
                    .unwrap_or_default(),
            );
        }
        cols.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, rate: f64, duration: f64) -> Vec<f64> {
        let n = (duration * rate) as usize;
        (0..n).map(|k| amp * (2.0 * PI * freq * k as f64 / rate).sin()).collect()
    }

    /// Synthetic trace with a given current signal on the knee and a
    /// ground-force profile.
    fn synthetic_trace(rate: f64, n: usize) -> Trace {
        let mut tr = Trace::default();
        for k in 0..n {
            tr.t_s.push(k as f64 / rate);
            tr.z_m.push(0.0);
            tr.zd_mps.push(0.0);
            tr.fn_heel_n.push(0.0);
            tr.fn_toe_n.push(0.0);
            tr.ft_heel_n.push(0.0);
            tr.ft_toe_n.push(0.0);
        }
        for j in Joint::ALL {
            let ch = &mut tr.joints[j];
            ch.q_deg = vec![0.0; n];
            ch.qd_dps = vec![0.0; n];
            ch.motor_deg = vec![0.0; n];
            ch.spring_nm = vec![0.0; n];
            ch.i_ma = vec![0.0; n];
        }
        tr
    }

    #[test]
    fn dominant_frequency_of_pure_sine() {
        let f = dominant_frequency(&sine(5.0, 1.0, 1000.0, 4.0), 1000.0)
            .unwrap()
            .unwrap();
        assert!((f - 5.0).abs() < 0.05, "estimated {f}");
    }

    #[test]
    fn dominant_frequency_of_constant_is_none() {
        let signal = vec![3.7; 4000];
        assert_eq!(dominant_frequency(&signal, 1000.0).unwrap(), None);
    }

    #[test]
    fn dominant_frequency_all_zero_is_none() {
        let signal = vec![0.0; 4000];
        assert_eq!(dominant_frequency(&signal, 1000.0).unwrap(), None);
    }

    #[test]
    fn dominant_frequency_picks_larger_component() {
        let rate = 1000.0;
        let a = sine(3.0, 1.0, rate, 4.0);
        let b = sine(8.0, 0.2, rate, 4.0);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let f = dominant_frequency(&mix, rate).unwrap().unwrap();
        assert!((f - 3.0).abs() < 0.1, "estimated {f}");
    }

    #[test]
    fn dominant_frequency_requires_two_seconds() {
        let err = dominant_frequency(&sine(5.0, 1.0, 1000.0, 1.0), 1000.0).unwrap_err();
        matches!(err, AnalysisError::TooShort { .. })
            .then_some(())
            .expect("wrong error");
    }

    #[test]
    fn dominant_frequency_accuracy_across_band() {
        // Pure sinusoids 1–50 Hz at 1 kHz, 4 s windows: error within one
        // interpolated bin (rate / padded_len).
        let rate = 1000.0;
        let padded = (4.0_f64 * rate) as usize;
        let bin = rate / padded.next_power_of_two() as f64;
        for k in 1..=50 {
            let f_true = k as f64 + 0.37; // off-bin on purpose
            let f = dominant_frequency(&sine(f_true, 1.0, rate, 4.0), rate)
                .unwrap()
                .unwrap();
            assert!(
                (f - f_true).abs() <= bin,
                "f_true {f_true}, estimated {f}, bin {bin}"
            );
        }
    }

    #[test]
    fn peak_current_extremum_with_sign() {
        let mut tr = synthetic_trace(1000.0, 4);
        tr.joints.knee.i_ma = vec![0.0, -3.0, -8.0, -5.0];
        assert_eq!(peak_current(&tr, Joint::Knee, None).unwrap(), -8.0);
    }

    #[test]
    fn peak_current_constant() {
        let mut tr = synthetic_trace(1000.0, 4);
        tr.joints.knee.i_ma = vec![2.5; 4];
        assert_eq!(peak_current(&tr, Joint::Knee, None).unwrap(), 2.5);
    }

    #[test]
    fn peak_current_tie_takes_earliest() {
        let mut tr = synthetic_trace(1000.0, 4);
        tr.joints.knee.i_ma = vec![7.0, -7.0, 3.0, 0.0];
        assert_eq!(peak_current(&tr, Joint::Knee, None).unwrap(), 7.0);
    }

    #[test]
    fn integrated_current_rectangle() {
        let rate = 1000.0;
        let n = 2001; // exactly 2 s
        let mut tr = synthetic_trace(rate, n);
        tr.joints.knee.i_ma = vec![500.0; n]; // 0.5 A
        let integral = integrated_current(&tr, Joint::Knee, None).unwrap();
        assert!((integral - 1.0).abs() < 1e-9, "got {integral}");
    }

    #[test]
    fn settling_constant_signal_is_zero() {
        let signal = vec![5.0; 1000];
        match settling_time_from(&signal, 1e-3, 0, 2.0, 0.2) {
            Settling::Settled(s) => assert_eq!(s, 0.0),
            Settling::Unsettled => panic!("constant signal must settle"),
        }
    }

    #[test]
    fn settling_never_in_band_is_unsettled() {
        // Alternates far outside the band around the final value.
        let signal: Vec<f64> = (0..1000).map(|k| if k % 2 == 0 { 10.0 } else { -10.0 }).collect();
        assert_eq!(settling_time_from(&signal, 1e-3, 0, 2.0, 0.2), Settling::Unsettled);
    }

    #[test]
    fn settling_matches_analytic_envelope_crossing() {
        // x(t) = A e^{−λt} cos(2π·4·t): with A = 10°, λ = 5/s, band 2°,
        // the signal last leaves the band coming down from the t = 0.25 s
        // peak; solve x(t) = band on the closed form by bisection.
        let rate = 10_000.0;
        let (amp, lambda, freq, band) = (10.0, 5.0, 4.0, 2.0);
        let x = |t: f64| amp * (-lambda * t).exp() * (2.0 * PI * freq * t).cos();
        let n = (2.0 * rate) as usize;
        let signal: Vec<f64> = (0..n).map(|k| x(k as f64 / rate)).collect();

        let (mut lo, mut hi) = (0.25, 0.25 + 1.0 / (2.0 * freq));
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if x(mid) > band {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let expected = 0.5 * (lo + hi);

        match settling_time_from(&signal, 1.0 / rate, 0, band, 0.2) {
            Settling::Settled(s) => {
                assert!((s - expected).abs() <= 1.5 / rate, "settling {s} vs analytic {expected}");
            }
            Settling::Unsettled => panic!("must settle"),
        }
    }

    #[test]
    fn touchdowns_empty_when_airborne() {
        let tr = synthetic_trace(1000.0, 500);
        assert!(detect_touchdowns(&tr, 0.1).is_empty());
    }

    #[test]
    fn touchdown_single_edge() {
        let mut tr = synthetic_trace(1000.0, 500);
        for k in 200..500 {
            tr.fn_heel_n[k] = 3.0;
        }
        let events = detect_touchdowns(&tr, 0.1);
        assert_eq!(events.len(), 1);
        assert!((events[0] - 0.2).abs() < 1.5e-3);
    }

    #[test]
    fn touchdown_debounce_suppresses_chatter() {
        let mut tr = synthetic_trace(1000.0, 500);
        // Force chatters around the threshold for 10 ms, then stays.
        for k in 200..500 {
            tr.fn_heel_n[k] = if k < 210 && k % 2 == 0 { 0.05 } else { 3.0 };
        }
        let events = detect_touchdowns(&tr, 0.1);
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn touchdown_offset_below_threshold_ignored() {
        let mut tr = synthetic_trace(1000.0, 500);
        for k in 0..500 {
            tr.fn_heel_n[k] = 0.04; // constant offset below threshold
        }
        for k in 300..500 {
            tr.fn_toe_n[k] = 5.0;
        }
        let events = detect_touchdowns(&tr, 0.1);
        assert_eq!(events.len(), 1);
        assert!((events[0] - 0.3).abs() < 1.5e-3);
    }

    #[test]
    fn hop_periodicity_exact_cycle() {
        let rate = 1000.0;
        let n = 3000;
        let mut tr = synthetic_trace(rate, n);
        // Three identical contacts at 0.5, 1.5, 2.5 s; identical poses.
        for (start, end) in [(500, 700), (1500, 1700), (2500, 2700)] {
            for k in start..end {
                tr.fn_toe_n[k] = 4.0;
            }
        }
        for k in 0..n {
            tr.z_m[k] = 0.2 + 0.01 * (2.0 * PI * (k as f64 / rate)).cos();
            tr.joints.knee.q_deg[k] = 45.0;
        }
        let stats = hop_periodicity(&tr).unwrap();
        assert_eq!(stats.touchdown_times_s.len(), 3);
        assert_eq!(stats.pose_repeatability_deg.knee, 0.0);
        assert_eq!(stats.periods_s.len(), 2);
        assert!((stats.periods_s[0] - 1.0).abs() < 2e-3);
        assert!((stats.periods_s[1] - 1.0).abs() < 2e-3);
    }

    #[test]
    fn hop_periodicity_reports_pose_difference() {
        let rate = 1000.0;
        let mut tr = synthetic_trace(rate, 2000);
        for (start, end) in [(500, 700), (1500, 1700)] {
            for k in start..end {
                tr.fn_toe_n[k] = 4.0;
            }
        }
        for k in 0..2000 {
            tr.joints.ankle.q_deg[k] = if k < 1000 { -50.0 } else { -47.0 };
        }
        let stats = hop_periodicity(&tr).unwrap();
        assert!((stats.pose_repeatability_deg.ankle - 3.0).abs() < 1e-9);
    }

    #[test]
    fn hop_periodicity_needs_two_events() {
        let tr = synthetic_trace(1000.0, 500);
        match hop_periodicity(&tr) {
            Err(AnalysisError::InsufficientEvents { found: 0, required: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn integrated_current_additive_and_sign_invariant(
            values in proptest::collection::vec(-800.0f64..800.0, 100..400),
            split in 0.3f64..0.7,
        ) {
            let rate = 1000.0;
            let n = values.len();
            let mut tr = synthetic_trace(rate, n);
            tr.joints.hip.i_ma = values.clone();
            let t_end = tr.t_s[n - 1];
            let t_mid = tr.t_s[((n as f64 * split) as usize).min(n - 1)];

            let whole = integrated_current(&tr, Joint::Hip, Some(Window { t0_s: 0.0, t1_s: t_end })).unwrap();
            let first = integrated_current(&tr, Joint::Hip, Some(Window { t0_s: 0.0, t1_s: t_mid })).unwrap();
            let second = integrated_current(&tr, Joint::Hip, Some(Window { t0_s: t_mid, t1_s: t_end })).unwrap();
            prop_assert!((whole - (first + second)).abs() < 1e-9);

            let mut flipped = tr.clone();
            flipped.joints.hip.i_ma = values.iter().map(|x| -x).collect();
            let w2 = integrated_current(&flipped, Joint::Hip, Some(Window { t0_s: 0.0, t1_s: t_end })).unwrap();
            prop_assert!((whole - w2).abs() < 1e-12);
        }

        #[test]
        fn settling_nonincreasing_in_band(
            seed_vals in proptest::collection::vec(-20.0f64..20.0, 50..200),
        ) {
            // Append a constant tail so the signal settles for wide bands.
            let mut signal = seed_vals;
            signal.extend(std::iter::repeat(1.0).take(400));
            let narrow = settling_time_from(&signal, 1e-3, 0, 1.0, 0.1);
            let wide = settling_time_from(&signal, 1e-3, 0, 5.0, 0.1);
            if let (Settling::Settled(n), Settling::Settled(w)) = (narrow, wide) {
                prop_assert!(w <= n + 1e-12);
            }
            if let (Settling::Settled(_), Settling::Unsettled) = (narrow, wide) {
                prop_assert!(false, "wider band cannot unsettle");
            }
        }
    }

    #[test]
    fn touchdowns_stable_under_sample_rate_doubling() {
        // The same analytic force profile sampled at 1 kHz and 2 kHz
        // yields the same events within one sample period.
        let profile = |t: f64| if (0.3..0.6).contains(&t) || (0.9..1.2).contains(&t) { 5.0 } else { 0.0 };
        let build = |rate: f64| {
            let n = (1.5 * rate) as usize;
            let mut tr = synthetic_trace(rate, n);
            for k in 0..n {
                tr.fn_toe_n[k] = profile(k as f64 / rate);
            }
            tr
        };
        let a = detect_touchdowns(&build(1000.0), 0.1);
        let b = detect_touchdowns(&build(2000.0), 0.1);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-3 + 1e-12);
        }
    }
}
