//! Scan processing: min-pool downsampling, the environmental change rate,
//! the trainable reciprocal inverse-perception transform, and assembly of
//! the policy observation vector.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("scan length {len} is not divisible by pool window {window}")]
    PoolMismatch { len: usize, window: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("change-rate index range [{lo}, {hi}] invalid for scan length {len}")]
    IndexRange { lo: usize, hi: usize, len: usize },
}

/// One LiDAR sweep: ordered ranges in meters plus the step index that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub ranges: Vec<f64>,
    pub timestamp: u64,
}

/// Min-pooled scan: each value is the minimum over one window of `k`
/// consecutive beams, preserving worst-case obstacle proximity.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledScan {
    pub values: Vec<f64>,
    pub window: usize,
}

/// Downsample by taking the minimum of every window of `window` consecutive
/// beams. The scan length must divide evenly.
pub fn min_pool(scan: &Scan, window: usize) -> Result<PooledScan, SensingError> {
    if window == 0 || scan.ranges.len() % window != 0 {
        return Err(SensingError::PoolMismatch {
            len: scan.ranges.len(),
            window,
        });
    }
    let values = scan
        .ranges
        .chunks_exact(window)
        .map(|chunk| chunk.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    Ok(PooledScan { values, window })
}

/// Parameters of the adjusted environmental change rate: an affine rescale
/// of the ratio of consecutive scan sums over the beam index range
/// `[lo, hi]` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeRateParams {
    /// Baseline offset; the fixed point of the rescale.
    pub c1: f64,
    /// Scaling factor applied to deviations of the ratio from `c1`.
    pub c2: f64,
    pub lo: usize,
    pub hi: usize,
}

impl ChangeRateParams {
    /// Full-scan range with the standard constants.
    pub fn full_scan(beam_count: usize) -> Self {
        Self {
            c1: 1.0,
            c2: 10.0,
            lo: 0,
            hi: beam_count - 1,
        }
    }

    /// Restrict to the front half of the field of view.
    pub fn front_half(beam_count: usize) -> Self {
        Self {
            c1: 1.0,
            c2: 10.0,
            lo: beam_count / 4,
            hi: beam_count - 1 - beam_count / 4,
        }
    }
}

/// Adjusted rate of environmental change between two consecutive scans:
/// `(sum|curr| / sum|prev| - c1) * c2 + c1` over the configured index range.
/// Equal to `c1` exactly when the scans are identical.
pub fn change_rate(prev: &Scan, curr: &Scan, params: &ChangeRateParams) -> Result<f64, SensingError> {
    if prev.ranges.len() != curr.ranges.len() {
        return Err(SensingError::Dimension {
            expected: prev.ranges.len(),
            got: curr.ranges.len(),
        });
    }
    if params.lo > params.hi || params.hi >= prev.ranges.len() {
        return Err(SensingError::IndexRange {
            lo: params.lo,
            hi: params.hi,
            len: prev.ranges.len(),
        });
    }
    let span = params.lo..=params.hi;
    let sum_prev: f64 = prev.ranges[span.clone()].iter().map(|r| r.abs()).sum();
    let sum_curr: f64 = curr.ranges[span].iter().map(|r| r.abs()).sum();
    // Ranges are strictly positive by the scan invariant.
    assert!(sum_prev > 0.0, "degenerate scan: zero range sum");
    Ok((sum_curr / sum_prev - params.c1) * params.c2 + params.c1)
}

/// Minimum admissible denominator of the reciprocal transform.
pub const IP_EPSILON: f64 = 0.01;

/// Trainable offsets of the reciprocal inverse-perception transform, one
/// per pooled slot.
#[derive(Debug, Clone, PartialEq)]
pub struct InversePerceptionParams {
    pub beta: Vec<f64>,
    pub epsilon: f64,
}

impl InversePerceptionParams {
    /// All-zero offsets: the transform starts as a plain reciprocal.
    pub fn zeros(n: usize) -> Self {
        Self {
            beta: vec![0.0; n],
            epsilon: IP_EPSILON,
        }
    }
}

/// Output of [`inverse_perception`]: transformed values, their partial
/// derivatives, and a count of clamp events for diagnostics.
#[derive(Debug, Clone)]
pub struct InversePerceptionOutput {
    /// `p_i = 1 / (d_i - beta_i)` with the denominator clamped below.
    pub values: Vec<f64>,
    /// `dp_i / dbeta_i = 1 / (d_i - beta_i)^2`; zero where clamped.
    pub d_beta: Vec<f64>,
    /// `dp_i / dd_i = -1 / (d_i - beta_i)^2`; zero where clamped.
    pub d_input: Vec<f64>,
    pub clamp_events: usize,
}

/// Reciprocal transform amplifying near-field obstacles. Denominators below
/// `epsilon` are clamped (counted in the output) and treated as constants
/// for differentiation.
pub fn inverse_perception(
    pooled: &PooledScan,
    params: &InversePerceptionParams,
) -> Result<InversePerceptionOutput, SensingError> {
    if pooled.values.len() != params.beta.len() {
        return Err(SensingError::Dimension {
            expected: params.beta.len(),
            got: pooled.values.len(),
        });
    }
    let n = pooled.values.len();
    let mut values = Vec::with_capacity(n);
    let mut d_beta = Vec::with_capacity(n);
    let mut d_input = Vec::with_capacity(n);
    let mut clamp_events = 0;
    for (d, beta) in pooled.values.iter().zip(&params.beta) {
        let raw = d - beta;
        if raw < params.epsilon {
            clamp_events += 1;
            values.push(1.0 / params.epsilon);
            d_beta.push(0.0);
            d_input.push(0.0);
        } else {
            let p = 1.0 / raw;
            values.push(p);
            d_beta.push(p * p);
            d_input.push(-p * p);
        }
    }
    Ok(InversePerceptionOutput {
        values,
        d_beta,
        d_input,
        clamp_events,
    })
}

/// Normalization constants for the observation tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationScales {
    /// Map diagonal; divides the goal distance.
    pub goal_distance: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

/// The policy/critic observation: `n` scan-derived values followed by
/// normalized goal distance, goal bearing, and the two velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    pub data: Vec<f64>,
    pub scan_len: usize,
}

impl ObservationVector {
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn scan_part(&self) -> &[f64] {
        &self.data[..self.scan_len]
    }

    pub fn tail(&self) -> &[f64] {
        &self.data[self.scan_len..]
    }
}

/// Number of non-scan entries in an observation.
pub const OBS_TAIL: usize = 4;

/// Concatenate scan values and the normalized goal/velocity tail in the
/// fixed order `[scan..., d/diag, phi/pi, v/v_max, omega/omega_max]`.
pub fn build_observation(
    scan_values: &[f64],
    goal: (f64, f64),
    vel: (f64, f64),
    scales: &ObservationScales,
) -> ObservationVector {
    let mut data = Vec::with_capacity(scan_values.len() + OBS_TAIL);
    data.extend_from_slice(scan_values);
    data.push(goal.0 / scales.goal_distance);
    data.push(goal.1 / std::f64::consts::PI);
    data.push(vel.0 / scales.v_max);
    data.push(vel.1 / scales.omega_max);
    debug_assert!(data.iter().all(|x| x.is_finite()));
    ObservationVector {
        data,
        scan_len: scan_values.len(),
    }
}
