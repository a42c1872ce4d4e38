//! Concave, increasing rate→quality mappings.
//!
//! Qualities follow a higher-is-better convention; distortion indices such
//! as STRRED enter negated. Every curve carries the rate of its lowest
//! available representation, below which a user cannot be served.

use crate::error::{Error, Result};

/// Relative slack accepted when a rate or quality lands a rounding error
/// below the curve minimum.
const MIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum CurveShape {
    /// `Q(R) = scale · ln(R / ref_rate)`.
    Logarithmic { scale: f64, ref_rate_bps: f64 },
    /// `Q(R) = max_quality − scale · (R / ref_rate)^(exponent − 1)`, `0 < exponent < 1`.
    ShiftedPower { max_quality: f64, scale: f64, exponent: f64, ref_rate_bps: f64 },
    /// Piecewise-linear through `(rate, quality)` knots, extended past both
    /// ends with the outermost segment slopes.
    Tabulated { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateQualityCurve {
    shape: CurveShape,
    min_rate_bps: f64,
    min_quality: f64,
}

/// Rates at which the curve's superdifferential contains a requested slope.
///
/// Smooth curves give a single rate. A tabulated curve gives a whole
/// segment when the slope matches it exactly; `upper_rate_bps` may then be
/// infinite for the last segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeInverse {
    pub rate_bps: f64,
    pub upper_rate_bps: f64,
    /// The unconstrained solution lies below the minimum rate and was pinned there.
    pub clamped: bool,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")))
    }
}

impl RateQualityCurve {
    pub fn logarithmic(scale: f64, ref_rate_bps: f64, min_rate_bps: f64) -> Result<Self> {
        positive("logarithmic scale", scale)?;
        positive("reference rate", ref_rate_bps)?;
        Self::build(CurveShape::Logarithmic { scale, ref_rate_bps }, min_rate_bps)
    }

    pub fn shifted_power(
        max_quality: f64,
        scale: f64,
        exponent: f64,
        ref_rate_bps: f64,
        min_rate_bps: f64,
    ) -> Result<Self> {
        if !max_quality.is_finite() {
            return Err(Error::InvalidArgument(format!("max quality must be finite, got {max_quality}")));
        }
        positive("power-curve scale", scale)?;
        positive("reference rate", ref_rate_bps)?;
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::InvalidArgument(format!("power-curve exponent must lie in (0, 1), got {exponent}")));
        }
        Self::build(CurveShape::ShiftedPower { max_quality, scale, exponent, ref_rate_bps }, min_rate_bps)
    }

    /// Knots must have strictly increasing rates, strictly positive segment
    /// slopes, and non-increasing slopes. The minimum rate may not precede
    /// the first knot.
    pub fn tabulated(knots: Vec<(f64, f64)>, min_rate_bps: f64) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArgument("tabulated curve needs at least two knots".into()));
        }
        for &(r, q) in &knots {
            non_negative("knot rate", r)?;
            if !q.is_finite() {
                return Err(Error::InvalidArgument(format!("knot quality must be finite, got {q}")));
            }
        }
        let mut prev_slope = f64::INFINITY;
        for w in knots.windows(2) {
            let (r0, q0) = w[0];
            let (r1, q1) = w[1];
            if r1 <= r0 {
                return Err(Error::InvalidArgument(format!("knot rates must strictly increase ({r0} then {r1})")));
            }
            let s = (q1 - q0) / (r1 - r0);
            if s <= 0.0 {
                return Err(Error::InvalidArgument(format!("curve must be increasing; segment from {r0} has slope {s}")));
            }
            if s > prev_slope {
                return Err(Error::InvalidArgument(format!("curve must be concave; slope rises at knot {r0}")));
            }
            prev_slope = s;
        }
        if min_rate_bps < knots[0].0 {
            return Err(Error::InvalidArgument(format!(
                "minimum rate {min_rate_bps} lies before the first knot {}",
                knots[0].0
            )));
        }
        Self::build(CurveShape::Tabulated { knots }, min_rate_bps)
    }

    fn build(shape: CurveShape, min_rate_bps: f64) -> Result<Self> {
        non_negative("minimum rate", min_rate_bps)?;
        let mut curve = RateQualityCurve { shape, min_rate_bps, min_quality: 0.0 };
        curve.min_quality = curve.quality_unchecked(min_rate_bps);
        Ok(curve)
    }

    pub fn shape(&self) -> &CurveShape {
        &self.shape
    }

    pub fn min_rate_bps(&self) -> f64 {
        self.min_rate_bps
    }

    /// `Q(min_rate)`; `-∞` for a zero minimum rate on curves unbounded below.
    pub fn min_quality(&self) -> f64 {
        self.min_quality
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self.shape, CurveShape::Tabulated { .. })
    }

    /// Least upper bound of the quality range.
    pub fn sup_quality(&self) -> f64 {
        match self.shape {
            CurveShape::ShiftedPower { max_quality, .. } => max_quality,
            _ => f64::INFINITY,
        }
    }

    /// Copy of this curve with a different minimum rate.
    pub fn with_min_rate(&self, min_rate_bps: f64) -> Result<Self> {
        match &self.shape {
            CurveShape::Tabulated { knots } => Self::tabulated(knots.clone(), min_rate_bps),
            shape => Self::build(shape.clone(), min_rate_bps),
        }
    }

    fn check_rate(&self, rate_bps: f64) -> Result<()> {
        if !(rate_bps.is_finite() && rate_bps >= 0.0) {
            return Err(Error::InvalidArgument(format!("rate must be finite and >= 0, got {rate_bps}")));
        }
        if rate_bps < self.min_rate_bps * (1.0 - MIN_SLACK) {
            return Err(Error::BelowMinimumRate { rate: rate_bps, min_rate: self.min_rate_bps });
        }
        Ok(())
    }

    /// `Q(R)` for `R ≥ min_rate`.
    pub fn quality(&self, rate_bps: f64) -> Result<f64> {
        self.check_rate(rate_bps)?;
        Ok(self.quality_unchecked(rate_bps))
    }

    /// `Q(R)` on the whole extended domain `R ≥ 0`, ignoring the minimum rate.
    pub fn quality_unchecked(&self, rate_bps: f64) -> f64 {
        match &self.shape {
            CurveShape::Logarithmic { scale, ref_rate_bps } => scale * (rate_bps / ref_rate_bps).ln(),
            CurveShape::ShiftedPower { max_quality, scale, exponent, ref_rate_bps } => {
                max_quality - scale * (rate_bps / ref_rate_bps).powf(exponent - 1.0)
            }
            CurveShape::Tabulated { knots } => {
                if let Ok(i) = knots.binary_search_by(|k| k.0.total_cmp(&rate_bps)) {
                    return knots[i].1;
                }
                let j = segment_right(knots, rate_bps);
                let (r, q) = knots[j];
                q + segment_slope(knots, j) * (rate_bps - r)
            }
        }
    }

    /// `dQ/dR` for `R ≥ min_rate`; the right-hand slope at tabulated knots.
    pub fn slope(&self, rate_bps: f64) -> Result<f64> {
        self.check_rate(rate_bps)?;
        Ok(self.right_slope(rate_bps))
    }

    pub fn right_slope(&self, rate_bps: f64) -> f64 {
        match &self.shape {
            CurveShape::Tabulated { knots } => segment_slope(knots, segment_right(knots, rate_bps)),
            _ => self.smooth_slope(rate_bps),
        }
    }

    pub fn left_slope(&self, rate_bps: f64) -> f64 {
        match &self.shape {
            CurveShape::Tabulated { knots } => segment_slope(knots, segment_left(knots, rate_bps)),
            _ => self.smooth_slope(rate_bps),
        }
    }

    fn smooth_slope(&self, rate_bps: f64) -> f64 {
        match self.shape {
            CurveShape::Logarithmic { scale, .. } => scale / rate_bps,
            CurveShape::ShiftedPower { scale, exponent, ref_rate_bps, .. } => {
                scale * (1.0 - exponent) / ref_rate_bps * (rate_bps / ref_rate_bps).powf(exponent - 2.0)
            }
            CurveShape::Tabulated { .. } => unreachable!("tabulated slopes are segment-wise"),
        }
    }

    /// Rates where the slope equals `target_slope`, pinned to the minimum
    /// rate when the unconstrained answer falls below it.
    pub fn inverse_slope(&self, target_slope: f64) -> Result<SlopeInverse> {
        let (lo, hi) = self.unconstrained_inverse_slope(target_slope)?;
        let clamped = hi < self.min_rate_bps;
        Ok(SlopeInverse {
            rate_bps: lo.max(self.min_rate_bps),
            upper_rate_bps: hi.max(self.min_rate_bps),
            clamped,
        })
    }

    /// Same as [`inverse_slope`](Self::inverse_slope) without the minimum-rate pin.
    pub fn unconstrained_inverse_slope(&self, target_slope: f64) -> Result<(f64, f64)> {
        if !(target_slope.is_finite() && target_slope > 0.0) {
            return Err(Error::InvalidArgument(format!("target slope must be finite and > 0, got {target_slope}")));
        }
        match &self.shape {
            CurveShape::Logarithmic { scale, .. } => {
                let r = scale / target_slope;
                Ok((r, r))
            }
            CurveShape::ShiftedPower { scale, exponent, ref_rate_bps, .. } => {
                let ratio = target_slope * ref_rate_bps / (scale * (1.0 - exponent));
                let r = ref_rate_bps * ratio.powf(1.0 / (exponent - 2.0));
                Ok((r, r))
            }
            CurveShape::Tabulated { knots } => {
                let n_seg = knots.len() - 1;
                let first_at_or_below = (0..n_seg).position(|i| segment_slope(knots, i) <= target_slope);
                let Some(i_lo) = first_at_or_below else {
                    return Err(Error::SlopeBelowRange {
                        slope: target_slope,
                        min_slope: segment_slope(knots, n_seg - 1),
                    });
                };
                if i_lo == 0 && segment_slope(knots, 0) < target_slope {
                    // Steeper than the curve anywhere: the optimum sits at the
                    // bottom of the extended domain.
                    return Ok((0.0, 0.0));
                }
                let i_hi = (i_lo..n_seg).find(|&i| segment_slope(knots, i) < target_slope);
                let hi = i_hi.map_or(f64::INFINITY, |i| knots[i].0);
                Ok((knots[i_lo].0, hi))
            }
        }
    }

    /// `Q⁻¹(q)` for `min_quality ≤ q < sup_quality`.
    pub fn inverse_quality(&self, target_quality: f64) -> Result<f64> {
        let floor = self.min_quality - MIN_SLACK * self.min_quality.abs().max(1.0);
        if target_quality < floor {
            return Err(Error::QualityOutOfRange {
                quality: target_quality,
                min: self.min_quality,
                max: self.sup_quality(),
            });
        }
        self.rate_for_quality(target_quality)
    }

    /// `Q⁻¹(q)` on the extended domain, ignoring the minimum rate. Tabulated
    /// curves floor the answer at zero rate.
    pub fn rate_for_quality(&self, target_quality: f64) -> Result<f64> {
        if !target_quality.is_finite() || target_quality >= self.sup_quality() {
            return Err(Error::QualityOutOfRange {
                quality: target_quality,
                min: self.min_quality,
                max: self.sup_quality(),
            });
        }
        Ok(match &self.shape {
            CurveShape::Logarithmic { scale, ref_rate_bps } => ref_rate_bps * (target_quality / scale).exp(),
            CurveShape::ShiftedPower { max_quality, scale, exponent, ref_rate_bps } => {
                ref_rate_bps * ((max_quality - target_quality) / scale).powf(1.0 / (exponent - 1.0))
            }
            CurveShape::Tabulated { knots } => {
                if let Ok(i) = knots.binary_search_by(|k| k.1.total_cmp(&target_quality)) {
                    return Ok(knots[i].0);
                }
                let past = knots.partition_point(|k| k.1 <= target_quality);
                let j = past.saturating_sub(1).min(knots.len() - 2);
                let (r, q) = knots[j];
                (r + (target_quality - q) / segment_slope(knots, j)).max(0.0)
            }
        })
    }
}

fn segment_slope(knots: &[(f64, f64)], i: usize) -> f64 {
    let (r0, q0) = knots[i];
    let (r1, q1) = knots[i + 1];
    (q1 - q0) / (r1 - r0)
}

/// Segment whose slope applies just to the right of `rate`.
fn segment_right(knots: &[(f64, f64)], rate: f64) -> usize {
    knots.partition_point(|k| k.0 <= rate).saturating_sub(1).min(knots.len() - 2)
}

/// Segment whose slope applies just to the left of `rate`.
fn segment_left(knots: &[(f64, f64)], rate: f64) -> usize {
    knots.partition_point(|k| k.0 < rate).saturating_sub(1).min(knots.len() - 2)
}
