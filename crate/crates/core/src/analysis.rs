//! Distance measures between subsystem states and the revival statistics
//! built on them.

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::tebd::EvolutionRecord;

/// Slopes at or below this value are not counted as revivals.
pub const REVIVAL_FLOOR: f64 = 1e-12;
/// Eigenvalues are clipped from below at this value before the TVD spectra
/// are normalized.
pub const EIGEN_CLIP: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "TD")]
    TraceDistance,
    #[serde(rename = "TVD")]
    TotalVariation,
}

impl Measure {
    pub fn label(self) -> &'static str {
        match self {
            Measure::TraceDistance => "TD",
            Measure::TotalVariation => "TVD",
        }
    }

    pub fn eval(self, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
        match self {
            Measure::TraceDistance => trace_distance(rho, sigma),
            Measure::TotalVariation => total_variation_distance(rho, sigma),
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TD" => Ok(Measure::TraceDistance),
            "TVD" => Ok(Measure::TotalVariation),
            other => Err(Error::InvalidParameter(format!("unknown measure {other:?}"))),
        }
    }
}

fn check_dims(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "density matrices of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// Half the trace norm of `rho - sigma`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let diff = rho.matrix() - sigma.matrix();
    let diff = (&diff + diff.adjoint()) * num_complex::Complex64::from(0.5);
    Ok(0.5 * linalg::eigvalsh(diff).iter().map(|x| x.abs()).sum::<f64>())
}

fn sorted_spectrum(rho: &DensityMatrix) -> Vec<f64> {
    let mut p: Vec<f64> = rho.eigenvalues().into_iter().map(|x| x.max(EIGEN_CLIP)).collect();
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    p.sort_by(|a, b| b.total_cmp(a));
    p
}

/// Half the l1 distance between the descending spectra of `rho` and
/// `sigma`.
pub fn total_variation_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let p = sorted_spectrum(rho);
    let q = sorted_spectrum(sigma);
    Ok(0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Distances between subsystem states `delta` apart, sampled on the record
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    pub measure: Measure,
    pub ell: usize,
    pub delta: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DistanceSeries {
    pub fn new(measure: Measure, ell: usize, delta: f64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times for {} values",
                times.len(),
                values.len()
            )));
        }
        if values.iter().chain(&times).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("distance series".into()));
        }
        if times.len() > 2 {
            let h = times[1] - times[0];
            if !(h > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
                return Err(Error::InvalidParameter("series times are not uniformly spaced".into()));
            }
        }
        Ok(Self { measure, ell, delta, times, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time spacing, if there are at least two samples.
    pub fn spacing(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }
}

/// Number of record intervals in `delta`, rejecting separations that are
/// not on the grid.
fn lag_of(delta: f64, spacing: f64) -> Result<usize> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("separation must be >= 0, got {delta}")));
    }
    let lag = delta / spacing;
    let rounded = lag.round();
    if (lag - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::OffGrid { delta, spacing });
    }
    Ok(rounded as usize)
}

/// `values[k] = measure(rho(t_k + delta), rho(t_k))` for every recorded `t_k`
/// with `t_k + delta` also recorded.
pub fn distance_series(record: &EvolutionRecord, ell: usize, delta: f64, measure: Measure) -> Result<DistanceSeries> {
    let rdms = record.series(ell)?;
    let lag = lag_of(delta, record.spacing)?;
    let count = rdms.len().saturating_sub(lag);
    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        values.push(measure.eval(&rdms[k + lag], &rdms[k])?);
    }
    let times = record.times[..count].to_vec();
    DistanceSeries::new(measure, ell, delta, times, values)
}

fn check_step(series: &DistanceSeries, step: f64) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: series.len() });
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let h = series.spacing().expect("two samples");
    if (h - step).abs() > 1e-9 * h.max(step) {
        return Err(Error::InvalidParameter(format!("step {step} differs from the series spacing {h}")));
    }
    Ok(())
}

/// Forward differences `(values[k + 1] - values[k]) / step`.
pub fn slope_series(series: &DistanceSeries, step: f64) -> Result<Vec<f64>> {
    check_step(series, step)?;
    Ok(series.values.windows(2).map(|w| (w[1] - w[0]) / step).collect())
}

/// Sum of the positive slopes: the cumulative size of the revivals.
pub fn degree(series: &DistanceSeries, step: f64) -> Result<f64> {
    Ok(slope_series(series, step)?.into_iter().filter(|&a| a > REVIVAL_FLOOR).fold(0.0, |acc, a| acc + a))
}

/// Degree as a function of the separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeCurve {
    pub measure: Measure,
    pub ell: usize,
    pub deltas: Vec<f64>,
    pub degrees: Vec<f64>,
    /// Time window `(start, end)` summed over for each separation.
    pub windows: Vec<(f64, f64)>,
}

impl DegreeCurve {
    pub fn mean(&self) -> f64 {
        if self.degrees.is_empty() {
            return f64::NAN;
        }
        self.degrees.iter().sum::<f64>() / self.degrees.len() as f64
    }
}

/// Separations `start, start + step, ..., stop` (inclusive, up to rounding).
pub fn delta_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(start >= 0.0) || !(stop >= start) || !stop.is_finite() {
        return Err(Error::InvalidParameter(format!("bad grid {start}:{step}:{stop}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// The default separation grid, 0.1 to 4.0 in steps of 0.1.
pub fn default_delta_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 / 10.0).collect()
}

pub fn degree_vs_delta(
    record: &EvolutionRecord,
    ell: usize,
    delta_grid: &[f64],
    measure: Measure,
    step: f64,
) -> Result<DegreeCurve> {
    if delta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("separation grid must be strictly increasing".into()));
    }
    let mut degrees = Vec::with_capacity(delta_grid.len());
    let mut windows = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let series = distance_series(record, ell, delta, measure)?;
        degrees.push(degree(&series, step)?);
        windows.push((series.times[0], *series.times.last().expect("non-empty")));
    }
    Ok(DegreeCurve {
        measure,
        ell,
        deltas: delta_grid.to_vec(),
        degrees,
        windows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Minima,
    Maxima,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaReport {
    pub positions: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `None` when fewer than two extrema were found.
    pub mean_gap: Option<f64>,
}

/// Centered moving average; the window shrinks symmetrically at the ends.
pub fn moving_average(ys: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..ys.len())
        .map(|i| {
            let h = half.min(i).min(ys.len() - 1 - i);
            let s = &ys[i - h..=i + h];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

/// Interior strict local extrema of `ys` (after smoothing) and the spacings
/// between consecutive ones.
pub fn extrema_gaps(xs: &[f64], ys: &[f64], kind: ExtremumKind, smoothing_window: usize) -> Result<ExtremaReport> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!("{} abscissae for {} values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::SeriesTooShort { need: 3, got: xs.len() });
    }
    if smoothing_window == 0 {
        return Err(Error::InvalidParameter("smoothing window must be >= 1".into()));
    }
    let h = xs[1] - xs[0];
    if !(h > 0.0) || xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::InvalidParameter("abscissae are not uniformly spaced".into()));
    }
    let smooth = moving_average(ys, smoothing_window);
    let positions: Vec<f64> = (1..smooth.len() - 1)
        .filter(|&i| {
            let (a, b, c) = (smooth[i - 1], smooth[i], smooth[i + 1]);
            match kind {
                ExtremumKind::Maxima => b > a && b > c,
                ExtremumKind::Minima => b < a && b < c,
            }
        })
        .map(|i| xs[i])
        .collect();
    let gaps: Vec<f64> = positions.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_gap = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
    Ok(ExtremaReport { positions, gaps, mean_gap })
}
