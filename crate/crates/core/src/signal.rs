//! Multichannel sampled signals and dense-grid index windows.

use std::ops::RangeInclusive;

use crate::stl::Interval;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("signal has no samples")]
    Empty,
    #[error("sample times must be strictly increasing (at index {0})")]
    NonMonotoneTime(usize),
    #[error("non-finite value at sample {sample}, channel `{channel}`")]
    NonFinite { sample: usize, channel: String },
    #[error("expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
}

/// Row-major table of samples: one row per time, one column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    times: Vec<f64>,
    channels: Vec<String>,
    data: Vec<f64>,
}

impl Signal {
    pub fn new(times: Vec<f64>, channels: Vec<String>, data: Vec<f64>) -> Result<Self, SignalError> {
        if times.is_empty() {
            return Err(SignalError::Empty);
        }
        let expected = times.len() * channels.len();
        if data.len() != expected {
            return Err(SignalError::Shape {
                expected,
                found: data.len(),
            });
        }
        for (i, name) in channels.iter().enumerate() {
            if channels[..i].contains(name) {
                return Err(SignalError::DuplicateChannel(name.clone()));
            }
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(SignalError::NonMonotoneTime(i + 1));
            }
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(SignalError::NonMonotoneTime(i));
        }
        let width = channels.len().max(1);
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite {
                sample: k / width,
                channel: channels[k % width].clone(),
            });
        }
        Ok(Self {
            times,
            channels,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn width(&self) -> usize {
        self.channels.len()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let w = self.width();
        &self.data[m * w..(m + 1) * w]
    }

    pub fn value(&self, m: usize, channel: usize) -> f64 {
        self.data[m * self.width() + channel]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Absolute tolerance used when matching window endpoints to samples.
    pub fn time_tolerance(&self) -> f64 {
        1e-9 * self.times.last().unwrap().abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WindowError {
    #[error("window [{start}, {end}] leaves the horizon [{first}, {last}]")]
    OutsideHorizon {
        start: f64,
        end: f64,
        first: f64,
        last: f64,
    },
    #[error("window endpoint {0} does not coincide with a sample time")]
    OffGrid(f64),
    #[error("window [{0}, {1}] contains no samples")]
    Empty(f64, f64),
}

/// Samples `m` with `t_m` in `[t_anchor + a, t_anchor + b]`, endpoints
/// inclusive within `tol`. Both endpoints must coincide with sample times.
pub fn index_set(
    anchor: usize,
    iv: Interval,
    times: &[f64],
    tol: f64,
) -> Result<RangeInclusive<usize>, WindowError> {
    let t0 = times[anchor];
    let (start, end) = (t0 + iv.lo(), t0 + iv.hi());
    let (first, last) = (times[0], *times.last().unwrap());
    if end > last + tol || start < first - tol {
        return Err(WindowError::OutsideHorizon {
            start,
            end,
            first,
            last,
        });
    }
    let lo = times.partition_point(|&t| t < start - tol);
    let hi = times.partition_point(|&t| t <= end + tol);
    if lo >= hi {
        return Err(WindowError::Empty(start, end));
    }
    if (times[lo] - start).abs() > tol {
        return Err(WindowError::OffGrid(start));
    }
    if (times[hi - 1] - end).abs() > tol {
        return Err(WindowError::OffGrid(end));
    }
    Ok(lo..=hi - 1)
}
