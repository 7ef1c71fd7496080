use super::array::{CapArray, Half};
use super::switching::run_normalized;
use super::{AdcConfig, AdcError};

/// Transition voltages are bisected down to LSB / 2^10.
pub const TRANSITION_RESOLUTION_BITS: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    /// `transitions[k - 1]` is the lowest input producing a code >= k, k = 1..2^bits-1.
    pub transitions: Vec<f64>,
    /// Per code 1..2^bits-2, in endpoint-fit LSB.
    pub dnl: Vec<f64>,
    /// Per transition 1..2^bits-1, in endpoint-fit LSB.
    pub inl: Vec<f64>,
    pub missing_codes: Vec<u32>,
}

impl LinearityReport {
    pub fn max_abs_inl(&self) -> f64 {
        self.inl.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_dnl(&self) -> f64 {
        self.dnl.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn inl_range(&self) -> (f64, f64) {
        min_max(&self.inl)
    }

    pub fn dnl_range(&self) -> (f64, f64) {
        min_max(&self.dnl)
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Transition-voltage INL/DNL of the charge-level converter.
///
/// Bisection runs on the normalized input so that, for an ideal array, every
/// transition lands exactly on a bisection point.
pub fn measure_inl_dnl(config: &AdcConfig, array: &CapArray) -> Result<LinearityReport, AdcError> {
    config.validate()?;
    array.check_against(config)?;
    let p = array.relative_capacitances(Half::Positive);
    let n = array.relative_capacitances(Half::Negative);
    let code_at =
        |u: f64| run_normalized(&p, &n, array.slots(), array.architecture(), array.bits(), u).code;

    let levels = config.levels();
    let resolution = 1.0 / (levels as f64 * (1u64 << TRANSITION_RESOLUTION_BITS) as f64);
    let mut normalized = Vec::with_capacity(levels as usize - 1);
    for k in 1..levels {
        // SAR codes are monotone in the input, so the search is well posed.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if code_at(lo) >= k {
            normalized.push(lo);
            continue;
        }
        if code_at(hi) < k {
            normalized.push(hi);
            continue;
        }
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            if code_at(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        normalized.push(hi);
    }

    let last = normalized.len() - 1;
    let lsb_fit = (normalized[last] - normalized[0]) / (levels as f64 - 2.0);
    let mut missing_codes = Vec::new();
    let dnl: Vec<f64> = (0..last)
        .map(|i| {
            let width = normalized[i + 1] - normalized[i];
            if width < resolution {
                missing_codes.push(i as u32 + 1);
                -1.0
            } else {
                width / lsb_fit - 1.0
            }
        })
        .collect();
    let inl = normalized
        .iter()
        .enumerate()
        .map(|(i, &t)| (t - normalized[0]) / lsb_fit - i as f64)
        .collect();
    let transitions = normalized.iter().map(|&u| config.denormalize(u)).collect();
    Ok(LinearityReport {
        transitions,
        dnl,
        inl,
        missing_codes,
    })
}
