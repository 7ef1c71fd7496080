use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AdcConfig, AdcError, Architecture};

/// Role of one switchable capacitor in the DAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Binary-weighted capacitor for bit `k` (weight `2^k` units).
    Main(u32),
    MainDummy,
    /// Split-MSB replica of bit `k` (weight `2^k` units), precharged to the reference.
    Replica(u32),
    ReplicaDummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Half {
    Positive,
    Negative,
}

impl Half {
    pub(crate) fn index(self) -> usize {
        match self {
            Half::Positive => 0,
            Half::Negative => 1,
        }
    }
}

const MAX_RESAMPLES: usize = 64;

/// Capacitor DAC for both halves of the differential converter, tracked at
/// unit-capacitor granularity so mismatch can be drawn per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct CapArray {
    bits: u32,
    unit_capacitance: f64,
    architecture: Architecture,
    slots: Vec<Slot>,
    weights: Vec<u64>,
    /// Multiplicative deviation of every unit capacitor, per half.
    mismatch: [Vec<f64>; 2],
}

impl CapArray {
    pub fn new(
        bits: u32,
        unit_capacitance: f64,
        architecture: Architecture,
    ) -> Result<Self, AdcError> {
        if !(2..=super::MAX_BITS).contains(&bits) {
            return Err(AdcError::InvalidConfig(format!(
                "bits must be >= 2, got {bits}"
            )));
        }
        if !(unit_capacitance > 0.0) {
            return Err(AdcError::InvalidConfig(
                "unit capacitance must be positive".into(),
            ));
        }
        let mut slots = Vec::new();
        match architecture {
            Architecture::Conventional => {
                slots.extend((0..bits).rev().map(Slot::Main));
                slots.push(Slot::MainDummy);
            }
            Architecture::SplitMsb => {
                slots.extend((0..bits - 1).rev().map(Slot::Replica));
                slots.push(Slot::ReplicaDummy);
                slots.extend((0..bits - 1).rev().map(Slot::Main));
                slots.push(Slot::MainDummy);
            }
        }
        let weights: Vec<u64> = slots
            .iter()
            .map(|s| match *s {
                Slot::Main(k) | Slot::Replica(k) => 1u64 << k,
                Slot::MainDummy | Slot::ReplicaDummy => 1,
            })
            .collect();
        let units = weights.iter().sum::<u64>() as usize;
        debug_assert_eq!(units, 1 << bits);
        Ok(Self {
            bits,
            unit_capacitance,
            architecture,
            slots,
            weights,
            mismatch: [vec![1.0; units], vec![1.0; units]],
        })
    }

    pub fn ideal(config: &AdcConfig) -> Result<Self, AdcError> {
        config.validate()?;
        Self::new(config.bits, config.unit_capacitance, config.architecture)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn unit_capacitance(&self) -> f64 {
        self.unit_capacitance
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn unit_count(&self) -> usize {
        self.mismatch[0].len()
    }

    pub fn mismatch(&self, half: Half) -> &[f64] {
        &self.mismatch[half.index()]
    }

    pub fn position(&self, slot: Slot) -> Option<usize> {
        self.slots.iter().position(|&s| s == slot)
    }

    /// Nominal capacitance of every slot, in farads.
    pub fn nominal_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|&w| w as f64 * self.unit_capacitance)
            .collect()
    }

    /// Effective capacitance of every slot in units of the unit capacitor.
    pub fn relative_capacitances(&self, half: Half) -> Vec<f64> {
        let m = &self.mismatch[half.index()];
        let mut out = Vec::with_capacity(self.slots.len());
        let mut start = 0usize;
        for &w in &self.weights {
            let end = start + w as usize;
            out.push(m[start..end].iter().sum());
            start = end;
        }
        out
    }

    pub fn capacitances(&self, half: Half) -> Vec<f64> {
        self.relative_capacitances(half)
            .into_iter()
            .map(|c| c * self.unit_capacitance)
            .collect()
    }

    pub fn total_capacitance(&self, half: Half) -> f64 {
        self.mismatch[half.index()].iter().sum::<f64>() * self.unit_capacitance
    }

    /// Scales every unit of one slot on one half.
    pub fn scale_slot(&mut self, half: Half, slot: Slot, factor: f64) -> Result<(), AdcError> {
        if !(factor > 0.0) {
            return Err(AdcError::Mismatch(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let pos = self
            .position(slot)
            .ok_or_else(|| AdcError::ArrayMismatch(format!("{slot:?} not present")))?;
        let start: usize = self.weights[..pos].iter().sum::<u64>() as usize;
        let end = start + self.weights[pos] as usize;
        for m in &mut self.mismatch[half.index()][start..end] {
            *m *= factor;
        }
        Ok(())
    }

    pub fn check_against(&self, config: &AdcConfig) -> Result<(), AdcError> {
        if self.bits != config.bits || self.architecture != config.architecture {
            return Err(AdcError::ArrayMismatch(format!(
                "array is {}-bit {}, converter is {}-bit {}",
                self.bits, self.architecture, config.bits, config.architecture
            )));
        }
        Ok(())
    }
}

/// Multiplies each unit capacitor by an independent `N(1, sigma)` draw.
pub fn apply_mismatch(array: &CapArray, sigma: f64, seed: u64) -> Result<CapArray, AdcError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(AdcError::Mismatch(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(array.clone());
    }
    let normal = Normal::new(1.0, sigma).map_err(|e| AdcError::Mismatch(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = array.clone();
    for half in &mut out.mismatch {
        for m in half.iter_mut() {
            let draw = (0..MAX_RESAMPLES)
                .map(|_| normal.sample(&mut rng))
                .find(|&x| x > 0.0)
                .ok_or_else(|| {
                    AdcError::Mismatch(format!(
                        "no positive capacitance after {MAX_RESAMPLES} draws at sigma {sigma}"
                    ))
                })?;
            *m *= draw;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conventional_layout() {
        let a = CapArray::new(3, 1.0, Architecture::Conventional).unwrap();
        assert_eq!(a.nominal_weights(), vec![4.0, 2.0, 1.0, 1.0]);
        assert_eq!(a.slots()[0], Slot::Main(2));
        assert_eq!(*a.slots().last().unwrap(), Slot::MainDummy);
    }

    #[test]
    fn split_layout_replaces_msb_with_replica() {
        let a = CapArray::new(4, 1.0, Architecture::SplitMsb).unwrap();
        assert_eq!(
            a.nominal_weights(),
            vec![4.0, 2.0, 1.0, 1.0, 4.0, 2.0, 1.0, 1.0]
        );
        assert!(a.position(Slot::Main(3)).is_none());
        assert_eq!(a.unit_count(), 16);
        assert_eq!(a.total_capacitance(Half::Negative), 16.0);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let a = CapArray::new(8, 30e-15, Architecture::SplitMsb).unwrap();
        assert_eq!(apply_mismatch(&a, 0.0, 7).unwrap(), a);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = CapArray::new(8, 30e-15, Architecture::Conventional).unwrap();
        let x = apply_mismatch(&a, 0.02, 42).unwrap();
        let y = apply_mismatch(&a, 0.02, 42).unwrap();
        let z = apply_mismatch(&a, 0.02, 43).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn negative_sigma_rejected() {
        let a = CapArray::new(4, 1.0, Architecture::Conventional).unwrap();
        assert!(apply_mismatch(&a, -0.1, 0).is_err());
    }

    #[test]
    fn huge_sigma_still_positive() {
        let a = CapArray::new(6, 1.0, Architecture::Conventional).unwrap();
        let m = apply_mismatch(&a, 1.0, 3).unwrap();
        assert!(m.mismatch(Half::Positive).iter().all(|&x| x > 0.0));
    }

    /// Total capacitance of N units with sigma per unit has relative std sigma / sqrt(N).
    #[test]
    fn total_capacitance_spread_follows_clt() {
        let a = CapArray::new(8, 1.0, Architecture::Conventional).unwrap();
        let n_units = a.unit_count() as f64;
        let totals: Vec<f64> = (0..1000)
            .map(|seed| {
                apply_mismatch(&a, 0.01, seed)
                    .unwrap()
                    .total_capacitance(Half::Positive)
            })
            .collect();
        let mean = totals.iter().sum::<f64>() / totals.len() as f64;
        let var =
            totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (totals.len() - 1) as f64;
        let rel_std = var.sqrt() / mean;
        let predicted = 0.01 / n_units.sqrt();
        assert!(
            (rel_std / predicted - 1.0).abs() < 0.2,
            "{rel_std} vs {predicted}"
        );
    }

    #[test]
    fn scale_slot_hits_only_that_slot() {
        let mut a = CapArray::new(4, 1.0, Architecture::Conventional).unwrap();
        a.scale_slot(Half::Positive, Slot::Main(1), 1.01).unwrap();
        let c = a.relative_capacitances(Half::Positive);
        assert_eq!(c, vec![8.0, 4.0, 2.0 * 1.01, 1.0, 1.0]);
        assert_eq!(
            a.relative_capacitances(Half::Negative),
            vec![8.0, 4.0, 2.0, 1.0, 1.0]
        );
    }
}
