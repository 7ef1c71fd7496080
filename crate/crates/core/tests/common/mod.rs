//! Exact-arithmetic reference model of the differential charge-redistribution
//! converter, written from node equations rather than shared with the crate.
//!
//! Capacitances are integers (in unit capacitors), the input is a rational
//! p/q of full scale and Vref = 1. Every top-plate voltage is an integer
//! numerator over `C_T * q`, so codes and energies come out exact.

#![allow(dead_code)]

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Conventional,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Main(u32),
    MainDummy,
    Replica(u32),
    ReplicaDummy,
}

fn layout(arch: Arch, bits: u32) -> Vec<Role> {
    match arch {
        Arch::Conventional => (0..bits)
            .rev()
            .map(Role::Main)
            .chain([Role::MainDummy])
            .collect(),
        Arch::Split => (0..bits - 1)
            .rev()
            .map(Role::Replica)
            .chain([Role::ReplicaDummy])
            .chain((0..bits - 1).rev().map(Role::Main))
            .chain([Role::MainDummy])
            .collect(),
    }
}

fn weight(role: Role) -> i128 {
    match role {
        Role::Main(k) | Role::Replica(k) => 1 << k,
        Role::MainDummy | Role::ReplicaDummy => 1,
    }
}

/// Result of one conversion: the code and, per switching event, the
/// reference energy in C_unit·Vref² (event 0 is the set-up after sampling).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConversion {
    pub code: u32,
    pub energies: Vec<f64>,
}

struct Side {
    caps: Vec<i128>,
    total: i128,
    /// Bottom-plate voltages times `den`.
    bottoms: Vec<i128>,
    /// Top-plate voltage times `den`.
    top: i128,
    /// Input voltage times `den` during sampling.
    den: i128,
}

impl Side {
    fn sample(caps: Vec<i128>, p: i128, q: i128) -> Self {
        let total: i128 = caps.iter().sum();
        let den = total * q;
        let v_in = p * total;
        let n = caps.len();
        Side {
            caps,
            total,
            bottoms: vec![v_in; n],
            top: 0,
            den,
        }
    }

    /// Charge on the top plate is -sum(c_i) * v_in from sampling; after the
    /// bottoms move to `levels`, top = (sum c_i b_i)/C_T - v_in.
    /// Returns the energy numerator (over `den`).
    fn drive(&mut self, levels: &[bool], sampled_input: i128) -> i128 {
        let driven: i128 = self
            .caps
            .iter()
            .zip(levels)
            .filter(|(_, &l)| l)
            .map(|(c, _)| *c)
            .sum();
        let new_top = driven * (self.den / self.total) - sampled_input;
        let mut energy = 0;
        for ((c, b), &l) in self.caps.iter().zip(self.bottoms.iter_mut()).zip(levels) {
            let new_b = if l { self.den } else { 0 };
            if l {
                energy += c * ((new_b - new_top) - (*b - self.top));
            }
            *b = new_b;
        }
        self.top = new_top;
        energy
    }
}

/// Converts input `p/q` of full scale with the given per-slot capacitances
/// (positive and negative halves, in slot order of [`slot_weights`]).
pub fn convert_with(
    arch: Arch,
    bits: u32,
    caps_p: &[i128],
    caps_n: &[i128],
    p: i128,
    q: i128,
) -> OracleConversion {
    let roles = layout(arch, bits);
    assert_eq!(roles.len(), caps_p.len());
    assert_eq!(caps_p.iter().sum::<i128>(), caps_n.iter().sum::<i128>());
    let mut pos = Side::sample(caps_p.to_vec(), p, q);
    let mut neg = Side::sample(caps_n.to_vec(), q - p, q);
    let den = pos.den;
    let in_p = p * pos.total;
    let in_n = (q - p) * neg.total;

    let find = |r: Role| roles.iter().position(|&x| x == r).unwrap();
    let mut levels: Vec<bool> = roles
        .iter()
        .map(|r| match (arch, r) {
            (Arch::Conventional, Role::Main(k)) => *k == bits - 1,
            (Arch::Split, Role::Replica(_) | Role::ReplicaDummy) => true,
            _ => false,
        })
        .collect();

    let step = |levels: &[bool], pos: &mut Side, neg: &mut Side| {
        let comp: Vec<bool> = levels.iter().map(|l| !l).collect();
        let e = pos.drive(levels, in_p) + neg.drive(&comp, in_n);
        e as f64 / den as f64
    };

    let mut energies = vec![step(&levels, &mut pos, &mut neg)];
    let mut code = 0u32;
    for k in (0..bits).rev() {
        let one = pos.top - neg.top <= 0;
        if one {
            code |= 1 << k;
        }
        if k == 0 {
            break;
        }
        match (arch, one) {
            (Arch::Conventional, true) => levels[find(Role::Main(k - 1))] = true,
            (Arch::Conventional, false) => {
                levels[find(Role::Main(k))] = false;
                levels[find(Role::Main(k - 1))] = true;
            }
            (Arch::Split, true) => levels[find(Role::Main(k - 1))] = true,
            (Arch::Split, false) => levels[find(Role::Replica(k - 1))] = false,
        }
        energies.push(step(&levels, &mut pos, &mut neg));
    }
    OracleConversion { code, energies }
}

/// Nominal per-slot capacitances in unit capacitors.
pub fn slot_weights(arch: Arch, bits: u32) -> Vec<i128> {
    layout(arch, bits).into_iter().map(weight).collect()
}

/// Ideal-array conversion of input `p/q` of full scale.
pub fn convert(arch: Arch, bits: u32, p: i128, q: i128) -> OracleConversion {
    let w = slot_weights(arch, bits);
    convert_with(arch, bits, &w, &w, p, q)
}

/// Mean total energy over all bin-centre inputs.
pub fn average_energy(arch: Arch, bits: u32) -> f64 {
    let levels = 1i128 << bits;
    let sum: f64 = (0..levels)
        .map(|c| {
            convert(arch, bits, 2 * c + 1, 2 * levels)
                .energies
                .iter()
                .sum::<f64>()
        })
        .sum();
    sum / levels as f64
}
