//! Uplink training: pilot sequences, the block training matrix `S = s ⊗ I_M`,
//! contaminated observations at a base station and their compression to the
//! M-dimensional matched-filter domain.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel_model::ChannelVector;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotKind {
    Constant,
    /// Unit-modulus chirp `e^{−jπ n(n+1)/τ}`, scaled to the symbol power.
    ZadoffChu,
}

/// τ pilot symbols, each with squared magnitude `P_t / τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSequence {
    symbols: Vec<Complex64>,
    total_power: f64,
}

impl PilotSequence {
    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// P_t, which is also the energy `sᴴs` of the sequence.
    pub fn total_power(&self) -> f64 {
        self.total_power
    }
}

pub fn make_pilot(tau: usize, total_power: f64, kind: PilotKind) -> Result<PilotSequence> {
    if tau == 0 {
        return Err(Error::InvalidParameter("pilot length must be >= 1".into()));
    }
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pilot power {total_power} must be > 0"
        )));
    }
    let amplitude = (total_power / tau as f64).sqrt();
    let symbols = (0..tau)
        .map(|n| match kind {
            PilotKind::Constant => Complex64::new(amplitude, 0.0),
            PilotKind::ZadoffChu => {
                let n = n as f64;
                Complex64::from_polar(amplitude, -PI * n * (n + 1.0) / tau as f64)
            }
        })
        .collect();
    Ok(PilotSequence {
        symbols,
        total_power,
    })
}

/// `(M τ) × M` block form of a pilot, `S = s ⊗ I_M`, with `SᴴS = P_t I_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrix {
    block: CMat,
    energy: f64,
}

impl TrainingMatrix {
    pub fn block(&self) -> &CMat {
        &self.block
    }

    pub fn antennas(&self) -> usize {
        self.block.ncols()
    }

    pub fn pilot_len(&self) -> usize {
        self.block.nrows() / self.block.ncols()
    }

    /// `sᴴs = P_t`.
    pub fn energy(&self) -> f64 {
        self.energy
    }
}

pub fn training_matrix(pilot: &PilotSequence, antennas: usize) -> Result<TrainingMatrix> {
    if antennas == 0 {
        return Err(Error::InvalidDimension("antenna count must be >= 1".into()));
    }
    let tau = pilot.len();
    let mut block = CMat::zeros(tau * antennas, antennas);
    for (t, &s) in pilot.symbols().iter().enumerate() {
        for m in 0..antennas {
            block[(t * antennas + m, m)] = s;
        }
    }
    let energy = pilot.symbols().iter().map(|s| s.norm_sqr()).sum();
    Ok(TrainingMatrix { block, energy })
}

/// Vectorized training block received at one base station.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub samples: CVec,
    pub noise_var: f64,
}

/// `y = S (h_target + Σ h_contaminator) + n` with `n ~ CN(0, σ² I_{Mτ})`.
pub fn received_uplink<R: Rng + ?Sized>(
    target: &ChannelVector,
    contaminators: &[ChannelVector],
    training: &TrainingMatrix,
    noise_var: f64,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    let m = training.antennas();
    if target.len() != m || contaminators.iter().any(|h| h.len() != m) {
        return Err(Error::InvalidDimension(format!(
            "channels must have {m} entries to match the training matrix"
        )));
    }
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance {noise_var} must be >= 0"
        )));
    }
    let mut total = target.clone();
    for h in contaminators {
        total += h;
    }
    let mut samples = training.block() * total;
    if noise_var > 0.0 {
        samples += linalg::complex_gaussian(samples.len(), noise_var, rng);
    }
    Ok(ReceivedBlock { samples, noise_var })
}

/// `z = Sᴴ y / P_t`: the sum of the co-pilot channels plus `CN(0, σ²/P_t I_M)` noise.
pub fn matched_filter(y: &ReceivedBlock, training: &TrainingMatrix) -> Result<ChannelVector> {
    if y.samples.len() != training.block().nrows() {
        return Err(Error::InvalidDimension(format!(
            "received block has {} samples, training matrix expects {}",
            y.samples.len(),
            training.block().nrows()
        )));
    }
    Ok(training.block().ad_mul(&y.samples) / Complex64::new(training.energy(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn unit_pilot() {
        let p = make_pilot(1, 1.0, PilotKind::Constant).unwrap();
        assert_eq!(p.symbols(), &[linalg::ONE]);
    }

    #[test]
    fn constant_pilot_has_unit_symbols() {
        let p = make_pilot(4, 4.0, PilotKind::Constant).unwrap();
        assert!(p
            .symbols()
            .iter()
            .all(|s| (*s - linalg::ONE).norm() < 1e-15));
    }

    #[test]
    fn pilot_power_adds_up() {
        for kind in [PilotKind::Constant, PilotKind::ZadoffChu] {
            let p = make_pilot(7, 3.5, kind).unwrap();
            let e: f64 = p.symbols().iter().map(|s| s.norm_sqr()).sum();
            assert!((e - 3.5).abs() < 1e-12);
            assert!(p
                .symbols()
                .iter()
                .all(|s| (s.norm_sqr() - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_length_pilot_rejected() {
        assert!(matches!(
            make_pilot(0, 1.0, PilotKind::Constant),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn kronecker_gram() {
        let p = make_pilot(2, 2.0, PilotKind::Constant).unwrap();
        let s = training_matrix(&p, 2).unwrap();
        assert_eq!(s.block().shape(), (4, 2));
        let gram = s.block().ad_mul(s.block());
        assert!((gram - linalg::identity(2).scale(2.0)).norm() < 1e-12);
    }

    #[test]
    fn single_symbol_is_identity() {
        let p = make_pilot(1, 1.0, PilotKind::Constant).unwrap();
        let s = training_matrix(&p, 3).unwrap();
        assert!((s.block() - linalg::identity(3)).norm() < 1e-15);
    }

    #[test]
    fn hand_built_column() {
        let p = PilotSequence {
            symbols: vec![linalg::ONE, Complex64::new(0.0, 1.0)],
            total_power: 2.0,
        };
        let s = training_matrix(&p, 1).unwrap();
        assert_eq!(s.block()[(1, 0)], Complex64::new(0.0, 1.0));
        assert!((s.block().ad_mul(s.block())[(0, 0)].re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_contamination() {
        let p = make_pilot(3, 3.0, PilotKind::ZadoffChu).unwrap();
        let s = training_matrix(&p, 2).unwrap();
        let h = CVec::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1)]);
        let zero = CVec::zeros(2);
        let mut rng = seeded(0);
        let y = received_uplink(&zero, std::slice::from_ref(&h), &s, 0.0, &mut rng).unwrap();
        assert!((&y.samples - s.block() * &h).norm() < 1e-15);
        let z = matched_filter(&y, &s).unwrap();
        assert!((z - h).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let p = make_pilot(2, 2.0, PilotKind::Constant).unwrap();
        let s = training_matrix(&p, 3).unwrap();
        let h = CVec::zeros(2);
        assert!(matches!(
            received_uplink(&h, &[], &s, 1.0, &mut seeded(0)),
            Err(Error::InvalidDimension(_))
        ));
        let y = ReceivedBlock {
            samples: CVec::zeros(5),
            noise_var: 1.0,
        };
        assert!(matched_filter(&y, &s).is_err());
    }

    #[test]
    fn matched_filter_is_linear() {
        let p = make_pilot(3, 3.0, PilotKind::ZadoffChu).unwrap();
        let s = training_matrix(&p, 2).unwrap();
        let mut rng = seeded(4);
        let a = linalg::complex_gaussian(6, 1.0, &mut rng);
        let b = linalg::complex_gaussian(6, 1.0, &mut rng);
        let y = |v: CVec| ReceivedBlock {
            samples: v,
            noise_var: 1.0,
        };
        let lhs = matched_filter(&y(&a + &b), &s).unwrap();
        let rhs = matched_filter(&y(a), &s).unwrap() + matched_filter(&y(b), &s).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
