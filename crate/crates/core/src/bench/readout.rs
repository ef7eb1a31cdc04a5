use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cell::EquilibriumCell;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Fixed random linear classifier on top of a state.
///
/// Flat cells get one `k × dz` head over the whole state. Multiscale cells get
/// a `k × channels` head applied at every position of the finest scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutHead {
    r: Matrix,
    /// `(positions, channels)` of the finest scale for multiscale cells.
    per_position: Option<(usize, usize)>,
    dz: usize,
}

impl ReadoutHead {
    pub fn new(seed: u64, classes: usize, cell: &EquilibriumCell) -> Result<Self> {
        let dz = cell.dz();
        if classes < 2 {
            return Err(Error::InvalidParameter(format!("readout needs at least 2 classes, got {classes}")));
        }
        if classes > dz {
            return Err(Error::InvalidParameter(format!("{classes} classes exceed state dimension {dz}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, per_position) = match cell.layout() {
            Some(layout) if layout.scales.len() > 1 => {
                let finest = layout.finest();
                (
                    Matrix::standard_normal(classes, finest.channels, &mut rng),
                    Some((finest.positions(), finest.channels)),
                )
            }
            _ => (Matrix::standard_normal(classes, dz, &mut rng), None),
        };
        Ok(ReadoutHead { r, per_position, dz })
    }

    pub fn classes(&self) -> usize {
        self.r.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.r
    }

    fn argmax(&self, z: &[f64]) -> usize {
        let scores = self.r.apply(z);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        best
    }
}

/// Fraction of positions whose predicted class under `head` agrees between
/// `z` and `z_ref`; 0 or 1 for flat cells.
pub fn label_agreement(head: &ReadoutHead, z: &Vector, z_ref: &Vector) -> Result<f64> {
    if z.len() != head.dz || z_ref.len() != head.dz {
        return Err(Error::dims(
            "label_agreement",
            format!("{} and {}", z.len(), z_ref.len()),
            format!("head dimension {}", head.dz),
        ));
    }
    match head.per_position {
        None => Ok(f64::from(u8::from(head.argmax(z) == head.argmax(z_ref)))),
        Some((positions, channels)) => {
            let agree = (0..positions)
                .filter(|p| {
                    let block = p * channels..(p + 1) * channels;
                    head.argmax(&z[block.clone()]) == head.argmax(&z_ref[block])
                })
                .count();
            Ok(agree as f64 / positions as f64)
        }
    }
}
