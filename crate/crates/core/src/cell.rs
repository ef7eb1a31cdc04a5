//! Weight-tied equilibrium cells `f(z; x) = φ(A·z + U·x + b)`.
//!
//! The state map `A` is rescaled to spectral norm `gamma < 1` at
//! construction. Both activations are 1-Lipschitz, so every cell is a strict
//! contraction in `z` with constant `gamma` and owns a unique fixed point for
//! every input.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

pub const DEFAULT_GAMMA: f64 = 0.9;

/// Upper bound on power iterations used when normalizing `A`.
const NORMALIZE_MAX_ITERS: usize = 20_000;
/// Slack allowed between the declared `gamma` and a loaded matrix's norm.
const SPECTRAL_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Identity,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ActivationKind::Tanh => v.tanh(),
            ActivationKind::Identity => v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Identity => "identity",
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(ActivationKind::Tanh),
            "identity" => Ok(ActivationKind::Identity),
            _ => Err(Error::UnknownName {
                kind: "activation",
                name: s.into(),
            }),
        }
    }
}

/// One resolution level of a multiscale state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Scale {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Scale {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Scale {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }
}

impl From<[usize; 3]> for Scale {
    fn from([h, w, c]: [usize; 3]) -> Self {
        Scale::new(h, w, c)
    }
}

impl From<Scale> for [usize; 3] {
    fn from(s: Scale) -> Self {
        [s.height, s.width, s.channels]
    }
}

/// Finest-first list of scales. The state vector concatenates scales in
/// order; within a scale entries are position-major, channel-minor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiscaleLayout {
    pub scales: Vec<Scale>,
}

impl MultiscaleLayout {
    pub fn new(scales: Vec<Scale>) -> Result<Self> {
        let layout = MultiscaleLayout { scales };
        layout.validate()?;
        Ok(layout)
    }

    /// Builds `levels` scales from the finest one by halving (ceil) the
    /// spatial dims and keeping the channel count.
    pub fn pyramid(finest: Scale, levels: usize) -> Result<Self> {
        let mut scales = vec![finest];
        for _ in 1..levels {
            let prev = *scales.last().unwrap();
            scales.push(Scale::new(
                prev.height.div_ceil(2),
                prev.width.div_ceil(2),
                prev.channels,
            ));
        }
        MultiscaleLayout::new(scales)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidParameter("layout needs at least one scale".into()));
        }
        if self.scales.iter().any(Scale::is_empty) {
            return Err(Error::InvalidParameter("layout scale with zero extent".into()));
        }
        for pair in self.scales.windows(2) {
            let (fine, coarse) = (pair[0], pair[1]);
            if coarse.height != fine.height.div_ceil(2) || coarse.width != fine.width.div_ceil(2) {
                return Err(Error::InvalidParameter(format!(
                    "scale {}x{} does not halve {}x{}",
                    coarse.height, coarse.width, fine.height, fine.width
                )));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.scales.iter().map(Scale::len).sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        self.scales
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s.len();
                Some(o)
            })
            .collect()
    }

    pub fn finest(&self) -> Scale {
        self.scales[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumCell {
    a: Matrix,
    u: Matrix,
    b: Vector,
    activation: ActivationKind,
    gamma: f64,
    seed: u64,
    layout: Option<MultiscaleLayout>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

fn normalize(a: Matrix, gamma: f64, seed: u64) -> Result<Matrix> {
    let sigma = linalg::spectral_norm_converged(&a, NORMALIZE_MAX_ITERS, seed);
    if sigma == 0.0 {
        return Err(Error::InvalidParameter("state map is identically zero".into()));
    }
    Ok(a.scale(gamma / sigma))
}

/// Random contractive cell: `A`, `U`, `b` i.i.d. standard normal from the
/// seeded generator (in that order), then `A ← gamma·A/σ_max(A)`.
pub fn make_random_cell(
    seed: u64,
    dz: usize,
    dx: usize,
    gamma: f64,
    activation: ActivationKind,
) -> Result<EquilibriumCell> {
    check_gamma(gamma)?;
    if dz == 0 || dx == 0 {
        return Err(Error::InvalidParameter("cell dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::standard_normal(dz, dz, &mut rng);
    let u = Matrix::standard_normal(dz, dx, &mut rng);
    let b = Vector::standard_normal(dz, &mut rng);
    Ok(EquilibriumCell {
        a: normalize(a, gamma, seed)?,
        u,
        b,
        activation,
        gamma,
        seed,
        layout: None,
    })
}

/// Multiscale cell over the concatenated state of `layout`.
///
/// Diagonal blocks of `A` are dense random per-scale mixing; the blocks
/// between adjacent scales are fixed average-pool (fine → coarse) and
/// nearest-neighbour upsampling (coarse → fine) maps. The assembled matrix is
/// normalized once, globally.
pub fn make_multiscale_cell(
    seed: u64,
    layout: &MultiscaleLayout,
    dx: usize,
    gamma: f64,
    activation: ActivationKind,
) -> Result<EquilibriumCell> {
    check_gamma(gamma)?;
    layout.validate()?;
    if dx == 0 {
        return Err(Error::InvalidParameter("cell dimensions must be positive".into()));
    }
    let dz = layout.state_dim();
    let offsets = layout.offsets();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Matrix::zeros(dz, dz);
    for (scale, &off) in layout.scales.iter().zip(&offsets) {
        let n = scale.len();
        for r in 0..n {
            for c in 0..n {
                a.set(off + r, off + c, StandardNormal.sample(&mut rng));
            }
        }
    }
    for s in 0..layout.scales.len().saturating_sub(1) {
        let (fine, coarse) = (layout.scales[s], layout.scales[s + 1]);
        let (fine_off, coarse_off) = (offsets[s], offsets[s + 1]);
        for (row, col, w) in pool_entries(fine, coarse) {
            a.set(coarse_off + row, fine_off + col, w);
        }
        for (row, col, w) in upsample_entries(coarse, fine) {
            a.set(fine_off + row, coarse_off + col, w);
        }
    }
    let u = Matrix::standard_normal(dz, dx, &mut rng);
    let b = Vector::standard_normal(dz, &mut rng);
    Ok(EquilibriumCell {
        a: normalize(a, gamma, seed)?,
        u,
        b,
        activation,
        gamma,
        seed,
        layout: Some(layout.clone()),
    })
}

/// Average-pool entries `(coarse index, fine index, weight)`. Coarse channel
/// `ch` reads fine channel `ch mod fine.channels`; windows clipped at the
/// border average over the pixels that exist.
fn pool_entries(fine: Scale, coarse: Scale) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..coarse.height {
        for j in 0..coarse.width {
            let window: Vec<(usize, usize)> = (2 * i..(2 * i + 2).min(fine.height))
                .flat_map(|fi| (2 * j..(2 * j + 2).min(fine.width)).map(move |fj| (fi, fj)))
                .collect();
            let w = 1.0 / window.len() as f64;
            for ch in 0..coarse.channels {
                for &(fi, fj) in &window {
                    out.push((coarse.index(i, j, ch), fine.index(fi, fj, ch % fine.channels), w));
                }
            }
        }
    }
    out
}

/// Nearest-neighbour upsampling entries `(fine index, coarse index, 1)`.
fn upsample_entries(coarse: Scale, fine: Scale) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..fine.height {
        for j in 0..fine.width {
            for ch in 0..fine.channels {
                out.push((fine.index(i, j, ch), coarse.index(i / 2, j / 2, ch % coarse.channels), 1.0));
            }
        }
    }
    out
}

impl EquilibriumCell {
    /// Assembles a cell from explicit parts. `A` must already satisfy the
    /// `gamma` spectral bound.
    pub fn from_parts(
        a: Matrix,
        u: Matrix,
        b: Vector,
        activation: ActivationKind,
        gamma: f64,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        let dz = a.rows();
        if a.cols() != dz {
            return Err(Error::dims("cell", format!("A {}x{}", a.rows(), a.cols()), "square"));
        }
        if u.rows() != dz || b.len() != dz {
            return Err(Error::dims(
                "cell",
                format!("A {dz}x{dz}"),
                format!("U {}x{}, b len {}", u.rows(), u.cols(), b.len()),
            ));
        }
        let sigma = linalg::spectral_norm_converged(&a, NORMALIZE_MAX_ITERS, 0);
        if sigma > gamma + SPECTRAL_SLACK {
            return Err(Error::InvalidParameter(format!(
                "state map has spectral norm {sigma} > gamma {gamma}"
            )));
        }
        Ok(EquilibriumCell {
            a,
            u,
            b,
            activation,
            gamma,
            seed: 0,
            layout: None,
        })
    }

    pub fn dz(&self) -> usize {
        self.a.rows()
    }

    pub fn dx(&self) -> usize {
        self.u.cols()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn layout(&self) -> Option<&MultiscaleLayout> {
        self.layout.as_ref()
    }

    pub fn state_map(&self) -> &Matrix {
        &self.a
    }

    pub fn injection_map(&self) -> &Matrix {
        &self.u
    }

    pub fn bias(&self) -> &Vector {
        &self.b
    }

    pub(crate) fn check_dims(&self, z: &[f64], x: &[f64]) -> Result<()> {
        if z.len() != self.dz() {
            return Err(Error::dims("cell_apply", format!("dz {}", self.dz()), format!("z len {}", z.len())));
        }
        if x.len() != self.dx() {
            return Err(Error::dims("cell_apply", format!("dx {}", self.dx()), format!("x len {}", x.len())));
        }
        Ok(())
    }

    /// Input-dependent part `U·x + b`, constant over a solve.
    pub(crate) fn injection(&self, x: &[f64]) -> Vec<f64> {
        self.u
            .apply(x)
            .into_iter()
            .zip(self.b.iter())
            .map(|(ux, b)| ux + b)
            .collect()
    }

    /// `φ(A·z + injection)`.
    pub(crate) fn apply_injected(&self, z: &[f64], injection: &[f64]) -> Vec<f64> {
        let act = self.activation;
        self.a
            .apply(z)
            .into_iter()
            .zip(injection)
            .map(|(az, inj)| act.apply(az + inj))
            .collect()
    }

    pub fn apply(&self, z: &Vector, x: &Vector) -> Result<Vector> {
        self.check_dims(z, x)?;
        let out = self.apply_injected(z, &self.injection(x));
        Vector::new(out)
    }

    pub fn residual(&self, z: &Vector, x: &Vector) -> Result<Vector> {
        self.apply(z, x)?.sub(z)
    }

    /// Solves `(I − A)·z = U·x + b` directly. Only defined for the identity
    /// activation, where this is the unique fixed point.
    pub fn analytic_fixed_point(&self, x: &Vector) -> Result<Vector> {
        if self.activation != ActivationKind::Identity {
            return Err(Error::InvalidParameter(
                "analytic fixed point requires the identity activation".into(),
            ));
        }
        self.check_dims(&vec![0.0; self.dz()], x)?;
        let n = self.dz();
        let mut m = Matrix::identity(n);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, m.get(r, c) - self.a.get(r, c));
            }
        }
        m.solve(&Vector::from_raw(self.injection(x)))
    }

    /// Counts pairs violating `‖f(z₁;x) − f(z₂;x)‖ ≤ gamma·‖z₁ − z₂‖` over
    /// `pairs` seeded Gaussian triples. The comparison allows relative
    /// rounding slack of `1e-12`.
    pub fn lipschitz_violations(&self, pairs: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..pairs)
            .filter(|_| {
                let z1 = Vector::standard_normal(self.dz(), &mut rng);
                let z2 = Vector::standard_normal(self.dz(), &mut rng);
                let x = Vector::standard_normal(self.dx(), &mut rng);
                let inj = self.injection(&x);
                let lhs = linalg::sq_distance_raw(&self.apply_injected(&z1, &inj), &self.apply_injected(&z2, &inj)).sqrt();
                let rhs = self.gamma * linalg::sq_distance_raw(&z1, &z2).sqrt();
                lhs > rhs * (1.0 + 1e-12)
            })
            .count()
    }

    pub fn to_toml(&self) -> String {
        let file = CellFile {
            seed: self.seed,
            dz: self.dz(),
            dx: self.dx(),
            gamma: self.gamma,
            activation: self.activation,
            layout: self.layout.clone(),
            a: self.a.as_slice().to_vec(),
            u: self.u.as_slice().to_vec(),
            b: self.b.as_slice().to_vec(),
        };
        toml::to_string(&file).expect("cell serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<string>"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let file: CellFile = toml::from_str(text).map_err(|e| Error::parse(path, e))?;
        if let Some(layout) = &file.layout {
            layout.validate()?;
            if layout.state_dim() != file.dz {
                return Err(Error::parse(path, format!("layout state dim {} != dz {}", layout.state_dim(), file.dz)));
            }
        }
        let a = Matrix::new(file.dz, file.dz, file.a)?;
        let u = Matrix::new(file.dz, file.dx, file.u)?;
        let b = Vector::new(file.b)?;
        let mut cell = EquilibriumCell::from_parts(a, u, b, file.activation, file.gamma)?;
        cell.seed = file.seed;
        cell.layout = file.layout;
        Ok(cell)
    }
}

/// On-disk cell description. Matrices are row-major.
#[derive(Serialize, Deserialize)]
struct CellFile {
    seed: u64,
    dz: usize,
    dx: usize,
    gamma: f64,
    activation: ActivationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<MultiscaleLayout>,
    a: Vec<f64>,
    u: Vec<f64>,
    b: Vec<f64>,
}

pub fn cell_apply(cell: &EquilibriumCell, z: &Vector, x: &Vector) -> Result<Vector> {
    cell.apply(z, x)
}

/// `g(z; x) = f(z; x) − z`.
pub fn residual(cell: &EquilibriumCell, z: &Vector, x: &Vector) -> Result<Vector> {
    cell.residual(z, x)
}

pub fn analytic_fixed_point(cell: &EquilibriumCell, x: &Vector) -> Result<Vector> {
    cell.analytic_fixed_point(x)
}

#[cfg(test)]
pub(crate) fn scalar_cell(a: f64, u: f64, b: f64, activation: ActivationKind) -> EquilibriumCell {
    EquilibriumCell::from_parts(
        Matrix::new(1, 1, vec![a]).unwrap(),
        Matrix::new(1, 1, vec![u]).unwrap(),
        Vector::new(vec![b]).unwrap(),
        activation,
        0.9,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{l2_norm, spectral_norm_estimate};

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn random_cell_is_deterministic() {
        let a = make_random_cell(3, 6, 2, 0.9, ActivationKind::Tanh).unwrap();
        let b = make_random_cell(3, 6, 2, 0.9, ActivationKind::Tanh).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_random_cell(4, 6, 2, 0.9, ActivationKind::Tanh).unwrap());
    }

    #[test]
    fn random_cell_spectral_norm_is_gamma() {
        for seed in 0..10 {
            let cell = make_random_cell(seed, 4, 2, 0.9, ActivationKind::Tanh).unwrap();
            let est = spectral_norm_estimate(cell.state_map(), 100, seed + 100);
            assert!((est - 0.9).abs() <= 1e-6, "seed {seed}: {est}");
        }
        let big = make_random_cell(11, 64, 16, 0.9, ActivationKind::Tanh).unwrap();
        let est = spectral_norm_estimate(big.state_map(), 5000, 1);
        assert!((est - 0.9).abs() <= 1e-6, "{est}");
    }

    #[test]
    fn rejects_bad_gamma() {
        for g in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(make_random_cell(0, 3, 3, g, ActivationKind::Tanh).is_err());
        }
    }

    #[test]
    fn seed7_cell_is_lipschitz() {
        let cell = make_random_cell(7, 4, 2, 0.9, ActivationKind::Tanh).unwrap();
        assert_eq!(cell.lipschitz_violations(100, 42), 0);
        let lin = make_random_cell(7, 4, 2, 0.9, ActivationKind::Identity).unwrap();
        assert_eq!(lin.lipschitz_violations(100, 42), 0);
    }

    #[test]
    fn apply_examples() {
        let c = scalar_cell(0.5, 1.0, 0.0, ActivationKind::Identity);
        assert_eq!(c.apply(&v(&[0.0]), &v(&[2.0])).unwrap(), v(&[2.0]));
        assert_eq!(c.apply(&v(&[4.0]), &v(&[2.0])).unwrap(), v(&[4.0]));
        let zero = EquilibriumCell::from_parts(
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            v(&[0.0]),
            ActivationKind::Tanh,
            0.5,
        )
        .unwrap();
        assert_eq!(zero.apply(&v(&[7.0]), &v(&[-3.0])).unwrap(), v(&[0.0]));
        assert!(c.apply(&v(&[0.0, 1.0]), &v(&[2.0])).is_err());
        assert!(c.apply(&v(&[0.0]), &v(&[2.0, 1.0])).is_err());
    }

    #[test]
    fn residual_examples() {
        let c = scalar_cell(0.5, 1.0, 0.0, ActivationKind::Identity);
        assert_eq!(c.residual(&v(&[0.0]), &v(&[2.0])).unwrap(), v(&[2.0]));
        assert_eq!(c.residual(&v(&[2.0]), &v(&[2.0])).unwrap(), v(&[1.0]));
        assert_eq!(c.residual(&v(&[4.0]), &v(&[2.0])).unwrap(), v(&[0.0]));
    }

    #[test]
    fn analytic_fixed_point_examples() {
        let c = scalar_cell(0.5, 1.0, 0.0, ActivationKind::Identity);
        assert_eq!(c.analytic_fixed_point(&v(&[2.0])).unwrap(), v(&[4.0]));
        assert_eq!(c.analytic_fixed_point(&v(&[0.0])).unwrap(), v(&[0.0]));

        let cell = make_random_cell(21, 8, 3, 0.9, ActivationKind::Identity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Vector::standard_normal(3, &mut rng);
        let z = cell.analytic_fixed_point(&x).unwrap();
        assert!(l2_norm(&cell.residual(&z, &x).unwrap()) <= 1e-10);

        let tanh = make_random_cell(21, 8, 3, 0.9, ActivationKind::Tanh).unwrap();
        assert!(tanh.analytic_fixed_point(&x).is_err());
    }

    #[test]
    fn multiscale_dimensions_and_validation() {
        let layout = MultiscaleLayout::new(vec![Scale::new(4, 4, 1), Scale::new(2, 2, 1)]).unwrap();
        assert_eq!(layout.state_dim(), 20);
        let cell = make_multiscale_cell(1, &layout, 3, 0.9, ActivationKind::Tanh).unwrap();
        assert_eq!(cell.dz(), 20);
        assert!(MultiscaleLayout::new(vec![Scale::new(4, 4, 1), Scale::new(3, 2, 1)]).is_err());
        assert_eq!(
            MultiscaleLayout::pyramid(Scale::new(5, 7, 2), 3).unwrap().scales,
            vec![Scale::new(5, 7, 2), Scale::new(3, 4, 2), Scale::new(2, 2, 2)]
        );
    }

    #[test]
    fn single_scale_layout_matches_random_cell() {
        let layout = MultiscaleLayout::new(vec![Scale::new(3, 2, 1)]).unwrap();
        let ms = make_multiscale_cell(9, &layout, 4, 0.8, ActivationKind::Tanh).unwrap();
        let plain = make_random_cell(9, 6, 4, 0.8, ActivationKind::Tanh).unwrap();
        assert_eq!(ms.state_map(), plain.state_map());
        assert_eq!(ms.injection_map(), plain.injection_map());
        assert_eq!(ms.bias(), plain.bias());
    }

    #[test]
    fn multiscale_cross_blocks_are_pool_and_upsample() {
        let layout = MultiscaleLayout::new(vec![Scale::new(4, 4, 1), Scale::new(2, 2, 1)]).unwrap();
        let cell = make_multiscale_cell(2, &layout, 2, 0.9, ActivationKind::Identity).unwrap();
        let a = cell.state_map();
        // coarse pixel (0,0) averages fine pixels (0,0),(0,1),(1,0),(1,1)
        let w = a.get(16, 0);
        assert!(w > 0.0);
        for fine in [0, 1, 4, 5] {
            assert_eq!(a.get(16, fine), w);
        }
        assert_eq!(a.get(16, 2), 0.0);
        // fine pixel (3,3) reads coarse pixel (1,1) and nothing else
        let up = a.get(15, 19);
        assert!(up > 0.0 && (up - 4.0 * w).abs() < 1e-15);
        assert_eq!(a.get(15, 16), 0.0);
        assert_eq!(cell.lipschitz_violations(100, 3), 0);
    }

    #[test]
    fn toml_round_trip_is_bit_exact() {
        let layout = MultiscaleLayout::pyramid(Scale::new(3, 3, 2), 2).unwrap();
        let cell = make_multiscale_cell(13, &layout, 5, 0.9, ActivationKind::Tanh).unwrap();
        let back = EquilibriumCell::from_toml(&cell.to_toml()).unwrap();
        assert_eq!(back, cell);
        let plain = make_random_cell(2, 5, 2, 0.7, ActivationKind::Identity).unwrap();
        assert_eq!(EquilibriumCell::from_toml(&plain.to_toml()).unwrap(), plain);
    }

    #[test]
    fn loading_rejects_expansive_state_map() {
        let cell = make_random_cell(2, 3, 2, 0.9, ActivationKind::Tanh).unwrap();
        let text = cell.to_toml().replace("gamma = 0.9", "gamma = 0.5");
        assert!(EquilibriumCell::from_toml(&text).is_err());
    }
}
