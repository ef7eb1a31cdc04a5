//! Synthetic input streams with controlled frame-to-frame change.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceMode {
    /// Normalized Gaussian steps of norm exactly `epsilon`.
    RandomWalk,
    /// Gaussian bump translating over a toroidal grid.
    MovingBlob,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub mode: SequenceMode,
    /// Frame dimension for random walks.
    #[serde(default = "default_dx")]
    pub dx: usize,
    /// `(height, width)` for moving blobs.
    #[serde(default = "default_grid")]
    pub grid: (usize, usize),
    pub length: usize,
    #[serde(default)]
    pub epsilon: f64,
    /// Blob displacement per frame, `(columns, rows)`.
    #[serde(default)]
    pub velocity: (f64, f64),
    /// Frames where the stream cuts to unrelated content.
    #[serde(default)]
    pub shot_frames: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_dx() -> usize {
    16
}

fn default_grid() -> (usize, usize) {
    (8, 8)
}

impl SequenceSpec {
    pub fn random_walk(dx: usize, length: usize, epsilon: f64, seed: u64) -> Self {
        SequenceSpec {
            mode: SequenceMode::RandomWalk,
            dx,
            grid: default_grid(),
            length,
            epsilon,
            velocity: (0.0, 0.0),
            shot_frames: Vec::new(),
            seed,
        }
    }

    pub fn moving_blob(height: usize, width: usize, length: usize, velocity: (f64, f64), seed: u64) -> Self {
        SequenceSpec {
            mode: SequenceMode::MovingBlob,
            dx: height * width,
            grid: (height, width),
            length,
            epsilon: 0.0,
            velocity,
            shot_frames: Vec::new(),
            seed,
        }
    }

    pub fn with_shots(mut self, shots: Vec<usize>) -> Self {
        self.shot_frames = shots;
        self
    }

    /// Built-in streams: `smooth-0.01`, `smooth-0.05`, `smooth-0.2` (random
    /// walks), `shot` (random walk, ε = 0.05, cut at the middle frame) and
    /// `blob` (8×8 grid).
    pub fn preset(name: &str, dx: usize, length: usize, seed: u64) -> Result<Self> {
        let spec = match name {
            "smooth-0.01" => SequenceSpec::random_walk(dx, length, 0.01, seed),
            "smooth-0.05" => SequenceSpec::random_walk(dx, length, 0.05, seed),
            "smooth-0.2" => SequenceSpec::random_walk(dx, length, 0.2, seed),
            "shot" => {
                let shots = if length > 1 { vec![length / 2] } else { Vec::new() };
                SequenceSpec::random_walk(dx, length, 0.05, seed).with_shots(shots)
            }
            "blob" => SequenceSpec::moving_blob(8, 8, length, (0.25, 0.125), seed),
            _ => {
                return Err(Error::UnknownName {
                    kind: "sequence preset",
                    name: name.into(),
                })
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub const PRESETS: [&'static str; 5] = ["smooth-0.01", "smooth-0.05", "smooth-0.2", "shot", "blob"];

    pub fn frame_dim(&self) -> usize {
        match self.mode {
            SequenceMode::RandomWalk => self.dx,
            SequenceMode::MovingBlob => self.grid.0 * self.grid.1,
        }
    }

    pub fn blob_sigma(&self) -> f64 {
        self.grid.1 as f64 / 8.0
    }

    /// Upper bound on `‖x_{t+1} − x_t‖` for smooth (non-shot) blob frames:
    /// each pixel is a Gaussian of the toroidal distance to the centre, whose
    /// slope never exceeds `1/(σ√e)`.
    pub fn blob_step_bound(&self) -> f64 {
        let (vc, vr) = self.velocity;
        let speed = (vc * vc + vr * vr).sqrt();
        speed * ((self.grid.0 * self.grid.1) as f64).sqrt() / (self.blob_sigma() * std::f64::consts::E.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidParameter("sequence length must be positive".into()));
        }
        if self.frame_dim() == 0 {
            return Err(Error::InvalidParameter("frame dimension must be positive".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.velocity.0.is_finite() && self.velocity.1.is_finite()) {
            return Err(Error::InvalidParameter("velocity must be finite".into()));
        }
        if self.shot_frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("shot frames must be strictly increasing".into()));
        }
        if let Some(&bad) = self.shot_frames.iter().find(|&&s| s == 0 || s >= self.length) {
            return Err(Error::InvalidParameter(format!(
                "shot frame {bad} outside [1, {}]",
                self.length - 1
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SequenceSpec = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        spec.validate()?;
        Ok(spec)
    }
}

pub fn generate_sequence(spec: &SequenceSpec) -> Result<Vec<Vector>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(match spec.mode {
        SequenceMode::RandomWalk => random_walk(spec, &mut rng),
        SequenceMode::MovingBlob => moving_blob(spec, &mut rng),
    })
}

fn random_walk(spec: &SequenceSpec, rng: &mut ChaCha8Rng) -> Vec<Vector> {
    let mut frames = Vec::with_capacity(spec.length);
    let mut x = Vector::standard_normal(spec.dx, rng);
    frames.push(x.clone());
    for t in 1..spec.length {
        if spec.shot_frames.binary_search(&t).is_ok() {
            x = Vector::standard_normal(spec.dx, rng);
        } else {
            let u = Vector::standard_normal(spec.dx, rng);
            let scale = spec.epsilon / norm(&u);
            x = Vector::from_raw(x.iter().zip(u.iter()).map(|(a, b)| a + scale * b).collect());
        }
        frames.push(x.clone());
    }
    frames
}

fn moving_blob(spec: &SequenceSpec, rng: &mut ChaCha8Rng) -> Vec<Vector> {
    let (h, w) = (spec.grid.0 as f64, spec.grid.1 as f64);
    let mut center = (h / 2.0, w / 2.0);
    let mut frames = Vec::with_capacity(spec.length);
    frames.push(render_blob(spec, center));
    for t in 1..spec.length {
        if spec.shot_frames.binary_search(&t).is_ok() {
            // jump between a quarter and three quarters of the period per axis
            let jump_r = h * (0.25 + 0.5 * rng.random::<f64>());
            let jump_c = w * (0.25 + 0.5 * rng.random::<f64>());
            center = ((center.0 + jump_r).rem_euclid(h), (center.1 + jump_c).rem_euclid(w));
        } else {
            center = (
                (center.0 + spec.velocity.1).rem_euclid(h),
                (center.1 + spec.velocity.0).rem_euclid(w),
            );
        }
        frames.push(render_blob(spec, center));
    }
    frames
}

fn toroidal_gap(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

fn render_blob(spec: &SequenceSpec, (cr, cc): (f64, f64)) -> Vector {
    let (h, w) = spec.grid;
    let two_var = 2.0 * spec.blob_sigma().powi(2);
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        let dr = toroidal_gap(r as f64, cr, h as f64);
        for c in 0..w {
            let dc = toroidal_gap(c as f64, cc, w as f64);
            data.push((-(dr * dr + dc * dc) / two_var).exp());
        }
    }
    Vector::from_raw(data)
}

/// One frame per line, values separated by single spaces, each written in
/// shortest round-trip decimal form.
pub fn frames_to_string(frames: &[Vector]) -> String {
    let mut out = String::new();
    for f in frames {
        for (i, v) in f.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn frames_from_str(text: &str, path: &Path) -> Result<Vec<Vector>> {
    let mut frames = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
        let frame = Vector::new(values).map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = frames.first() {
            let first: &Vector = first;
            if first.len() != frame.len() {
                return Err(Error::parse(
                    path,
                    format!("line {}: {} values, expected {}", lineno + 1, frame.len(), first.len()),
                ));
            }
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(Error::parse(path, "no frames"));
    }
    Ok(frames)
}

pub fn write_frames(frames: &[Vector], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, frames_to_string(frames)).map_err(|e| Error::io(path, e))
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<Vec<Vector>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    frames_from_str(&text, path)
}
