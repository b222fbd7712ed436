//! Per-snapshot RIS reflection configurations.
//!
//! The measurement design is temporal: each snapshot applies one random
//! phase configuration per RIS. In 1-bit mode a coefficient is `+1`
//! (phase 0) or `-1` (phase pi), so the snapshot matrix `W_k` is a random
//! sign matrix.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{substream, StreamDomain};

// ---------------------------------------------------------------------------
// Phase configuration
// ---------------------------------------------------------------------------

/// Reflection coefficients `gamma_n * exp(j * omega_n)` for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    coefficients: Vec<Complex64>,
}

impl PhaseConfig {
    pub fn from_coefficients(coefficients: Vec<Complex64>) -> Self {
        Self { coefficients }
    }

    /// 1-bit configuration from signs; `true` maps to +1 (phase 0),
    /// `false` to -1 (phase pi).
    pub fn one_bit(bits: &[bool]) -> Self {
        Self {
            coefficients: bits
                .iter()
                .map(|&b| Complex64::new(if b { 1.0 } else { -1.0 }, 0.0))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// True when every coefficient is exactly +1 or -1.
    pub fn is_one_bit(&self) -> bool {
        self.coefficients
            .iter()
            .all(|c| c.im == 0.0 && (c.re == 1.0 || c.re == -1.0))
    }
}

// ---------------------------------------------------------------------------
// Codebook
// ---------------------------------------------------------------------------

/// How codebook entries are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookMode {
    /// Coefficients in {+1, -1}; the default.
    OneBit,
    /// Unit-modulus coefficients with uniform random phase. Extension,
    /// off by default.
    ContinuousPhase,
}

/// T snapshot configurations for each of K RIS panels, regenerable from
/// the master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    configs: Vec<Vec<PhaseConfig>>, // [ris][snapshot]
    seed: u64,
    mode: CodebookMode,
}

impl Codebook {
    /// Random 1-bit codebook for a single RIS of `n_elements` units.
    pub fn random_one_bit(n_elements: usize, snapshots: usize, seed: u64) -> Result<Self> {
        Self::random_one_bit_for_panels(&[n_elements], snapshots, seed)
    }

    /// Random 1-bit codebooks for K panels, one independent substream per
    /// panel so that panel k's codebook does not depend on how many other
    /// panels exist.
    pub fn random_one_bit_for_panels(
        element_counts: &[usize],
        snapshots: usize,
        seed: u64,
    ) -> Result<Self> {
        validate_dims(element_counts, snapshots)?;
        let configs = element_counts
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let mut rng = substream(seed, StreamDomain::Codebook, k as u64);
                (0..snapshots)
                    .map(|_| {
                        let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
                        PhaseConfig::one_bit(&bits)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { configs, seed, mode: CodebookMode::OneBit })
    }

    /// Continuous-phase variant (unit modulus, uniform phase).
    pub fn random_continuous_for_panels(
        element_counts: &[usize],
        snapshots: usize,
        seed: u64,
    ) -> Result<Self> {
        validate_dims(element_counts, snapshots)?;
        let configs = element_counts
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let mut rng = substream(seed, StreamDomain::Codebook, k as u64);
                (0..snapshots)
                    .map(|_| {
                        let coeffs: Vec<Complex64> = (0..n)
                            .map(|_| {
                                Complex64::from_polar(
                                    1.0,
                                    rng.random_range(0.0..std::f64::consts::TAU),
                                )
                            })
                            .collect();
                        PhaseConfig::from_coefficients(coeffs)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { configs, seed, mode: CodebookMode::ContinuousPhase })
    }

    /// Build from explicit configurations (fixtures, tests).
    pub fn from_configs(configs: Vec<Vec<PhaseConfig>>) -> Result<Self> {
        if configs.is_empty() || configs.iter().any(|c| c.is_empty()) {
            return Err(Error::invalid("codebook", "needs >= 1 RIS and >= 1 snapshot"));
        }
        let one_bit = configs.iter().flatten().all(PhaseConfig::is_one_bit);
        Ok(Self {
            configs,
            seed: 0,
            mode: if one_bit { CodebookMode::OneBit } else { CodebookMode::ContinuousPhase },
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> CodebookMode {
        self.mode
    }

    /// Number of RIS panels covered.
    pub fn num_ris(&self) -> usize {
        self.configs.len()
    }

    /// Snapshot count T.
    pub fn snapshots(&self) -> usize {
        self.configs[0].len()
    }

    pub fn config(&self, ris: usize, snapshot: usize) -> Result<&PhaseConfig> {
        self.configs
            .get(ris)
            .and_then(|c| c.get(snapshot))
            .ok_or_else(|| {
                Error::IndexOutOfRange(format!("codebook config ({ris}, {snapshot})"))
            })
    }

    pub fn configs_for(&self, ris: usize) -> Result<&[PhaseConfig]> {
        self.configs
            .get(ris)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::IndexOutOfRange(format!("ris index {ris}")))
    }

    /// Snapshot matrix `W_k`: row t holds the diagonal of the snapshot-t
    /// configuration.
    pub fn as_snapshot_matrix(&self, ris: usize) -> Result<DMatrix<Complex64>> {
        let configs = self.configs_for(ris)?;
        let t = configs.len();
        let n = configs[0].len();
        Ok(DMatrix::from_fn(t, n, |r, c| configs[r].coefficients()[c]))
    }

    /// Real-valued `W_k` when the codebook is 1-bit; `None` otherwise.
    pub fn snapshot_matrix_real(&self, ris: usize) -> Result<Option<DMatrix<f64>>> {
        let configs = self.configs_for(ris)?;
        if !configs.iter().all(PhaseConfig::is_one_bit) {
            return Ok(None);
        }
        let t = configs.len();
        let n = configs[0].len();
        Ok(Some(DMatrix::from_fn(t, n, |r, c| {
            configs[r].coefficients()[c].re
        })))
    }

    /// Write one RIS block as text: one snapshot per line, entries +-1.
    pub fn write_snapshot_text<W: Write>(&self, ris: usize, mut out: W) -> Result<()> {
        let configs = self.configs_for(ris)?;
        for cfg in configs {
            if !cfg.is_one_bit() {
                return Err(Error::invalid(
                    "codebook",
                    "text serialization is defined for 1-bit codebooks",
                ));
            }
            let line: Vec<String> = cfg
                .coefficients()
                .iter()
                .map(|c| if c.re > 0.0 { "1".to_string() } else { "-1".to_string() })
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Parse a single-RIS codebook from the text form.
    pub fn read_snapshot_text<R: BufRead>(input: R) -> Result<Self> {
        let mut configs = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let coeffs: Result<Vec<Complex64>> = line
                .split_whitespace()
                .map(|tok| match tok {
                    "1" | "+1" => Ok(Complex64::new(1.0, 0.0)),
                    "-1" => Ok(Complex64::new(-1.0, 0.0)),
                    other => Err(Error::Parse(format!(
                        "line {}: invalid codebook entry `{other}`",
                        lineno + 1
                    ))),
                })
                .collect();
            configs.push(PhaseConfig::from_coefficients(coeffs?));
        }
        if configs.is_empty() {
            return Err(Error::Parse("empty codebook text".into()));
        }
        let n = configs[0].len();
        if configs.iter().any(|c| c.len() != n) {
            return Err(Error::Parse("ragged codebook rows".into()));
        }
        Self::from_configs(vec![configs])
    }
}

fn validate_dims(element_counts: &[usize], snapshots: usize) -> Result<()> {
    if element_counts.is_empty() {
        return Err(Error::invalid("codebook", "at least one RIS required"));
    }
    if element_counts.contains(&0) || snapshots == 0 {
        return Err(Error::invalid("codebook", "N and T must be >= 1"));
    }
    Ok(())
}

/// Random 1-bit codebook for one RIS; kept as a free function because it
/// names the core operation of the measurement design.
pub fn random_one_bit_codebook(n_elements: usize, snapshots: usize, seed: u64) -> Result<Codebook> {
    Codebook::random_one_bit(n_elements, snapshots, seed)
}
