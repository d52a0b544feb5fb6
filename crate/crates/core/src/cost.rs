//! Analytical per-member computation cost in `T_mul,q` units (one
//! multiplication in the 160-bit field), energy conversion and CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{OpCounts, Prime};

/// One elliptic-curve scalar multiplication in `T_mul,p` units.
pub const TEM_IN_TMULP: u64 = 29;
/// One multiplication modulo the 1024-bit `p` in `T_mul,q` units.
pub const TMULP_IN_TMULQ: u64 = 41;
/// One scalar multiplication in `T_mul,q` units.
pub const TEM_IN_TMULQ: u64 = TEM_IN_TMULP * TMULP_IN_TMULQ;

pub const HARN_TEXT_SLOPE: u64 = 45;
pub const HARN_TABLE_SLOPE: u64 = 14;
pub const HARN_INTERCEPT: u64 = 1418;
pub const CHIEN_SLOPE: u64 = 7;
pub const CHIEN_INTERCEPT: u64 = 6785;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("group size must be at least 1")]
    EmptyGroup,
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, CostError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Harn,
    Chien,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Harn, Scheme::Chien, Scheme::Proposed];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Harn => "harn",
            Scheme::Chien => "chien",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "harn" => Ok(Scheme::Harn),
            "chien" => Ok(Scheme::Chien),
            other => Err(CostError::UnknownScheme(other.to_string())),
        }
    }
}

/// Harn's per-member cost has two competing slopes; the steeper one is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarnSlope {
    /// `45m + 1418`.
    #[default]
    Text,
    /// `14m + 1418`.
    Table,
}

impl HarnSlope {
    pub fn slope(self) -> u64 {
        match self {
            HarnSlope::Text => HARN_TEXT_SLOPE,
            HarnSlope::Table => HARN_TABLE_SLOPE,
        }
    }
}

/// Per-member cost of one authentication for a group of `m`.
pub fn per_user_cost(scheme: Scheme, m: u64, harn_slope: HarnSlope) -> Result<u64> {
    if m == 0 {
        return Err(CostError::EmptyGroup);
    }
    Ok(match scheme {
        Scheme::Proposed => TEM_IN_TMULQ,
        Scheme::Harn => harn_slope.slope() * m + HARN_INTERCEPT,
        Scheme::Chien => CHIEN_SLOPE * m + CHIEN_INTERCEPT,
    })
}

/// `1 - proposed/chien`, exactly.
pub fn savings_ratio_exact(m: u64) -> Result<Ratio<u64>> {
    let proposed = per_user_cost(Scheme::Proposed, m, HarnSlope::Text)?;
    let chien = per_user_cost(Scheme::Chien, m, HarnSlope::Text)?;
    Ok(Ratio::from_integer(1) - Ratio::new(proposed, chien))
}

pub fn savings_ratio(m: u64) -> Result<f64> {
    let r = savings_ratio_exact(m)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}

/// Converts measured operation counts to `T_mul,q`: each scalar multiplication
/// is charged as one TEM, point additions outside scalar multiplications at
/// their field-multiplication count, and stand-alone modular multiplications
/// at a per-modulus weight (1 unless overridden). Inversions are not charged.
#[derive(Debug, Clone, Default)]
pub struct TmulqConversion {
    weights: Vec<(Prime, u64)>,
}

impl TmulqConversion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_weight(mut self, modulus: &Prime, weight: u64) -> Self {
        self.weights.push((modulus.clone(), weight));
        self
    }

    fn weight(&self, modulus: &num_bigint::BigUint) -> u64 {
        self.weights
            .iter()
            .find(|(p, _)| p.value() == modulus)
            .map(|(_, w)| *w)
            .unwrap_or(1)
    }

    pub fn tmulq(&self, counts: &OpCounts) -> u64 {
        let standalone: u64 = counts
            .muls
            .iter()
            .map(|(modulus, n)| n * self.weight(modulus))
            .sum();
        counts.scalar_muls * TEM_IN_TMULQ + counts.curve_muls_outside + standalone
    }
}

/// Joules per unit of work and per byte on air.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub joules_per_tmulq: f64,
    pub tx_joules_per_byte: f64,
    pub rx_joules_per_byte: f64,
}

pub const DEFAULT_TX_JOULES_PER_BYTE: f64 = 2.0e-6;
pub const DEFAULT_RX_JOULES_PER_BYTE: f64 = 1.0e-6;

impl EnergyModel {
    pub fn new(joules_per_tmulq: f64, tx_joules_per_byte: f64, rx_joules_per_byte: f64) -> Result<Self> {
        let model = EnergyModel {
            joules_per_tmulq,
            tx_joules_per_byte,
            rx_joules_per_byte,
        };
        model.validate()?;
        Ok(model)
    }

    /// The compute constant must be positive; radio constants may be zero.
    pub fn validate(&self) -> Result<()> {
        if !(self.joules_per_tmulq > 0.0) || !self.joules_per_tmulq.is_finite() {
            return Err(CostError::NonPositive {
                name: "joules_per_tmulq",
                value: self.joules_per_tmulq,
            });
        }
        for (name, value) in [
            ("tx_joules_per_byte", self.tx_joules_per_byte),
            ("rx_joules_per_byte", self.rx_joules_per_byte),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(CostError::Negative { name, value });
            }
        }
        Ok(())
    }

    pub fn radio(&self, bytes_tx: u64, bytes_rx: u64) -> f64 {
        bytes_tx as f64 * self.tx_joules_per_byte + bytes_rx as f64 * self.rx_joules_per_byte
    }

    pub fn energy(&self, tmulq: u64, bytes_tx: u64, bytes_rx: u64) -> EnergyBreakdown {
        let compute_j = tmulq as f64 * self.joules_per_tmulq;
        let radio_j = self.radio(bytes_tx, bytes_rx);
        EnergyBreakdown {
            compute_j,
            radio_j,
            total_j: compute_j + radio_j,
        }
    }

    /// Fits `joules_per_tmulq` so that a node with the given work and traffic
    /// spends `target_j` in total.
    pub fn calibrate(target_j: f64, tmulq: u64, bytes_tx: u64, bytes_rx: u64, tx: f64, rx: f64) -> Result<Self> {
        let radio = bytes_tx as f64 * tx + bytes_rx as f64 * rx;
        Self::new((target_j - radio) / tmulq as f64, tx, rx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub compute_j: f64,
    pub radio_j: f64,
    pub total_j: f64,
}

/// Energy of one member for `scheme` at group size `m`, from the analytical
/// cost and a given traffic volume.
pub fn energy(
    scheme: Scheme,
    m: u64,
    harn_slope: HarnSlope,
    model: &EnergyModel,
    bytes_tx: u64,
    bytes_rx: u64,
) -> Result<EnergyBreakdown> {
    model.validate()?;
    Ok(model.energy(per_user_cost(scheme, m, harn_slope)?, bytes_tx, bytes_rx))
}

/// One output row: `scheme,m,tmulq,compute_J,radio_J,total_J,auth_time_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scheme: String,
    pub m: u64,
    pub tmulq: u64,
    #[serde(rename = "compute_J")]
    pub compute_j: f64,
    #[serde(rename = "radio_J")]
    pub radio_j: f64,
    #[serde(rename = "total_J")]
    pub total_j: f64,
    /// Empty for analytical rows.
    pub auth_time_s: Option<f64>,
}

pub const CSV_HEADER: &str = "scheme,m,tmulq,compute_J,radio_J,total_J,auth_time_s";

/// Writes the header even when `rows` is empty.
pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer
        .write_record(CSV_HEADER.split(','))
        .map_err(|e| CostError::Csv(e.to_string()))?;
    for row in rows {
        writer.serialize(row).map_err(|e| CostError::Csv(e.to_string()))?;
    }
    writer.flush().map_err(|e| CostError::Csv(e.to_string()))
}

/// Analytical rows for every scheme at each `m`. Radio energy is left at zero
/// and the time column empty.
pub fn cost_rows(ms: &[u64], slopes: &[HarnSlope], model: &EnergyModel) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    for &m in ms {
        for scheme in Scheme::ALL {
            let variants: Vec<(String, HarnSlope)> = match scheme {
                Scheme::Harn => slopes
                    .iter()
                    .map(|&s| {
                        let name = match s {
                            HarnSlope::Text => "harn".to_string(),
                            HarnSlope::Table if slopes.len() == 1 => "harn".to_string(),
                            HarnSlope::Table => "harn-table".to_string(),
                        };
                        (name, s)
                    })
                    .collect(),
                _ => vec![(scheme.name().to_string(), HarnSlope::Text)],
            };
            for (name, slope) in variants {
                let tmulq = per_user_cost(scheme, m, slope)?;
                let e = model.energy(tmulq, 0, 0);
                rows.push(CsvRow {
                    scheme: name,
                    m,
                    tmulq,
                    compute_j: e.compute_j,
                    radio_j: e.radio_j,
                    total_j: e.total_j,
                    auth_time_s: None,
                });
            }
        }
    }
    Ok(rows)
}
