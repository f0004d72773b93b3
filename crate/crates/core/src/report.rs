//! Structured results of verification runs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex number on the wire as a `(re, im)` pair of decimal floats.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CWire {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for CWire {
    fn from(c: Complex64) -> Self {
        CWire { re: c.re, im: c.im }
    }
}

impl From<CWire> for Complex64 {
    fn from(c: CWire) -> Self {
        Complex64::new(c.re, c.im)
    }
}

/// Record of one verification run: what was checked, with which parameters,
/// and the residuals obtained. Reports are append-only and serializable;
/// identical seed and parameters reproduce identical residuals bit-for-bit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<CWire>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<CWire>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub samples: usize,
    pub skipped: usize,
    pub max_abs_residual: f64,
    pub frobenius_residual: f64,
    /// Normalization scalar divided out of the raw residual, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<CWire>,
    pub tolerance: f64,
    pub pass: bool,
    /// Convention determinations and other free-form notes.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl ResidualReport {
    pub fn new(check: &str, tolerance: f64) -> Self {
        ResidualReport {
            check: check.to_string(),
            family: None,
            p: None,
            l: None,
            tau: None,
            hbar: None,
            seed: None,
            samples: 0,
            skipped: 0,
            max_abs_residual: 0.0,
            frobenius_residual: 0.0,
            normalization: None,
            tolerance,
            pass: false,
            notes: String::new(),
        }
    }

    pub fn record(&mut self, max_abs: f64, fro: f64) {
        self.samples += 1;
        self.max_abs_residual = self.max_abs_residual.max(max_abs);
        self.frobenius_residual = self.frobenius_residual.max(fro);
    }

    pub fn finish(mut self) -> Self {
        self.pass = self.samples > 0 && self.max_abs_residual < self.tolerance;
        self
    }
}
