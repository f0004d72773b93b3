//! Flat key-value run configuration with sections mirroring the
//! subcommands. CLI flags override file values.
//!
//! ```text
//! [verify]
//! family = intermediate
//! p = 2
//! l = 2
//! tau = 0.13+1.07i
//! ```

use num_complex::Complex64;
use std::collections::BTreeMap;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut out = ConfigFile::default();
        let mut current = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                current = line[1..line.len() - 1].trim().to_string();
                out.sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(format!("line {}: expected 'key = value', got '{raw}'", ln + 1));
            };
            out.sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .or_else(|| self.sections.get("").and_then(|m| m.get(key)))
            .map(|s| s.as_str())
    }
}

/// Parse a complex number from either `re,im` or `a+bi` / `bi` / `a` forms.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t = s.trim().replace(' ', "");
    if let Some((re, im)) = t.split_once(',') {
        let re: f64 = re.parse().map_err(|_| format!("bad real part '{re}'"))?;
        let im: f64 = im.parse().map_err(|_| format!("bad imaginary part '{im}'"))?;
        return Ok(Complex64::new(re, im));
    }
    if let Some(stripped) = t.strip_suffix(['i', 'j']) {
        // split into a +/- b with the sign belonging to b; the real part may
        // itself carry a sign or an exponent
        let bytes = stripped.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let ch = bytes[k] as char;
            if (ch == '+' || ch == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                split = Some(k);
                break;
            }
        }
        return match split {
            Some(k) => {
                let re: f64 = stripped[..k]
                    .parse()
                    .map_err(|_| format!("bad real part in '{s}'"))?;
                let imtxt = &stripped[k..];
                let im: f64 = if imtxt == "+" {
                    1.0
                } else if imtxt == "-" {
                    -1.0
                } else {
                    imtxt.parse().map_err(|_| format!("bad imaginary part in '{s}'"))?
                };
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = if stripped.is_empty() {
                    1.0
                } else {
                    stripped.parse().map_err(|_| format!("bad imaginary part in '{s}'"))?
                };
                Ok(Complex64::new(0.0, im))
            }
        };
    }
    let re: f64 = t.parse().map_err(|_| format!("bad complex number '{s}'"))?;
    Ok(Complex64::new(re, 0.0))
}

/// Parse a semicolon-separated dynamical vector: `re,im;re,im;...` or
/// `a+bi;c+di;...`.
pub fn parse_dynamical(s: &str) -> Result<Vec<Complex64>, String> {
    s.split(';').map(parse_complex).collect()
}

pub fn format_complex(c: Complex64) -> String {
    format!("{},{}", c.re, c.im)
}
