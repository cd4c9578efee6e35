//! Flat `key = value` experiment configs.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use vfd_core::quantization::DescentOptions;
use vfd_core::{Grid, InitialDatum, Preset, Rho, RunParams};

use crate::error::CliError;

const KEYS: &[&str] = &[
    "r",
    "n",
    "dt",
    "t_end",
    "output_every",
    "seed",
    "rho.cos",
    "rho.sin",
    "f0.preset",
    "f0.cos",
    "f0.sin",
    "f0b.preset",
    "f0b.cos",
    "f0b.sin",
    "a1",
    "A1",
    "fit.window",
    "newton.tol",
    "newton.max_iter",
    "quantize.N",
    "quantize.tol",
    "quantize.max_iter",
    "hessian.samples",
    "hessian.fd_samples",
];

/// Raw key/value pairs with typed accessors.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| bad(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        let Some(v) = self.raw(key) else {
            return Ok(Vec::new());
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| bad(format!("`{key}`: cannot parse `{s}`"))))
            .collect()
    }

    pub fn r(&self) -> Result<f64, CliError> {
        self.get("r", 2.0)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed", 0)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.get("n", 256)?).map_err(|e| bad(e.to_string()))
    }

    pub fn rho(&self) -> Result<Rho, CliError> {
        Rho::new(self.list("rho.cos")?, self.list("rho.sin")?).map_err(|e| bad(format!("rho: {e}")))
    }

    pub fn params(&self) -> Result<RunParams, CliError> {
        let mut p = RunParams::new(self.r()?, self.get("dt", 1e-5)?, self.get("t_end", 0.1)?)
            .with_output_every(self.get("output_every", 10)?);
        p.newton_tol = self.get("newton.tol", p.newton_tol)?;
        p.newton_max_iter = self.get("newton.max_iter", p.newton_max_iter)?;
        p.validate().map_err(|e| bad(e.to_string()))?;
        Ok(p)
    }

    /// Initial datum under `prefix` (`f0` or `f0b`); `None` if absent.
    pub fn datum(&self, prefix: &str) -> Result<Option<InitialDatum<f64>>, CliError> {
        let preset = format!("{prefix}.preset");
        let (cos, sin) = (format!("{prefix}.cos"), format!("{prefix}.sin"));
        let fourier = self.has(&cos) || self.has(&sin);
        match (self.raw(&preset), fourier) {
            (Some(_), true) => Err(bad(format!("`{preset}` excludes `{cos}`/`{sin}`"))),
            (Some(name), false) => {
                let p = Preset::from_str(name).map_err(|e| bad(format!("`{preset}`: {e}")))?;
                Ok(Some(InitialDatum::Preset(p)))
            }
            (None, true) => Ok(Some(InitialDatum::Fourier {
                cos: self.list(&cos)?,
                sin: self.list(&sin)?,
            })),
            (None, false) => Ok(None),
        }
    }

    /// Declared envelope `a1 ≤ f0 ≤ A1`, if given.
    pub fn envelope(&self) -> Result<Option<(f64, f64)>, CliError> {
        match (self.has("a1"), self.has("A1")) {
            (false, false) => Ok(None),
            (true, true) => {
                let (a, b) = (self.get("a1", 0.0)?, self.get("A1", 0.0)?);
                if a > 0.0 && a <= b {
                    Ok(Some((a, b)))
                } else {
                    Err(bad("need 0 < a1 <= A1"))
                }
            }
            _ => Err(bad("`a1` and `A1` go together")),
        }
    }

    /// Fit window; defaults to the last 90% of the run.
    pub fn fit_window(&self, t_end: f64) -> Result<(f64, f64), CliError> {
        let w: Vec<f64> = self.list("fit.window")?;
        match w.as_slice() {
            [] => Ok((0.1 * t_end, t_end)),
            [lo, hi] if lo < hi => Ok((*lo, *hi)),
            _ => Err(bad("`fit.window` needs two increasing values")),
        }
    }

    pub fn quantize_sizes(&self) -> Result<Vec<usize>, CliError> {
        let sizes: Vec<usize> = self.list("quantize.N")?;
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(bad("`quantize.N` needs a list of positive sizes"));
        }
        Ok(sizes)
    }

    pub fn descent(&self) -> Result<DescentOptions<f64>, CliError> {
        let d = DescentOptions::default();
        Ok(DescentOptions {
            tol: self.get("quantize.tol", d.tol)?,
            max_iter: self.get("quantize.max_iter", d.max_iter)?,
            ..d
        })
    }

    /// Bound-suite and finite-difference-suite sizes.
    pub fn hessian_counts(&self) -> Result<(usize, usize), CliError> {
        let counts = (self.get("hessian.samples", 20)?, self.get("hessian.fd_samples", 10)?);
        if counts.0 == 0 || counts.1 == 0 {
            return Err(bad("Hessian suites need at least one sample each"));
        }
        Ok(counts)
    }
}

impl FromStr for Config {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(bad(format!("line {}: unknown key `{k}`", no + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Ok(Self { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_comments() {
        let c: Config = "r = 3 # exponent\nrho.cos = 0.1, 0.2\n\nquantize.N = 8,16"
            .parse()
            .unwrap();
        assert_eq!(c.r().unwrap(), 3.0);
        assert_eq!(c.rho().unwrap().cos_coefficients(), &[0.1, 0.2]);
        assert_eq!(c.quantize_sizes().unwrap(), vec![8, 16]);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!("colour = red".parse::<Config>().is_err());
        assert!("r = 2\nr = 3".parse::<Config>().is_err());
        assert!("r 2".parse::<Config>().is_err());
    }

    #[test]
    fn preset_and_fourier_are_exclusive() {
        let c: Config = "f0.preset = cosine\nf0.cos = 0.1".parse().unwrap();
        assert!(c.datum("f0").is_err());
        let c: Config = "f0.sin = 0.2".parse().unwrap();
        assert!(matches!(c.datum("f0").unwrap(), Some(InitialDatum::Fourier { .. })));
        assert!(c.datum("f0b").unwrap().is_none());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let c: Config = "dt = -1".parse().unwrap();
        assert!(c.params().is_err());
        let c: Config = "n = 4".parse().unwrap();
        assert!(c.grid().is_err());
        let c: Config = "hessian.samples = 0".parse().unwrap();
        assert!(c.hessian_counts().is_err());
    }
}
