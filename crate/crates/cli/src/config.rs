//! Flat `key = value` run configuration.
//!
//! One entry per line, `#` starts a comment, keys are dotted
//! (`system.kappa`, `sweep.delta_min`). All rates are in units of `g`, all
//! times in units of `1/g`. Numeric values accept plain decimals and simple
//! products/quotients of numbers, `pi` and `sqrt(x)` (`pi/2`, `sqrt(2)*0.018`).
//!
//! Every key a command reads is recorded together with its effective value
//! (explicit or default); [`Config::resolved`] renders that record so a run
//! can be repeated from its sidecar alone.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

/// Accepted keys with a one-line description (units of g and 1/g).
pub const KEYS: &[(&str, &str)] = &[
    ("system.g", "atom-cavity coupling (default 1)"),
    ("system.kappa", "cavity field decay rate (default 0.1)"),
    ("system.gamma", "level-2 spontaneous decay rate (default 0.1)"),
    ("system.delta", "laser detuning from level 2 (default 0.02)"),
    ("system.n_max", "cavity Fock truncation (default 2)"),
    ("run.dt", "integration step (default 0.05)"),
    ("run.sample_every", "trajectory sampling stride in steps (default: about 2000 samples)"),
    ("run.mode", "full | fast; default pulse.duration 5e4 or 5e3 (default full)"),
    ("pulse.shape", "stirap_linear | stirap_sin2 | loop | constant"),
    ("pulse.omega_max", "peak of the first control Omega (stirap)"),
    ("pulse.omegabar_max", "peak of the second control Omegabar (stirap)"),
    ("pulse.duration", "schedule length T"),
    ("pulse.rise", "fraction of T for the initial ramp-up of Omega (default 0.2)"),
    ("pulse.overlap", "fraction of T during which both transfer ramps overlap (default 0.2)"),
    ("pulse.split", "share of Omegabar driving the atoms symmetrically, -1..1 (default 0)"),
    ("pulse.peak", "peak amplitude along a loop"),
    ("pulse.waypoints", "loop polyline as theta,phi;theta,phi;... (closed, starting at theta = 0)"),
    ("pulse.theta0", "rectangle loop extent in theta"),
    ("pulse.phi0", "rectangle loop extent in phi"),
    ("pulse.omega_re", "constant Omega, real part"),
    ("pulse.omega_im", "constant Omega, imaginary part (default 0)"),
    ("pulse.omegabar_re", "constant Omegabar, real part"),
    ("pulse.omegabar_im", "constant Omegabar, imaginary part (default 0)"),
    ("pulse.reversed", "play the schedule backwards (default false)"),
    ("transfer.target", "A | alpha | 00 | 01 | 10 | 11 | basis label such as 'σ,1;0' (default A)"),
    ("gate.flip", "ideal | pulse | none (default ideal)"),
    ("gate.flip_rabi", "Rabi frequency of the simulated sigma flip pulse"),
    ("gate.adiabaticity_threshold", "warn when T * peak falls below this (default 100)"),
    ("sweep.delta_min", "first detuning"),
    ("sweep.delta_max", "last detuning"),
    ("sweep.delta_points", "number of detunings"),
    ("sweep.omega_min", "first Omega_max"),
    ("sweep.omega_max", "last Omega_max"),
    ("sweep.omega_points", "number of Omega_max values"),
    ("sweep.omegabar_ratio", "Omegabar_max / Omega_max (default 1/sqrt(2))"),
    ("sweep.workers", "worker threads (default 1)"),
    ("validity.threshold", "largest accepted validity ratio (default 0.3)"),
    ("output.dir", "directory for result files (default out)"),
    ("label.level0", "name of qubit level 0 (metadata)"),
    ("label.level1", "name of qubit level 1 (metadata)"),
    ("label.sigma", "name of the auxiliary level (metadata)"),
    ("label.level2", "name of the excited level (metadata)"),
];

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    /// Source line, `None` for command-line overrides.
    line: Option<usize>,
}

#[derive(Debug, Default)]
pub struct Config {
    source: String,
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{source}:{lineno}: expected 'key = value', found '{line}'"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                bail!("{source}:{lineno}: empty key");
            }
            if !is_known(key) {
                bail!("{source}:{lineno}: unknown key '{key}'");
            }
            if let Some(prev) = entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line: Some(lineno),
                },
            ) {
                bail!("{source}:{lineno}: duplicate key '{key}' (first set on line {})", prev.line.unwrap_or(0));
            }
        }
        Ok(Self {
            source: source.to_string(),
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Ok((Self::parse(&text, &path.display().to_string())?, text))
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("override '{assignment}' is not of the form key=value"))?;
        let key = key.trim();
        if !is_known(key) {
            bail!("unknown key '{key}' in override");
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                line: None,
            },
        );
        Ok(())
    }

    fn locate(&self, key: &str) -> String {
        match self.entries.get(key).and_then(|e| e.line) {
            Some(line) => format!("{}:{line}", self.source),
            None => "command line".to_string(),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(is_known(key), "unregistered key {key}");
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn record(&self, key: &str, value: String) {
        self.used.borrow_mut().insert(key.to_string(), value);
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    pub fn opt_str(&self, key: &str) -> Option<String> {
        let v = self.raw(key)?.to_string();
        self.record(key, v.clone());
        Some(v)
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or(default).to_string();
        self.record(key, v.clone());
        v
    }

    pub fn require_str(&self, key: &str) -> Result<String> {
        self.opt_str(key).ok_or_else(|| anyhow!("missing required key '{key}'"))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        let Some(raw) = self.raw(key) else { return Ok(None) };
        let v = parse_number(raw).map_err(|e| anyhow!("{}: key '{key}': {e}", self.locate(key)))?;
        self.record(key, v.to_string());
        Ok(Some(v))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.opt_f64(key)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.opt_f64(key)?.ok_or_else(|| anyhow!("missing required key '{key}'"))
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        let Some(raw) = self.raw(key) else { return Ok(None) };
        let v: usize = raw
            .parse()
            .map_err(|_| anyhow!("{}: key '{key}': expected a non-negative integer, found '{raw}'", self.locate(key)))?;
        self.record(key, v.to_string());
        Ok(Some(v))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.opt_usize(key)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        self.opt_usize(key)?.ok_or_else(|| anyhow!("missing required key '{key}'"))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        let v = match self.raw(key) {
            None => default,
            Some("true") => true,
            Some("false") => false,
            Some(other) => bail!("{}: key '{key}': expected true or false, found '{other}'", self.locate(key)),
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    /// Rejects a value outside `allowed`, naming the location.
    pub fn choice(&self, key: &str, default: &str, allowed: &[&str]) -> Result<String> {
        let v = self.str_or(key, default);
        if !allowed.contains(&v.as_str()) {
            bail!("{}: key '{key}': expected one of {}, found '{v}'", self.locate(key), allowed.join(" | "));
        }
        Ok(v)
    }

    /// Wraps a downstream validation error with the key's location.
    pub fn invalid(&self, key: &str, err: impl std::fmt::Display) -> anyhow::Error {
        anyhow!("{}: key '{key}': {err}", self.locate(key))
    }

    /// Every key read so far with its effective value, as config text.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.used.borrow().iter() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// Parses `a*b/c...` where each factor is a decimal, `pi` or `sqrt(x)`.
pub fn parse_number(text: &str) -> std::result::Result<f64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty value".into());
    }
    let mut value = 1.0;
    let mut op = '*';
    let mut start = 0;
    let bytes: Vec<char> = s.chars().collect();
    let mut depth = 0;
    for i in 0..=bytes.len() {
        let c = bytes.get(i).copied();
        match c {
            Some('(') => depth += 1,
            Some(')') => depth -= 1,
            _ => {}
        }
        let is_op = matches!(c, Some('*') | Some('/')) && depth == 0;
        if is_op || c.is_none() {
            let token: String = bytes[start..i].iter().collect();
            let f = parse_factor(&token).ok_or_else(|| format!("cannot parse '{text}' as a number"))?;
            value = if op == '*' { value * f } else { value / f };
            if let Some(c) = c {
                op = c;
            }
            start = i + 1;
        }
    }
    if !value.is_finite() {
        return Err(format!("'{text}' is not finite"));
    }
    Ok(value)
}

fn parse_factor(token: &str) -> Option<f64> {
    let (neg, body) = match token.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token),
    };
    let v = if body == "pi" {
        std::f64::consts::PI
    } else if let Some(inner) = body.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        parse_number(inner).ok()?.sqrt()
    } else {
        body.parse::<f64>().ok()?
    };
    Some(if neg { -v } else { v })
}
