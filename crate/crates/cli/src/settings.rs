//! Run settings shared by every subcommand: built from defaults, then an
//! optional `key = value` file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use metabvs::harness::StudyMethod;
use metabvs::linmodel::ZellnerConfig;
use metabvs::pipeline::{FitMethod, FitSettings};

use crate::error::CliError;

/// Every recognised key with its default, in the textual form accepted by
/// [`Settings::set`]. Flags use the same names with a `--` prefix.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("method", "em-exact"),
    ("g-theta", "1"),
    ("variance", "ig:0.01,0.01"),
    ("sweeps", "5000"),
    ("burn-in", "500"),
    ("seed", "0"),
    ("threshold", "0.95"),
    ("out-dir", "."),
    ("standardize", "true"),
    ("g-omega", "calibrated"),
    ("max-enumerate", "20"),
    ("em-iters", "30"),
    ("em-tol", "0.01"),
    ("mh-step", "0.5"),
    ("n", "100"),
    ("p", "30"),
    ("omega1", "0"),
    ("reps", "20"),
    ("x-corr", "0.5"),
    ("meta-corr", "0.5"),
    ("scenario", "custom"),
    ("methods", "ebayes_meta,ebayes_intercept,beta_binomial"),
    ("floor", "1e-6"),
    ("omega", "fitted"),
];

pub fn default_for(key: &str) -> Option<&'static str> {
    DEFAULTS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variance {
    Known(f64),
    InverseGamma(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub method: FitMethod,
    pub g_theta: f64,
    pub variance: Variance,
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub threshold: f64,
    pub out_dir: PathBuf,
    pub standardize: bool,
    /// `None` means calibrated from the meta-covariates.
    pub g_omega: Option<f64>,
    pub max_enumerate: usize,
    pub em_iters: usize,
    pub em_tol: f64,
    pub mh_step: f64,
    pub n: usize,
    pub p: usize,
    pub omega1: f64,
    pub reps: usize,
    pub x_corr: f64,
    pub meta_corr: f64,
    pub scenario: String,
    pub methods: Vec<StudyMethod>,
    pub floor: f64,
    /// Fixed `ω` for enumeration; `None` fits it with `method`.
    pub omega: Option<Vec<f64>>,
}

impl Default for Settings {
    fn default() -> Self {
        let mut s = Settings {
            method: FitMethod::EmExact,
            g_theta: 0.0,
            variance: Variance::Known(1.0),
            sweeps: 0,
            burn_in: 0,
            seed: 0,
            threshold: 0.0,
            out_dir: PathBuf::new(),
            standardize: true,
            g_omega: None,
            max_enumerate: 0,
            em_iters: 0,
            em_tol: 0.0,
            mh_step: 0.0,
            n: 0,
            p: 0,
            omega1: 0.0,
            reps: 0,
            x_corr: 0.0,
            meta_corr: 0.0,
            scenario: String::new(),
            methods: Vec::new(),
            floor: 0.0,
            omega: None,
        };
        for (k, v) in DEFAULTS {
            s.set(k, v).expect("defaults parse");
        }
        s
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse '{value}'"))
}

fn positive(key: &str, value: &str) -> Result<f64, String> {
    let v: f64 = num(key, value)?;
    if v > 0.0 && !v.is_nan() {
        Ok(v)
    } else {
        Err(format!("{key} must be positive, got {value}"))
    }
}

fn unit_interval(key: &str, value: &str) -> Result<f64, String> {
    let v: f64 = num(key, value)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{key} must lie in [0, 1), got {value}"))
    }
}

pub fn parse_method(value: &str) -> Result<FitMethod, String> {
    if value == "exact" {
        return Ok(FitMethod::EmExact);
    }
    value.parse().map_err(|e: metabvs::Error| e.to_string())
}

fn parse_variance(value: &str) -> Result<Variance, String> {
    let bad = || format!("variance must be known:<phi> or ig:<a0>,<b0>, got '{value}'");
    if let Some(phi) = value.strip_prefix("known:") {
        return Ok(Variance::Known(positive("variance", phi)?));
    }
    if let Some(rest) = value.strip_prefix("ig:") {
        let (a, b) = rest.split_once(',').ok_or_else(bad)?;
        return Ok(Variance::InverseGamma(positive("variance", a)?, positive("variance", b)?));
    }
    Err(bad())
}

pub fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Settings {
    /// Applies one textual setting; the message names the key on failure.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "method" => self.method = parse_method(value)?,
            "g-theta" => self.g_theta = positive(key, value)?,
            "variance" => self.variance = parse_variance(value)?,
            "sweeps" => self.sweeps = num(key, value)?,
            "burn-in" => self.burn_in = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "threshold" => {
                let t: f64 = num(key, value)?;
                if !(t > 0.0 && t <= 1.0) {
                    return Err(format!("threshold must lie in (0, 1], got {value}"));
                }
                self.threshold = t;
            }
            "out-dir" => self.out_dir = PathBuf::from(value),
            "standardize" => self.standardize = num(key, value)?,
            "g-omega" => {
                self.g_omega = match value {
                    "calibrated" => None,
                    _ => Some(positive(key, value)?),
                }
            }
            "max-enumerate" => {
                let m: usize = num(key, value)?;
                if m > 30 {
                    return Err(format!("max-enumerate must be at most 30, got {m}"));
                }
                self.max_enumerate = m;
            }
            "em-iters" => self.em_iters = num(key, value)?,
            "em-tol" => self.em_tol = positive(key, value)?,
            "mh-step" => self.mh_step = positive(key, value)?,
            "n" => self.n = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "omega1" => {
                let w: f64 = num(key, value)?;
                if !w.is_finite() {
                    return Err(format!("omega1 must be finite, got {value}"));
                }
                self.omega1 = w;
            }
            "reps" => self.reps = num(key, value)?,
            "x-corr" => self.x_corr = unit_interval(key, value)?,
            "meta-corr" => self.meta_corr = unit_interval(key, value)?,
            "scenario" => {
                if !valid_name(value) {
                    return Err(format!("scenario name '{value}' must match [A-Za-z0-9_]+"));
                }
                self.scenario = value.to_string();
            }
            "methods" => {
                self.methods = value
                    .split(',')
                    .map(|m| m.trim().parse().map_err(|e: metabvs::Error| e.to_string()))
                    .collect::<Result<_, _>>()?;
            }
            "floor" => {
                let f: f64 = num(key, value)?;
                if !(0.0..=1.0).contains(&f) {
                    return Err(format!("floor must lie in [0, 1], got {value}"));
                }
                self.floor = f;
            }
            "omega" => {
                self.omega = match value {
                    "fitted" => None,
                    _ => Some(
                        value
                            .split(',')
                            .map(|v| num::<f64>(key, v.trim()))
                            .collect::<Result<_, _>>()?,
                    ),
                }
            }
            _ => return Err(format!("unknown setting '{key}'")),
        }
        Ok(())
    }

    /// Applies a settings file: `key = value` lines, `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::Usage(format!("{}:{}: {msg}", path.display(), no + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, got '{line}'")))?;
            self.set(key.trim(), value).map_err(at)?;
        }
        Ok(())
    }

    pub fn zellner(&self) -> ZellnerConfig {
        match self.variance {
            Variance::Known(phi) => ZellnerConfig::known(self.g_theta, phi),
            Variance::InverseGamma(a0, b0) => ZellnerConfig::inverse_gamma(self.g_theta, a0, b0),
        }
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            zellner: self.zellner(),
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            seed: self.seed,
            g_omega: self.g_omega,
            em_max_iters: self.em_iters,
            em_tol: self.em_tol,
            max_enumerate: self.max_enumerate,
            mh_step: self.mh_step,
            ..FitSettings::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library_defaults() {
        let s = Settings::default();
        let lib = FitSettings::default();
        let f = s.fit_settings();
        assert_eq!(f, FitSettings { seed: lib.seed, ..lib });
        assert_eq!(s.methods, StudyMethod::ALL.to_vec());
        assert_eq!(s.variance, Variance::InverseGamma(0.01, 0.01));
    }

    #[test]
    fn parses_values() {
        let mut s = Settings::default();
        s.set("variance", "known:2.5").unwrap();
        assert_eq!(s.variance, Variance::Known(2.5));
        s.set("method", "exact").unwrap();
        assert_eq!(s.method, FitMethod::EmExact);
        s.set("omega", "-1, 0.5").unwrap();
        assert_eq!(s.omega, Some(vec![-1.0, 0.5]));
        s.set("g-omega", "7").unwrap();
        assert_eq!(s.g_omega, Some(7.0));
    }

    #[test]
    fn rejects_bad_values() {
        let mut s = Settings::default();
        assert!(s.set("variance", "known:-1").is_err());
        assert!(s.set("variance", "ig:1").is_err());
        assert!(s.set("g-theta", "0").is_err());
        assert!(s.set("threshold", "1.5").is_err());
        assert!(s.set("methods", "ebayes_meta,lasso").is_err());
        assert!(s.set("scenario", "a b").is_err());
        assert!(s.set("sweeps", "-3").is_err());
        assert!(s.set("sweep", "3").is_err());
    }

    #[test]
    fn config_file_comments_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# comment\nsweeps = 800  # trailing\n\nseed=9\n").unwrap();
        let mut s = Settings::default();
        s.apply_file(&path).unwrap();
        assert_eq!((s.sweeps, s.seed), (800, 9));

        fs::write(&path, "seed = 1\nsweps = 10\n").unwrap();
        let err = Settings::default().apply_file(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}
