//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{ProblemSpec, Stencil};
use crate::scf::{Backend, ScfConfig};

pub const KEYS: &[&str] = &[
    "z",
    "n_charge",
    "k_index",
    "grid.n",
    "grid.r_max",
    "grid.stencil",
    "scf.mixing",
    "scf.tol_omega",
    "scf.tol_u",
    "scf.max_iter",
    "scf.backend",
    "mode",
    "output_dir",
    "seed",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Spectrum,
    ZeroPotential,
    Verify,
    ConvergenceStudy,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solve" => Ok(Mode::Solve),
            "spectrum" => Ok(Mode::Spectrum),
            "zero-potential" => Ok(Mode::ZeroPotential),
            "verify" => Ok(Mode::Verify),
            "convergence-study" => Ok(Mode::ConvergenceStudy),
            other => Err(format!(
                "unknown mode '{other}' (expected solve|spectrum|zero-potential|verify|convergence-study)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub scf: ScfConfig,
    pub grid_n: usize,
    pub grid_r_max: f64,
    pub stencil: Stencil,
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Where a value came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
}

pub type RawConfig = BTreeMap<String, (String, Origin)>;

/// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
pub fn parse_text(text: &str) -> Result<RawConfig, ConfigError> {
    let mut out = RawConfig::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Line {
            line,
            message: format!("expected 'key = value', found '{content}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::Line {
                line,
                message: format!("unknown key '{key}'"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Line {
                line,
                message: format!("missing value for '{key}'"),
            });
        }
        if out.contains_key(key) {
            return Err(ConfigError::Line {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        out.insert(key.to_string(), (value.to_string(), Origin::Line(line)));
    }
    Ok(out)
}

/// Splits command-line arguments into an optional config path and
/// `--key value` / `--key=value` overrides.
pub fn parse_args(args: &[String]) -> Result<(Option<PathBuf>, RawConfig), ConfigError> {
    let mut path = None;
    let mut overrides = RawConfig::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if let Some(flag) = arg.strip_prefix("--") {
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| {
                        ConfigError::Invalid(format!("flag --{flag} needs a value"))
                    })?;
                    (flag.to_string(), v.clone())
                }
            };
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Invalid(format!("unknown flag --{key}")));
            }
            overrides.insert(key, (value, Origin::Flag));
        } else if path.is_none() {
            path = Some(PathBuf::from(arg));
        } else {
            return Err(ConfigError::Invalid(format!(
                "unexpected argument '{arg}'"
            )));
        }
    }
    Ok((path, overrides))
}

fn field<T: FromStr>(raw: &RawConfig, key: &str, default: T) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match raw.get(key) {
        None => Ok(default),
        Some((value, origin)) => value.parse::<T>().map_err(|e| {
            let message = format!("invalid value '{value}' for '{key}': {e}");
            match origin {
                Origin::Line(line) => ConfigError::Line {
                    line: *line,
                    message,
                },
                Origin::Flag => ConfigError::Invalid(format!("--{key}: {message}")),
            }
        }),
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let defaults = ScfConfig::default();
        let z: f64 = field(raw, "z", 1.0)?;
        let n_charge: f64 = field(raw, "n_charge", 1.0)?;
        let k_index: usize = field(raw, "k_index", 1)?;
        let problem = ProblemSpec::new(z, n_charge, k_index)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let scf = ScfConfig {
            mixing_alpha: field(raw, "scf.mixing", defaults.mixing_alpha)?,
            tol_omega: field(raw, "scf.tol_omega", defaults.tol_omega)?,
            tol_u: field(raw, "scf.tol_u", defaults.tol_u)?,
            max_iter: field(raw, "scf.max_iter", defaults.max_iter)?,
            backend: field(raw, "scf.backend", Backend::Matrix)?,
        };
        scf.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Self {
            problem,
            scf,
            grid_n: field(raw, "grid.n", 4000)?,
            grid_r_max: field(raw, "grid.r_max", 40.0)?,
            stencil: field(raw, "grid.stencil", Stencil::Fourth)?,
            mode: field(raw, "mode", Mode::Solve)?,
            output_dir: field(raw, "output_dir", PathBuf::from("."))?,
            seed: field(raw, "seed", 1u64)?,
        })
    }

    /// Reads the optional config file and applies the overrides on top.
    pub fn load(path: Option<&std::path::Path>, overrides: RawConfig) -> Result<Self, ConfigError> {
        let mut raw = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                parse_text(&text)?
            }
            None => RawConfig::new(),
        };
        raw.extend(overrides);
        Self::from_raw(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "# hydrogen limit\nz = 1\nn_charge = 1e-8\nk_index=2\ngrid.n = 800\ngrid.r_max = 20\n\
                    scf.mixing = 0.3\nscf.tol_omega = 1e-10\nscf.tol_u = 1e-8\nscf.max_iter = 50\n\
                    scf.backend = shooting\nmode = spectrum\noutput_dir = out\nseed = 9\ngrid.stencil = second\n";
        let cfg = RunConfig::from_raw(&parse_text(text).unwrap()).unwrap();
        assert_eq!(cfg.problem.k_index, 2);
        assert_eq!(cfg.problem.n_charge, 1e-8);
        assert_eq!(cfg.grid_n, 800);
        assert_eq!(cfg.scf.backend, Backend::Shooting);
        assert_eq!(cfg.scf.max_iter, 50);
        assert_eq!(cfg.mode, Mode::Spectrum);
        assert_eq!(cfg.stencil, Stencil::Second);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_text("z = 1\n\nthis is wrong\n").unwrap_err();
        assert_eq!(err.to_string(), "line 3: expected 'key = value', found 'this is wrong'");
        let err = parse_text("z = 1\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2:"));
        let raw = parse_text("z = 1\ngrid.n = many\n").unwrap();
        let err = RunConfig::from_raw(&raw).unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let args: Vec<String> = ["cfg.txt", "--z", "2", "--mode=verify"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (path, overrides) = parse_args(&args).unwrap();
        assert_eq!(path, Some(PathBuf::from("cfg.txt")));
        let mut raw = parse_text("z = 1\nmode = solve\n").unwrap();
        raw.extend(overrides);
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.problem.z, 2.0);
        assert_eq!(cfg.mode, Mode::Verify);
        assert!(parse_args(&["--nope".to_string(), "1".to_string()]).is_err());
        assert!(parse_args(&["--z".to_string()]).is_err());
    }
}
