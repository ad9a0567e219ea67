//! Flat `key = value` configuration with command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use spade_core::table::linspace;

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{}", path.display(), line),
            Origin::Override => f.write_str("--set"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn split_pair(text: &str) -> Option<(String, String)> {
    let (k, v) = text.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_owned(), v.trim().to_owned()))
}

/// Raw entries keyed by name; later sources replace earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn parse_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .or_else(|e| err(format!("{}: cannot read config: {e}", path.display())))?;
        Self::parse_str(&text, path)
    }

    pub fn parse_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let origin = Origin::File {
                path: path.to_owned(),
                line: i + 1,
            };
            let Some((k, v)) = split_pair(line) else {
                return err(format!("{origin}: expected `key = value`, found `{line}`"));
            };
            if let Some((_, prev)) = cfg.entries.get(&k) {
                return err(format!(
                    "{origin}: duplicate key `{k}` (first set at {prev})"
                ));
            }
            cfg.entries.insert(k, (v, origin));
        }
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<(), ConfigError> {
        for s in sets {
            let Some((k, v)) = split_pair(s) else {
                return err(format!("--set: expected `key=value`, found `{s}`"));
            };
            self.entries.insert(k, (v, Origin::Override));
        }
        Ok(())
    }

    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::parse_file(p)?,
            None => Self::default(),
        };
        cfg.apply_overrides(sets)?;
        Ok(cfg)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for (k, (_, origin)) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                let mut known: Vec<&str> = allowed.to_vec();
                known.sort_unstable();
                return err(format!(
                    "{origin}: unknown key `{k}` (accepted: {})",
                    known.join(", ")
                ));
            }
        }
        Ok(())
    }
}

/// Typed access that records every value used, defaults included.
#[derive(Debug)]
pub struct Resolver {
    raw: RawConfig,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(raw: RawConfig, allowed: &[&str]) -> Result<Self, ConfigError> {
        raw.check_keys(allowed)?;
        Ok(Self {
            raw,
            resolved: BTreeMap::new(),
        })
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.entries.contains_key(key)
    }

    /// Fails when more than one of `keys` is set.
    pub fn exclusive(&self, keys: &[&str]) -> Result<(), ConfigError> {
        let set: BTreeSet<&str> = keys.iter().copied().filter(|k| self.has(k)).collect();
        if set.len() > 1 {
            let names: Vec<&str> = set.into_iter().collect();
            return err(format!("keys {} are mutually exclusive", names.join(", ")));
        }
        Ok(())
    }

    fn lookup(&self, key: &str) -> Option<&(String, Origin)> {
        self.raw.entries.get(key)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.lookup(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse()
                .map(Some)
                .or_else(|_| err(format!("{origin}: `{key}` expects {what}, found `{v}`"))),
        }
    }

    pub fn record(&mut self, key: &str, value: impl fmt::Display) {
        self.resolved.insert(key.to_owned(), value.to_string());
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parse::<f64>(key, "a number")?.unwrap_or(default);
        if !v.is_finite() {
            return err(format!("`{key}` must be finite"));
        }
        self.record(key, v);
        Ok(v)
    }

    pub fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.parse::<f64>(key, "a number")?;
        if let Some(x) = v {
            if !x.is_finite() {
                return err(format!("`{key}` must be finite"));
            }
            self.record(key, x);
        }
        Ok(v)
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        let v = self
            .parse::<u64>(key, "a non-negative integer")?
            .unwrap_or(default);
        self.record(key, v);
        Ok(v)
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        let v = self.parse::<bool>(key, "true or false")?.unwrap_or(default);
        self.record(key, v);
        Ok(v)
    }

    pub fn choice(
        &mut self,
        key: &str,
        options: &[&str],
        default: &str,
    ) -> Result<String, ConfigError> {
        let v = match self.lookup(key) {
            None => default.to_owned(),
            Some((v, origin)) => {
                if !options.contains(&v.as_str()) {
                    return err(format!(
                        "{origin}: `{key}` must be one of {}, found `{v}`",
                        options.join(", ")
                    ));
                }
                v.clone()
            }
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn string(&mut self, key: &str) -> Option<String> {
        let v = self.lookup(key).map(|(v, _)| v.clone());
        if let Some(s) = &v {
            self.record(key, s);
        }
        v
    }

    /// Either a comma-separated list or `start:stop:count` (inclusive).
    /// `default` uses the same syntax.
    pub fn grid(&mut self, key: &str, default: &str) -> Result<Vec<f64>, ConfigError> {
        let (text, v) = match self.lookup(key) {
            None => (
                default.to_owned(),
                parse_grid(default).or_else(|m| err(format!("default `{key}`: {m}")))?,
            ),
            Some((text, origin)) => (
                text.clone(),
                parse_grid(text).or_else(|m| err(format!("{origin}: `{key}`: {m}")))?,
            ),
        };
        self.record(key, text);
        Ok(v)
    }

    /// Resolved values, sorted by key.
    pub fn metadata(&self) -> Vec<(String, String)> {
        self.resolved
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| -> Result<f64, String> {
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a number", s.trim()))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err("values must be finite".into())
        }
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err("range grids take the form start:stop:count".into());
        }
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a point count", parts[2].trim()))?;
        if n == 0 {
            return Err("point count must be positive".into());
        }
        Ok(linspace(num(parts[0])?, num(parts[1])?, n))
    } else {
        let v = text.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("empty grid".into());
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut raw =
            RawConfig::parse_str("# c\n\nepsilon = 0.1\n chi=0.0035 \n", Path::new("a.cfg"))
                .unwrap();
        raw.apply_overrides(&["epsilon=0.2".into()]).unwrap();
        let mut r = Resolver::new(raw, &["epsilon", "chi", "eta"]).unwrap();
        assert_eq!(r.f64("epsilon", 0.0).unwrap(), 0.2);
        assert_eq!(r.f64("chi", 0.0).unwrap(), 0.0035);
        assert_eq!(r.f64("eta", 1.0).unwrap(), 1.0);
        assert_eq!(
            r.metadata(),
            vec![
                ("chi".into(), "0.0035".into()),
                ("epsilon".into(), "0.2".into()),
                ("eta".into(), "1".into())
            ]
        );
    }

    #[test]
    fn diagnostics_carry_location() {
        let e = RawConfig::parse_str("eta = 1\nnonsense\n", Path::new("x.cfg")).unwrap_err();
        assert!(e.0.starts_with("x.cfg:2:"), "{e}");
        let raw = RawConfig::parse_str("eta = 1\nbogus = 3\n", Path::new("x.cfg")).unwrap();
        let e = Resolver::new(raw, &["eta"]).unwrap_err();
        assert!(e.0.starts_with("x.cfg:2: unknown key `bogus`"), "{e}");
        let raw = RawConfig::parse_str("eta = abc\n", Path::new("x.cfg")).unwrap();
        let mut r = Resolver::new(raw, &["eta"]).unwrap();
        assert!(r.f64("eta", 1.0).unwrap_err().0.starts_with("x.cfg:1:"));
        assert!(RawConfig::parse_str("a = 1\na = 2\n", Path::new("x.cfg")).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
