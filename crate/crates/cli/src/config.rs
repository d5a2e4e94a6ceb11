//! Parameter resolution: command-line flag, then the command's INI section,
//! then the `[global]` section, then the built-in default.

use crate::error::CliError;
use ini::Ini;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

pub fn load(path: Option<&Path>) -> Result<Option<Ini>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => Ini::load_from_file(p)
            .map(Some)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display()))),
    }
}

pub struct Params<'a> {
    ini: Option<&'a Ini>,
    section: &'static str,
    resolved: BTreeMap<String, String>,
}

impl<'a> Params<'a> {
    pub fn new(ini: Option<&'a Ini>, section: &'static str) -> Params<'a> {
        Params { ini, section, resolved: BTreeMap::new() }
    }

    fn lookup(&self, key: &str) -> Option<(String, String)> {
        let ini = self.ini?;
        for sec in [self.section, "global"] {
            if let Some(v) = ini.section(Some(sec)).and_then(|s| s.get(key)) {
                return Some((format!("{sec}.{key}"), v.trim().to_string()));
            }
        }
        None
    }

    /// The flag if given, else the config value, else `None`.
    pub fn opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.lookup(key) {
                Some((path, raw)) => Some(
                    raw.parse::<T>().map_err(|e| CliError::Usage(format!("{path}: cannot parse {raw:?}: {e}")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.opt(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.resolved.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn flag(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let v = if flag { true } else { self.get(key, None, false)? };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn section(&self) -> &'static str {
        self.section
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    pub fn into_resolved(self) -> BTreeMap<String, String> {
        self.resolved
    }
}

/// Parses `a:b:logK`, `a:b:linK`, a comma list, or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number {s:?} in {spec:?}"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range {spec:?} must look like lo:hi:logK or lo:hi:linK"));
        }
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let (log, count) = if let Some(c) = parts[2].strip_prefix("log") {
            (true, c)
        } else if let Some(c) = parts[2].strip_prefix("lin") {
            (false, c)
        } else {
            return Err(format!("range {spec:?}: spacing must be logK or linK"));
        };
        let k: usize = count.parse().map_err(|_| format!("range {spec:?}: bad point count {count:?}"))?;
        if k == 0 {
            return Err(format!("range {spec:?}: point count must be positive"));
        }
        if log && (lo <= 0.0 || hi <= 0.0) {
            return Err(format!("range {spec:?}: log spacing needs positive bounds"));
        }
        if k == 1 {
            return Ok(vec![lo]);
        }
        let t = |i: usize| i as f64 / (k - 1) as f64;
        Ok((0..k)
            .map(|i| if log { (lo.ln() + t(i) * (hi.ln() - lo.ln())).exp() } else { lo + t(i) * (hi - lo) })
            .collect())
    } else {
        spec.split(',').map(num).collect()
    }
}

pub fn parse_list<T: FromStr>(spec: &str) -> Result<Vec<T>, String> {
    spec.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("bad list entry {s:?} in {spec:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_grid("0.01:2.0:log24").unwrap();
        assert_eq!(g.len(), 24);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[23] - 2.0).abs() < 1e-12);
        assert_eq!(parse_grid("0:1:lin3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.7").unwrap(), vec![0.7]);
        assert_eq!(parse_grid("1, 2").unwrap(), vec![1.0, 2.0]);
        assert!(parse_grid("0:1:log3").is_err());
        assert!(parse_grid("1:2:geo3").is_err());
    }

    #[test]
    fn flag_beats_config() {
        let ini = Ini::load_from_str("[global]\nseed = 4\n[oqi]\nn = 12\ndelta_phi = x\n").unwrap();
        let mut p = Params::new(Some(&ini), "oqi");
        assert_eq!(p.get("n", None, 3usize).unwrap(), 12);
        assert_eq!(p.get("n", Some(5usize), 3).unwrap(), 5);
        assert_eq!(p.get("seed", None, 0u64).unwrap(), 4);
        let err = p.get::<f64>("delta_phi", None, 0.7).unwrap_err();
        assert!(err.to_string().contains("oqi.delta_phi"));
    }
}
