use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// A configuration key of one command. An empty default means "unset".
#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub(crate) const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

/// Resolved configuration of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
    order: Vec<String>,
}

fn cfg_err<T>(msg: String) -> Result<T> {
    Err(Error::Config(msg))
}

/// Parses `key = value` lines; blank lines and lines starting with '#' are
/// skipped, underscores in keys are read as hyphens.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let Some((k, v)) = l.split_once('=') else {
            return cfg_err(format!("config line {}: expected key = value", i + 1));
        };
        let k = k.trim().replace('_', "-");
        if k.is_empty() {
            return cfg_err(format!("config line {}: empty key", i + 1));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn resolve(command: &str, keys: &[Key], file: Option<&str>, flags: &[(String, String)], env_seed: Option<String>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for k in keys {
            if !k.default.is_empty() {
                values.insert(k.name.to_string(), k.default.to_string());
            }
        }
        let known = |name: &str| keys.iter().any(|k| k.name == name);
        if let Some(text) = file {
            for (k, v) in parse_config_text(text)? {
                if !known(&k) {
                    return cfg_err(format!("unknown key '{k}' for {command}"));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in flags {
            if !known(k) {
                return cfg_err(format!("unknown key '{k}' for {command}"));
            }
            values.insert(k.clone(), v.clone());
        }
        if let Some(s) = env_seed {
            if known("seed") {
                values.insert("seed".into(), s.trim().to_string());
            }
        }
        let cfg = RunConfig { command: command.to_string(), values, order: keys.iter().map(|k| k.name.to_string()).collect() };
        if cfg.get("seed").is_some() {
            cfg.u64("seed")?;
        }
        Ok(cfg)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn str(&self, name: &str) -> Result<&str> {
        self.get(name).ok_or_else(|| Error::Config(format!("missing value for '{name}'")))
    }

    pub fn f64(&self, name: &str) -> Result<f64> {
        let v = self.str(name)?;
        parse_f64(v).ok_or_else(|| Error::Config(format!("'{name}' = '{v}' is not a number")))
    }

    pub fn opt_f64(&self, name: &str) -> Result<Option<f64>> {
        self.get(name).map(|_| self.f64(name)).transpose()
    }

    /// Non-negative integer; scientific notation such as 2e6 is accepted.
    pub fn u64(&self, name: &str) -> Result<u64> {
        let v = self.str(name)?;
        let bad = || Error::Config(format!("'{name}' = '{v}' is not a non-negative integer"));
        if let Ok(n) = v.parse::<u64>() {
            return Ok(n);
        }
        let x: f64 = v.parse().map_err(|_| bad())?;
        if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
            Ok(x as u64)
        } else {
            Err(bad())
        }
    }

    pub fn usize(&self, name: &str) -> Result<usize> {
        Ok(self.u64(name)? as usize)
    }

    pub fn opt_usize(&self, name: &str) -> Result<Option<usize>> {
        self.get(name).map(|_| self.usize(name)).transpose()
    }

    pub fn flag(&self, name: &str) -> Result<bool> {
        match self.get(name) {
            None => Ok(false),
            Some("yes" | "true" | "1" | "on") => Ok(true),
            Some("no" | "false" | "0" | "off") => Ok(false),
            Some(v) => cfg_err(format!("'{name}' = '{v}' is not yes/no")),
        }
    }

    /// A single value or an inclusive range `lo:hi:n`.
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let v = self.str(name)?;
        parse_values(v).ok_or_else(|| Error::Config(format!("'{name}' = '{v}' is neither a number, a list a,b,c nor a range lo:hi:n")))
    }

    pub fn list_f64(&self, name: &str) -> Result<Vec<f64>> {
        let v = self.str(name)?;
        v.split(',')
            .map(|s| parse_f64(s.trim()).ok_or_else(|| Error::Config(format!("'{name}': '{s}' is not a number"))))
            .collect()
    }

    /// Lines echoing the command and every resolved key, prefixed with '#'.
    pub fn header(&self) -> String {
        let mut s = format!("# {}\n", self.command);
        for k in &self.order {
            if let Some(v) = self.values.get(k) {
                s.push_str(&format!("# {k} = {v}\n"));
            }
        }
        s
    }

    pub(crate) fn apply_workers(&self) -> Result<()> {
        if let Some(n) = self.opt_usize("workers")? {
            if n > 0 {
                // the global pool can be configured once per process
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
        Ok(())
    }
}

/// Number parser that also accepts multiples of pi: "pi", "2pi/3", "-pi/2".
pub fn parse_f64(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim().parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let k = num.strip_suffix("pi")?;
    let k = match k.trim() {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse::<f64>().ok()?,
    };
    Some(k * std::f64::consts::PI / den)
}

fn parse_values(v: &str) -> Option<Vec<f64>> {
    if v.contains(':') {
        let p: Vec<&str> = v.split(':').collect();
        if p.len() != 3 {
            return None;
        }
        let (lo, hi, n) = (parse_f64(p[0])?, parse_f64(p[1])?, p[2].trim().parse::<usize>().ok()?);
        if n == 0 || (n == 1 && lo != hi) {
            return None;
        }
        if n == 1 {
            return Some(vec![lo]);
        }
        return Some((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect());
    }
    v.split(',').map(parse_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: [Key; 3] = [key("beta", "1", ""), key("seed", "0", ""), key("x", "", "")];

    #[test]
    fn precedence_and_unknown_keys() {
        let c = RunConfig::resolve("t", &KEYS, Some("# c\nbeta = 2\nx=1:2:3\n"), &[("beta".into(), "3".into())], None).unwrap();
        assert_eq!(c.f64("beta").unwrap(), 3.0);
        assert_eq!(c.values("x").unwrap(), vec![1.0, 1.5, 2.0]);
        let c = RunConfig::resolve("t", &KEYS, None, &[], Some("42".into())).unwrap();
        assert_eq!(c.u64("seed").unwrap(), 42);
        assert!(c.header().contains("# seed = 42"));
        assert!(matches!(RunConfig::resolve("t", &KEYS, Some("gamma = 1"), &[], None), Err(Error::Config(_))));
        assert!(matches!(RunConfig::resolve("t", &KEYS, Some("beta"), &[], None), Err(Error::Config(_))));
        assert!(RunConfig::resolve("t", &KEYS, None, &[], Some("x".into())).is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_f64("2pi/3"), Some(2.0 * std::f64::consts::PI / 3.0));
        assert_eq!(parse_f64("-pi"), Some(-std::f64::consts::PI));
        assert_eq!(parse_f64("1e-3"), Some(1e-3));
        assert_eq!(parse_f64("p"), None);
        let c = RunConfig::resolve("t", &[key("steps", "2e6", "")], None, &[], None).unwrap();
        assert_eq!(c.u64("steps").unwrap(), 2_000_000);
        let c = RunConfig::resolve("t", &[key("steps", "2.5", "")], None, &[], None).unwrap();
        assert!(c.u64("steps").is_err());
    }
}
