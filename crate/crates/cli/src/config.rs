//! INI-style configuration: `[section]` headers, `key = value` lines and `#`
//! comments. Parsing is strict — every key must belong to the known schema —
//! and values keep their raw text so a manifest echo reparses identically.

use std::collections::BTreeMap;
use std::path::Path;

/// Known (section, key) pairs, in canonical manifest order. Units are encoded
/// in the key names.
pub const SCHEMA: &[(&str, &[&str])] = &[
    ("output", &["prefix"]),
    (
        "molecule",
        &[
            "name", "kind", "B_cm1", "B_au", "A_cm1", "A_au", "mu0_D", "mu0_au", "dalpha_au",
            "dalpha_A3",
        ],
    ),
    ("merit", &["a", "j_max"]),
    ("scan", &["a_min", "a_max", "a_step", "jmax_min", "jmax_max"]),
    ("density", &["theta_points"]),
    ("grid", &["steps_per_period", "periods", "j_cap"]),
    (
        "thermal",
        &["T_K", "weight_tail", "spin_weight_kmod3_0", "spin_weight_kmod3_other"],
    ),
    ("laser", &["intensity_TWcm2", "fwhm_fs"]),
    ("kick", &["shape", "peak_Vm", "fwhm_fs"]),
    ("train", &["n_kicks", "amplitudes_Vm"]),
    (
        "oct",
        &[
            "horizon_periods",
            "field_bound_Vm",
            "penalty",
            "target_fidelity",
            "max_iterations",
            "guess_intensity_TWcm2",
            "guess_center_periods",
            "guess_sigma_periods",
        ],
    ),
];

fn schema_has(section: &str, key: &str) -> bool {
    SCHEMA
        .iter()
        .any(|(s, keys)| *s == section && keys.contains(&key))
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<(String, String), String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| format!("line {}: malformed section header", lineno + 1))?;
                section = name.trim().to_string();
                if !SCHEMA.iter().any(|(s, _)| *s == section) {
                    return Err(format!("line {}: unknown section [{section}]", lineno + 1));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim().to_string();
            // strip a trailing comment from the value
            let value = match value.split_once('#') {
                Some((v, _)) => v.trim().to_string(),
                None => value.trim().to_string(),
            };
            if section.is_empty() {
                return Err(format!("line {}: key outside any section", lineno + 1));
            }
            if !schema_has(&section, &key) {
                return Err(format!(
                    "line {}: unknown key [{section}].{key}",
                    lineno + 1
                ));
            }
            if values.insert((section.clone(), key.clone()), value).is_some() {
                return Err(format!(
                    "line {}: duplicate key [{section}].{key}",
                    lineno + 1
                ));
            }
        }
        Ok(Self { values })
    }

    /// Apply a `--set section.key=value` override.
    pub fn set(&mut self, dotted_key: &str, value: &str) -> Result<(), String> {
        let (section, key) = dotted_key
            .split_once('.')
            .ok_or_else(|| format!("--set key '{dotted_key}' must be section.key"))?;
        if !schema_has(section, key) {
            return Err(format!("unknown key [{section}].{key}"));
        }
        self.values
            .insert((section.to_string(), key.to_string()), value.to_string());
        Ok(())
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        debug_assert!(schema_has(section, key), "[{section}].{key} not in schema");
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(|s| s.as_str())
    }
}

/// Typed accessor layer that records every resolved value (including applied
/// defaults) so the run manifest can echo a complete, reparsable config.
#[derive(Debug)]
pub struct Resolver<'a> {
    cfg: &'a Config,
    resolved: std::cell::RefCell<Vec<(String, String, String)>>,
}

impl<'a> Resolver<'a> {
    pub fn new(cfg: &'a Config) -> Self {
        Self {
            cfg,
            resolved: std::cell::RefCell::new(Vec::new()),
        }
    }

    fn record(&self, section: &str, key: &str, value: String) {
        let mut r = self.resolved.borrow_mut();
        if let Some(slot) = r.iter_mut().find(|(s, k, _)| s == section && k == key) {
            slot.2 = value;
        } else {
            r.push((section.to_string(), key.to_string(), value));
        }
    }

    pub fn present(&self, section: &str, key: &str) -> bool {
        self.cfg.raw(section, key).is_some()
    }

    pub fn str_value(&self, section: &str, key: &str) -> Option<String> {
        let v = self.cfg.raw(section, key)?.to_string();
        self.record(section, key, v.clone());
        Some(v)
    }

    pub fn require_str(&self, section: &str, key: &str) -> Result<String, String> {
        self.str_value(section, key)
            .ok_or_else(|| format!("missing required key [{section}].{key}"))
    }

    pub fn f64_value(&self, section: &str, key: &str) -> Result<Option<f64>, String> {
        match self.cfg.raw(section, key) {
            None => Ok(None),
            Some(raw) => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| format!("[{section}].{key}: '{raw}' is not a number"))?;
                self.record(section, key, format!("{v}"));
                Ok(Some(v))
            }
        }
    }

    pub fn require_f64(&self, section: &str, key: &str) -> Result<f64, String> {
        self.f64_value(section, key)?
            .ok_or_else(|| format!("missing required key [{section}].{key}"))
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, String> {
        match self.f64_value(section, key)? {
            Some(v) => Ok(v),
            None => {
                self.record(section, key, format!("{default}"));
                Ok(default)
            }
        }
    }

    pub fn usize_value(&self, section: &str, key: &str) -> Result<Option<usize>, String> {
        match self.cfg.raw(section, key) {
            None => Ok(None),
            Some(raw) => {
                let v: usize = raw
                    .parse()
                    .map_err(|_| format!("[{section}].{key}: '{raw}' is not a nonnegative integer"))?;
                self.record(section, key, format!("{v}"));
                Ok(Some(v))
            }
        }
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, String> {
        match self.usize_value(section, key)? {
            Some(v) => Ok(v),
            None => {
                self.record(section, key, format!("{default}"));
                Ok(default)
            }
        }
    }

    pub fn require_u32(&self, section: &str, key: &str) -> Result<u32, String> {
        let raw = self.require_str(section, key)?;
        raw.parse()
            .map_err(|_| format!("[{section}].{key}: '{raw}' is not a nonnegative integer"))
    }

    pub fn f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, String> {
        match self.cfg.raw(section, key) {
            None => Ok(None),
            Some(raw) => {
                let mut out = Vec::new();
                for part in raw.split(',') {
                    let v: f64 = part.trim().parse().map_err(|_| {
                        format!("[{section}].{key}: '{}' is not a number", part.trim())
                    })?;
                    out.push(v);
                }
                self.record(
                    section,
                    key,
                    out.iter()
                        .map(|v| format!("{v}"))
                        .collect::<Vec<_>>()
                        .join(", "),
                );
                Ok(Some(out))
            }
        }
    }

    /// Resolved entries in canonical schema order (for the manifest).
    pub fn manifest_entries(&self) -> Vec<(String, String, String)> {
        let resolved = self.resolved.borrow();
        let mut out = Vec::new();
        for (section, keys) in SCHEMA {
            for key in *keys {
                if let Some(hit) = resolved
                    .iter()
                    .find(|(s, k, _)| s == section && k == key)
                {
                    out.push(hit.clone());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_and_comments() {
        let cfg = Config::parse(
            "# comment\n[molecule]\nname = CO # inline\nB_cm1 = 1.9313\n\n[merit]\na = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.raw("molecule", "name"), Some("CO"));
        assert_eq!(cfg.raw("molecule", "B_cm1"), Some("1.9313"));
        assert_eq!(cfg.raw("merit", "a"), Some("2.0"));
        assert_eq!(cfg.raw("merit", "j_max"), None);
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        let err = Config::parse("[molecule]\nbogus = 1\n").unwrap_err();
        assert!(err.contains("bogus"), "{err}");
        let err = Config::parse("[nonsense]\n").unwrap_err();
        assert!(err.contains("nonsense"), "{err}");
        let err = Config::parse("stray = 1\n").unwrap_err();
        assert!(err.contains("outside"), "{err}");
    }

    #[test]
    fn rejects_duplicates_and_malformed_lines() {
        assert!(Config::parse("[merit]\na = 1\na = 2\n").is_err());
        assert!(Config::parse("[merit]\njust a line\n").is_err());
        assert!(Config::parse("[merit\n").is_err());
    }

    #[test]
    fn set_overrides_and_validates() {
        let mut cfg = Config::parse("[merit]\na = 1\n").unwrap();
        cfg.set("merit.a", "2.5").unwrap();
        assert_eq!(cfg.raw("merit", "a"), Some("2.5"));
        assert!(cfg.set("merit.bogus", "1").is_err());
        assert!(cfg.set("noseparator", "1").is_err());
    }

    #[test]
    fn resolver_records_defaults_in_schema_order() {
        let cfg = Config::parse("[merit]\nj_max = 10\na = 2\n").unwrap();
        let r = Resolver::new(&cfg);
        let j: u32 = r.require_u32("merit", "j_max").unwrap();
        let a = r.require_f64("merit", "a").unwrap();
        let tail = r.f64_or("thermal", "weight_tail", 1e-6).unwrap();
        assert_eq!(j, 10);
        assert_eq!(a, 2.0);
        assert_eq!(tail, 1e-6);
        let entries = r.manifest_entries();
        // canonical order: merit before thermal, a before j_max
        assert_eq!(entries[0].1, "a");
        assert_eq!(entries[1].1, "j_max");
        assert_eq!(entries[2].0, "thermal");
        assert_eq!(entries[2].2, "0.000001");
    }
}
