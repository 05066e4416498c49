//! Flat `key = value` run configuration.
//!
//! Keys carry a section prefix (`crystal.`, `model.`, `solver.`, `sweep.`,
//! `report.`). Unknown keys are rejected. Environment variables named
//! `SIDONOR_<SECTION>_<KEY>` override file values, e.g. `SIDONOR_SOLVER_TOL`
//! for `solver.tol`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use sidonor::crystal::Coord;
use sidonor::donor_model::{OrbitalBasis, SignedAxis};

pub const ENV_PREFIX: &str = "SIDONOR_";

/// Every accepted key with its default; an empty default means unset.
const KEYS: &[(&str, &str)] = &[
    ("crystal.extent", "8"),
    ("crystal.radius_nm", "1.2"),
    ("crystal.shells", "all"),
    ("model.basis", "sp3d5s"),
    ("model.params", ""),
    ("model.dielectric", "11.7"),
    ("model.u0_ev", ""),
    ("model.target_binding_ev", "0.0456"),
    ("model.u0_range_ev", "-1,5"),
    ("model.calibration_tol_ev", "1e-4"),
    ("model.boundary_shift_ev", "10"),
    ("model.coulomb_tail", "true"),
    ("model.interface_depth_nm", ""),
    ("model.interface_normal", "+z"),
    ("model.eta", "1"),
    ("model.anchor_site", ""),
    ("model.anchor_khz", ""),
    ("solver.k", "2"),
    ("solver.sigma", "auto"),
    ("solver.tol", "1e-8"),
    ("solver.max_iter", "400000"),
    ("solver.seed", "20090101"),
    ("solver.basis_size", "48"),
    ("solver.filter_degree", "16"),
    ("solver.cluster_tol", "1e-7"),
    ("sweep.direction", "0,1,0"),
    ("sweep.fields", "0:3:7"),
    ("sweep.delta_e", "0.1"),
    ("sweep.merge_tol", "1e-4"),
    ("sweep.interface_fields", "0:40:9"),
    ("sweep.level_jump_ev", "0.02"),
    ("report.per_probe", "true"),
    ("report.cache", "true"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Default,
    Line(usize),
    Env(String),
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Env(v) => write!(f, "env {v}"),
            Origin::Flag => write!(f, "command line"),
        }
    }
}

/// Key/value pairs after defaults, file, environment and flags.
#[derive(Debug, Clone)]
pub struct RawConfig {
    values: BTreeMap<String, (String, Origin)>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl RawConfig {
    pub fn defaults() -> Self {
        RawConfig {
            values: KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), (v.to_string(), Origin::Default)))
                .collect(),
        }
    }

    /// Applies file text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::defaults();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {n}: expected `key = value`, got `{line}`"));
            };
            let (k, v) = (k.trim(), v.trim());
            if !known(k) {
                return err(format!("line {n}: unknown key `{k}`"));
            }
            if let Some(prev) = seen.insert(k.to_string(), n) {
                return err(format!("line {n}: key `{k}` already set on line {prev}"));
            }
            cfg.values.insert(k.to_string(), (v.to_string(), Origin::Line(n)));
        }
        Ok(cfg)
    }

    /// `SIDONOR_SECTION_KEY=value` pairs; anything else with the prefix is
    /// an error.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), ConfigError> {
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (name, v) in vars {
            let rest = name[ENV_PREFIX.len()..].to_ascii_lowercase();
            let key = rest.replacen('_', ".", 1);
            if !known(&key) {
                return err(format!("environment variable {name} does not match any key"));
            }
            self.values.insert(key, (v.trim().to_string(), Origin::Env(name)));
        }
        Ok(())
    }

    pub fn set_flag(&mut self, key: &str, value: &str) {
        debug_assert!(known(key));
        self.values.insert(key.to_string(), (value.to_string(), Origin::Flag));
    }

    fn get(&self, key: &str) -> (&str, &Origin) {
        let (v, o) = self.values.get(key).expect("every key has a default");
        (v.as_str(), o)
    }

    /// Sorted `key = value` lines of every set key; the hash input.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, (v, _)) in &self.values {
            if !v.is_empty() {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }
}

/// Field grid: explicit list `a,b,c` or `start:stop:count`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    if let Some((a, rest)) = s.split_once(':') {
        let (b, n) = rest.split_once(':').ok_or("range needs start:stop:count")?;
        let a: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
        let n: usize = n.trim().parse().map_err(|_| format!("bad count `{n}`"))?;
        if n < 1 || (n == 1 && a != b) {
            return Err("range count must be at least 2".into());
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        return Ok((0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect());
    }
    parse_list(s)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number `{}`", x.trim())))
        .collect()
}

pub fn parse_coord(s: &str) -> Result<Coord, String> {
    let t = s.trim().trim_start_matches('(').trim_end_matches(')');
    let v: Vec<i32> = t
        .split(',')
        .map(|x| x.trim().parse::<i32>().map_err(|_| format!("bad coordinate `{s}`")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] => Ok([x, y, z]),
        _ => Err(format!("coordinate `{s}` needs three integers")),
    }
}

/// `all` or parenthesized sites such as `(0,0,4) (1,1,1)`.
fn parse_shells(s: &str) -> Result<Option<Vec<Coord>>, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(None);
    }
    let mut out = Vec::new();
    let mut rest = s.trim();
    while let Some(open) = rest.find('(') {
        let close = rest[open..].find(')').ok_or(format!("unclosed `(` in `{s}`"))? + open;
        out.push(parse_coord(&rest[open..=close])?);
        rest = &rest[close + 1..];
    }
    if out.is_empty() || !rest.trim_matches(|c: char| c == ',' || c == ';' || c.is_whitespace()).is_empty() {
        return Err(format!("shell filter `{s}` is neither `all` nor a list of (x,y,z)"));
    }
    Ok(Some(out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub extent: [i32; 3],
    pub radius_nm: f64,
    pub shells: Option<Vec<Coord>>,
    pub basis: OrbitalBasis,
    pub params: Option<PathBuf>,
    pub dielectric: f64,
    pub u0_ev: Option<f64>,
    pub target_binding_ev: f64,
    pub u0_range_ev: (f64, f64),
    pub calibration_tol_ev: f64,
    pub boundary_shift_ev: f64,
    pub coulomb_tail: bool,
    pub interface_depth_nm: Option<f64>,
    pub interface_normal: SignedAxis,
    pub eta: f64,
    pub anchor: Option<(Coord, f64)>,
    pub k: usize,
    pub sigma: Sigma,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub basis_size: usize,
    pub filter_degree: usize,
    pub cluster_tol: f64,
    pub direction: [f64; 3],
    pub fields: Vec<f64>,
    pub delta_e: f64,
    pub merge_tol: f64,
    pub interface_fields: Vec<f64>,
    pub level_jump_ev: f64,
    pub per_probe: bool,
    pub cache: bool,
    /// sha256 of the canonical key list (plus parameter file bytes).
    pub hash: String,
}

struct Reader<'a>(&'a RawConfig);

impl Reader<'_> {
    fn fail<T>(&self, key: &str, msg: impl fmt::Display) -> Result<T, ConfigError> {
        let (v, o) = self.0.get(key);
        err(format!("{o}: `{key} = {v}`: {msg}"))
    }

    fn raw(&self, key: &str) -> &str {
        self.0.get(key).0
    }

    fn opt<T, F: Fn(&str) -> Result<T, String>>(&self, key: &str, f: F) -> Result<Option<T>, ConfigError> {
        let v = self.raw(key);
        if v.is_empty() {
            return Ok(None);
        }
        match f(v) {
            Ok(x) => Ok(Some(x)),
            Err(e) => self.fail(key, e),
        }
    }

    fn req<T, F: Fn(&str) -> Result<T, String>>(&self, key: &str, f: F) -> Result<T, ConfigError> {
        match self.opt(key, f)? {
            Some(x) => Ok(x),
            None => self.fail(key, "value required"),
        }
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.req(key, |s| s.parse::<T>().map_err(|_| format!("not a valid {}", std::any::type_name::<T>())))
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.num(key)?;
        if !(v > 0.0) || !v.is_finite() {
            return self.fail(key, "must be positive");
        }
        Ok(v)
    }

    fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        self.req(key, |s| match s {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err("expected true or false".into()),
        })
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let r = Reader(raw);
        let extent = r.req("crystal.extent", |s| {
            let v: Vec<i32> = s
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| format!("bad integer `{x}`")))
                .collect::<Result<_, String>>()?;
            match v[..] {
                [n] if n >= 1 => Ok([n; 3]),
                [a, b, c] if a >= 1 && b >= 1 && c >= 1 => Ok([a, b, c]),
                _ => Err("expected n or nx,ny,nz with every entry >= 1".into()),
            }
        })?;
        let basis = r.req("model.basis", |s| {
            OrbitalBasis::parse(s).ok_or_else(|| "expected sp3s or sp3d5s".to_string())
        })?;
        let u0_range_ev = r.req("model.u0_range_ev", |s| match parse_list(s)?[..] {
            [a, b] if a < b => Ok((a, b)),
            _ => Err("expected lo,hi with lo < hi".into()),
        })?;
        let anchor_site = r.opt("model.anchor_site", parse_coord)?;
        let anchor_khz = r.opt("model.anchor_khz", |s| s.parse::<f64>().map_err(|_| "not a number".to_string()))?;
        let anchor = match (anchor_site, anchor_khz) {
            (Some(s), Some(k)) => Some((s, k)),
            (None, None) => None,
            (Some(_), None) => return r.fail("model.anchor_khz", "anchor site given without a value"),
            (None, Some(_)) => return r.fail("model.anchor_site", "anchor value given without a site"),
        };
        let direction = r.req("sweep.direction", |s| match parse_list(s)?[..] {
            [x, y, z] if [x, y, z].iter().all(|v| v.is_finite()) => Ok([x, y, z]),
            _ => Err("expected three numbers".into()),
        })?;
        let grid = |key: &str| {
            r.req(key, |s| {
                let g = parse_grid(s)?;
                if g.windows(2).any(|w| w[0] >= w[1]) || g.iter().any(|e| !e.is_finite()) {
                    return Err("fields must be finite and strictly increasing".into());
                }
                Ok(g)
            })
        };
        let k: usize = r.num("solver.k")?;
        if k == 0 {
            return r.fail("solver.k", "must be at least 1");
        }
        let dielectric: f64 = r.num("model.dielectric")?;
        if !(dielectric > 1.0) {
            return r.fail("model.dielectric", "must exceed 1");
        }
        let params = r.opt("model.params", |s| Ok(PathBuf::from(s)))?;

        let mut hasher = Sha256::new();
        hasher.update(raw.canonical().as_bytes());
        if let Some(p) = &params {
            match std::fs::read(p) {
                Ok(bytes) => hasher.update(&bytes),
                Err(e) => return r.fail("model.params", format!("cannot read: {e}")),
            }
        }
        let hash = format!("{:x}", hasher.finalize());

        Ok(RunConfig {
            extent,
            radius_nm: r.positive("crystal.radius_nm")?,
            shells: r.req("crystal.shells", parse_shells)?,
            basis,
            params,
            dielectric,
            u0_ev: r.opt("model.u0_ev", |s| s.parse::<f64>().map_err(|_| "not a number".to_string()))?,
            target_binding_ev: r.num("model.target_binding_ev")?,
            u0_range_ev,
            calibration_tol_ev: r.positive("model.calibration_tol_ev")?,
            boundary_shift_ev: r.num("model.boundary_shift_ev")?,
            coulomb_tail: r.bool("model.coulomb_tail")?,
            interface_depth_nm: r.opt("model.interface_depth_nm", |s| match s.parse::<f64>() {
                Ok(d) if d > 0.0 => Ok(d),
                _ => Err("must be a positive number".to_string()),
            })?,
            interface_normal: r.req("model.interface_normal", |s| {
                SignedAxis::parse(s).ok_or_else(|| "expected one of +x, -x, +y, -y, +z, -z".to_string())
            })?,
            eta: r.positive("model.eta")?,
            anchor,
            k,
            sigma: r.req("solver.sigma", |s| {
                if s.eq_ignore_ascii_case("auto") {
                    Ok(Sigma::Auto)
                } else {
                    s.parse::<f64>().map(Sigma::Fixed).map_err(|_| "expected auto or a number".to_string())
                }
            })?,
            tol: r.positive("solver.tol")?,
            max_iter: r.num("solver.max_iter")?,
            seed: r.num("solver.seed")?,
            basis_size: r.num("solver.basis_size")?,
            filter_degree: r.num("solver.filter_degree")?,
            cluster_tol: r.positive("solver.cluster_tol")?,
            direction,
            fields: grid("sweep.fields")?,
            delta_e: r.req("sweep.delta_e", |s| match s.parse::<f64>() {
                Ok(d) if d >= 0.0 => Ok(d),
                _ => Err("must be a number >= 0".to_string()),
            })?,
            merge_tol: r.req("sweep.merge_tol", |s| match s.parse::<f64>() {
                Ok(d) if d >= 0.0 => Ok(d),
                _ => Err("must be a number >= 0".to_string()),
            })?,
            interface_fields: grid("sweep.interface_fields")?,
            level_jump_ev: r.positive("sweep.level_jump_ev")?,
            per_probe: r.bool("report.per_probe")?,
            cache: r.bool("report.cache")?,
            hash,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::from_raw(&RawConfig::defaults()).unwrap();
        assert_eq!(c.extent, [8, 8, 8]);
        assert_eq!(c.fields, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(c.sigma, Sigma::Auto);
        assert!(c.u0_ev.is_none());
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let e = RawConfig::parse("solver.tol = 1e-9\nsolver.tolerance = 1\n").unwrap_err();
        assert!(e.0.contains("line 2") && e.0.contains("solver.tolerance"), "{e}");
        let e = RawConfig::parse("solver.k = 1\nsolver.k = 2").unwrap_err();
        assert!(e.0.contains("already set on line 1"));
        assert!(RawConfig::parse("just words").is_err());
    }

    #[test]
    fn bad_values_name_their_origin() {
        let raw = RawConfig::parse("# comment\n\nsolver.tol = -1\n").unwrap();
        let e = RunConfig::from_raw(&raw).unwrap_err();
        assert!(e.0.contains("line 3") && e.0.contains("solver.tol"), "{e}");
        let raw = RawConfig::parse("sweep.fields = 0,2,1").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("model.anchor_site = (0,0,4)").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn env_overrides_by_prefix() {
        let mut raw = RawConfig::parse("solver.tol = 1e-9").unwrap();
        raw.apply_env(vec![
            ("SIDONOR_SOLVER_TOL".to_string(), "1e-7".to_string()),
            ("SIDONOR_MODEL_U0_EV".to_string(), "2.5".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ])
        .unwrap();
        let c = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(c.tol, 1e-7);
        assert_eq!(c.u0_ev, Some(2.5));
        let e = raw
            .apply_env(vec![("SIDONOR_SOLVER_TOLL".to_string(), "1".to_string())])
            .unwrap_err();
        assert!(e.0.contains("SIDONOR_SOLVER_TOLL"));
    }

    #[test]
    fn hash_tracks_effective_values() {
        let a = RunConfig::from_raw(&RawConfig::parse("solver.tol = 1e-9").unwrap()).unwrap();
        let b = RunConfig::from_raw(&RawConfig::parse("# same\nsolver.tol = 1e-9\n").unwrap()).unwrap();
        let c = RunConfig::from_raw(&RawConfig::parse("solver.tol = 1e-10").unwrap()).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn grids_and_filters() {
        assert_eq!(parse_grid("0:40:3").unwrap(), vec![0.0, 20.0, 40.0]);
        assert_eq!(parse_grid("0, 1.5").unwrap(), vec![0.0, 1.5]);
        assert!(parse_grid("0:1").is_err());
        assert_eq!(parse_shells("all").unwrap(), None);
        assert_eq!(
            parse_shells("(0,0,4) (1,1,1)").unwrap(),
            Some(vec![[0, 0, 4], [1, 1, 1]])
        );
        assert_eq!(parse_shells("(0, -4, 0)").unwrap(), Some(vec![[0, -4, 0]]));
        assert!(parse_shells("(0,0)").is_err());
        assert!(parse_shells("shell").is_err());
    }
}
