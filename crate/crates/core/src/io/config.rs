use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::read_text;
use crate::error::{Error, Result};
use crate::functionals::{DataMode, PhaseFidelity, Weights};
use crate::optimizer::ContinuationSchedule;
use crate::scalar::Real;

/// Settings of one `solve` run.
///
/// Text form: one `key = value` per line, `#` starts a comment. Paths are
/// taken relative to the working directory unless absolute.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: DataMode,
    pub fidelity: PhaseFidelity,
    /// Directory holding `kernel_re.csv`, `kernel_im.csv`, `kernel.meta`.
    pub kernel: Option<PathBuf>,
    pub amp: Option<PathBuf>,
    pub phase: Option<PathBuf>,
    pub data: Option<PathBuf>,
    /// Number of control points.
    pub n: usize,
    /// Spline degree.
    pub p: usize,
    /// Number of X-grid nodes.
    pub big_n: usize,
    pub alpha: f64,
    pub beta0: f64,
    pub q: f64,
    pub beta_min: f64,
    pub beta_p: f64,
    pub beta_w: f64,
    pub w0: f64,
    pub eps: f64,
    pub max_it: usize,
    pub tol_scale: f64,
    pub tol_floor: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: DataMode::PhaseOnly,
            fidelity: PhaseFidelity::Relative,
            kernel: None,
            amp: None,
            phase: None,
            data: None,
            n: 150,
            p: 2,
            big_n: 1000,
            alpha: 1e-6,
            beta0: 100.0,
            q: 0.25,
            beta_min: 1e-6,
            beta_p: 1.0,
            beta_w: 1.0,
            w0: 10.0,
            eps: 1e-10,
            max_it: 10_000,
            tol_scale: 2000.0,
            tol_floor: 1e-9,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

const KEYS: [&str; 22] = [
    "mode",
    "fidelity",
    "kernel",
    "amp",
    "phase",
    "data",
    "n",
    "p",
    "N",
    "alpha",
    "beta0",
    "q",
    "beta_min",
    "beta_p",
    "beta_w",
    "w0",
    "eps",
    "max_it",
    "tol_scale",
    "tol_floor",
    "seed",
    "out",
];

fn mode_name(m: DataMode) -> &'static str {
    match m {
        DataMode::PhaseOnly => "phase",
        DataMode::FullData => "full",
    }
}

fn fidelity_name(f: PhaseFidelity) -> &'static str {
    match f {
        PhaseFidelity::Relative => "relative",
        PhaseFidelity::SignEps => "sign_eps",
    }
}

pub fn parse_mode(s: &str) -> Option<DataMode> {
    match s {
        "phase" => Some(DataMode::PhaseOnly),
        "full" => Some(DataMode::FullData),
        _ => None,
    }
}

/// Parses a configuration; missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| Error::Config { line: line_no, key: key.to_string(), message };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line, "expected `key = value`".into()))?;
        let key = KEYS.iter().copied().find(|k| *k == key).ok_or_else(|| err(key, "unknown key".into()))?;
        if seen.iter().any(|(k, _)| *k == key) {
            return Err(err(key, "duplicate key".into()));
        }
        if value.is_empty() {
            return Err(err(key, "missing value".into()));
        }
        seen.push((key, line_no));

        let real = |lo_ok: &dyn Fn(f64) -> bool, what: &str| -> Result<f64> {
            let v: f64 = value.parse().map_err(|_| err(key, format!("`{value}` is not a number")))?;
            if !v.is_finite() || !lo_ok(v) {
                return Err(err(key, format!("{v} is out of range: {what}")));
            }
            Ok(v)
        };
        let count = |min: usize| -> Result<usize> {
            let v: usize = value.parse().map_err(|_| err(key, format!("`{value}` is not a non-negative integer")))?;
            if v < min {
                return Err(err(key, format!("{v} is out of range: must be ≥ {min}")));
            }
            Ok(v)
        };
        match key {
            "mode" => cfg.mode = parse_mode(value).ok_or_else(|| err(key, "expected `phase` or `full`".into()))?,
            "fidelity" => {
                cfg.fidelity = match value {
                    "relative" => PhaseFidelity::Relative,
                    "sign_eps" => PhaseFidelity::SignEps,
                    _ => return Err(err(key, "expected `relative` or `sign_eps`".into())),
                }
            }
            "kernel" => cfg.kernel = Some(PathBuf::from(value)),
            "amp" => cfg.amp = Some(PathBuf::from(value)),
            "phase" => cfg.phase = Some(PathBuf::from(value)),
            "data" => cfg.data = Some(PathBuf::from(value)),
            "out" => cfg.out = PathBuf::from(value),
            "n" => cfg.n = count(1)?,
            "p" => cfg.p = count(0)?,
            "N" => cfg.big_n = count(2)?,
            "alpha" => cfg.alpha = real(&|v| v >= 0.0, "must be ≥ 0")?,
            "beta0" => cfg.beta0 = real(&|v| v > 0.0, "must be > 0")?,
            "q" => cfg.q = real(&|v| v > 0.0 && v < 1.0, "must lie in (0, 1)")?,
            "beta_min" => cfg.beta_min = real(&|v| v > 0.0, "must be > 0")?,
            "beta_p" => cfg.beta_p = real(&|v| v >= 0.0, "must be ≥ 0")?,
            "beta_w" => cfg.beta_w = real(&|v| v >= 0.0, "must be ≥ 0")?,
            "w0" => cfg.w0 = real(&|v| v > 0.0, "must be > 0")?,
            "eps" => cfg.eps = real(&|v| v > 0.0, "must be > 0")?,
            "max_it" => cfg.max_it = count(1)?,
            "tol_scale" => cfg.tol_scale = real(&|v| v > 0.0, "must be > 0")?,
            "tol_floor" => cfg.tol_floor = real(&|v| v >= 0.0, "must be ≥ 0")?,
            "seed" => cfg.seed = value.parse().map_err(|_| err(key, format!("`{value}` is not a u64")))?,
            _ => unreachable!("key list and match arms agree"),
        }
    }

    let line_of = |key: &str| seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l);
    if cfg.n < cfg.p + 1 {
        let key = if line_of("n") >= line_of("p") { "n" } else { "p" };
        return Err(Error::Config {
            line: line_of(key),
            key: key.into(),
            message: format!("need n ≥ p + 1, got n = {}, p = {}", cfg.n, cfg.p),
        });
    }
    if cfg.beta_min >= cfg.beta0 {
        let key = if line_of("beta_min") >= line_of("beta0") { "beta_min" } else { "beta0" };
        return Err(Error::Config {
            line: line_of(key),
            key: key.into(),
            message: format!("need beta_min < beta0, got {} ≥ {}", cfg.beta_min, cfg.beta0),
        });
    }
    Ok(cfg)
}

impl RunConfig {
    /// Reads, parses and checks that all referenced files exist.
    pub fn load(path: &Path) -> Result<Self> {
        let cfg = parse_config(&read_text(path)?).map_err(|e| match e {
            Error::Config { line, key, message } => {
                Error::Config { line, key, message: format!("{message} (in {})", path.display()) }
            }
            other => other,
        })?;
        cfg.check_inputs()?;
        Ok(cfg)
    }

    /// Every input required by the mode is set and exists on disk.
    pub fn check_inputs(&self) -> Result<()> {
        let needed: [(&str, &Option<PathBuf>); 3] = match self.mode {
            DataMode::PhaseOnly => [("kernel", &self.kernel), ("amp", &self.amp), ("phase", &self.phase)],
            DataMode::FullData => [("kernel", &self.kernel), ("amp", &self.amp), ("data", &self.data)],
        };
        for (key, path) in needed {
            let path = path.as_ref().ok_or_else(|| Error::Config {
                line: 0,
                key: key.into(),
                message: format!("required in `{}` mode", mode_name(self.mode)),
            })?;
            if !path.exists() {
                return Err(Error::io(path, "referenced file does not exist"));
            }
        }
        Ok(())
    }

    pub fn weights<T: Real>(&self) -> Weights<T> {
        Weights {
            alpha: T::lit(self.alpha),
            beta: T::lit(self.beta0),
            beta_p: T::lit(self.beta_p),
            beta_w: T::lit(self.beta_w),
            w0: T::lit(self.w0),
            eps: T::lit(self.eps),
        }
    }

    pub fn schedule<T: Real>(&self) -> ContinuationSchedule<T> {
        ContinuationSchedule {
            beta0: T::lit(self.beta0),
            q: T::lit(self.q),
            beta_min: T::lit(self.beta_min),
            max_it: self.max_it,
            tol_floor: T::lit(self.tol_floor),
            tol_scale: T::lit(self.tol_scale),
        }
    }

    /// Text form accepted by [`parse_config`]; reals use round-trip precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mode", mode_name(self.mode).into());
        kv("fidelity", fidelity_name(self.fidelity).into());
        for (k, p) in [("kernel", &self.kernel), ("amp", &self.amp), ("phase", &self.phase), ("data", &self.data)] {
            if let Some(p) = p {
                kv(k, p.display().to_string());
            }
        }
        kv("n", self.n.to_string());
        kv("p", self.p.to_string());
        kv("N", self.big_n.to_string());
        for (k, v) in [
            ("alpha", self.alpha),
            ("beta0", self.beta0),
            ("q", self.q),
            ("beta_min", self.beta_min),
            ("beta_p", self.beta_p),
            ("beta_w", self.beta_w),
            ("w0", self.w0),
            ("eps", self.eps),
        ] {
            kv(k, format!("{v:e}"));
        }
        kv("max_it", self.max_it.to_string());
        kv("tol_scale", format!("{:e}", self.tol_scale));
        kv("tol_floor", format!("{:e}", self.tol_floor));
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.alpha, c.beta0, c.q, c.w0), (1e-6, 100.0, 0.25, 10.0));
        assert_eq!((c.beta_p, c.beta_w, c.eps), (1.0, 1.0, 1e-10));
        assert_eq!((c.n, c.p, c.big_n, c.max_it), (150, 2, 1000, 10_000));
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), c);
    }

    #[test]
    fn single_override() {
        let c = parse_config("alpha = 5e-6").unwrap();
        assert_eq!(c, RunConfig { alpha: 5e-6, ..RunConfig::default() });
    }

    #[test]
    fn range_errors_name_line_and_key() {
        match parse_config("n = 20\nq = 1.5\n") {
            Err(Error::Config { line, key, .. }) => assert_eq!((line, key.as_str()), (2, "q")),
            other => panic!("{other:?}"),
        }
        for bad in ["alpha = -1", "beta0 = 0", "N = 1", "q = 0", "w0 = nan", "max_it = 0", "eps = -1e-3"] {
            assert!(matches!(parse_config(bad), Err(Error::Config { line: 1, .. })), "{bad}");
        }
        let e = parse_config("p = 3\nn = 3").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, ref key, .. } if key == "n"), "{e}");
    }

    #[test]
    fn malformed_and_unknown_lines() {
        assert!(matches!(parse_config("bogus = 1"), Err(Error::Config { ref key, .. }) if key == "bogus"));
        assert!(matches!(parse_config("\nalpha 3"), Err(Error::Config { line: 2, .. })));
        assert!(parse_config("alpha = 1\nalpha = 2").is_err());
        assert!(parse_config("mode = both").is_err());
        assert!(parse_config("alpha =").is_err());
        let e = parse_config("Alpha = 1").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("Alpha"), "{e}");
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig {
            mode: DataMode::FullData,
            fidelity: PhaseFidelity::SignEps,
            kernel: Some("k".into()),
            data: Some("y.csv".into()),
            amp: Some("a.csv".into()),
            alpha: 1.0 / 3.0,
            q: 0.3,
            seed: 42,
            out: "results/run 1".into(),
            ..RunConfig::default()
        };
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn load_checks_referenced_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.cfg");
        let amp = dir.path().join("amp.csv");
        std::fs::write(&amp, "").unwrap();
        let text = format!("kernel = {0}\namp = {1}\nphase = {0}/nope.csv\n", dir.path().display(), amp.display());
        std::fs::write(&cfg_path, text).unwrap();
        assert!(matches!(RunConfig::load(&cfg_path), Err(Error::Io { .. })));
        std::fs::write(&cfg_path, format!("kernel = {}\n", dir.path().display())).unwrap();
        assert!(matches!(RunConfig::load(&cfg_path), Err(Error::Config { ref key, .. }) if key == "amp"));
    }
}
