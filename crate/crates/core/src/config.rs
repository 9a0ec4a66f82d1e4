//! Plain-text run configuration.
//!
//! One `section.key = value` pair per line; `#` starts a comment. Unknown
//! keys and repeated keys are rejected. Durations (`revision.step`,
//! `revision.interval`, a numeric `encoder.history`) are frame counts, or
//! seconds with an `s` / `ms` suffix, converted with `encoder.frame_ms`
//! when the file is parsed. Relative paths resolve against the file's
//! directory.
//!
//! ```text
//! encoder.layers = 2
//! weights.seed = 7
//! revision.step = 1s
//! revision.interval = 0.4s
//! session.features = features.srf
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::encoder::{EncoderConfig, History, WeightSource};
use crate::error::{Error, Result};
use crate::formats;
use crate::harness::{Mode, SessionConfig, SessionInput};
use crate::scheduler::RevisionPolicy;

/// Environment variable that overrides `weights.seed`.
pub const SEED_ENV: &str = "STREAMREV_SEED";

const KEYS: &[&str] = &[
    "encoder.layers",
    "encoder.heads",
    "encoder.d_model",
    "encoder.d_ff",
    "encoder.vocab",
    "encoder.d_in",
    "encoder.history",
    "encoder.conv_kernel",
    "encoder.frame_ms",
    "weights.seed",
    "weights.path",
    "revision.step",
    "revision.interval",
    "revision.final",
    "decoder.theta",
    "session.mode",
    "session.features",
    "session.posteriors",
    "session.revised",
    "session.reference",
    "session.trace_window",
];

const PATH_KEYS: &[&str] = &[
    "weights.path",
    "session.features",
    "session.posteriors",
    "session.revised",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub seed: u64,
    /// SRW1 weights; seeded weights when absent.
    pub weights: Option<PathBuf>,
    pub policy: RevisionPolicy,
    pub mode: Mode,
    pub features: Option<PathBuf>,
    pub posteriors: Option<PathBuf>,
    pub revised: Option<PathBuf>,
    pub reference: Option<Vec<u32>>,
    pub trace_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            seed: 0,
            weights: None,
            policy: RevisionPolicy {
                sigma: 50,
                nu: 20,
                final_revision: true,
                theta: 0.3,
            },
            mode: Mode::Revision,
            features: None,
            posteriors: None,
            revised: None,
            reference: None,
            trace_window: 20,
        }
    }
}

/// Raw `key -> value` pairs; later layers replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Entries(BTreeMap<String, String>);

impl Entries {
    /// Parses config text. Paths are resolved against `base` when given.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut out = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `section.key = value`", no + 1))
            })?;
            let key = key.trim();
            if out.0.contains_key(key) {
                return Err(Error::Config(format!("line {}: `{key}` set twice", no + 1)));
            }
            out.insert(key, value.trim(), base)
                .map_err(|e| Error::Config(format!("line {}: {}", no + 1, strip(e))))?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    /// Sets one key, replacing any earlier value.
    pub fn insert(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        let value = match base {
            Some(dir) if PATH_KEYS.contains(&key) && Path::new(value).is_relative() => {
                dir.join(value).to_string_lossy().into_owned()
            }
            _ => value.to_string(),
        };
        self.0.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.insert(k.trim(), v.trim(), None)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::from_entries(self)
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

/// Frame count from `N`, `Xs` or `Xms`; seconds must land on whole frames.
pub fn frames_from_duration(key: &str, v: &str, frame_ms: f64) -> Result<usize> {
    let ms = if let Some(x) = v.strip_suffix("ms") {
        num::<f64>(key, x.trim())?
    } else if let Some(x) = v.strip_suffix('s') {
        num::<f64>(key, x.trim())? * 1000.0
    } else {
        return num(key, v);
    };
    let frames = ms / frame_ms;
    let rounded = frames.round();
    if !(rounded >= 0.0 && (frames - rounded).abs() < 1e-6) {
        return Err(Error::Config(format!(
            "`{key}`: {v} is not a whole number of {frame_ms} ms frames"
        )));
    }
    Ok(rounded as usize)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "`{key}`: expected true or false, got `{v}`"
        ))),
    }
}

pub fn parse_tokens(v: &str) -> Result<Vec<u32>> {
    v.split_whitespace()
        .map(|t| num("session.reference", t))
        .collect()
}

impl RunConfig {
    pub fn from_entries(entries: &Entries) -> Result<Self> {
        let mut c = Self::default();
        let e = &mut c.encoder;
        for (key, v) in &entries.0 {
            let v = v.as_str();
            match key.as_str() {
                "encoder.layers" => e.layers = num(key, v)?,
                "encoder.heads" => e.heads = num(key, v)?,
                "encoder.d_model" => e.d_model = num(key, v)?,
                "encoder.d_ff" => e.d_ff = num(key, v)?,
                "encoder.vocab" => e.vocab = num(key, v)?,
                "encoder.d_in" => e.d_in = num(key, v)?,
                "encoder.conv_kernel" => e.conv_kernel = num(key, v)?,
                "encoder.frame_ms" => e.frame_ms = num(key, v)?,
                _ => {}
            }
        }
        if !(c.encoder.frame_ms.is_finite() && c.encoder.frame_ms > 0.0) {
            return Err(Error::Config("`encoder.frame_ms` must be positive".into()));
        }
        let frame_ms = c.encoder.frame_ms;
        for (key, v) in &entries.0 {
            let v = v.as_str();
            match key.as_str() {
                "encoder.history" => {
                    c.encoder.history = match v {
                        "all" => History::All,
                        _ => History::Frames(frames_from_duration(key, v, frame_ms)?),
                    }
                }
                "weights.seed" => c.seed = num(key, v)?,
                "weights.path" => c.weights = Some(PathBuf::from(v)),
                "revision.step" => c.policy.sigma = frames_from_duration(key, v, frame_ms)?,
                "revision.interval" => c.policy.nu = frames_from_duration(key, v, frame_ms)?,
                "revision.final" => c.policy.final_revision = parse_bool(key, v)?,
                "decoder.theta" => c.policy.theta = num(key, v)?,
                "session.mode" => c.mode = v.parse()?,
                "session.features" => c.features = Some(PathBuf::from(v)),
                "session.posteriors" => c.posteriors = Some(PathBuf::from(v)),
                "session.revised" => c.revised = Some(PathBuf::from(v)),
                "session.reference" => c.reference = Some(parse_tokens(v)?),
                "session.trace_window" => c.trace_window = num(key, v)?,
                _ => {}
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Entries::load(path)?.resolve()
    }

    /// Replaces the seed with `STREAMREV_SEED` when that is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}: cannot parse `{v}` as a seed")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(strip(e)));
        wrap(self.encoder.validate())?;
        wrap(self.policy.validate())?;
        if self.trace_window == 0 {
            return Err(Error::Config("`session.trace_window` must be >= 1".into()));
        }
        match (&self.features, &self.posteriors) {
            (Some(_), Some(_)) => Err(Error::Config(
                "set either `session.features` or `session.posteriors`, not both".into(),
            )),
            (None, None) => Err(Error::Config(
                "no input: set `session.features` or `session.posteriors`".into(),
            )),
            _ if self.revised.is_some() && self.posteriors.is_none() => Err(Error::Config(
                "`session.revised` needs `session.posteriors`".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Loads the inputs into a session. Missing files are config errors.
    pub fn session(&self) -> Result<SessionConfig> {
        let load = |p: &PathBuf| {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "input file not found: {}",
                    p.display()
                )));
            }
            formats::load_matrix(p)
        };
        let input = match (&self.features, &self.posteriors) {
            (Some(f), _) => SessionInput::Features(load(f)?),
            (None, Some(p)) => SessionInput::Posteriors {
                causal: load(p)?,
                revised: self.revised.as_ref().map(load).transpose()?,
            },
            (None, None) => return Err(Error::Config("no session input".into())),
        };
        let weights = match &self.weights {
            Some(p) if !p.exists() => {
                return Err(Error::Config(format!(
                    "weights file not found: {}",
                    p.display()
                )))
            }
            Some(p) => WeightSource::File(p.clone()),
            None => WeightSource::Seeded(self.seed),
        };
        Ok(SessionConfig {
            encoder: self.encoder.clone(),
            weights,
            policy: self.policy,
            mode: self.mode,
            input,
            reference: self.reference.clone(),
        })
    }

    /// The effective configuration in the file grammar, durations in frames.
    pub fn to_text(&self) -> String {
        let e = &self.encoder;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("encoder.layers", e.layers.to_string());
        kv("encoder.heads", e.heads.to_string());
        kv("encoder.d_model", e.d_model.to_string());
        kv("encoder.d_ff", e.d_ff.to_string());
        kv("encoder.vocab", e.vocab.to_string());
        kv("encoder.d_in", e.d_in.to_string());
        kv("encoder.history", e.history.to_string());
        kv("encoder.conv_kernel", e.conv_kernel.to_string());
        kv("encoder.frame_ms", e.frame_ms.to_string());
        kv("weights.seed", self.seed.to_string());
        if let Some(p) = &self.weights {
            kv("weights.path", p.display().to_string());
        }
        kv("revision.step", self.policy.sigma.to_string());
        kv("revision.interval", self.policy.nu.to_string());
        kv("revision.final", self.policy.final_revision.to_string());
        kv("decoder.theta", self.policy.theta.to_string());
        kv("session.mode", self.mode.to_string());
        for (k, p) in [
            ("session.features", &self.features),
            ("session.posteriors", &self.posteriors),
            ("session.revised", &self.revised),
        ] {
            if let Some(p) = p {
                kv(k, p.display().to_string());
            }
        }
        if let Some(r) = &self.reference {
            kv(
                "session.reference",
                r.iter().map(u32::to_string).collect::<Vec<_>>().join(" "),
            );
        }
        kv("session.trace_window", self.trace_window.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
# toy run
encoder.layers = 1
weights.seed = 9
revision.step = 1s
revision.interval = 400ms   # ten-second chunks would be too slow
session.features = feats.srf
session.reference = 1 2 3
";

    #[test]
    fn parses_and_converts_seconds() {
        let c = Entries::parse(BASIC, Some(Path::new("/data")))
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(c.encoder.layers, 1);
        assert_eq!(c.seed, 9);
        assert_eq!((c.policy.sigma, c.policy.nu), (50, 20));
        assert_eq!(c.features, Some(PathBuf::from("/data/feats.srf")));
        assert_eq!(c.reference, Some(vec![1, 2, 3]));
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let unknown = Entries::parse("encoder.depth = 3\n", None).unwrap_err();
        assert!(matches!(unknown, Error::Config(ref m) if m.contains("encoder.depth")));
        let twice = Entries::parse("weights.seed = 1\nweights.seed = 2\n", None).unwrap_err();
        assert!(matches!(twice, Error::Config(_)));
        assert!(Entries::parse("no equals sign\n", None).is_err());
    }

    #[test]
    fn fractional_frames_rejected() {
        assert_eq!(frames_from_duration("k", "0.4s", 20.0).unwrap(), 20);
        assert_eq!(frames_from_duration("k", "30", 20.0).unwrap(), 30);
        assert!(frames_from_duration("k", "0.41s", 20.0).is_err());
        assert!(frames_from_duration("k", "-1s", 20.0).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut entries = Entries::parse(BASIC, Some(Path::new("/data"))).unwrap();
        entries.set_override("encoder.history = 0.1s").unwrap();
        entries.set_override("session.mode=causal").unwrap();
        let c = entries.resolve().unwrap();
        assert_eq!(c.encoder.history, History::Frames(5));
        let again = Entries::parse(&c.to_text(), None)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn input_is_required_and_exclusive() {
        assert!(Entries::default().resolve().is_err());
        let both = "session.features = a\nsession.posteriors = b\n";
        assert!(Entries::parse(both, None).unwrap().resolve().is_err());
    }

    #[test]
    fn missing_input_names_the_path() {
        let c = Entries::parse("session.features = /nonexistent/x.srf\n", None)
            .unwrap()
            .resolve()
            .unwrap();
        let err = c.session().unwrap_err().to_string();
        assert!(err.contains("/nonexistent/x.srf"), "{err}");
    }
}
