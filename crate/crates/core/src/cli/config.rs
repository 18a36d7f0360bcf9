use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Every key the config file and the command line understand.
pub const KEYS: &[&str] = &[
    "mode",
    "d",
    "sizes",
    "lengths",
    "n",
    "field",
    "field_value",
    "field_scale",
    "field_offset",
    "field_file",
    "seed",
    "decay",
    "modes",
    "alpha",
    "alpha_super",
    "alpha_start",
    "s0",
    "tol",
    "residual_tol",
    "max_iters",
    "count",
    "engine",
    "start",
    "control",
    "eps0",
    "out",
    "single_thread",
];

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const NAMES: &'static [&'static str] = &[$($text),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!("expected one of {}", Self::NAMES.join("|"))),
                }
            }
        }
    };
}

keyword_enum!(Mode {
    Solve => "solve",
    Threshold => "threshold",
    DingLiu => "dingliu",
    Family => "family",
    Diagnose => "diagnose",
    Selftest => "selftest",
});

keyword_enum!(FieldKind {
    Const => "const",
    Sin1 => "sin1",
    Cos1 => "cos1",
    Cos1Shifted => "cos1_shifted",
    TwoMode => "two_mode",
    Random => "random",
    File => "file",
});

keyword_enum!(Engine {
    Newton => "newton",
    Monotone => "monotone",
    Minimize => "minimize",
});

keyword_enum!(StartKind {
    Zero => "zero",
    ConstantGuess => "constant-guess",
});

keyword_enum!(Control {
    None => "none",
    DivergeDown => "diverge_down",
    DivergeUp => "diverge_up",
});

/// Recipe for `S` (or `g₀` in dingliu mode).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSpec {
    pub kind: FieldKind,
    /// Value of the `const` field.
    pub value: f64,
    /// The field is `scale · base + offset`.
    pub scale: f64,
    pub offset: f64,
    pub seed: u64,
    /// Spectral decay exponent `p` of the random field.
    pub decay: f64,
    /// Largest `|k|_∞` of the random field.
    pub modes: usize,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub d: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub n: u32,
    pub field: FieldSpec,
    pub alpha: Option<f64>,
    /// More negative `α` whose solution seeds the interval engines.
    pub alpha_super: Option<f64>,
    pub alpha_start: f64,
    pub s0: f64,
    pub tol: f64,
    pub residual_tol: f64,
    /// Engine iteration budget; engine-specific default when absent.
    pub max_iters: Option<usize>,
    pub count: usize,
    pub engine: Engine,
    pub start: StartKind,
    pub control: Control,
    /// `ε₀ / max|S|` for `M₋`.
    pub eps0: f64,
    pub out: PathBuf,
    pub single_thread: bool,
}

/// Raw `key = value` pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pairs: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut errors = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => raw.set(k.trim(), v.trim()),
                None => errors.push(format!("line {}: expected key = value, got {line:?}", lineno + 1)),
            }
        }
        if errors.is_empty() {
            Ok(raw)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RawConfig::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.pairs.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str)
    }

    /// Applies `other` on top of `self`.
    pub fn merge(&mut self, other: &RawConfig) {
        for (k, v) in &other.pairs {
            self.pairs.insert(k.clone(), v.clone());
        }
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn parse<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.raw.get(key)?;
        match v.parse() {
            Ok(x) => Some(x),
            Err(e) => {
                self.errors.push(format!("{key}: cannot parse {v:?}: {e}"));
                None
            }
        }
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key).unwrap_or(default)
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Option<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.raw.get(key)?;
        let mut out = Vec::new();
        for part in v.split(',') {
            match part.trim().parse() {
                Ok(x) => out.push(x),
                Err(e) => {
                    self.errors.push(format!("{key}: cannot parse {part:?}: {e}"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.errors.push(msg());
        }
    }
}

fn expand<T: Clone>(v: Vec<T>, d: usize) -> Vec<T> {
    if v.len() == 1 {
        vec![v[0].clone(); d]
    } else {
        v
    }
}

impl ExperimentConfig {
    /// Validates raw pairs, reporting every bad key at once.
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut r = Reader {
            raw,
            errors: Vec::new(),
        };
        for key in raw.pairs.keys() {
            if !KEYS.contains(&key.as_str()) {
                r.errors.push(format!("{key}: unknown key"));
            }
        }
        let mode = r.parse::<Mode>("mode");
        if raw.get("mode").is_none() {
            r.errors.push("mode: required".into());
        }
        let mode = mode.unwrap_or(Mode::Selftest);
        let d = r.or("d", 2usize);
        r.check(d == 2 || d == 4, || format!("d: must be 2 or 4, got {d}"));
        let sizes = expand(r.list("sizes").unwrap_or_else(|| vec![if d == 4 { 16 } else { 64 }]), d);
        r.check(sizes.len() == d, || format!("sizes: expected 1 or {d} entries, got {}", sizes.len()));
        r.check(sizes.iter().all(|&s| s >= 8 && s % 2 == 0), || {
            format!("sizes: entries must be even and at least 8, got {sizes:?}")
        });
        let lengths = expand(r.list("lengths").unwrap_or_else(|| vec![1.0]), d);
        r.check(lengths.len() == d, || format!("lengths: expected 1 or {d} entries, got {}", lengths.len()));
        r.check(lengths.iter().all(|&l: &f64| l > 0.0 && l.is_finite()), || {
            format!("lengths: entries must be positive, got {lengths:?}")
        });
        let n = r.or("n", (d / 2) as u32);
        r.check(2 * n as usize == d, || format!("n: must equal d/2 = {}, got {n}", d / 2));

        let kind = r.or("field", FieldKind::Const);
        let field = FieldSpec {
            kind,
            value: r.or("field_value", -1.0),
            scale: r.or("field_scale", 1.0),
            offset: r.or("field_offset", 0.0),
            seed: r.or("seed", 0u64),
            decay: r.or("decay", 3.0),
            modes: r.or("modes", 4usize),
            file: r.parse::<PathBuf>("field_file"),
        };
        r.check(field.decay > 1.0, || {
            format!("decay: spectral decay p must exceed 1, got {}", field.decay)
        });
        r.check(field.modes >= 1, || "modes: must be at least 1".into());
        r.check(kind != FieldKind::File || field.file.is_some(), || {
            "field_file: required when field = file".into()
        });
        r.check(field.scale.is_finite() && field.offset.is_finite() && field.value.is_finite(), || {
            "field_value/field_scale/field_offset: must be finite".into()
        });

        let alpha = r.parse::<f64>("alpha");
        let needs_alpha = mode == Mode::Solve;
        r.check(!needs_alpha || alpha.is_some(), || "alpha: required for mode solve".into());
        r.check(alpha.is_none_or(|a| a < 0.0), || format!("alpha: must be negative, got {alpha:?}"));
        let alpha_super = r.parse::<f64>("alpha_super");
        if let (Some(a), Some(s)) = (alpha, alpha_super) {
            r.check(s < a, || format!("alpha_super: must be below alpha = {a}, got {s}"));
        }
        let alpha_start = r.or("alpha_start", -1e-2);
        r.check(alpha_start < 0.0, || format!("alpha_start: must be negative, got {alpha_start}"));
        let s0 = r.or("s0", -1.0);
        r.check(s0 < 0.0, || format!("s0: must be negative, got {s0}"));
        let tol = r.or("tol", 1e-3);
        r.check(tol > 0.0, || format!("tol: must be positive, got {tol}"));
        let residual_tol = r.or("residual_tol", 1e-10);
        r.check(residual_tol > 0.0, || format!("residual_tol: must be positive, got {residual_tol}"));
        let max_iters = r.parse::<usize>("max_iters");
        r.check(max_iters != Some(0), || "max_iters: must be at least 1".into());
        let count = r.or("count", 8usize);
        r.check(count >= 1, || "count: must be at least 1".into());
        let eps0 = r.or("eps0", 0.05);
        r.check(eps0 > 0.0 && eps0 < 1.0, || format!("eps0: must lie in (0, 1), got {eps0}"));

        let cfg = ExperimentConfig {
            mode,
            d,
            sizes,
            lengths,
            n,
            field,
            alpha,
            alpha_super,
            alpha_start,
            s0,
            tol,
            residual_tol,
            max_iters,
            count,
            engine: r.or("engine", Engine::Newton),
            start: r.or("start", StartKind::Zero),
            control: r.or("control", Control::None),
            eps0,
            out: r.parse("out").unwrap_or_else(|| PathBuf::from(format!("kwlab-{}", mode.as_str()))),
            single_thread: r.or("single_thread", false),
        };
        if r.errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(r.errors))
        }
    }

    /// Canonical `key = value` form of the effective configuration.
    pub fn dump(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("mode", self.mode.as_str().into());
        put("d", self.d.to_string());
        put("sizes", join(self.sizes.iter().map(|x| x.to_string()).collect()));
        put("lengths", join(self.lengths.iter().map(|x| format!("{x:?}")).collect()));
        put("n", self.n.to_string());
        put("field", self.field.kind.as_str().into());
        put("field_value", format!("{:?}", self.field.value));
        put("field_scale", format!("{:?}", self.field.scale));
        put("field_offset", format!("{:?}", self.field.offset));
        if let Some(f) = &self.field.file {
            put("field_file", f.display().to_string());
        }
        put("seed", self.field.seed.to_string());
        put("decay", format!("{:?}", self.field.decay));
        put("modes", self.field.modes.to_string());
        if let Some(a) = self.alpha {
            put("alpha", format!("{a:?}"));
        }
        if let Some(a) = self.alpha_super {
            put("alpha_super", format!("{a:?}"));
        }
        put("alpha_start", format!("{:?}", self.alpha_start));
        put("s0", format!("{:?}", self.s0));
        put("tol", format!("{:?}", self.tol));
        put("residual_tol", format!("{:?}", self.residual_tol));
        if let Some(m) = self.max_iters {
            put("max_iters", m.to_string());
        }
        put("count", self.count.to_string());
        put("engine", self.engine.as_str().into());
        put("start", self.start.as_str().into());
        put("control", self.control.as_str().into());
        put("eps0", format!("{:?}", self.eps0));
        put("out", self.out.display().to_string());
        put("single_thread", self.single_thread.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(&RawConfig::parse(text)?)
    }

    #[test]
    fn defaults_and_expansion() {
        let c = cfg("mode = threshold\nfield = sin1\nfield_offset = -0.5\n").unwrap();
        assert_eq!(c.sizes, vec![64, 64]);
        assert_eq!(c.lengths, vec![1.0, 1.0]);
        assert_eq!(c.n, 1);
        let c = cfg("mode = solve\nd = 4\nalpha = -1  # comment\n").unwrap();
        assert_eq!(c.sizes, vec![16; 4]);
        assert_eq!(c.n, 2);
    }

    #[test]
    fn every_bad_key_is_listed() {
        let err = cfg("mode = solve\nd = 3\nsizes = 7\ndecay = 1\nbogus = 1\ntol = x\n").unwrap_err();
        let Error::Config(list) = err else { panic!() };
        let text = list.join("\n");
        for key in ["d:", "sizes:", "decay:", "bogus:", "tol:", "alpha:"] {
            assert!(text.contains(key), "{key} missing from {text}");
        }
    }

    #[test]
    fn dump_round_trips() {
        let c = cfg("mode = dingliu\nfield = random\nseed = 7\ntol = 1e-4\nlengths = 1, 2\n").unwrap();
        let again = cfg(&c.dump()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn malformed_line() {
        assert!(matches!(RawConfig::parse("mode solve"), Err(Error::Config(_))));
    }
}
