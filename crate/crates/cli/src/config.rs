//! Run configuration: defaults, named presets, config files and overrides.
//!
//! Everything is resolved into a flat `section.key → value` map first, so the
//! exact settings of a run can be echoed into every output file. Config files
//! are TOML with one level of sections:
//!
//! ```toml
//! [model]
//! n = 7
//! j = 1
//! h = 0.5
//!
//! [train]
//! loss = "energy"
//! tau = 5000
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rotnqs::ansatz::{AnsatzSpec, FfnnShape, RbmShape};
use rotnqs::diagnostics::{default_grid, validate_grid, RunSpec};
use rotnqs::model::{IsingParams, LanczosOptions};
use rotnqs::train::{Loss, PretrainConfig, TrainConfig};

pub type Settings = BTreeMap<String, String>;

/// Every accepted key with its default value.
const DEFAULTS: &[(&str, &str)] = &[
    ("ansatz.alpha", "1"),
    ("ansatz.complex", "true"),
    ("ansatz.kind", "rbm"),
    ("ansatz.linear_output", "false"),
    ("ansatz.widths", "auto"),
    ("ed.dense", "false"),
    ("gate.points", "20"),
    ("grid.phis", ""),
    ("grid.points", "33"),
    ("lanczos.max_iters", "300"),
    ("lanczos.tol", "1e-10"),
    ("model.h", "0.5"),
    ("model.j", "-1"),
    ("model.n", "5"),
    ("model.phi", "0"),
    ("pretrain.eps", "1e-6"),
    ("pretrain.eta", "0.01"),
    ("pretrain.init_scale", "0.01"),
    ("pretrain.max_iters", "20000"),
    ("pretrain.tol", "1e-8"),
    ("run.jobs", "0"),
    ("run.preset", "custom"),
    ("run.seed", "1"),
    ("run.seed_mode", "distinct"),
    ("run.seeds", "1"),
    ("train.early_stop", "none"),
    ("train.eps", "1e-6"),
    ("train.eta", "0.01"),
    ("train.loss", "energy"),
    ("train.qgt_spectrum", "false"),
    ("train.record_every", "10"),
    ("train.tau", "5000"),
];

pub const PRESETS: &[&str] = &[
    "fig2_ferro",
    "fig2_antiferro",
    "fig3_ferro",
    "fig3_antiferro",
    "coherence",
    "fig4_compare",
    "fig5_saddle",
];

fn preset_overrides(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match name {
        "fig2_ferro" => &[
            ("model.j", "-1"),
            ("model.h", "0.5"),
            ("train.loss", "infidelity"),
            ("run.seeds", "10"),
        ],
        "fig2_antiferro" => &[
            ("model.j", "1"),
            ("model.h", "0.5"),
            ("train.loss", "infidelity"),
            ("run.seeds", "10"),
        ],
        // Negative field: with the literal `+h Σ X` sign this puts the
        // ferromagnetic ground state in the same parity sector as |W⟩.
        "fig3_ferro" => &[("model.j", "-1"), ("model.h", "-0.5"), ("run.seeds", "10")],
        "fig3_antiferro" => &[("model.j", "1"), ("model.h", "0.5"), ("run.seeds", "10")],
        "coherence" => &[
            ("model.j", "-1"),
            ("model.h", "0.5"),
            ("train.tau", "1000"),
            ("run.seeds", "10"),
        ],
        "fig4_compare" => &[
            ("model.j", "-1"),
            ("model.h", "-0.5"),
            ("model.phi", "pi/3"),
            ("ansatz.alpha", "4"),
        ],
        "fig5_saddle" => &[
            ("model.j", "-1"),
            ("model.h", "0.5"),
            ("model.phi", "pi/3"),
            ("ansatz.alpha", "4"),
            ("train.tau", "100000"),
            ("train.record_every", "10"),
            ("run.seeds", "10"),
        ],
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

pub fn defaults() -> Settings {
    DEFAULTS
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn is_known_key(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key)
}

/// Defaults with the named preset applied.
pub fn preset(name: &str) -> Result<Settings> {
    let Some(over) = preset_overrides(name) else {
        return err(format!(
            "unknown preset `{name}` (known: {})",
            PRESETS.join(", ")
        ));
    };
    let mut s = defaults();
    s.insert("run.preset".into(), name.into());
    for (k, v) in over {
        s.insert(k.to_string(), v.to_string());
    }
    Ok(s)
}

/// Inserts `key = value`, rejecting unknown keys.
pub fn set(settings: &mut Settings, key: &str, value: &str) -> Result<()> {
    if !is_known_key(key) {
        return err(format!("unknown key `{key}`"));
    }
    settings.insert(key.to_string(), value.to_string());
    Ok(())
}

/// Parses `key=value` as given to `--set`.
pub fn parse_assignment(text: &str) -> Result<(String, String)> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => err(format!("expected key=value, got `{text}`")),
    }
}

fn value_to_string(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|x| value_to_string(key, x))
            .collect::<Result<Vec<_>>>()?
            .join(","),
        _ => return err(format!("key `{key}`: unsupported value type")),
    })
}

/// Parses a config file into flat settings. Syntax errors carry the TOML
/// parser's line and column; unknown keys are reported by name.
pub fn parse_config(text: &str) -> Result<Settings> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
    let mut out = Settings::new();
    for (section, body) in &table {
        let toml::Value::Table(entries) = body else {
            return err(format!(
                "config: key `{section}` must be inside a [section]"
            ));
        };
        for (key, value) in entries {
            let full = format!("{section}.{key}");
            if !is_known_key(&full) {
                return err(format!("config: unknown key `{full}`"));
            }
            out.insert(full.clone(), value_to_string(&full, value)?);
        }
    }
    Ok(out)
}

/// Parses an angle: a number, or `pi`, `pi/m`, `kpi`, `kpi/m`.
pub fn parse_angle(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Ok(x) = t.parse::<f64>() {
        return Some(x);
    }
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim().parse::<f64>().ok()?),
        None => (t, 1.0),
    };
    let k = num.strip_suffix("pi")?.trim().trim_end_matches('*');
    let k = if k.is_empty() { 1.0 } else { k.parse::<f64>().ok()? };
    Some(k * PI / den)
}

/// Fully parsed experiment settings.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub preset: String,
    pub params: IsingParams,
    pub run: RunSpec,
    pub phis: Vec<f64>,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub lanczos: LanczosOptions,
    pub dense: bool,
    pub gate_points: usize,
    pub settings: Settings,
}

struct Reader<'a>(&'a Settings);

impl Reader<'_> {
    fn raw(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ConfigError(format!("missing key `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T> {
        let v = self.raw(key)?;
        v.trim()
            .parse()
            .map_err(|_| ConfigError(format!("key `{key}`: expected {what}, got `{v}`")))
    }

    fn float(&self, key: &str) -> Result<f64> {
        let x: f64 = self.parse(key, "a number")?;
        if !x.is_finite() {
            return err(format!("key `{key}`: value must be finite"));
        }
        Ok(x)
    }

    fn angle(&self, key: &str) -> Result<f64> {
        let v = self.raw(key)?;
        parse_angle(v).ok_or_else(|| ConfigError(format!("key `{key}`: expected an angle, got `{v}`")))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.parse(key, "a non-negative integer")
    }

    fn bool(&self, key: &str) -> Result<bool> {
        self.parse(key, "true or false")
    }
}

impl Experiment {
    pub fn resolve(settings: &Settings) -> Result<Self> {
        if let Some(k) = settings.keys().find(|k| !is_known_key(k)) {
            return err(format!("unknown key `{k}`"));
        }
        let mut full = defaults();
        full.extend(settings.iter().map(|(k, v)| (k.clone(), v.clone())));
        let r = Reader(&full);

        let n = r.usize("model.n")?;
        let params = IsingParams::new(n, r.float("model.j")?, r.float("model.h")?, r.angle("model.phi")?)
            .map_err(|e| ConfigError(format!("model: {e}")))?;

        let ansatz = match r.raw("ansatz.kind")? {
            "rbm" => AnsatzSpec::Rbm(RbmShape {
                n_sites: n,
                alpha: r.float("ansatz.alpha")?,
                complex: r.bool("ansatz.complex")?,
            }),
            "ffnn" => {
                let w = r.raw("ansatz.widths")?;
                let shape = if w == "auto" {
                    FfnnShape {
                        linear_output: r.bool("ansatz.linear_output")?,
                        ..FfnnShape::default_for(n)
                    }
                } else {
                    let widths = w
                        .split(',')
                        .map(|x| x.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| ConfigError(format!("key `ansatz.widths`: bad list `{w}`")))?;
                    FfnnShape {
                        widths,
                        linear_output: r.bool("ansatz.linear_output")?,
                    }
                };
                AnsatzSpec::Ffnn(shape)
            }
            other => return err(format!("key `ansatz.kind`: expected rbm or ffnn, got `{other}`")),
        };
        rotnqs::ansatz::Ansatz::zeros(&ansatz).map_err(|e| ConfigError(format!("ansatz: {e}")))?;

        let loss: Loss = r
            .raw("train.loss")?
            .parse()
            .map_err(|_| ConfigError(format!("key `train.loss`: expected energy or infidelity")))?;
        let early_stop = match r.raw("train.early_stop")? {
            "none" | "" => None,
            _ => Some(r.float("train.early_stop")?),
        };
        let train = TrainConfig {
            loss,
            eta: r.float("train.eta")?,
            eps: r.float("train.eps")?,
            max_iters: r.usize("train.tau")?,
            record_every: r.usize("train.record_every")?,
            early_stop,
            record_states: false,
            qgt_spectrum: r.bool("train.qgt_spectrum")?,
        };
        train.validate().map_err(|e| ConfigError(format!("train: {e}")))?;
        let pretrain = PretrainConfig {
            eta: r.float("pretrain.eta")?,
            eps: r.float("pretrain.eps")?,
            max_iters: r.usize("pretrain.max_iters")?,
            tol: r.float("pretrain.tol")?,
        };
        let init_scale = r.float("pretrain.init_scale")?;
        if !(init_scale >= 0.0) {
            return err("key `pretrain.init_scale`: must be non-negative");
        }

        let phis = match r.raw("grid.phis")?.trim() {
            "" => default_grid(r.usize("grid.points")?),
            list => list
                .split(',')
                .map(|x| parse_angle(x).ok_or_else(|| ConfigError(format!("key `grid.phis`: bad angle `{x}`"))))
                .collect::<Result<Vec<_>>>()?,
        };
        validate_grid(&phis).map_err(|e| ConfigError(format!("grid: {e}")))?;

        let seed: u64 = r.parse("run.seed", "a non-negative integer")?;
        let count = r.usize("run.seeds")?;
        if count == 0 {
            return err("key `run.seeds`: need at least one seed");
        }
        let seeds = match r.raw("run.seed_mode")? {
            "distinct" => (0..count as u64).map(|k| seed + k).collect(),
            "repeat" => vec![seed; count],
            other => return err(format!("key `run.seed_mode`: expected distinct or repeat, got `{other}`")),
        };

        let lanczos = LanczosOptions {
            max_iters: r.usize("lanczos.max_iters")?,
            tol: r.float("lanczos.tol")?,
            start: None,
            record_trajectory: false,
        };

        Ok(Self {
            preset: r.raw("run.preset")?.to_string(),
            params,
            run: RunSpec {
                params,
                ansatz,
                train,
                pretrain,
                init_scale,
            },
            phis,
            seed,
            seeds,
            jobs: r.usize("run.jobs")?,
            lanczos,
            dense: r.bool("ed.dense")?,
            gate_points: r.usize("gate.points")?,
            settings: full,
        })
    }

    /// `# key = value` lines describing the resolved configuration.
    pub fn header_lines(&self) -> Vec<String> {
        self.settings
            .iter()
            .filter(|(k, _)| k.as_str() != "run.jobs")
            .map(|(k, v)| format!("# {k} = {v}"))
            .collect()
    }

    /// The resolved configuration as a JSON object.
    pub fn settings_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.settings
                .iter()
                .filter(|(k, _)| k.as_str() != "run.jobs")
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }
}
