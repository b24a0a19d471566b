//! Flat key–value configuration (TOML syntax with dotted keys).
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `field.width`, `field.height` | 100, 100 | target sampling box (m) |
//! | `sensors` | reference five-sensor layout | sensor prior means `[[x, y], ...]` |
//! | `target.prior_mean` | `"truth"` | `"truth"` or `[x, y]` |
//! | `target.prior_cov` | 100 | scalar s (s·I) or `[[a, b], [b, c]]` |
//! | `sensor.mu` | 0.1 | sensor position standard deviation (m) |
//! | `gamma.mean`, `gamma.var` | 3, 0.01 | γ prior (also the true γ) |
//! | `lambda0.a` | 1000 | Gamma shape of the Λ₀ prior |
//! | `lambda0.b` | `"auto"` | Gamma rate; `"auto"` means a·δ₀² |
//! | `noise.delta0_sq` | 1e-6 | true δ₀² |
//! | `run.max_iter`, `run.threshold` | 20, 1e-3 | iteration cap and stopping threshold |
//! | `run.trials`, `run.seed` | 500, 0 | Monte Carlo trials and base seed |
//! | `sweep.param`, `sweep.values` | unset | `delta0`, `mu` or `offset` and a list |
//! | `offset` | 0 | sensor offset v, applied as [v, v] |
//! | `run.algorithms` | `["jlce", "gauss_newton_ml"]` | also `grid_map` |
//! | `run.bcrb` | false | attach BCRB_x to result rows |
//! | `run.record_iterations` | false | per-iteration JLCE rows |
//! | `run.paper_literal_ux` | false | printed ω-term coefficients |
//! | `run.record_timing` | false | fill the wall-time column |
//! | `grid.resolution` | 100 | cells per field width |
//! | `fim.samples` | 100000 | Monte Carlo FIM samples for `oracle-check` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use toml::Value;

use crate::harness::{Algorithm, ExperimentConfig, LambdaRate, Sweep, SweepParam, TargetPriorMean};
use crate::vmp::UxForm;
use crate::{Error, Mat2, Result, Vec2};

pub const KNOWN_KEYS: &[&str] = &[
    "field.width",
    "field.height",
    "sensors",
    "target.prior_mean",
    "target.prior_cov",
    "sensor.mu",
    "gamma.mean",
    "gamma.var",
    "lambda0.a",
    "lambda0.b",
    "noise.delta0_sq",
    "run.max_iter",
    "run.threshold",
    "run.trials",
    "run.seed",
    "sweep.param",
    "sweep.values",
    "offset",
    "run.algorithms",
    "run.bcrb",
    "run.record_iterations",
    "run.paper_literal_ux",
    "run.record_timing",
    "grid.resolution",
    "fim.samples",
];

/// Everything a CLI run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub fim_samples: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            fim_samples: 100_000,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(format!("{key}: expected a number"))),
    }
}

fn as_count(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(invalid(format!("{key}: expected a non-negative integer"))),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| invalid(format!("{key}: expected true or false")))
}

fn as_array<'a>(key: &str, v: &'a Value) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| invalid(format!("{key}: expected an array")))
}

fn as_point(key: &str, v: &Value) -> Result<Vec2> {
    let a = as_array(key, v)?;
    if a.len() != 2 {
        return Err(invalid(format!("{key}: expected [x, y]")));
    }
    Ok(Vec2::new(as_f64(key, &a[0])?, as_f64(key, &a[1])?))
}

impl Settings {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| invalid(format!("parse error: {}", e.message())))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        Self::from_flat(&flat)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_flat(flat: &BTreeMap<String, Value>) -> Result<Self> {
        for key in flat.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(invalid(format!("unknown config key `{key}`")));
            }
        }
        let mut s = Settings::default();
        let e = &mut s.experiment;
        let mut sweep_param: Option<SweepParam> = None;
        let mut sweep_values: Option<Vec<f64>> = None;
        for (key, v) in flat {
            let k = key.as_str();
            match k {
                "field.width" => e.field.x = as_f64(k, v)?,
                "field.height" => e.field.y = as_f64(k, v)?,
                "sensors" => {
                    e.sensors = as_array(k, v)?.iter().map(|p| as_point(k, p)).collect::<Result<_>>()?;
                }
                "target.prior_mean" => {
                    e.target_prior_mean = match v {
                        Value::String(t) if t == "truth" => TargetPriorMean::Truth,
                        Value::String(t) => return Err(invalid(format!("{k}: expected \"truth\" or [x, y], got \"{t}\""))),
                        other => TargetPriorMean::Fixed(as_point(k, other)?),
                    }
                }
                "target.prior_cov" => {
                    e.target_prior_cov = match v {
                        Value::Array(rows) => {
                            if rows.len() != 2 {
                                return Err(invalid(format!("{k}: expected a scalar or a 2×2 array")));
                            }
                            let r0 = as_point(k, &rows[0])?;
                            let r1 = as_point(k, &rows[1])?;
                            Mat2::new(r0.x, r0.y, r1.x, r1.y)
                        }
                        other => Mat2::identity() * as_f64(k, other)?,
                    }
                }
                "sensor.mu" => e.mu = as_f64(k, v)?,
                "gamma.mean" => e.gamma_mean = as_f64(k, v)?,
                "gamma.var" => e.gamma_var = as_f64(k, v)?,
                "lambda0.a" => e.lambda_shape = as_f64(k, v)?,
                "lambda0.b" => {
                    e.lambda_rate = match v {
                        Value::String(t) if t == "auto" => LambdaRate::Auto,
                        Value::String(t) => return Err(invalid(format!("{k}: expected \"auto\" or a number, got \"{t}\""))),
                        other => LambdaRate::Fixed(as_f64(k, other)?),
                    }
                }
                "noise.delta0_sq" => e.delta0_sq = as_f64(k, v)?,
                "run.max_iter" => e.max_iter = as_count(k, v)? as usize,
                "run.threshold" => e.threshold = as_f64(k, v)?,
                "run.trials" => e.trials = as_count(k, v)? as usize,
                "run.seed" => e.seed = as_count(k, v)?,
                "sweep.param" => {
                    let t = v.as_str().ok_or_else(|| invalid(format!("{k}: expected a string")))?;
                    sweep_param = Some(t.parse().map_err(|err: Error| invalid(format!("{k}: {err}")))?);
                }
                "sweep.values" => {
                    sweep_values = Some(as_array(k, v)?.iter().map(|x| as_f64(k, x)).collect::<Result<_>>()?);
                }
                "offset" => e.offset = as_f64(k, v)?,
                "run.algorithms" => {
                    e.algorithms = as_array(k, v)?
                        .iter()
                        .map(|a| {
                            a.as_str()
                                .ok_or_else(|| invalid(format!("{k}: expected strings")))?
                                .parse::<Algorithm>()
                                .map_err(|err| invalid(format!("{k}: {err}")))
                        })
                        .collect::<Result<_>>()?;
                }
                "run.bcrb" => e.bcrb = as_bool(k, v)?,
                "run.record_iterations" => e.record_iterations = as_bool(k, v)?,
                "run.paper_literal_ux" => {
                    e.ux_form = if as_bool(k, v)? { UxForm::PaperLiteral } else { UxForm::Corrected }
                }
                "run.record_timing" => e.record_timing = as_bool(k, v)?,
                "grid.resolution" => e.grid_resolution = as_count(k, v)? as usize,
                "fim.samples" => s.fim_samples = as_count(k, v)? as usize,
                _ => unreachable!("key list checked above"),
            }
        }
        e.sweep = match (sweep_param, sweep_values) {
            (Some(param), Some(values)) => Some(Sweep { param, values }),
            (None, None) => None,
            (Some(_), None) => return Err(invalid("sweep.values is required when sweep.param is set")),
            (None, Some(_)) => return Err(invalid("sweep.param is required when sweep.values is set")),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.seed > i64::MAX as u64 {
            return Err(invalid("run.seed must fit in a signed 64-bit integer"));
        }
        if self.fim_samples == 0 {
            return Err(invalid("fim.samples must be at least 1"));
        }
        self.experiment.validate()
    }

    /// Parses `param=v1,v2,...` as given on the command line.
    pub fn set_sweep_spec(&mut self, spec: &str) -> Result<()> {
        let (param, values) = spec
            .split_once('=')
            .ok_or_else(|| invalid(format!("--sweep: expected param=v1,v2,..., got `{spec}`")))?;
        let param: SweepParam = param.trim().parse()?;
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| invalid(format!("--sweep: `{v}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        self.experiment.sweep = Some(Sweep { param, values });
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn to_toml_string(&self) -> String {
        let e = &self.experiment;
        let f = |v: f64| format!("{v:?}");
        let pt = |p: &Vec2| format!("[{}, {}]", f(p.x), f(p.y));
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("field.width", f(e.field.x));
        line("field.height", f(e.field.y));
        line("sensors", format!("[{}]", e.sensors.iter().map(pt).collect::<Vec<_>>().join(", ")));
        line(
            "target.prior_mean",
            match e.target_prior_mean {
                TargetPriorMean::Truth => "\"truth\"".into(),
                TargetPriorMean::Fixed(m) => pt(&m),
            },
        );
        let c = &e.target_prior_cov;
        line(
            "target.prior_cov",
            format!("[[{}, {}], [{}, {}]]", f(c[(0, 0)]), f(c[(0, 1)]), f(c[(1, 0)]), f(c[(1, 1)])),
        );
        line("sensor.mu", f(e.mu));
        line("gamma.mean", f(e.gamma_mean));
        line("gamma.var", f(e.gamma_var));
        line("lambda0.a", f(e.lambda_shape));
        line(
            "lambda0.b",
            match e.lambda_rate {
                LambdaRate::Auto => "\"auto\"".into(),
                LambdaRate::Fixed(b) => f(b),
            },
        );
        line("noise.delta0_sq", f(e.delta0_sq));
        line("offset", f(e.offset));
        line("run.max_iter", e.max_iter.to_string());
        line("run.threshold", f(e.threshold));
        line("run.trials", e.trials.to_string());
        line("run.seed", e.seed.to_string());
        line(
            "run.algorithms",
            format!("[{}]", e.algorithms.iter().map(|a| format!("\"{}\"", a.name())).collect::<Vec<_>>().join(", ")),
        );
        line("run.bcrb", e.bcrb.to_string());
        line("run.record_iterations", e.record_iterations.to_string());
        line("run.paper_literal_ux", (e.ux_form == UxForm::PaperLiteral).to_string());
        line("run.record_timing", e.record_timing.to_string());
        line("grid.resolution", e.grid_resolution.to_string());
        line("fim.samples", self.fim_samples.to_string());
        if let Some(sw) = &e.sweep {
            line("sweep.param", format!("\"{}\"", sw.param.name()));
            line("sweep.values", format!("[{}]", sw.values.iter().map(|v| f(*v)).collect::<Vec<_>>().join(", ")));
        }
        out
    }
}
