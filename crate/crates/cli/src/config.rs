//! Run configuration: a JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use seqstat::io::InstrumentJson;
use seqstat::models::{AmpDampParams, BoundaryJump, Parity, PeriodicChainParams, XXChainParams};
use seqstat::sampler::SamplingMethod;
use seqstat::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelName {
    AmpDamp,
    XxChain,
    PeriodicChain,
    ClassicalMarkov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Auto,
    Superoperator,
    Kraus,
}

impl From<Method> for SamplingMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => SamplingMethod::Auto,
            Method::Superoperator => SamplingMethod::Superoperator,
            Method::Kraus => SamplingMethod::Kraus,
        }
    }
}

/// Initial state of sampled strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    /// The unique steady state.
    Steady,
    /// `I / d`; stationary for unital instruments with several steady states.
    Mixed,
}

/// Parameter grid: explicit values, or `from`..`to` in `points` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range {
        from: f64,
        to: f64,
        points: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            Grid::Values(ref v) => Ok(v.clone()),
            Grid::Range {
                from,
                to,
                points,
                log,
            } => {
                if points == 0 {
                    bail!("grid needs at least one point");
                }
                if log && !(from > 0.0 && to > 0.0) {
                    bail!("log grid needs positive end points");
                }
                let step = |i: usize| {
                    if points == 1 {
                        0.0
                    } else {
                        i as f64 / (points - 1) as f64
                    }
                };
                Ok((0..points)
                    .map(|i| {
                        if log {
                            (from.ln() + (to.ln() - from.ln()) * step(i)).exp()
                        } else {
                            from + (to - from) * step(i)
                        }
                    })
                    .collect())
            }
        }
    }

    /// `a,b,c` for explicit values, `from:to:points` for a linear range and
    /// `log:from:to:points` for a logarithmic one.
    pub fn parse(s: &str) -> Result<Grid, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let parts: Vec<&str> = s.split(':').collect();
        let range = |p: &[&str], log: bool| -> Result<Grid, String> {
            let points = p[2]
                .trim()
                .parse::<usize>()
                .map_err(|e| format!("{:?}: {e}", p[2]))?;
            Ok(Grid::Range {
                from: num(p[0])?,
                to: num(p[1])?,
                points,
                log,
            })
        };
        match parts.as_slice() {
            ["log", rest @ ..] if rest.len() == 3 => range(rest, true),
            p if p.len() == 3 => range(p, false),
            [list] => Ok(Grid::Values(
                list.split(',').map(num).collect::<Result<_, _>>()?,
            )),
            _ => Err(format!("cannot parse grid {s:?}")),
        }
    }
}

/// Everything a task may need. Fields left `None` take task defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<String>,
    pub model: Option<ModelSpec>,
    #[serde(rename = "L")]
    pub l: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    /// Model parameter swept by `corr-info`, `markov-info` and `fisher`.
    pub param: Option<String>,
    pub grid: Option<Grid>,
    pub rel_step: Option<f64>,
    pub richardson: Option<bool>,
    pub method: Option<Method>,
    pub initial: Option<Initial>,
    pub strings: Option<bool>,
    pub string: Option<String>,
    pub input: Option<PathBuf>,
    pub drop_symbol: Option<String>,
    pub alphabet_size: Option<usize>,
    /// `reproduce` target (`fig4` .. `fig9`) and chain lengths.
    pub target: Option<String>,
    pub sites: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn overlay<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
    if src.is_some() {
        *dst = src.clone();
    }
}

impl RunConfig {
    /// Fields set in `other` replace those in `self`.
    pub fn merge(&mut self, other: &RunConfig) {
        overlay(&mut self.task, &other.task);
        overlay(&mut self.model, &other.model);
        overlay(&mut self.l, &other.l);
        overlay(&mut self.k, &other.k);
        overlay(&mut self.n, &other.n);
        overlay(&mut self.runs, &other.runs);
        overlay(&mut self.seed, &other.seed);
        overlay(&mut self.param, &other.param);
        overlay(&mut self.grid, &other.grid);
        overlay(&mut self.rel_step, &other.rel_step);
        overlay(&mut self.richardson, &other.richardson);
        overlay(&mut self.method, &other.method);
        overlay(&mut self.initial, &other.initial);
        overlay(&mut self.strings, &other.strings);
        overlay(&mut self.string, &other.string);
        overlay(&mut self.input, &other.input);
        overlay(&mut self.drop_symbol, &other.drop_symbol);
        overlay(&mut self.alphabet_size, &other.alphabet_size);
        overlay(&mut self.target, &other.target);
        overlay(&mut self.sites, &other.sites);
        overlay(&mut self.out, &other.out);
        overlay(&mut self.format, &other.format);
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model
            .as_ref()
            .context("no model given (use --model, --instrument or a config file)")
    }

    pub fn single_l(&self, default: usize) -> Result<usize> {
        match self.l.as_deref() {
            None => Ok(default),
            Some([l]) => Ok(*l),
            Some(other) => bail!("this task takes a single L, got {other:?}"),
        }
    }
}

/// Model selection flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Named model.
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    /// Instrument JSON file (as written by `instrument emit`).
    #[arg(long, conflicts_with = "model")]
    pub instrument: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Chain length.
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    #[arg(long = "J", allow_hyphen_values = true)]
    pub j: Option<f64>,
    #[arg(long)]
    pub gamma_l: Option<f64>,
    #[arg(long)]
    pub gamma_r: Option<f64>,
    #[arg(long)]
    pub f_l: Option<f64>,
    #[arg(long)]
    pub f_r: Option<f64>,
    /// Observed XX-chain jumps, e.g. `L-,R-`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub observed: Option<Vec<String>>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub site_resolved: bool,
    /// Restrict the periodic chain to one excitation-parity sector.
    #[arg(long, value_parser = parse_parity)]
    pub parity: Option<Parity>,
    /// Column-stochastic matrix, rows separated by `;`: `0.7,0.3;0.3,0.7`.
    #[arg(long)]
    pub transition: Option<String>,
}

fn parse_parity(s: &str) -> Result<Parity, String> {
    match s {
        "even" => Ok(Parity::Even),
        "odd" => Ok(Parity::Odd),
        _ => Err(format!("expected even or odd, got {s:?}")),
    }
}

fn jump(label: &str) -> Result<BoundaryJump> {
    BoundaryJump::ALL
        .into_iter()
        .find(|j| j.label() == label)
        .with_context(|| format!("unknown jump {label:?}"))
}

impl ModelArgs {
    fn any_parameter(&self) -> bool {
        self.lambda.is_some()
            || self.phi.is_some()
            || self.sites.is_some()
            || self.h.is_some()
            || self.j.is_some()
            || self.gamma_l.is_some()
            || self.gamma_r.is_some()
            || self.f_l.is_some()
            || self.f_r.is_some()
            || self.observed.is_some()
            || self.kappa.is_some()
            || self.tau.is_some()
            || self.site_resolved
            || self.parity.is_some()
            || self.transition.is_some()
    }

    /// Apply the flags to a model from the config (or start a new one).
    pub fn resolve(&self, base: Option<&ModelSpec>) -> Result<Option<ModelSpec>> {
        if let Some(path) = &self.instrument {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let j: InstrumentJson = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            return Ok(Some(ModelSpec::Instrument(j)));
        }
        let spec = match (self.model, base) {
            (Some(name), Some(b)) if same_kind(name, b) => b.clone(),
            (Some(name), _) => default_model(name),
            (None, Some(b)) => b.clone(),
            (None, None) => {
                if self.any_parameter() {
                    bail!("model parameters given without --model");
                }
                return Ok(None);
            }
        };
        Ok(Some(self.apply(spec)?))
    }

    fn apply(&self, spec: ModelSpec) -> Result<ModelSpec> {
        let mut spec = spec;
        let unused = |name: &str| anyhow::anyhow!("--{name} does not apply to this model");
        match &mut spec {
            ModelSpec::AmpDamp(p) => {
                set(&mut p.lambda, self.lambda);
                set(&mut p.phi, self.phi);
                if self.sites.is_some()
                    || self.h.is_some()
                    || self.kappa.is_some()
                    || self.tau.is_some()
                {
                    return Err(unused("sites/h/kappa/tau"));
                }
            }
            ModelSpec::XxChain(p) => {
                set(&mut p.sites, self.sites);
                set(&mut p.h, self.h);
                set(&mut p.j, self.j);
                set(&mut p.gamma_l, self.gamma_l);
                set(&mut p.gamma_r, self.gamma_r);
                set(&mut p.f_l, self.f_l);
                set(&mut p.f_r, self.f_r);
                if let Some(obs) = &self.observed {
                    p.observed = obs.iter().map(|s| jump(s)).collect::<Result<_>>()?;
                }
                if self.lambda.is_some() || self.kappa.is_some() || self.tau.is_some() {
                    return Err(unused("lambda/kappa/tau"));
                }
            }
            ModelSpec::PeriodicChain(p) => {
                set(&mut p.sites, self.sites);
                set(&mut p.j, self.j);
                set(&mut p.kappa, self.kappa);
                set(&mut p.tau, self.tau);
                p.site_resolved |= self.site_resolved;
                if self.parity.is_some() {
                    p.parity = self.parity;
                }
                if self.lambda.is_some() || self.h.is_some() {
                    return Err(unused("lambda/h"));
                }
            }
            ModelSpec::ClassicalMarkov { transition } => {
                if let Some(t) = &self.transition {
                    *transition = parse_matrix(t)?;
                }
            }
            ModelSpec::Instrument(_) => {
                if self.any_parameter() {
                    return Err(unused("model parameter"));
                }
            }
        }
        Ok(spec)
    }
}

fn set<T: Copy>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

fn same_kind(name: ModelName, spec: &ModelSpec) -> bool {
    matches!(
        (name, spec),
        (ModelName::AmpDamp, ModelSpec::AmpDamp(_))
            | (ModelName::XxChain, ModelSpec::XxChain(_))
            | (ModelName::PeriodicChain, ModelSpec::PeriodicChain(_))
            | (
                ModelName::ClassicalMarkov,
                ModelSpec::ClassicalMarkov { .. }
            )
    )
}

fn default_model(name: ModelName) -> ModelSpec {
    match name {
        ModelName::AmpDamp => ModelSpec::AmpDamp(AmpDampParams {
            lambda: 0.5,
            phi: std::f64::consts::PI,
        }),
        ModelName::XxChain => ModelSpec::XxChain(XXChainParams::default()),
        ModelName::PeriodicChain => ModelSpec::PeriodicChain(PeriodicChainParams::default()),
        ModelName::ClassicalMarkov => ModelSpec::ClassicalMarkov {
            transition: vec![vec![0.7, 0.3], vec![0.3, 0.7]],
        },
    }
}

fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad matrix entry {v:?}"))
                })
                .collect()
        })
        .collect()
}
