//! Pipeline settings shared by `run`, `sweep` and `stats`.
//!
//! Every key can come from a flat `key = value` file (`--config`) or from a
//! `--key value` flag. Built-in defaults are overridden by the file, which is
//! overridden by flags.

use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Args, Command, FromArgMatches};
use tabgraph::data::{CsvOptions, Standardize};
use tabgraph::{EvalConfig, Method, ThetaMode};

use crate::UsageError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub csv: CsvOptions,
    pub standardize: Standardize,
    pub precision: Precision,
    pub eval: EvalConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            data: None,
            csv: CsvOptions::default(),
            standardize: Standardize::None,
            precision: Precision::F64,
            eval: EvalConfig::default(),
        }
    }
}

/// `(key, value name, help, is a switch)`.
const KEYS: &[(&str, &str, &str, bool)] = &[
    (
        "config",
        "FILE",
        "Flat key = value file supplying defaults for the keys below",
        false,
    ),
    ("data", "CSV", "Input CSV with a header row", false),
    (
        "label-column",
        "NAME",
        "Name of the label column [default: label]",
        false,
    ),
    ("delimiter", "CHAR", "Field delimiter [default: ,]", false),
    (
        "standardize",
        "MODE",
        "Feature scaling before the pipeline: none or zscore [default: none]",
        false,
    ),
    (
        "precision",
        "P",
        "Floating-point precision: f64 or f32 [default: f64]",
        false,
    ),
    ("method", "M", "gcn or svd-lr [default: gcn]", false),
    ("k", "K", "Number of cross-validation folds [default: 10]", false),
    ("seed", "S", "Master seed [default: 0]", false),
    (
        "theta",
        "T",
        "auto, fixed:<v>, <v> or list:<v>,<v>,... [default: auto]",
        false,
    ),
    ("quantiles", "Q,..", "Quantile grid for automatic thresholds", false),
    (
        "val-fraction",
        "F",
        "Share of each training fold held out for validation [default: 0.1]",
        false,
    ),
    ("strict", "BOOL", "Require every class to have at least k members", true),
    ("learning-rate", "LR", "GCN Adam learning rate [default: 0.01]", false),
    ("weight-decay", "WD", "GCN L2 coefficient [default: 5e-4]", false),
    ("patience", "P", "GCN early-stopping patience [default: 10]", false),
    ("max-epochs", "E", "GCN epoch limit [default: 200]", false),
    ("hidden", "H", "GCN hidden width [default: 16]", false),
    ("dropout", "P", "GCN hidden dropout rate [default: 0]", false),
    (
        "self-loops",
        "BOOL",
        "Add self loops before normalizing [default: true]",
        true,
    ),
    (
        "head-propagation",
        "BOOL",
        "Propagate again before the output layer [default: true]",
        true,
    ),
    ("svd-rank", "R", "SVD rank for svd-lr [default: min(64, N-1, D)]", false),
    ("svd-oversample", "P", "Extra sketch columns [default: 10]", false),
    ("svd-power-iters", "Q", "Subspace iterations [default: 2]", false),
    (
        "softmax-learning-rate",
        "LR",
        "Softmax regression step size [default: 0.1]",
        false,
    ),
    (
        "softmax-l2",
        "L2",
        "Softmax regression L2 coefficient [default: 1e-4]",
        false,
    ),
    ("softmax-epochs", "E", "Softmax regression epochs [default: 500]", false),
    ("jobs", "N", "Worker threads for folds [default: 1]", false),
];

/// Key/value pairs given as flags, in command-line order.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pairs: Vec<(String, String)>,
}

impl FromArgMatches for Overrides {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut pairs = Vec::new();
        for &(key, ..) in KEYS {
            if m.value_source(key) == Some(ValueSource::CommandLine) {
                if let Some(v) = m.get_one::<String>(key) {
                    pairs.push((key.to_string(), v.clone()));
                }
            }
        }
        Ok(Self { pairs })
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}

impl Args for Overrides {
    fn augment_args(cmd: Command) -> Command {
        KEYS.iter().fold(cmd, |cmd, &(key, value, help, switch)| {
            let arg = Arg::new(key)
                .long(key)
                .value_name(value)
                .help(help)
                .action(ArgAction::Set);
            let arg = if switch {
                arg.num_args(0..=1).default_missing_value("true")
            } else {
                arg
            };
            cmd.arg(arg)
        })
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

impl Overrides {
    /// Defaults, then the config file named by `--config`, then flags.
    pub fn resolve(&self) -> Result<Settings, UsageError> {
        let mut s = Settings::default();
        if let Some((_, path)) = self.pairs.iter().find(|(k, _)| k == "config") {
            for (key, value) in read_config(Path::new(path))? {
                if key == "config" {
                    return Err(UsageError(format!("{path}: nested `config` is not supported")));
                }
                s.set(&key, &value).map_err(|e| UsageError(format!("{path}: {e}")))?;
            }
        }
        for (key, value) in self.pairs.iter().filter(|(k, _)| k != "config") {
            s.set(key, value).map_err(|e| UsageError(format!("--{key}: {e}")))?;
        }
        s.eval.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(s)
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped
/// and keys may use `_` in place of `-`.
pub fn parse_config(text: &str, origin: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("{origin}:{}: expected `key = value`", no + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.iter().any(|&(name, ..)| name == key) {
            return Err(UsageError(format!("{origin}:{}: unknown key `{}`", no + 1, k.trim())));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn read_config(path: &Path) -> Result<Vec<(String, String)>, UsageError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

fn parse<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("invalid value `{v}`"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let e = &mut self.eval;
        match key {
            "data" => self.data = Some(PathBuf::from(v)),
            "label-column" => self.csv.label_column = v.to_string(),
            "delimiter" => {
                let unescaped = if v == "\\t" || v == "tab" { "\t" } else { v };
                match unescaped.as_bytes() {
                    [b] => self.csv.delimiter = *b,
                    _ => return Err(format!("delimiter must be a single byte, got `{v}`")),
                }
            }
            "standardize" => self.standardize = v.parse().map_err(|e: tabgraph::Error| e.to_string())?,
            "precision" => {
                self.precision = match v {
                    "f64" => Precision::F64,
                    "f32" => Precision::F32,
                    _ => return Err(format!("precision must be f32 or f64, got `{v}`")),
                }
            }
            "method" => e.method = v.parse::<Method>().map_err(|e| e.to_string())?,
            "k" => e.k = parse(v)?,
            "seed" => e.seed = parse(v)?,
            "theta" => e.theta = v.parse::<ThetaMode>().map_err(|e| e.to_string())?,
            "quantiles" => e.quantiles = v.split(',').map(parse).collect::<Result<_, _>>()?,
            "val-fraction" => e.val_fraction = parse(v)?,
            "strict" => e.strict = parse_bool(v)?,
            "learning-rate" => e.train.learning_rate = parse(v)?,
            "weight-decay" => e.train.weight_decay = parse(v)?,
            "patience" => e.train.patience = parse(v)?,
            "max-epochs" => e.train.max_epochs = parse(v)?,
            "hidden" => e.train.hidden_dim = parse(v)?,
            "dropout" => e.train.dropout = parse(v)?,
            "self-loops" => e.train.self_loops = parse_bool(v)?,
            "head-propagation" => e.train.head_propagation = parse_bool(v)?,
            "svd-rank" => e.svd.rank = Some(parse(v)?),
            "svd-oversample" => e.svd.oversample = parse(v)?,
            "svd-power-iters" => e.svd.power_iters = parse(v)?,
            "softmax-learning-rate" => e.softmax.learning_rate = parse(v)?,
            "softmax-l2" => e.softmax.l2 = parse(v)?,
            "softmax-epochs" => e.softmax.epochs = parse(v)?,
            "jobs" => e.jobs = parse(v)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn data_path(&self) -> Result<&Path, UsageError> {
        self.data
            .as_deref()
            .ok_or_else(|| UsageError("no input data (use --data or `data = ...` in the config file)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let pairs = parse_config("# comment\nk = 5\n\nlabel_column = y  # trailing\n", "cfg").unwrap();
        assert_eq!(
            pairs,
            vec![("k".into(), "5".into()), ("label-column".into(), "y".into())]
        );
        assert!(parse_config("bogus = 1\n", "cfg").is_err());
        assert!(parse_config("k 5\n", "cfg").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let mut s = Settings::default();
        for &(key, ..) in KEYS.iter().filter(|(k, ..)| *k != "config") {
            let value = match key {
                "data" | "label-column" => "x",
                "delimiter" => ";",
                "standardize" => "zscore",
                "precision" => "f32",
                "method" => "svd-lr",
                "theta" => "fixed:0.5",
                "quantiles" => "0.5,0.9",
                "strict" | "self-loops" | "head-propagation" => "false",
                "val-fraction"
                | "learning-rate"
                | "weight-decay"
                | "dropout"
                | "softmax-learning-rate"
                | "softmax-l2" => "0.2",
                _ => "3",
            };
            s.set(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
        assert_eq!(s.eval.method, Method::SvdLr);
        assert_eq!(s.eval.theta, ThetaMode::Fixed(0.5));
        assert_eq!(s.eval.jobs, 3);
        assert_eq!(s.csv.delimiter, b';');
    }
}
