//! Flat key=value configuration files and their merge with command-line
//! flags.
//!
//! Every long flag has a config-file key of the same name (without the
//! leading dashes): `problem`, `scheme`, `N`, `Ns`, `Nref`, `paths`, `p`,
//! `seed`, `dim`, `out`, `emit-plot`, `threads`. Values given on the command
//! line take precedence over the file; unknown keys are rejected so typos
//! cannot silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{CliError, RawArgs};

/// Keys accepted in a config file, mirroring the long flag names.
const KNOWN_KEYS: &[&str] = &[
    "problem",
    "scheme",
    "N",
    "Ns",
    "Nref",
    "paths",
    "p",
    "seed",
    "dim",
    "out",
    "emit-plot",
    "threads",
];

/// Fully merged options: command line over config file over defaults.
///
/// Fields that have no global default stay `None`; each subcommand decides
/// which of them are required and what any fallback is.
#[derive(Debug, Clone)]
pub struct Effective {
    pub problem: Option<String>,
    pub scheme: Option<String>,
    pub steps: Option<usize>,
    pub steps_list: Option<Vec<usize>>,
    pub ref_steps: Option<usize>,
    pub paths: Option<usize>,
    pub order_p: Option<f64>,
    pub seed: u64,
    pub dim: Option<String>,
    pub out: Option<PathBuf>,
    pub emit_plot: bool,
    pub threads: Option<usize>,
}

/// Loads the config file named by `--config` (when given) and merges it
/// under the command-line flags.
pub fn resolve(raw: RawArgs) -> Result<Effective, CliError> {
    let file = match &raw.config {
        Some(path) => parse_file(path)?,
        None => BTreeMap::new(),
    };

    let steps_list = match raw.steps_list.or_else(|| file.get("Ns").cloned()) {
        Some(text) => Some(parse_ascending_list("Ns", &text)?),
        None => None,
    };
    let emit_plot = raw.emit_plot
        || match file.get("emit-plot") {
            Some(text) => parse_value::<bool>("emit-plot", text)?,
            None => false,
        };

    Ok(Effective {
        problem: raw.problem.or_else(|| file.get("problem").cloned()),
        scheme: raw.scheme.or_else(|| file.get("scheme").cloned()),
        steps: merge_parsed(raw.steps, file.get("N"), "N")?,
        steps_list,
        ref_steps: merge_parsed(raw.ref_steps, file.get("Nref"), "Nref")?,
        paths: merge_parsed(raw.paths, file.get("paths"), "paths")?,
        order_p: merge_parsed(raw.p, file.get("p"), "p")?,
        seed: merge_parsed(raw.seed, file.get("seed"), "seed")?.unwrap_or(0),
        dim: raw.dim.or_else(|| file.get("dim").cloned()),
        out: raw.out.or_else(|| file.get("out").map(PathBuf::from)),
        emit_plot,
        threads: merge_parsed(raw.threads, file.get("threads"), "threads")?,
    })
}

/// Parses one `key = value` file: `#` lines are comments, blank lines are
/// skipped, keys must be known and unique.
fn parse_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|err| CliError::Usage(format!("--config {}: {err}", path.display())))?;
    let mut map = BTreeMap::new();
    for (index, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected `key = value`, got `{line}`",
                index + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key `{key}`; known keys: {}",
                index + 1,
                KNOWN_KEYS.join(", ")
            )));
        }
        if map.insert(key.to_owned(), value.to_owned()).is_some() {
            return Err(CliError::Usage(format!(
                "config line {}: duplicate key `{key}`",
                index + 1
            )));
        }
    }
    Ok(map)
}

/// Command-line value wins; otherwise the config-file string is parsed.
fn merge_parsed<T: FromStr>(
    cli: Option<T>,
    file: Option<&String>,
    key: &str,
) -> Result<Option<T>, CliError>
where
    T::Err: fmt::Display,
{
    match (cli, file) {
        (Some(value), _) => Ok(Some(value)),
        (None, Some(text)) => parse_value(key, text).map(Some),
        (None, None) => Ok(None),
    }
}

fn parse_value<T: FromStr>(key: &str, text: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    text.parse()
        .map_err(|err| CliError::Usage(format!("config key `{key}`: {err} (value `{text}`)")))
}

/// Parses a comma-separated list of positive integers that must be strictly
/// ascending, e.g. `16,32,64`.
pub fn parse_ascending_list(what: &str, text: &str) -> Result<Vec<usize>, CliError> {
    let mut values = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            return Err(CliError::Usage(format!(
                "{what}: empty entry in list `{text}`"
            )));
        }
        let value: usize = piece.parse().map_err(|err| {
            CliError::Usage(format!(
                "{what}: bad entry `{piece}` in list `{text}`: {err}"
            ))
        })?;
        if value == 0 {
            return Err(CliError::Usage(format!("{what}: entries must be positive")));
        }
        if let Some(&last) = values.last() {
            if value <= last {
                return Err(CliError::Usage(format!(
                    "{what}: list must be strictly ascending, got {last} before {value}"
                )));
            }
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliError::Usage(format!("{what}: empty list")));
    }
    Ok(values)
}
