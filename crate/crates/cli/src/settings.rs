//! Layered settings: command-line flags override `--set key=value` pairs,
//! which override the `--config` TOML file, which overrides built-in defaults.

use std::path::Path;

use serde::Deserialize;

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

macro_rules! settings {
    ($($field:ident : $ty:ty),* $(,)?) => {
        /// Every tunable value; `None` means "not given at this layer".
        #[derive(Debug, Default, Clone, PartialEq, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct Settings {
            $(pub $field: Option<$ty>,)*
        }

        impl Settings {
            /// Field-wise `self` if present, else `lower`.
            pub fn over(self, lower: Settings) -> Settings {
                Settings { $($field: self.$field.or(lower.$field),)* }
            }
        }
    };
}

settings! {
    link: String,
    lambda: f64,
    lambda_rule: f64,
    sigma: f64,
    rho: f64,
    rho_rule: f64,
    delta: f64,
    null_value: f64,
    coordinate: usize,
    method: String,
    tol: f64,
    max_iter: usize,
    max_linesearch: usize,
    eta: f64,
    zeta: f64,
    memory: usize,
    alpha_min: f64,
    alpha_max: f64,
    n: OneOrMany<usize>,
    d: OneOrMany<usize>,
    s_star: OneOrMany<usize>,
    trials: usize,
    seed: u64,
    toeplitz_rho: f64,
    mus: OneOrMany<f64>,
    beta_lo: f64,
    beta_hi: f64,
    beta_constant: f64,
    null_coordinate: usize,
    alt_coordinate: usize,
    folds: usize,
    grid_size: usize,
    threads: usize,
    k: usize,
    k_star: usize,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Settings, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Parses one `key=value` override. Bare words are read as strings and
    /// comma-separated values as lists.
    pub fn from_pair(pair: &str) -> Result<Settings, Failure> {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            Failure::usage(format!("override '{pair}' is not of the form key=value"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let candidates = [
            format!("{key} = {value}"),
            format!("{key} = {value:?}"),
            format!("{key} = [{value}]"),
        ];
        let mut first_error = None;
        for doc in &candidates {
            match toml::from_str::<Settings>(doc) {
                Ok(s) => return Ok(s),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        Err(Failure::usage(format!(
            "invalid override '{pair}': {}",
            first_error
                .map(|e| e.message().to_string())
                .unwrap_or_default()
        )))
    }

    /// Combines `flags` with the overrides and the config file below them.
    pub fn layered(
        flags: Settings,
        config: Option<&Path>,
        pairs: &[String],
    ) -> Result<Settings, Failure> {
        let mut merged = match config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        for pair in pairs {
            merged = Settings::from_pair(pair)?.over(merged);
        }
        Ok(flags.over(merged))
    }
}
