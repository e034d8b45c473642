use serde::{Deserialize, Serialize};

use crate::dilation::NormMethod;
use crate::error::{Error, Result};
use crate::fixtures::Fixture;
use crate::grid::Grid;
use crate::norms::SpaceParams;
use crate::weights::WeightSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Norm,
    Ap,
    Xclass,
    Dilate,
    Maximal,
    Equiv,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Norm => "norm",
            Command::Ap => "ap",
            Command::Xclass => "xclass",
            Command::Dilate => "dilate",
            Command::Maximal => "maximal",
            Command::Equiv => "equiv",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::config("command", format!("unknown command `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub halfwidth: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "one_dim")]
    pub dim: usize,
}

fn one_dim() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Indicator,
    Smooth,
}

/// Settings of the `maximal` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximalConfig {
    #[serde(default = "default_families")]
    pub families: usize,
    #[serde(default = "default_family_size")]
    pub family_size: usize,
    #[serde(default = "default_family_kind")]
    pub family: FamilyKind,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_families() -> usize {
    20
}
fn default_family_size() -> usize {
    4
}
fn default_family_kind() -> FamilyKind {
    FamilyKind::Indicator
}
fn default_sigma() -> f64 {
    0.5
}

impl Default for MaximalConfig {
    fn default() -> Self {
        MaximalConfig {
            families: default_families(),
            family_size: default_family_size(),
            family: default_family_kind(),
            sigma: default_sigma(),
        }
    }
}

/// Expected range for the `equiv` ratios; a ratio outside fails the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bracket {
    pub lo: f64,
    #[serde(with = "crate::floats")]
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSpec>,
    /// Test function; the standard five-function family when absent (`equiv` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<Fixture>,
    #[serde(default)]
    pub lambda_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<i32>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Exponent of the `ap` command; `space.p` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_p: Option<f64>,
    #[serde(default)]
    pub norm_method: NormMethod,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub maximal: MaximalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<Bracket>,
}

fn default_steps() -> usize {
    3
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.contains("field"))
                .unwrap_or("<root>")
                .to_string();
            Error::config(field, msg)
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid;
        if !(g.halfwidth > 0.0 && g.halfwidth.is_finite()) {
            return Err(Error::config(
                "grid.L",
                format!("L = {} must be positive and finite", g.halfwidth),
            ));
        }
        if !(1..=2).contains(&g.dim) {
            return Err(Error::config("grid.dim", format!("dim = {} must be 1 or 2", g.dim)));
        }
        if !g.n.is_power_of_two() || g.n < 4 {
            return Err(Error::config(
                "grid.N",
                format!("N = {} must be a power of two, at least 4", g.n),
            ));
        }
        Grid::new(g.dim, g.halfwidth, g.n)
    }

    pub fn space(&self) -> Result<SpaceParams> {
        self.space
            .ok_or_else(|| Error::config("space", "this command needs a `space` section"))
    }

    pub fn weights(&self) -> Result<&WeightSpec> {
        self.weights
            .as_ref()
            .ok_or_else(|| Error::config("weights", "this command needs a `weights` section"))
    }

    /// Checks everything the command needs; returns warnings.
    pub fn validate(&self, command: Command) -> Result<Vec<String>> {
        if let Some(c) = self.command {
            if c != command {
                return Err(Error::config(
                    "command",
                    format!("config is for `{}`, invoked as `{}`", c.as_str(), command.as_str()),
                ));
            }
        }
        let grid = self.grid()?;
        let mut warnings = Vec::new();
        if let Some(sp) = &self.space {
            warnings.extend(sp.validate()?);
        }
        if let Some(w) = &self.weights {
            w.validate(grid.dim)?;
        }
        if let Some(f) = &self.function {
            f.validate()?;
        }
        if self.steps == 0 {
            return Err(Error::config("steps", "at least one refinement step is needed"));
        }
        match command {
            Command::Norm | Command::Xclass | Command::Equiv => {
                self.space()?;
                self.weights()?;
            }
            Command::Ap => {
                self.weights()?;
                let p = self.ap_p.or(self.space.map(|s| s.p));
                match p {
                    Some(p) if p >= 1.0 && p.is_finite() => {}
                    Some(p) => return Err(Error::config("ap_p", format!("p = {p} must lie in [1, inf)"))),
                    None => return Err(Error::config("ap_p", "set `ap_p` or `space.p`")),
                }
            }
            Command::Dilate => {
                self.space()?;
                self.weights()?;
                if self.lambda_list.is_empty() {
                    return Err(Error::config("lambda_list", "give at least one lambda"));
                }
                if let Some(l) = self.lambda_list.iter().find(|l| !(**l >= 1.0 && l.is_finite())) {
                    return Err(Error::config(
                        "lambda_list",
                        format!("lambda = {l} must be finite and >= 1"),
                    ));
                }
            }
            Command::Maximal => {
                let m = &self.maximal;
                if m.families == 0 || m.family_size == 0 {
                    return Err(Error::config("maximal", "families and family_size must be positive"));
                }
                if let Some(sp) = &self.space {
                    let bound = 1f64.min(sp.p).min(sp.q);
                    if !(m.sigma > 0.0 && m.sigma < bound) {
                        return Err(Error::config(
                            "maximal.sigma",
                            format!("sigma = {} must lie in (0, min(1, p, q)) = (0, {bound})", m.sigma),
                        ));
                    }
                } else {
                    return Err(Error::config("space", "this command needs a `space` section"));
                }
            }
        }
        Ok(warnings)
    }
}
