//! Command-line interface. The parsed arguments double as the experiment
//! config echoed into every report; output-only flags are left out of the echo
//! so that reports do not depend on them.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};
use tensor_mp::conditions::{DRule, ZDistribution};
use tensor_mp::tensor_model::DEFAULT_MAX_P;
use tensor_mp::{EntryDistribution, Error};

use crate::VERSION;

#[derive(Debug, Parser)]
#[command(name = "tensor-mp", version = VERSION, about = "Spectra and concentration experiments for random tensor models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Eigenvalues of a sample covariance against the Marchenko–Pastur law.
    MpEsd(MpEsdArgs),
    /// Variance of quadratic forms against the concentration bounds.
    QformVar(QformVarArgs),
    /// Law of large numbers for U-statistics of nonnegative samples.
    EspLln(EspLlnArgs),
    /// Overlap counts gamma(s, t): closed form, enumeration and bound.
    Gamma(GammaArgs),
    /// Truncated-moment condition terms along a grid of n.
    Conditions(ConditionsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::MpEsd(_) => "mp-esd",
            Command::QformVar(_) => "qform-var",
            Command::EspLln(_) => "esp-lln",
            Command::Gamma(_) => "gamma",
            Command::Conditions(_) => "conditions",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::MpEsd(a) => &a.common,
            Command::QformVar(a) => &a.common,
            Command::EspLln(a) => &a.common,
            Command::Gamma(a) => &a.common,
            Command::Conditions(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replicates; the default depends on the subcommand.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    #[serde(skip)]
    pub format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Cap on p for dense p x p matrices.
    #[arg(long, default_value_t = DEFAULT_MAX_P)]
    pub max_p: usize,
    /// Add wall-clock time to the report (breaks byte reproducibility).
    #[arg(long)]
    #[serde(skip)]
    pub record_time: bool,
}

fn display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MpEsdArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Number of samples N.
    #[arg(long = "N", visible_alias = "samples")]
    #[serde(rename = "N")]
    pub samples: usize,
    #[arg(long, default_value = "rademacher")]
    #[serde(serialize_with = "display")]
    pub dist: EntryDistribution,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Test matrix selector for `qform-var`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixSpec {
    Identity,
    ZeroDiagSigns,
    Projection(f64),
}

impl fmt::Display for MatrixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixSpec::Identity => write!(f, "identity"),
            MatrixSpec::ZeroDiagSigns => write!(f, "zero-diag-signs"),
            MatrixSpec::Projection(r) => write!(f, "projection:{r}"),
        }
    }
}

impl FromStr for MatrixSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "identity" | "I" => Ok(MatrixSpec::Identity),
            "zero-diag-signs" => Ok(MatrixSpec::ZeroDiagSigns),
            other => match other.strip_prefix("projection:") {
                Some(r) => {
                    let r: f64 = r
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad projection fraction '{r}'")))?;
                    if !(0.0..=1.0).contains(&r) {
                        return Err(Error::InvalidArgument(format!("projection fraction {r} outside [0, 1]")));
                    }
                    Ok(MatrixSpec::Projection(r))
                }
                None => Err(Error::InvalidArgument(format!(
                    "unknown matrix '{other}' (expected identity, zero-diag-signs, projection:<frac>)"
                ))),
            },
        }
    }
}

impl Serialize for MatrixSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QformVarArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value = "gaussian")]
    #[serde(serialize_with = "display")]
    pub dist: EntryDistribution,
    /// Comma-separated list, or repeat the flag.
    #[arg(long, value_delimiter = ',', default_value = "identity")]
    pub matrix: Vec<MatrixSpec>,
    /// Batches for the standard error; must divide reps.
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    /// Block size of generated matrices.
    #[arg(long, default_value_t = tensor_mp::concentration::DEFAULT_BLOCK)]
    pub block: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EspLlnArgs {
    /// one, exp, or square:<entry law>
    #[arg(long, default_value = "exp")]
    #[serde(serialize_with = "display")]
    pub z_dist: ZDistribution,
    /// floor(n^a), floor(c*n^a), floor(sqrt(n)/ln(n)) or const:k
    #[arg(long, default_value = "floor(n^0.3)")]
    #[serde(serialize_with = "display")]
    pub d_rule: DRule,
    #[arg(long, value_delimiter = ',', default_value = "500,2000,8000")]
    pub n_grid: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GammaArgs {
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    #[arg(long, default_value_t = 3)]
    pub d_max: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Law for `conditions`: an entry law (condition on `X^2`), a `Z` law, or a
/// sparse Bernoulli law with `q = n^a` varying along the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionLaw {
    Fixed(ZDistribution),
    SparsePower { a: f64 },
}

impl ConditionLaw {
    pub fn at(&self, n: usize) -> Result<ZDistribution, Error> {
        match *self {
            ConditionLaw::Fixed(z) => Ok(z),
            ConditionLaw::SparsePower { a } => Ok(ZDistribution::square(EntryDistribution::sparse_bernoulli(
                (n as f64).powf(a),
            )?)),
        }
    }
}

impl fmt::Display for ConditionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionLaw::Fixed(ZDistribution::Square { entry }) => write!(f, "{entry}"),
            ConditionLaw::Fixed(z) => write!(f, "{z}"),
            ConditionLaw::SparsePower { a } => write!(f, "sparse-bernoulli:n^{a}"),
        }
    }
}

impl FromStr for ConditionLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if let Some(rest) = s
            .strip_prefix("sparse-bernoulli:n^")
            .or_else(|| s.strip_prefix("sparse:n^"))
        {
            let a: f64 = rest
                .trim_start_matches('(')
                .trim_end_matches(')')
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad exponent in '{s}'")))?;
            if !(a <= 0.0) {
                return Err(Error::InvalidArgument(format!("q = n^{a} must not exceed 1")));
            }
            return Ok(ConditionLaw::SparsePower { a });
        }
        match s.parse::<EntryDistribution>() {
            Ok(e) => Ok(ConditionLaw::Fixed(ZDistribution::square(e))),
            Err(_) => Ok(ConditionLaw::Fixed(s.parse::<ZDistribution>()?)),
        }
    }
}

impl Serialize for ConditionLaw {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConditionsArgs {
    /// Entry law, Z law (one, exp, square:<law>) or sparse-bernoulli:n^<a>.
    #[arg(long, default_value = "gaussian")]
    pub dist: ConditionLaw,
    #[arg(long, default_value = "floor(sqrt(n)/ln(n))")]
    #[serde(serialize_with = "display")]
    pub d_rule: DRule,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000,1000000")]
    pub n_grid: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}
