//! Command-line arguments and their validation into library types.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use gapprob::calculus::{FdOrder, FdScheme, FreeEndpoint};
use gapprob::numerics::{bits_for_digits, parse_real, MIN_DIGITS};
use gapprob::{PrecisionPolicy, Real, WeightSpec, Window};

use crate::output::Format;

/// A configuration problem, reported with the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError {
            field,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid --{}: {}", self.field, self.message)
    }
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    Gue,
    Lue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Central2,
    Richardson4,
}

impl From<OrderArg> for FdOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Central2 => FdOrder::Central2,
            OrderArg::Richardson4 => FdOrder::Richardson4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndpointArg {
    A,
    B,
}

impl From<EndpointArg> for FreeEndpoint {
    fn from(e: EndpointArg) -> Self {
        match e {
            EndpointArg::A => FreeEndpoint::A,
            EndpointArg::B => FreeEndpoint::B,
        }
    }
}

/// `start:end:count` with inclusive endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, end, count] = parts.as_slice() else {
            return Err(format!("expected start:end:count, got {s:?}"));
        };
        let start: f64 = start.trim().parse().map_err(|_| format!("bad start in {s:?}"))?;
        let end: f64 = end.trim().parse().map_err(|_| format!("bad end in {s:?}"))?;
        let count: usize = count.trim().parse().map_err(|_| format!("bad count in {s:?}"))?;
        if !start.is_finite() || !end.is_finite() {
            return Err(format!("grid endpoints must be finite in {s:?}"));
        }
        if count == 0 || (count == 1 && start != end) || (count > 1 && !(start < end)) {
            return Err(format!("need start < end and count >= 2 (or count 1 with start = end) in {s:?}"));
        }
        Ok(Grid { start, end, count })
    }
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.end
                } else {
                    self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64
                }
            })
            .collect()
    }

    /// Points as reals parsed from their shortest decimal form, so that
    /// `0.1` means the decimal `0.1` at every precision.
    pub fn reals(&self, prec: u32) -> Vec<Real> {
        self.points()
            .into_iter()
            .map(|x| parse_real(&format!("{x:e}"), prec).expect("finite grid point"))
            .collect()
    }
}

/// Comma-separated integers.
pub fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad integer {t:?} in {s:?}")))
        .collect()
}

/// Ensemble selection shared by most subcommands.
#[derive(Debug, Clone, Args)]
pub struct EnsembleOpts {
    #[arg(long, value_enum, default_value = "gue")]
    pub ensemble: EnsembleArg,
    /// Laguerre exponent (LUE only).
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl EnsembleOpts {
    pub fn weight(&self) -> ConfigResult<WeightSpec> {
        match self.ensemble {
            EnsembleArg::Gue => {
                if self.alpha.is_some() {
                    return Err(ConfigError::new("alpha", "only applies to --ensemble lue"));
                }
                Ok(WeightSpec::Gaussian)
            }
            EnsembleArg::Lue => {
                let alpha = self.alpha.ok_or_else(|| ConfigError::new("alpha", "required for --ensemble lue"))?;
                WeightSpec::laguerre(alpha).map_err(|e| ConfigError::new("alpha", e.to_string()))
            }
        }
    }

    /// As [`Self::weight`], but also accepts the Laguerre exponent 0, which
    /// the matrix sampler supports.
    pub fn weight_for_sampling(&self) -> ConfigResult<WeightSpec> {
        match (self.ensemble, self.alpha) {
            (EnsembleArg::Lue, Some(alpha)) if alpha == 0.0 => Ok(WeightSpec::Laguerre { alpha }),
            _ => self.weight(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PrecisionOpts {
    /// Requested decimal digits.
    #[arg(long, default_value_t = 50)]
    pub digits: u32,
}

impl PrecisionOpts {
    pub fn policy(&self) -> ConfigResult<PrecisionPolicy> {
        if self.digits < MIN_DIGITS {
            return Err(ConfigError::new("digits", format!("must be at least {MIN_DIGITS}")));
        }
        PrecisionPolicy::new(self.digits).map_err(|e| ConfigError::new("digits", e.to_string()))
    }

    pub fn bits(&self) -> u32 {
        bits_for_digits(self.digits) + 32
    }
}

/// An `(a, b)` window given as decimal strings; `inf` and `-inf` are allowed.
#[derive(Debug, Clone, Args)]
pub struct WindowOpts {
    #[arg(long, allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, allow_hyphen_values = true)]
    pub b: String,
}

impl WindowOpts {
    pub fn window(&self, w: &WeightSpec, prec: u32) -> ConfigResult<Window> {
        let a = parse_real(&self.a, prec).map_err(|e| ConfigError::new("a", e.to_string()))?;
        let b = parse_real(&self.b, prec).map_err(|e| ConfigError::new("b", e.to_string()))?;
        let win = Window::new(a, b).map_err(|e| ConfigError::new("b", e.to_string()))?;
        win.check_for(w).map_err(|e| ConfigError::new("a", e.to_string()))?;
        Ok(win)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FdOpts {
    /// Finite-difference step; defaults to 10^(-digits/5) max(1, |a|, |b|).
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long, value_enum, default_value = "richardson4")]
    pub fd_order: OrderArg,
}

impl FdOpts {
    pub fn scheme(&self, win: &Window, digits: u32) -> ConfigResult<FdScheme> {
        match self.fd_step {
            Some(step) => FdScheme::new(step, self.fd_order.into()).map_err(|e| ConfigError::new("fd-step", e.to_string())),
            None => Ok(FdScheme::default_for(win, digits, self.fd_order.into())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputOpts {
    /// Output file; defaults to $GAPPROB_OUT_DIR/<command>.<ext>, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

pub fn require_n(n: usize, field: &'static str) -> ConfigResult<usize> {
    if n == 0 {
        return Err(ConfigError::new(field, "must be at least 1"));
    }
    Ok(n)
}
