//! Untargeted PGD attacks under ℓ∞ and ℓ₂ budgets.
//!
//! Inputs are flat slices of pixel values in [0, 1]; the classifier decides
//! how to interpret the layout. The attacked loss is cross-entropy on the
//! classifier's scores.

mod classifier;
mod gradcheck;
mod pgd;
mod subsample;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classifier::{cross_entropy, softmax, DifferentiableClassifier, SoftmaxClassifier};
pub use gradcheck::{finite_difference_gradcheck, DEFAULT_GRADCHECK_COORDS, DEFAULT_GRADCHECK_STEP};
pub use pgd::{attack_batch, pgd_attack, project_perturbation, AttackInput, AttackOutcome};
pub use subsample::stratified_subsample;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("input has {got} values, classifier expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("input value {0} outside [0, 1]")]
    InputRange(f64),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("subsample fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("unknown attack preset {0:?}")]
    UnknownPreset(String),
    #[error("unknown norm {0:?} (expected linf or l2)")]
    UnknownNorm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Linf,
    L2,
}

impl Norm {
    pub fn as_str(self) -> &'static str {
        match self {
            Norm::Linf => "linf",
            Norm::L2 => "l2",
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Norm {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linf" => Ok(Norm::Linf),
            "l2" => Ok(Norm::L2),
            other => Err(AttackError::UnknownNorm(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub norm: Norm,
    /// Budget in pixel units (inputs in [0, 1]).
    pub epsilon: f64,
    pub step_size: f64,
    pub num_steps: usize,
    #[serde(default)]
    pub random_start: bool,
}

/// Shortest decimal that survives a round trip after rounding away float
/// noise from e.g. `0.5 / 255 * 255`.
fn short(v: f64) -> String {
    let r = (v * 1e9).round() / 1e9;
    format!("{r}")
}

fn step_label(v: f64) -> String {
    if v < 1e-3 {
        format!("{v:e}")
    } else {
        short(v)
    }
}

impl AttackSpec {
    pub fn new(norm: Norm, epsilon: f64, step_size: f64, num_steps: usize) -> Result<Self, AttackError> {
        let spec = Self {
            norm,
            epsilon,
            step_size,
            num_steps,
            random_start: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_random_start(mut self, on: bool) -> Self {
        self.random_start = on;
        self
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AttackError::InvalidEpsilon(self.epsilon));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(AttackError::InvalidStepSize(self.step_size));
        }
        Ok(())
    }

    /// ℓ∞ budgets are labelled in 8-bit units (`0.5/255`), ℓ₂ budgets as is.
    pub fn epsilon_label(&self) -> String {
        match self.norm {
            Norm::Linf => format!("{}/255", short(self.epsilon * 255.0)),
            Norm::L2 => short(self.epsilon),
        }
    }

    /// Setting id such as `pgd.linf.eps0.5`.
    pub fn name(&self) -> String {
        let eps = match self.norm {
            Norm::Linf => short(self.epsilon * 255.0),
            Norm::L2 => short(self.epsilon),
        };
        format!("pgd.{}.eps{eps}", self.norm)
    }

    /// `Norm: 0.5/255, Step size: 5.88e-5, Num steps: 100`
    pub fn describe(&self) -> String {
        format!(
            "Norm: {}, Step size: {}, Num steps: {}",
            self.epsilon_label(),
            step_label(self.step_size),
            self.num_steps
        )
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.name(), self.describe())
    }
}

/// The four attack settings of the testbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackPreset {
    LinfEps0_5,
    LinfEps2,
    L2Eps0_1,
    L2Eps0_5,
}

impl AttackPreset {
    pub const ALL: [AttackPreset; 4] = [
        AttackPreset::LinfEps0_5,
        AttackPreset::LinfEps2,
        AttackPreset::L2Eps0_1,
        AttackPreset::L2Eps0_5,
    ];

    pub fn spec(self) -> AttackSpec {
        let (norm, epsilon, step_size) = match self {
            AttackPreset::LinfEps0_5 => (Norm::Linf, 0.5 / 255.0, 5.88e-5),
            AttackPreset::LinfEps2 => (Norm::Linf, 2.0 / 255.0, 2.35e-4),
            AttackPreset::L2Eps0_1 => (Norm::L2, 0.1, 0.01),
            AttackPreset::L2Eps0_5 => (Norm::L2, 0.5, 0.05),
        };
        AttackSpec {
            norm,
            epsilon,
            step_size,
            num_steps: 100,
            random_start: false,
        }
    }

    /// Short command-line name.
    pub fn cli_name(self) -> &'static str {
        match self {
            AttackPreset::LinfEps0_5 => "linf0.5",
            AttackPreset::LinfEps2 => "linf2",
            AttackPreset::L2Eps0_1 => "l2-0.1",
            AttackPreset::L2Eps0_5 => "l2-0.5",
        }
    }
}

impl FromStr for AttackPreset {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.cli_name() == s || p.spec().name() == s)
            .ok_or_else(|| AttackError::UnknownPreset(s.to_string()))
    }
}
