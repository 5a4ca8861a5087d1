use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::FluctuationModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// On-diagonal bounds only.
    #[default]
    Ondiag,
    /// Full off-diagonal bounds.
    Offdiag,
}

/// How `theta_1` and `theta_2` are chosen inside their admissible windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ExponentRule {
    /// Each exponent is its strict lower bound times `1 + slack`.
    LowerBoundSlack { slack: f64 },
    /// `theta_1 = 4 (2 + beta_u)^2`, `theta_2 = theta_1 (2 + beta_u) / (beta_l - 2 b theta_1)`.
    Canonical,
}

pub const DEFAULT_SLACK: f64 = 0.05;

impl Default for ExponentRule {
    fn default() -> Self {
        Self::LowerBoundSlack { slack: DEFAULT_SLACK }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub mode: Mode,
    pub rule: ExponentRule,
    pub beta_u: f64,
    pub beta_l: f64,
    pub b: f64,
    pub eps: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub theta1: f64,
    pub theta1_lower: f64,
    pub theta1_upper: Option<f64>,
    pub theta2: Option<f64>,
    pub theta2_lower: Option<f64>,
    pub theta3: f64,
}

/// Exponents for a fitted model.
pub fn derive_exponents(model: &FluctuationModel, mode: Mode, rule: ExponentRule) -> Result<ExponentSet> {
    derive_exponents_from(model.beta_u(), model.beta_l(), model.b, model.eps, mode, rule)
}

pub fn derive_exponents_from(
    beta_u: f64,
    beta_l: f64,
    b: f64,
    eps: f64,
    mode: Mode,
    rule: ExponentRule,
) -> Result<ExponentSet> {
    if !(beta_u > 0.0 && beta_l > 0.0 && beta_l <= beta_u * (1.0 + 1e-12)) {
        return Err(Error::InfeasibleExponents(format!(
            "growth exponents need 0 < beta_l <= beta_u, got beta_l = {beta_l}, beta_u = {beta_u}"
        )));
    }
    if !(b >= 0.0 && eps >= 0.0) {
        return Err(Error::InfeasibleExponents(format!("negative fluctuation exponents b = {b}, eps = {eps}")));
    }
    let worst = b.max(eps);
    let (cap, name) = match mode {
        Mode::Ondiag => (1.0 / (4.0 * (2.0 + beta_u)), "b, eps < 1/(4(2+beta_u))"),
        Mode::Offdiag => (beta_l / (8.0 * (2.0 + beta_u).powi(2)), "b, eps < beta_l/(8(2+beta_u)^2)"),
    };
    if worst >= cap {
        return Err(Error::InfeasibleExponents(format!("{name} violated: max(b, eps) = {worst} >= {cap}")));
    }
    let gamma1 = 3.0 + 2.0 * b + 2.0 * beta_u;
    let denom = 1.0 - 2.0 * b * gamma1;
    if denom <= 0.0 {
        return Err(Error::InfeasibleExponents(format!("1 - 2 b gamma_1 = {denom} is not positive")));
    }
    let theta1_lower = gamma1 * (2.0 + beta_u) / denom;
    let theta1_upper = match mode {
        Mode::Ondiag => None,
        Mode::Offdiag if worst > 0.0 => Some(beta_l / (2.0 * worst)),
        Mode::Offdiag => Some(f64::INFINITY),
    };
    let theta1 = match rule {
        ExponentRule::LowerBoundSlack { slack } => {
            if !(slack > 0.0) {
                return Err(Error::InfeasibleExponents(format!("slack must be positive, got {slack}")));
            }
            let candidate = theta1_lower * (1.0 + slack);
            match theta1_upper {
                Some(up) if candidate >= up => (theta1_lower * up).sqrt(),
                _ => candidate,
            }
        }
        ExponentRule::Canonical => 4.0 * (2.0 + beta_u).powi(2),
    };
    if theta1 <= theta1_lower {
        return Err(Error::InfeasibleExponents(format!(
            "theta_1 = {theta1} does not exceed its lower bound {theta1_lower}"
        )));
    }
    if let Some(up) = theta1_upper {
        if theta1 >= up {
            return Err(Error::InfeasibleExponents(format!(
                "theta_1 window ({theta1_lower}, {up}) is empty or excludes {theta1}"
            )));
        }
    }
    let (theta2, theta2_lower) = match mode {
        Mode::Ondiag => (None, None),
        Mode::Offdiag => {
            let room = beta_l - 2.0 * b * theta1;
            if room <= 0.0 {
                return Err(Error::InfeasibleExponents(format!("beta_l - 2 b theta_1 = {room} is not positive")));
            }
            let lower = theta1 * (1.0 + beta_l) / room;
            let theta2 = match rule {
                ExponentRule::LowerBoundSlack { slack } => lower * (1.0 + slack),
                ExponentRule::Canonical => theta1 * (2.0 + beta_u) / room,
            };
            if theta2 <= lower {
                return Err(Error::InfeasibleExponents(format!("theta_2 = {theta2} does not exceed {lower}")));
            }
            (Some(theta2), Some(lower))
        }
    };
    let theta3 = gamma1 * (1.0 + 2.0 / beta_l);
    let gamma2 = (theta1 - 2.0 * gamma1) / (beta_u + 4.0 * b * gamma1);
    Ok(ExponentSet {
        mode,
        rule,
        beta_u,
        beta_l,
        b,
        eps,
        gamma1,
        gamma2,
        theta1,
        theta1_lower,
        theta1_upper: theta1_upper.filter(|u| u.is_finite()),
        theta2,
        theta2_lower,
        theta3,
    })
}
