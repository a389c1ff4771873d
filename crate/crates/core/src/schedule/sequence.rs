use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interpolation-time sequence `l_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleKind {
    /// `l_k = k / N`. Its increments `1 - l_k` are not summable.
    Linear {
        #[serde(rename = "N")]
        n: usize,
    },
    /// `l_k = 1 - lambda^k`, so `sum_k (1 - l_k) = 1 / (1 - lambda)`.
    Geometric {
        lambda: f64,
        #[serde(rename = "N")]
        n: usize,
    },
}

impl ScheduleKind {
    pub fn iterations(&self) -> usize {
        match *self {
            ScheduleKind::Linear { n } | ScheduleKind::Geometric { n, .. } => n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScheduleKind::Linear { n } if n == 0 => Err(Error::Config("linear schedule needs N >= 1".into())),
            ScheduleKind::Geometric { n, .. } if n == 0 => {
                Err(Error::Config("geometric schedule needs N >= 1".into()))
            }
            ScheduleKind::Geometric { lambda, .. } if !(lambda > 0.0 && lambda < 1.0) => Err(Error::Config(
                format!("geometric ratio lambda must lie in (0, 1), got {lambda}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Gradient step size rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaPolicy {
    /// `gamma_k = 1 - l_k`.
    OneMinusL,
    /// A fixed step, still capped at `1 - l_k`.
    Constant(f64),
}

/// Extrapolation coefficient rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HPolicy {
    Constant(f64),
    /// Linear ramp from 0 at `k = 0` to `h` at `k = over`, constant afterwards.
    Ramp { h: f64, over: usize },
    /// Zero before iteration `from`, `h` from then on.
    After { h: f64, from: usize },
}

/// The sequences `l_k`, `gamma_k`, `h_k` and everything derived from them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    gamma: GammaPolicy,
    h: HPolicy,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, gamma: GammaPolicy, h: HPolicy) -> Result<Self> {
        kind.validate()?;
        if let GammaPolicy::Constant(g) = gamma {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Config(format!("gradient step must be non-negative, got {g}")));
            }
        }
        let h_value = match h {
            HPolicy::Constant(h) | HPolicy::Ramp { h, .. } | HPolicy::After { h, .. } => h,
        };
        if !(h_value.is_finite() && h_value >= 0.0) {
            return Err(Error::Config(format!("extrapolation coefficient must be non-negative, got {h_value}")));
        }
        Ok(Self { kind, gamma, h })
    }

    pub fn geometric(lambda: f64, n: usize) -> Result<Self> {
        Self::new(
            ScheduleKind::Geometric { lambda, n },
            GammaPolicy::OneMinusL,
            HPolicy::Constant(0.0),
        )
    }

    pub fn linear(n: usize) -> Result<Self> {
        Self::new(ScheduleKind::Linear { n }, GammaPolicy::OneMinusL, HPolicy::Constant(0.0))
    }

    pub fn with_gamma(self, gamma: GammaPolicy) -> Result<Self> {
        Self::new(self.kind, gamma, self.h)
    }

    pub fn with_h(self, h: HPolicy) -> Result<Self> {
        Self::new(self.kind, self.gamma, h)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn gamma_policy(&self) -> GammaPolicy {
        self.gamma
    }

    pub fn h_policy(&self) -> HPolicy {
        self.h
    }

    pub fn iterations(&self) -> usize {
        self.kind.iterations()
    }

    pub fn l(&self, k: usize) -> f64 {
        match self.kind {
            ScheduleKind::Linear { n } => (k as f64 / n as f64).min(1.0),
            ScheduleKind::Geometric { .. } => 1.0 - self.one_minus_l(k),
        }
    }

    /// `1 - l_k`, computed without cancellation (`lambda^k` for geometric).
    pub fn one_minus_l(&self, k: usize) -> f64 {
        match self.kind {
            ScheduleKind::Linear { n } => (1.0 - k as f64 / n as f64).max(0.0),
            ScheduleKind::Geometric { lambda, .. } => lambda.powf(k as f64),
        }
    }

    /// `gamma_k`, never larger than `1 - l_k`.
    pub fn gamma(&self, k: usize) -> f64 {
        let cap = self.one_minus_l(k);
        match self.gamma {
            GammaPolicy::OneMinusL => cap,
            GammaPolicy::Constant(g) => g.min(cap),
        }
    }

    pub fn h(&self, k: usize) -> f64 {
        match self.h {
            HPolicy::Constant(h) => h,
            HPolicy::Ramp { h, over } => {
                if over == 0 || k >= over {
                    h
                } else {
                    h * k as f64 / over as f64
                }
            }
            HPolicy::After { h, from } => {
                if k >= from {
                    h
                } else {
                    0.0
                }
            }
        }
    }

    /// Largest extrapolation coefficient the policy ever produces.
    pub fn max_h(&self) -> f64 {
        match self.h {
            HPolicy::Constant(h) | HPolicy::Ramp { h, .. } | HPolicy::After { h, .. } => h,
        }
    }

    fn require_open(&self, k: usize) -> Result<f64> {
        let gap = self.one_minus_l(k);
        if gap <= 0.0 {
            return Err(Error::invalid(format!("l_{k} == 1 leaves the coefficient undefined")));
        }
        Ok(gap)
    }

    /// `beta_k = l_k gamma_k / (1 - l_k)`.
    pub fn beta(&self, k: usize) -> Result<f64> {
        let gap = self.require_open(k)?;
        Ok(self.l(k) * self.gamma(k) / gap)
    }

    /// `alpha_k = l_k h_k (1 - l_{k-1}) / (1 - l_k)`, defined for `k >= 1`.
    pub fn alpha(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::invalid("alpha_k needs k >= 1"));
        }
        let gap = self.require_open(k)?;
        Ok(self.l(k) * self.h(k) * self.one_minus_l(k - 1) / gap)
    }

    /// Closed form of `alpha_k` for geometric schedules: `(1 - lambda^k) h_k / lambda`.
    pub fn alpha_closed_form(&self, k: usize) -> Option<f64> {
        match self.kind {
            ScheduleKind::Geometric { lambda, .. } if k >= 1 => {
                Some((1.0 - lambda.powf(k as f64)) * self.h(k) / lambda)
            }
            _ => None,
        }
    }

    /// `sigma_k = sqrt(1 - l_k)`.
    pub fn sigma(&self, k: usize) -> f64 {
        self.one_minus_l(k).sqrt()
    }

    /// `sum_{k < n} (1 - l_k)`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for k in 0..n {
            // Neumaier summation keeps the long geometric tail accurate.
            let term = self.one_minus_l(k);
            let s = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - s) + term;
            } else {
                comp += (term - s) + sum;
            }
            sum = s;
        }
        sum + comp
    }

    /// Limit of [`partial_sum`](Self::partial_sum), `1 / (1 - lambda)` for
    /// geometric schedules and infinite otherwise.
    pub fn total_pseudo_time(&self) -> f64 {
        match self.kind {
            ScheduleKind::Geometric { lambda, .. } => 1.0 / (1.0 - lambda),
            ScheduleKind::Linear { .. } => f64::INFINITY,
        }
    }

    /// Pseudo-time knots for iterations `start..=end`, with `t_start = 0`
    /// and `t_{j+1} = t_j + (1 - l_j)`.
    pub fn pseudo_times(&self, start: usize, end: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(end.saturating_sub(start) + 1);
        if start > end {
            return out;
        }
        let mut t = 0.0;
        out.push(t);
        for k in start..end {
            t += self.one_minus_l(k);
            out.push(t);
        }
        out
    }
}
