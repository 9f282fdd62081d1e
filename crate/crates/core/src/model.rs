//! The nonlinear Klein-Gordon class
//! `phi_tt = phi_xx - phi + q(x, phi)`, `q = U(x) phi^2 + phi^3/6 + p(phi)`,
//! its conserved energy, and the closed-form reference solutions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dirichlet_form, FieldState, Grid};

/// `int Q^2 dy` for `Q = 4 sech y`.
pub const Q_L2_SQUARED: f64 = 32.0;
/// `int (Q')^2 dy`.
pub const Q_PRIME_L2_SQUARED: f64 = 32.0 / 3.0;
/// `int Q^4 dy`.
pub const Q_L4_FOURTH: f64 = 1024.0 / 3.0;

/// Canonical soliton `Q(y) = 4 / cosh(y)`.
pub fn soliton_q(y: f64) -> f64 {
    4.0 / y.cosh()
}

pub fn soliton_q_prime(y: f64) -> f64 {
    -4.0 * y.tanh() / y.cosh()
}

/// Analytic `Q''(y) = 4 sech(y) (1 - 2 sech^2(y))`.
pub fn soliton_q_second(y: f64) -> f64 {
    let s = 1.0 / y.cosh();
    4.0 * s * (1.0 - 2.0 * s * s)
}

/// `Q'' - Q + Q^3/8`, identically zero.
pub fn sgq_residual(y: f64) -> f64 {
    let q = soliton_q(y);
    soliton_q_second(y) - q + q * q * q / 8.0
}

/// Localized linear potential `U(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Zero,
    /// `amplitude * exp(-(x/width)^2)`.
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// `-amplitude * sech(x) tanh(x)`.
    OddSechTanh {
        amplitude: f64,
    },
    /// Piecewise-linear interpolation of samples, zero outside the table.
    Tabulated {
        x: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Potential {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Gaussian { amplitude, width } => {
                let s = x / width;
                amplitude * (-s * s).exp()
            }
            Potential::OddSechTanh { amplitude } => -amplitude * x.tanh() / x.cosh(),
            Potential::Tabulated { x: xs, values } => interpolate(xs, values, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Zero => true,
            Potential::Gaussian { amplitude, .. } | Potential::OddSechTanh { amplitude } => {
                *amplitude == 0.0
            }
            Potential::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Whether `U(-x) = U(x)`; tabulated potentials are checked on their nodes.
    pub fn is_even(&self) -> bool {
        match self {
            Potential::Zero | Potential::Gaussian { .. } => true,
            Potential::OddSechTanh { amplitude } => *amplitude == 0.0,
            Potential::Tabulated { x, .. } => x
                .iter()
                .all(|&xi| (self.eval(xi) - self.eval(-xi)).abs() <= 1e-14),
        }
    }

    /// Constant `C` with `|U(x)| <= C exp(-|x|/2)` for the analytic entries.
    pub fn decay_constant(&self) -> Option<f64> {
        match self {
            Potential::Zero => Some(0.0),
            // exp(-s^2 + |x|/2) is maximal at |x| = w^2/4.
            Potential::Gaussian { amplitude, width } => {
                Some(amplitude.abs() * (width * width / 16.0).exp())
            }
            // sech(x)|tanh(x)| <= 2 exp(-|x|).
            Potential::OddSechTanh { amplitude } => Some(2.0 * amplitude.abs()),
            Potential::Tabulated { .. } => None,
        }
    }
}

fn interpolate(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let n = xs.len().min(values.len());
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let k = xs[..n].partition_point(|&v| v <= x);
    if k == 0 {
        return values[0];
    }
    if k >= n {
        return values[n - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    values[k - 1] * (1.0 - w) + values[k] * w
}

/// Higher-order remainder `p(phi)` with `|p| <= C |phi|^4` near zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Remainder {
    Zero,
    /// `p = phi - sin(phi) - phi^3/6`, so that `-phi + q = -sin(phi)` when `U = 0`.
    SineGordon,
}

// Below this magnitude the sine-Gordon remainder is summed from its Taylor
// series; the closed form loses all relative accuracy to cancellation there.
const SERIES_CUTOFF: f64 = 0.05;

impl Remainder {
    pub fn p(self, phi: f64) -> f64 {
        match self {
            Remainder::Zero => 0.0,
            Remainder::SineGordon => {
                if phi.abs() < SERIES_CUTOFF {
                    // -phi^5/5! + phi^7/7! - phi^9/9! + phi^11/11!
                    let z = phi * phi;
                    let p5 = phi * z * z;
                    p5 * (-1.0 / 120.0
                        + z * (1.0 / 5040.0 + z * (-1.0 / 362_880.0 + z / 39_916_800.0)))
                } else {
                    phi - phi.sin() - phi * phi * phi / 6.0
                }
            }
        }
    }

    pub fn dp(self, phi: f64) -> f64 {
        match self {
            Remainder::Zero => 0.0,
            Remainder::SineGordon => {
                if phi.abs() < SERIES_CUTOFF {
                    let z = phi * phi;
                    z * z
                        * (-1.0 / 24.0
                            + z * (1.0 / 720.0 + z * (-1.0 / 40_320.0 + z / 3_628_800.0)))
                } else {
                    let s = (0.5 * phi).sin();
                    2.0 * s * s - 0.5 * phi * phi
                }
            }
        }
    }

    /// Antiderivative `P(phi) = int_0^phi p`.
    pub fn antiderivative(self, phi: f64) -> f64 {
        match self {
            Remainder::Zero => 0.0,
            Remainder::SineGordon => {
                let z = phi * phi;
                if phi.abs() < SERIES_CUTOFF {
                    z * z
                        * z
                        * (-1.0 / 720.0
                            + z * (1.0 / 40_320.0 + z * (-1.0 / 3_628_800.0 + z / 479_001_600.0)))
                } else {
                    let s = (0.5 * phi).sin();
                    0.5 * z - 2.0 * s * s - z * z / 24.0
                }
            }
        }
    }

    /// Registered `C` in `|p(phi)| <= C phi^4` on `[-1, 1]`.
    pub fn bound_constant(self) -> f64 {
        match self {
            Remainder::Zero => 0.0,
            Remainder::SineGordon => 1.0 / 120.0,
        }
    }
}

/// One member of the equation class, fixed by the pair `(U, p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub potential: Potential,
    pub remainder: Remainder,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, potential: Potential, remainder: Remainder) -> Self {
        Self {
            name: name.into(),
            potential,
            remainder,
        }
    }

    pub fn sine_gordon() -> Self {
        Self::new("sine_gordon", Potential::Zero, Remainder::SineGordon)
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::new(
            "gaussian",
            Potential::Gaussian { amplitude, width },
            Remainder::Zero,
        )
    }

    /// Look up a registry entry.
    ///
    /// Names: `sine_gordon`, `cubic` (U = 0, p = 0), `gaussian` (params
    /// `amplitude`, `width`), `odd_sech_tanh` (param `amplitude`). Any entry can
    /// take the sine-Gordon remainder with `remainder = "sine_gordon"`.
    pub fn from_registry(
        name: &str,
        remainder: Option<&str>,
        params: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let known: &[&str] = match name {
            "sine_gordon" | "cubic" => &[],
            "gaussian" => &["amplitude", "width"],
            "odd_sech_tanh" => &["amplitude"],
            other => {
                return Err(Error::Config(format!(
                    "model.name: unknown model '{other}' (expected sine_gordon, cubic, gaussian, odd_sech_tanh)"
                )))
            }
        };
        if let Some(bad) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "model.params.{bad}: not a parameter of model '{name}'"
            )));
        }
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        let (potential, default_remainder) = match name {
            "sine_gordon" => (Potential::Zero, Remainder::SineGordon),
            "cubic" => (Potential::Zero, Remainder::Zero),
            "gaussian" => {
                let width = get("width", 1.0);
                if !(width > 0.0) {
                    return Err(Error::Config(format!(
                        "model.params.width: must be positive, got {width}"
                    )));
                }
                (
                    Potential::Gaussian {
                        amplitude: get("amplitude", 1.0),
                        width,
                    },
                    Remainder::Zero,
                )
            }
            _ => (
                Potential::OddSechTanh {
                    amplitude: get("amplitude", 1.0),
                },
                Remainder::Zero,
            ),
        };
        let remainder = match remainder {
            None => default_remainder,
            Some("none") | Some("zero") => Remainder::Zero,
            Some("sine_gordon") => Remainder::SineGordon,
            Some(other) => {
                return Err(Error::Config(format!(
                    "model.remainder: unknown remainder '{other}' (expected none, sine_gordon)"
                )))
            }
        };
        Ok(Self::new(name, potential, remainder))
    }

    /// `q(x, phi) = U(x) phi^2 + phi^3/6 + p(phi)`.
    #[inline]
    pub fn q(&self, u: f64, phi: f64) -> f64 {
        u * phi * phi + phi * phi * phi / 6.0 + self.remainder.p(phi)
    }

    /// `dq/dphi = 2 U phi + phi^2/2 + p'(phi)`.
    #[inline]
    pub fn dq(&self, u: f64, phi: f64) -> f64 {
        2.0 * u * phi + 0.5 * phi * phi + self.remainder.dp(phi)
    }

    /// `q` evaluated at position `x`.
    pub fn q_eval(&self, x: f64, phi: f64) -> f64 {
        self.q(self.potential.eval(x), phi)
    }

    /// `G(x, phi) = int_0^phi q = U phi^3/3 + phi^4/24 + P(phi)`.
    #[inline]
    pub fn q_antiderivative(&self, u: f64, phi: f64) -> f64 {
        let p2 = phi * phi;
        u * p2 * phi / 3.0 + p2 * p2 / 24.0 + self.remainder.antiderivative(phi)
    }

    /// `U` sampled at the grid nodes.
    pub fn potential_on(&self, grid: &Grid) -> Vec<f64> {
        grid.sample(|x| self.potential.eval(x))
    }

    /// Conserved energy
    /// `int 1/2 phi_t^2 + 1/2 phi_x^2 + 1/2 phi^2 - U phi^3/3 - phi^4/24 - P(phi) dx`.
    ///
    /// The gradient term is the discrete form `-<phi, d2 phi>`, which the
    /// semi-discrete flow conserves exactly.
    pub fn energy(&self, state: &FieldState) -> Result<f64> {
        state.validate()?;
        let grid = &state.grid;
        let u = self.potential_on(grid);
        let grad = dirichlet_form(grid, &state.phi)?;
        let density: Vec<f64> = (0..grid.len())
            .map(|i| {
                let (f, ft) = (state.phi[i], state.phi_t[i]);
                0.5 * ft * ft + 0.5 * f * f - self.q_antiderivative(u[i], f)
            })
            .collect();
        Ok(grid.integrate(&density) + 0.5 * grad)
    }
}

/// Amplitude/frequency pair of the sine-Gordon breather, `eps^2 + omega^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreatherParams {
    pub eps: f64,
    pub omega: f64,
}

impl BreatherParams {
    pub fn from_eps(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("eps = {eps} must lie in (0, 1)")));
        }
        Ok(Self {
            eps,
            omega: (1.0 - eps * eps).sqrt(),
        })
    }

    pub fn from_omega(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::Config(format!("omega = {omega} must lie in (0, 1)")));
        }
        Ok(Self {
            eps: (1.0 - omega * omega).sqrt(),
            omega,
        })
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

/// `B(t, x) = 4 atan((eps/omega) cos(omega t) / cosh(eps x))`.
pub fn sine_gordon_breather(params: BreatherParams, t: f64, x: f64) -> f64 {
    let c = params.eps / (params.omega * (params.eps * x).cosh());
    4.0 * (c * (params.omega * t).cos()).atan()
}

/// Analytic `dB/dt`.
pub fn sine_gordon_breather_dt(params: BreatherParams, t: f64, x: f64) -> f64 {
    let c = params.eps / (params.omega * (params.eps * x).cosh());
    let (s, co) = (params.omega * t).sin_cos();
    -4.0 * c * params.omega * s / (1.0 + c * c * co * co)
}

/// The exact breather sampled on `grid` at time `t`, ends pinned to zero.
pub fn breather_state(params: BreatherParams, grid: &Grid, t: f64) -> FieldState {
    let n = grid.len();
    let mut phi = grid.sample(|x| sine_gordon_breather(params, t, x));
    let mut phi_t = grid.sample(|x| sine_gordon_breather_dt(params, t, x));
    for v in [&mut phi, &mut phi_t] {
        v[0] = 0.0;
        v[n - 1] = 0.0;
    }
    FieldState {
        grid: grid.clone(),
        phi,
        phi_t,
        time: t,
    }
}
