//! Unknown discrete-time plants, their signal histories and impulse-train
//! disturbances.
//!
//! Difference form:
//! `y(k) = −Σ a_l y(k−l) + Σ b_l u(k−l−d) + D(k−d)`.
//! Predictor form for any delay `d`:
//! `y(k+d) = α(q⁻¹)y(k) + β(q⁻¹)u(k) + F(q⁻¹)D(k)`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::Ring;
use crate::shiftpoly::{
    largest_zero, predictor_coeffs, solve_diophantine, ShiftPolynomial, DEFAULT_STABILITY_MARGIN,
};

/// Magnitude beyond which an output is treated as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    /// `a₁ … a_m₁`
    pub a: Vec<f64>,
    /// `b₀ … b_m₂`
    pub b: Vec<f64>,
    /// Input delay in samples.
    pub delay: usize,
    /// Sample period in seconds. Metadata only.
    #[serde(default = "default_sample_period")]
    pub sample_period: f64,
}

fn default_sample_period() -> f64 {
    0.01
}

impl PlantModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>, delay: usize) -> Result<Self> {
        let model = Self {
            a,
            b,
            delay,
            sample_period: default_sample_period(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks `b₀ ≠ 0`, `d ≥ 1` and that every zero of `B` lies strictly
    /// inside the unit disk.
    pub fn validate(&self) -> Result<()> {
        if self.delay == 0 {
            return Err(Error::InvalidDelay(0));
        }
        match self.b.first() {
            Some(b0) if *b0 != 0.0 && b0.is_finite() => {}
            _ => return Err(Error::ZeroLeadingInput),
        }
        if self.a.iter().chain(&self.b).any(|c| !c.is_finite()) {
            return Err(Error::Config("plant coefficients must be finite".into()));
        }
        if let Some((re, im, modulus)) = largest_zero(&self.b_poly()) {
            if modulus >= 1.0 - DEFAULT_STABILITY_MARGIN {
                return Err(Error::NonMinimumPhase { re, im, modulus });
            }
        }
        Ok(())
    }

    pub fn m1(&self) -> usize {
        self.a.len()
    }

    pub fn m2(&self) -> usize {
        self.b.len().saturating_sub(1)
    }

    pub fn orders(&self) -> ModelOrders {
        ModelOrders {
            m1: self.m1(),
            m2: self.m2(),
        }
    }

    pub fn a_poly(&self) -> ShiftPolynomial {
        ShiftPolynomial::monic_from_tail(&self.a)
    }

    pub fn b_poly(&self) -> ShiftPolynomial {
        ShiftPolynomial::new(self.b.clone())
    }

    /// `(α, β)` of the predictor form for delay `d`.
    pub fn predictor(&self, d: usize) -> Result<(ShiftPolynomial, ShiftPolynomial)> {
        predictor_coeffs(&self.a_poly(), &self.b_poly(), d)
    }

    /// `F` of the Diophantine identity for delay `d`.
    pub fn f_poly(&self, d: usize) -> Result<ShiftPolynomial> {
        Ok(solve_diophantine(&self.a_poly(), d)?.0)
    }

    /// True parameter vector `θ*_d = [α₀ … α_{m₁−1}, β₁ … β_{m₂+d−1}, β₀]`,
    /// laid out to match the regressor.
    pub fn theta_star(&self, d: usize) -> Result<DVector<f64>> {
        let (alpha, beta) = self.predictor(d)?;
        let orders = self.orders();
        let dim = orders.regressor_dim(d);
        let mut theta = DVector::zeros(dim);
        for i in 0..orders.m1 {
            theta[i] = alpha.coeff(i);
        }
        for j in 1..orders.m2 + d {
            theta[orders.m1 + j - 1] = beta.coeff(j);
        }
        theta[dim - 1] = beta.coeff(0);
        Ok(theta)
    }
}

/// Known orders `(m₁, m₂)` of the polynomials `A` and `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOrders {
    pub m1: usize,
    pub m2: usize,
}

impl ModelOrders {
    /// `M = m₁ + m₂ + d`
    pub fn regressor_dim(&self, d: usize) -> usize {
        self.m1 + self.m2 + d
    }

    /// Past inputs `u(k−1) … u(k−m₂−d+1)` referenced by the regressor.
    pub fn past_inputs(&self, d: usize) -> usize {
        self.m2 + d - 1
    }
}

/// Output and input past of one plant. `y` holds `y(k), y(k−1), …` and `u`
/// holds `u(k−1), u(k−2), …` where `k` is the current sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalHistory {
    y: Ring,
    u: Ring,
    k: u64,
}

impl SignalHistory {
    pub fn zeros(y_depth: usize, u_depth: usize) -> Self {
        Self {
            y: Ring::zeros(y_depth),
            u: Ring::zeros(u_depth),
            k: 0,
        }
    }

    /// Seeds the history with initial conditions: `y0[i] = y(−i)` for
    /// `i = 0, 1, …` and `u0[i] = u(−1−i)`.
    pub fn with_initial(y_depth: usize, u_depth: usize, y0: &[f64], u0: &[f64]) -> Self {
        Self {
            y: Ring::from_newest_first(y_depth, y0),
            u: Ring::from_newest_first(u_depth, u0),
            k: 0,
        }
    }

    /// Depths sufficient for `orders` and every delay up to `d_max`.
    pub fn for_orders(orders: ModelOrders, d_max: usize) -> Self {
        Self::zeros(orders.m1.max(1), orders.m2 + d_max)
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn y_depth(&self) -> usize {
        self.y.depth()
    }

    pub fn u_depth(&self) -> usize {
        self.u.depth()
    }

    /// `y(k − lag)`
    pub fn y(&self, lag: usize) -> Option<f64> {
        self.y.get(lag)
    }

    /// `u(k − lag)` for `lag ≥ 1`.
    pub fn u(&self, lag: usize) -> Option<f64> {
        if lag == 0 {
            return None;
        }
        self.u.get(lag - 1)
    }

    /// Appends `u(k)` and `y(k+1)` and advances `k`.
    pub fn advance(&mut self, u_k: f64, y_next: f64) {
        self.u.push(u_k);
        self.y.push(y_next);
        self.k += 1;
    }

    fn require(&self, y_need: usize, u_need: usize) -> Result<()> {
        if self.y.depth() < y_need {
            return Err(Error::HistoryDepth {
                what: "output",
                need: y_need,
                have: self.y.depth(),
            });
        }
        if self.u.depth() < u_need {
            return Err(Error::HistoryDepth {
                what: "input",
                need: u_need,
                have: self.u.depth(),
            });
        }
        Ok(())
    }
}

/// Impulse disturbance with a lower-bounded inter-arrival gap.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceTrain {
    times: Vec<u64>,
    amplitudes: Vec<f64>,
    min_gap: usize,
}

impl DisturbanceTrain {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(times: Vec<u64>, amplitudes: Vec<f64>, min_gap: usize) -> Result<Self> {
        if times.len() != amplitudes.len() {
            return Err(Error::Disturbance(format!(
                "{} impulse times but {} amplitudes",
                times.len(),
                amplitudes.len()
            )));
        }
        if let Some(a) = amplitudes.iter().find(|a| !a.is_finite()) {
            return Err(Error::Disturbance(format!("non-finite amplitude {a}")));
        }
        for w in times.windows(2) {
            if w[1] < w[0] + min_gap as u64 || w[1] <= w[0] {
                return Err(Error::ImpulseGap {
                    min_gap,
                    prev: w[0] as usize,
                    next: w[1] as usize,
                });
            }
        }
        Ok(Self {
            times,
            amplitudes,
            min_gap,
        })
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn min_gap(&self) -> usize {
        self.min_gap
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `D(k)`; zero for negative `k` and between impulses.
    pub fn at(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        match self.times.binary_search(&(k as u64)) {
            Ok(i) => self.amplitudes[i],
            Err(_) => 0.0,
        }
    }

    /// `F(q⁻¹)D(k)`, the disturbance as it appears in the predictor form.
    pub fn filtered(&self, f: &ShiftPolynomial, k: i64) -> f64 {
        f.apply(|j| self.at(k - j as i64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImpulseAmplitudes {
    Constant(f64),
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ImpulsePlacement {
    Explicit(Vec<u64>),
    /// First impulse uniformly in `[0, T_dw)`, then gaps uniformly in
    /// `[T_dw, 2·T_dw)`, stopping at the horizon.
    Random,
}

pub fn make_impulse_train<R: Rng + ?Sized>(
    min_gap: usize,
    horizon: u64,
    amplitudes: &ImpulseAmplitudes,
    placement: &ImpulsePlacement,
    rng: &mut R,
) -> Result<DisturbanceTrain> {
    if min_gap == 0 {
        return Err(Error::Disturbance("minimum gap must be at least 1".into()));
    }
    let times = match placement {
        ImpulsePlacement::Explicit(times) => {
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Disturbance("impulse times must be sorted".into()));
            }
            times.clone()
        }
        ImpulsePlacement::Random => {
            let gap = min_gap as u64;
            let mut times = Vec::new();
            let mut t = rng.gen_range(0..gap);
            while t < horizon {
                times.push(t);
                t += rng.gen_range(gap..2 * gap);
            }
            times
        }
    };
    let amps = match amplitudes {
        ImpulseAmplitudes::Constant(a) => vec![*a; times.len()],
        ImpulseAmplitudes::List(list) if list.is_empty() => {
            return Err(Error::Disturbance("empty amplitude list".into()))
        }
        ImpulseAmplitudes::List(list) => match placement {
            ImpulsePlacement::Explicit(_) => list.clone(),
            ImpulsePlacement::Random => list.iter().copied().cycle().take(times.len()).collect(),
        },
    };
    DisturbanceTrain::new(times, amps, min_gap)
}

fn check_output(k: u64, y: f64) -> Result<f64> {
    if !y.is_finite() || y.abs() > DIVERGENCE_LIMIT {
        return Err(Error::Divergence { k, value: y });
    }
    Ok(y)
}

/// Advances the difference form one sample: appends `u(k)`, computes
/// `y(k+1)` with the disturbance entering as `D(k+1−d)`, and returns it.
pub fn step_difference(
    model: &PlantModel,
    history: &mut SignalHistory,
    u_k: f64,
    disturbance: &DisturbanceTrain,
) -> Result<f64> {
    let (m1, m2, d) = (model.m1(), model.m2(), model.delay);
    history.require(m1, m2 + d - 1)?;
    let k = history.k as i64;
    // y(k+1−l) is y(k−(l−1))
    let mut y_next = 0.0;
    for (l, a) in model.a.iter().enumerate() {
        y_next -= a * history.y(l).unwrap();
    }
    // u(k+1−d−l) is u(k−(d−1+l)); lag 0 is the input being applied now
    for (l, b) in model.b.iter().enumerate() {
        let lag = d - 1 + l;
        let u = if lag == 0 { u_k } else { history.u(lag).unwrap() };
        y_next += b * u;
    }
    y_next += disturbance.at(k + 1 - d as i64);
    let y_next = check_output(history.k + 1, y_next)?;
    history.advance(u_k, y_next);
    Ok(y_next)
}

/// Evaluates `y(k+d) = α(q⁻¹)y(k) + β(q⁻¹)u(k) + D` without advancing the
/// history. `d_k` is the disturbance term of the predictor form, `F·D(k)`.
pub fn step_predictor(
    alpha: &ShiftPolynomial,
    beta: &ShiftPolynomial,
    history: &SignalHistory,
    u_k: f64,
    d_k: f64,
) -> Result<f64> {
    history.require(alpha.coeffs().len(), beta.degree())?;
    let from_y = alpha.apply(|i| history.y(i).unwrap());
    let from_u = beta.apply(|j| if j == 0 { u_k } else { history.u(j).unwrap() });
    check_output(history.k, from_y + from_u + d_k)
}
