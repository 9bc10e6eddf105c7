//! Fixed-delay adaptive controller: regressor assembly, certainty-equivalence
//! control and the normalized-gradient update with its zero-divisor guard.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::plant::{step_difference, DisturbanceTrain, ModelOrders, PlantModel, SignalHistory};

/// Candidate `β̂₀` values below this magnitude count as zero for the guard.
pub const GUARD_EPS: f64 = 1e-300;

/// Default adaptation gain used when the guard trips.
pub const DEFAULT_GAMMA: f64 = 0.5;

/// `φ_d(k) = [y(k) … y(k−m₁+1), u(k−1) … u(k−m₂−d+1)]` and
/// `Φ_d(k) = [φ_d(k); u(k)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressorPair {
    pub phi: DVector<f64>,
    pub full: DVector<f64>,
}

impl RegressorPair {
    /// Assembles the pair from outputs newest-first, past inputs
    /// newest-first and the current input.
    pub fn from_parts(outputs: &[f64], past_inputs: &[f64], u_k: f64) -> Self {
        let phi = DVector::from_iterator(
            outputs.len() + past_inputs.len(),
            outputs.iter().chain(past_inputs).copied(),
        );
        let full = phi.clone().insert_row(phi.len(), u_k);
        Self { phi, full }
    }

    pub fn dim(&self) -> usize {
        self.full.len()
    }
}

pub fn build_regressor(
    history: &SignalHistory,
    orders: ModelOrders,
    d: usize,
    u_k: f64,
) -> Result<RegressorPair> {
    if d == 0 {
        return Err(Error::InvalidDelay(d));
    }
    let past = orders.past_inputs(d);
    if history.y_depth() < orders.m1 {
        return Err(Error::HistoryDepth {
            what: "output",
            need: orders.m1,
            have: history.y_depth(),
        });
    }
    if history.u_depth() < past {
        return Err(Error::HistoryDepth {
            what: "input",
            need: past,
            have: history.u_depth(),
        });
    }
    let ys: Vec<f64> = (0..orders.m1).map(|i| history.y(i).unwrap()).collect();
    let us: Vec<f64> = (1..=past).map(|i| history.u(i).unwrap()).collect();
    Ok(RegressorPair::from_parts(&ys, &us, u_k))
}

/// `θ̂_d` with the `β̂₀` estimate in the last slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterEstimate {
    theta: DVector<f64>,
    gamma: f64,
}

/// Result of one application of the update law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateOutcome {
    /// `ε(k) = y(k) − θ̂(k−1)ᵀΦ(k−d)`
    pub eps: f64,
    /// Step gain `a(k)`: 1, or `γ` when the guard tripped.
    pub gain: f64,
}

pub fn validate_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 2.0 && gamma != 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

impl ParameterEstimate {
    pub fn new(theta: DVector<f64>, gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        if theta.is_empty() {
            return Err(Error::Dimension {
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { theta, gamma })
    }

    pub fn zeros(dim: usize, gamma: f64) -> Result<Self> {
        Self::new(DVector::zeros(dim), gamma)
    }

    /// Zero vector except `β̂₀ = beta0`.
    pub fn with_prior(dim: usize, gamma: f64, beta0: f64) -> Result<Self> {
        let mut est = Self::zeros(dim, gamma)?;
        est.theta[dim - 1] = beta0;
        Ok(est)
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn nu_index(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn beta0(&self) -> f64 {
        self.theta[self.nu_index()]
    }

    pub fn set_zero(&mut self) {
        self.theta.fill(0.0);
    }

    pub fn set_theta(&mut self, theta: &DVector<f64>) -> Result<()> {
        self.check_dim(theta.len())?;
        self.theta.copy_from(theta);
        Ok(())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.theta.len() {
            return Err(Error::Dimension {
                expected: self.theta.len(),
                got,
            });
        }
        Ok(())
    }

    /// `u(k) = (y_ref(k+d) − ϑ̂ᵀφ(k)) / θ̂_ν`
    pub fn control(&self, phi: &DVector<f64>, yref_ahead: f64) -> Result<f64> {
        self.check_dim(phi.len() + 1)?;
        let beta0 = self.beta0();
        if beta0.abs() < GUARD_EPS {
            return Err(Error::ZeroDivisor);
        }
        let feedback = self.theta.rows(0, phi.len()).dot(phi);
        Ok((yref_ahead - feedback) / beta0)
    }

    /// Prediction `θ̂ᵀΦ`.
    pub fn predict(&self, full: &DVector<f64>) -> Result<f64> {
        self.check_dim(full.len())?;
        Ok(self.theta.dot(full))
    }

    /// Normalized-gradient step with the lagged regressor `Φ(k−d)`.
    pub fn update(&mut self, lagged: &DVector<f64>, y_k: f64) -> Result<UpdateOutcome> {
        let eps = y_k - self.predict(lagged)?;
        let scale = eps / (1.0 + lagged.norm_squared());
        let nu = self.nu_index();
        let candidate = self.theta[nu] + lagged[nu] * scale;
        let gain = if candidate.abs() < GUARD_EPS {
            self.gamma
        } else {
            1.0
        };
        self.theta.axpy(gain * scale, lagged, 1.0);
        Ok(UpdateOutcome { eps, gain })
    }
}

pub fn tracking_error(y_k: f64, yref_k: f64) -> f64 {
    y_k - yref_k
}

/// One sample of a [`AdaptiveLoop`] run.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSample {
    pub k: u64,
    pub y: f64,
    pub yref: f64,
    pub e: f64,
    pub u: f64,
    pub eps: Option<f64>,
    pub theta: DVector<f64>,
    /// `Φ(k)` built this sample.
    pub regressor: DVector<f64>,
}

/// Plant plus fixed-delay adaptive controller in closed loop.
///
/// Past regressors are kept in a length-`d` queue so the update at `k` uses
/// exactly `Φ(k−d)`.
#[derive(Clone, Debug)]
pub struct AdaptiveLoop {
    plant: PlantModel,
    history: SignalHistory,
    estimate: ParameterEstimate,
    queue: VecDeque<DVector<f64>>,
    disturbance: DisturbanceTrain,
}

impl AdaptiveLoop {
    pub fn new(plant: PlantModel, estimate: ParameterEstimate) -> Result<Self> {
        plant.validate()?;
        let d = plant.delay;
        let dim = plant.orders().regressor_dim(d);
        if estimate.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: estimate.dim(),
            });
        }
        let history = SignalHistory::for_orders(plant.orders(), d);
        Ok(Self {
            plant,
            history,
            estimate,
            queue: VecDeque::with_capacity(d + 1),
            disturbance: DisturbanceTrain::none(),
        })
    }

    pub fn with_disturbance(mut self, disturbance: DisturbanceTrain) -> Self {
        self.disturbance = disturbance;
        self
    }

    pub fn with_history(mut self, history: SignalHistory) -> Self {
        self.history = history;
        self
    }

    pub fn estimate(&self) -> &ParameterEstimate {
        &self.estimate
    }

    pub fn history(&self) -> &SignalHistory {
        &self.history
    }

    pub fn plant(&self) -> &PlantModel {
        &self.plant
    }

    /// Runs sample `k`: update with `Φ(k−d)` once available, compute `u(k)`
    /// for `y_ref(k+d)`, then advance the plant to `y(k+1)`.
    pub fn step(&mut self, yref_now: f64, yref_ahead: f64) -> Result<LoopSample> {
        let d = self.plant.delay;
        let k = self.history.k();
        let y = self.history.y(0).unwrap_or(0.0);
        let eps = if self.queue.len() == d {
            let lagged = self.queue.pop_front().unwrap();
            Some(self.estimate.update(&lagged, y)?.eps)
        } else {
            None
        };
        let pair = build_regressor(&self.history, self.plant.orders(), d, 0.0)?;
        let u = self.estimate.control(&pair.phi, yref_ahead)?;
        let mut full = pair.full;
        let last = full.len() - 1;
        full[last] = u;
        self.queue.push_back(full.clone());
        step_difference(&self.plant, &mut self.history, u, &self.disturbance)?;
        Ok(LoopSample {
            k,
            y,
            yref: yref_now,
            e: tracking_error(y, yref_now),
            u,
            eps,
            theta: self.estimate.theta().clone(),
            regressor: full,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(theta: &[f64], gamma: f64) -> ParameterEstimate {
        ParameterEstimate::new(DVector::from_row_slice(theta), gamma).unwrap()
    }

    #[test]
    fn regressor_layout() {
        let orders = ModelOrders { m1: 1, m2: 0 };
        let h = SignalHistory::with_initial(1, 0, &[2.0], &[]);
        let r = build_regressor(&h, orders, 1, 3.0).unwrap();
        assert_eq!(r.phi.as_slice(), &[2.0]);
        assert_eq!(r.full.as_slice(), &[2.0, 3.0]);

        let orders = ModelOrders { m1: 2, m2: 1 };
        let h = SignalHistory::for_orders(orders, 2);
        let r = build_regressor(&h, orders, 2, 0.0).unwrap();
        assert_eq!((r.phi.len(), r.full.len()), (4, 5));
        assert!(r.full.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn regressor_depth_error() {
        let orders = ModelOrders { m1: 2, m2: 1 };
        let h = SignalHistory::zeros(2, 1);
        assert!(matches!(
            build_regressor(&h, orders, 3, 0.0),
            Err(Error::HistoryDepth { what: "input", .. })
        ));
    }

    #[test]
    fn control_examples() {
        let e = est(&[0.0, 1.0], 0.5);
        assert_eq!(e.control(&DVector::from_row_slice(&[5.0]), 2.0).unwrap(), 2.0);
        let e = est(&[1.0, 2.0], 0.5);
        assert_eq!(e.control(&DVector::from_row_slice(&[3.0]), 8.0).unwrap(), 2.5);
        let e = est(&[1.0, 0.0], 0.5);
        assert_eq!(
            e.control(&DVector::from_row_slice(&[3.0]), 8.0),
            Err(Error::ZeroDivisor)
        );
    }

    #[test]
    fn exact_parameters_give_exact_tracking() {
        let plant = PlantModel::new(vec![-1.2, 0.5], vec![0.3, 0.1], 2).unwrap();
        let theta = plant.theta_star(2).unwrap();
        let (alpha, beta) = plant.predictor(2).unwrap();
        let e = ParameterEstimate::new(theta, 0.5).unwrap();
        let h = SignalHistory::with_initial(2, 2, &[0.3, -0.1], &[0.2, 0.4]);
        let pair = build_regressor(&h, plant.orders(), 2, 0.0).unwrap();
        let u = e.control(&pair.phi, 1.7).unwrap();
        let y = crate::plant::step_predictor(&alpha, &beta, &h, u, 0.0).unwrap();
        assert!((y - 1.7).abs() < 1e-12);
    }

    #[test]
    fn update_examples() {
        // zero innovation leaves the estimate alone
        let mut e = est(&[0.3, 0.7], 0.5);
        let phi = DVector::from_row_slice(&[1.0, 2.0]);
        let y = e.predict(&phi).unwrap();
        let out = e.update(&phi, y).unwrap();
        assert_eq!(out.eps, 0.0);
        assert_eq!(e.theta().as_slice(), &[0.3, 0.7]);

        // scalar toy
        let mut e = est(&[0.0], 0.5);
        let out = e.update(&DVector::from_row_slice(&[1.0]), 1.0).unwrap();
        assert_eq!(out.eps, 1.0);
        assert_eq!(out.gain, 1.0);
        assert_eq!(e.theta()[0], 0.5);

        // guard: a = 1 would give 0.5 + 1·(−1)/2 = 0, so a = γ
        let mut e = est(&[0.5], 0.5);
        let out = e.update(&DVector::from_row_slice(&[1.0]), -0.5).unwrap();
        assert_eq!(out.eps, -1.0);
        assert_eq!(out.gain, 0.5);
        assert_eq!(e.beta0(), 0.25);
    }

    #[test]
    fn gamma_constraint() {
        assert_eq!(
            ParameterEstimate::zeros(2, 1.0),
            Err(Error::InvalidGamma(1.0))
        );
        assert!(ParameterEstimate::zeros(2, 2.0).is_err());
        assert!(ParameterEstimate::zeros(2, 0.0).is_err());
        assert!(ParameterEstimate::zeros(2, 1.5).is_ok());
    }

    #[test]
    fn tracking_error_examples() {
        assert_eq!(tracking_error(1.0, 1.0), 0.0);
        assert_eq!(tracking_error(2.0, 0.5), 1.5);
        assert_eq!(tracking_error(0.0, -1.0), 1.0);
    }
}
