//! SGD with momentum, AdaGrad and AdaMax update rules over flat slices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// `v <- momentum * v + g; p <- p - lr * v`
    Sgd { lr: f64, momentum: f64 },
    /// `s <- s + g^2; p <- p - lr * g / sqrt(s + epsilon)`
    AdaGrad { lr: f64, epsilon: f64 },
    /// Exponential first moment with bias correction, infinity-norm second
    /// moment. `epsilon` floors the denominator so a zero history is safe.
    AdaMax {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Sgd {
            lr: 0.1,
            momentum: 0.9,
        }
    }
}

impl Optimizer {
    pub fn lr(&self) -> f64 {
        match *self {
            Optimizer::Sgd { lr, .. } | Optimizer::AdaGrad { lr, .. } | Optimizer::AdaMax { lr, .. } => lr,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd { .. } => "sgd",
            Optimizer::AdaGrad { .. } => "adagrad",
            Optimizer::AdaMax { .. } => "adamax",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.lr();
        if !lr.is_finite() || lr <= 0.0 {
            return Err(Error::argument(format!("learning rate must be > 0, got {lr}")));
        }
        match *self {
            Optimizer::Sgd { momentum, .. } if !(0.0..1.0).contains(&momentum) => {
                Err(Error::argument(format!("momentum {momentum} outside [0, 1)")))
            }
            Optimizer::AdaGrad { epsilon, .. } if epsilon < 0.0 => {
                Err(Error::argument("epsilon must be >= 0"))
            }
            Optimizer::AdaMax { beta1, beta2, epsilon, .. } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                    return Err(Error::argument("betas must lie in [0, 1)"));
                }
                if epsilon.is_nan() || epsilon <= 0.0 {
                    return Err(Error::argument("adamax epsilon must be > 0"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn init_state(&self, n_params: usize) -> OptState {
        match self {
            Optimizer::Sgd { .. } => OptState::Sgd {
                velocity: vec![0.0; n_params],
            },
            Optimizer::AdaGrad { .. } => OptState::AdaGrad {
                accum: vec![0.0; n_params],
            },
            Optimizer::AdaMax { .. } => OptState::AdaMax {
                m: vec![0.0; n_params],
                u: vec![0.0; n_params],
                t: 0,
            },
        }
    }

    /// One update with the learning rate scaled by `lr_scale`.
    pub fn step(&self, lr_scale: f64, params: &mut [f64], grads: &[f64], state: &mut OptState) -> Result<()> {
        match (*self, state) {
            (Optimizer::Sgd { lr, momentum }, OptState::Sgd { velocity }) => {
                sgd_step(params, grads, velocity, lr * lr_scale, momentum)
            }
            (Optimizer::AdaGrad { lr, epsilon }, OptState::AdaGrad { accum }) => {
                adagrad_step(params, grads, accum, lr * lr_scale, epsilon)
            }
            (Optimizer::AdaMax { lr, beta1, beta2, epsilon }, OptState::AdaMax { m, u, t }) => {
                adamax_step(params, grads, m, u, t, lr * lr_scale, beta1, beta2, epsilon)
            }
            (opt, _) => Err(Error::argument(format!(
                "optimizer state does not belong to {}",
                opt.name()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptState {
    Sgd { velocity: Vec<f64> },
    AdaGrad { accum: Vec<f64> },
    AdaMax { m: Vec<f64>, u: Vec<f64>, t: u32 },
}

fn check_shapes(params: &[f64], others: &[&[f64]]) -> Result<()> {
    if let Some(o) = others.iter().find(|o| o.len() != params.len()) {
        return Err(Error::argument(format!(
            "shape mismatch: {} params vs {}",
            params.len(),
            o.len()
        )));
    }
    Ok(())
}

pub fn sgd_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) -> Result<()> {
    check_shapes(params, &[grads, velocity])?;
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

pub fn adagrad_step(params: &mut [f64], grads: &[f64], accum: &mut [f64], lr: f64, epsilon: f64) -> Result<()> {
    check_shapes(params, &[grads, accum])?;
    for ((p, &g), s) in params.iter_mut().zip(grads).zip(accum.iter_mut()) {
        *s += g * g;
        *p -= lr * g / (*s + epsilon).sqrt();
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn adamax_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    u: &mut [f64],
    t: &mut u32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    check_shapes(params, &[grads, m, u])?;
    *t += 1;
    let correction = 1.0 - beta1.powi(*t as i32);
    for (((p, &g), mi), ui) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(u.iter_mut()) {
        *mi = beta1 * *mi + (1.0 - beta1) * g;
        *ui = (beta2 * *ui).max(g.abs());
        *p -= lr * (*mi / correction) / ui.max(epsilon);
    }
    Ok(())
}
