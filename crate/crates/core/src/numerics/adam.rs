use serde::{Deserialize, Serialize};

use crate::error::{IrnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(
    param: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if param.len() != grad.len() || param.len() != state.m.len() {
        return Err(IrnError::Shape(format!(
            "adam: param {}, grad {}, state {}",
            param.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in param
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = vec![0.3, -1.2, 4.0];
        let before = p.clone();
        let mut st = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0; 4];
        let g = [2.5, -0.01, 7.0, -300.0];
        let mut st = AdamState::new(4);
        adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        for (x, gi) in p.iter().zip(g) {
            assert!((x + cfg.lr * gi.signum()).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn two_steps_on_quadratic_match_scripted_trace() {
        // Hand-scripted Adam on f(x) = x², x0 = 1, lr = 1e-3:
        // step 1: g=2, m=0.2, v=0.004, m̂=2, v̂=4 → x1 = 1 − 1e-3·2/(2+1e-8)
        // step 2: g=2·x1, m=0.9·0.2+0.1g, v=0.999·0.004+0.001g², corrected by
        //         (1−0.81) and (1−0.998001).
        let cfg = AdamConfig::default();
        let x1: f64 = 1.0 - 1e-3 * 2.0 / (2.0 + 1e-8);
        let g2 = 2.0 * x1;
        let m2 = 0.9 * 0.2 + 0.1 * g2;
        let v2 = 0.999 * 0.004 + 0.001 * g2 * g2;
        let x2 = x1 - 1e-3 * (m2 / 0.19) / ((v2 / 0.001_999).sqrt() + 1e-8);

        let mut x = vec![1.0];
        let mut st = AdamState::new(1);
        let g = [2.0 * x[0]];
        adam_step(&mut x, &g, &mut st, &cfg).unwrap();
        assert!((x[0] - x1).abs() < 1e-12);
        let g = [2.0 * x[0]];
        adam_step(&mut x, &g, &mut st, &cfg).unwrap();
        assert!((x[0] - x2).abs() < 1e-12);
    }

    #[test]
    fn deterministic_bitwise() {
        let run = || {
            let mut p = vec![0.1, 0.2, 0.3];
            let mut st = AdamState::new(3);
            for k in 0..5 {
                let g: Vec<f64> = p.iter().map(|x| x * (k as f64 + 1.0) - 0.05).collect();
                adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut p = vec![0.0; 2];
        let mut st = AdamState::new(2);
        assert!(adam_step(&mut p, &[1.0], &mut st, &AdamConfig::default()).is_err());
    }
}
