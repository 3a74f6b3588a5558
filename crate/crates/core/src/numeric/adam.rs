use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Gradients, ParameterStore, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments aligned with a parameter store by path.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub t: u64,
    paths: Vec<String>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(store: &ParameterStore<T>, config: AdamConfig) -> Self {
        let mut paths = Vec::with_capacity(store.len());
        let mut m = Vec::with_capacity(store.len());
        for (p, e) in store.iter() {
            paths.push(p.to_string());
            m.push(vec![T::zero(); e.tensor.numel()]);
        }
        let v = m.clone();
        Self {
            config,
            t: 0,
            paths,
            m,
            v,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn second_moments(&self, idx: usize) -> &[T] {
        &self.v[idx]
    }
}

/// One Adam update with bias correction:
/// `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
///
/// Parameters without a gradient and non-trainable buffers are left untouched.
pub fn adam_step<T: Scalar>(store: &mut ParameterStore<T>, state: &mut AdamState<T>, grads: &Gradients<T>) -> Result<()> {
    if store.len() != state.paths.len() || grads.len() != store.len() {
        return Err(Error::ParamMismatch(format!(
            "optimizer tracks {} parameters, store has {}, gradients cover {}",
            state.paths.len(),
            store.len(),
            grads.len()
        )));
    }
    for (i, p) in state.paths.iter().enumerate() {
        let (sp, e) = store.entry(i);
        if sp != p || e.tensor.numel() != state.m[i].len() {
            return Err(Error::ParamMismatch(format!("optimizer slot `{p}` does not match parameter `{sp}`")));
        }
    }
    state.t += 1;
    let c = state.config;
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let one = T::one();
    let bc1 = T::lit(1.0 - c.beta1.powi(state.t as i32));
    let bc2 = T::lit(1.0 - c.beta2.powi(state.t as i32));
    let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
    for i in 0..store.len() {
        let Some(g) = grads.get(i) else { continue };
        let (_, entry) = store.entry_mut(i);
        if !entry.trainable {
            continue;
        }
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for (((theta, &gi), mi), vi) in entry.tensor.values_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Init, Tensor};

    #[test]
    fn zero_gradient_is_noop() {
        let mut s = ParameterStore::<f64>::new(1);
        s.add("w", &[3, 2], Init::FanIn(3)).unwrap();
        let before = s.clone();
        let mut st = AdamState::new(&s, AdamConfig::default());
        let mut g = Gradients::new(1);
        g.set(0, vec![0.0; 6]);
        for _ in 0..3 {
            adam_step(&mut s, &mut st, &g).unwrap();
        }
        assert_eq!(s, before);
        assert_eq!(st.t, 3);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = ParameterStore::<f64>::new(1);
        s.insert("w", Tensor::new(vec![1], vec![0.0]).unwrap(), true).unwrap();
        let mut st = AdamState::new(&s, AdamConfig::default());
        let mut g = Gradients::new(1);
        g.set(0, vec![1.0]);
        adam_step(&mut s, &mut st, &g).unwrap();
        let w = s.get("w").unwrap().values()[0];
        assert!((w + 1e-3).abs() < 1e-10, "{w}");
        assert_eq!(st.t, 1);
    }

    #[test]
    fn misaligned_store_errors() {
        let mut s = ParameterStore::<f64>::new(1);
        s.add("w", &[2], Init::ZEROS).unwrap();
        let mut st = AdamState::new(&s, AdamConfig::default());
        s.add("extra", &[2], Init::ZEROS).unwrap();
        let g = Gradients::new(2);
        assert!(adam_step(&mut s, &mut st, &g).is_err());
    }
}
