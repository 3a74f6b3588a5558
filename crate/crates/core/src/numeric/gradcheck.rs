use crate::error::{Error, Result};
use crate::numeric::{Graph, NodeId, ParameterStore};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Central difference step.
    pub step: f64,
    /// Denominator floor: errors on gradients smaller than this are measured
    /// relative to the floor.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-6, floor: 1e-4 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter path and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub max_abs_grad: f64,
}

/// Compares analytic gradients of the scalar built by `f` against central
/// finite differences over every trainable parameter entry.
///
/// Inputs that need checking should be registered as parameters.
pub fn grad_check<F>(store: &mut ParameterStore<f64>, f: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>) -> Result<NodeId>,
{
    let eval = |s: &ParameterStore<f64>| -> Result<f64> {
        let mut g = Graph::new(s);
        let root = f(&mut g)?;
        let (r, c) = g.shape(root);
        if r * c != 1 {
            return Err(Error::ShapeMismatch {
                op: "grad_check",
                left: vec![r, c],
                right: vec![1, 1],
            });
        }
        Ok(g.value(root)[0])
    };
    let analytic = {
        let mut g = Graph::new(store);
        let root = f(&mut g)?;
        g.backward(root)?
    };
    let mut report = GradCheckReport::default();
    for idx in 0..store.len() {
        let (path, entry) = store.entry(idx);
        if !entry.trainable {
            continue;
        }
        let path = path.to_string();
        let numel = entry.tensor.numel();
        let grad = analytic.get(idx).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; numel]);
        for k in 0..numel {
            let orig = store.entry(idx).1.tensor.values()[k];
            store.entry_mut(idx).1.tensor.values_mut()[k] = orig + opts.step;
            let plus = eval(store);
            store.entry_mut(idx).1.tensor.values_mut()[k] = orig - opts.step;
            let minus = eval(store);
            store.entry_mut(idx).1.tensor.values_mut()[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.step);
            let a = grad[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            report.max_abs_grad = report.max_abs_grad.max(a.abs());
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = rel;
                report.worst = Some((path.clone(), k));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Init;

    #[test]
    fn constant_function_has_zero_gradient() {
        let mut s = ParameterStore::<f64>::new(2);
        s.add("w", &[2, 2], Init::FanIn(2)).unwrap();
        let report = grad_check(
            &mut s,
            |g| {
                let _w = g.param("w")?;
                let c = g.input(1, 1, vec![3.5])?;
                g.sum_all(c)
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.max_abs_grad, 0.0);
        assert_eq!(report.max_rel_err, 0.0);
        assert_eq!(report.checked, 4);
    }
}
