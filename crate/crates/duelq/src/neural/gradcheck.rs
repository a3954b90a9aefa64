//! Finite-difference verification of the analytic gradients.

use super::{DuelingNet, NeuralError, Tensor};

/// A scalar loss over the Q output, with its analytic gradient.
pub trait QLoss {
    fn value(&self, q: &Tensor) -> f64;
    fn grad(&self, q: &Tensor) -> Tensor;
}

/// `L = sum(w * q)` — linear in q, so head gradients are exact.
pub struct WeightedSumLoss {
    pub weights: Tensor,
}

impl QLoss for WeightedSumLoss {
    fn value(&self, q: &Tensor) -> f64 {
        q.data()
            .iter()
            .zip(self.weights.data())
            .map(|(a, b)| a * b)
            .sum()
    }

    fn grad(&self, _q: &Tensor) -> Tensor {
        self.weights.clone()
    }
}

/// `L = mean((q - y)^2)` over all elements.
pub struct MseLoss {
    pub targets: Tensor,
}

impl QLoss for MseLoss {
    fn value(&self, q: &Tensor) -> f64 {
        let n = q.numel() as f64;
        q.data()
            .iter()
            .zip(self.targets.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n
    }

    fn grad(&self, q: &Tensor) -> Tensor {
        let n = q.numel() as f64;
        let mut g = q.clone();
        for (gv, (&qv, &tv)) in g
            .data_mut()
            .iter_mut()
            .zip(q.data().iter().zip(self.targets.data()))
        {
            *gv = 2.0 * (qv - tv) / n;
        }
        // g was cloned from q; overwrite happened in place
        g
    }
}

/// Max over parameters of `|analytic - central difference| /
/// max(|analytic|, |cd|, 1e-8)`.
pub fn gradcheck<L: QLoss>(
    net: &DuelingNet,
    input: &Tensor,
    loss: &L,
    h: f64,
) -> Result<f64, NeuralError> {
    gradcheck_inner(net, input, loss, h, None)
}

/// Same check with one analytic gradient deliberately doubled; used to
/// demonstrate that the checker detects an incorrect gradient.
pub fn gradcheck_with_fault<L: QLoss>(
    net: &DuelingNet,
    input: &Tensor,
    loss: &L,
    h: f64,
    fault_index: usize,
) -> Result<f64, NeuralError> {
    gradcheck_inner(net, input, loss, h, Some(fault_index))
}

fn gradcheck_inner<L: QLoss>(
    net: &DuelingNet,
    input: &Tensor,
    loss: &L,
    h: f64,
    fault: Option<usize>,
) -> Result<f64, NeuralError> {
    let (q, cache) = net.forward(input)?;
    let dl = loss.grad(&q);
    let grads = net.backward(&cache, &dl)?;
    let mut analytic = grads.flat();
    if let Some(i) = fault {
        analytic[i] *= 2.0;
    }

    let base = net.params_flat();
    let mut probe = net.clone();
    let mut max_rel = 0.0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params_flat(&p)?;
        let plus = loss.value(&probe.forward(input)?.0);
        p[i] = base[i] - h;
        probe.set_params_flat(&p)?;
        let minus = loss.value(&probe.forward(input)?.0);
        let cd = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(cd.abs()).max(1e-8);
        max_rel = max_rel.max((analytic[i] - cd).abs() / denom);
    }
    Ok(max_rel)
}
