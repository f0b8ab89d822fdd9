//! Sequential network: an ordered stack of layers with a cached training
//! path and a pure, trace-based eval path.
//!
//! The training path (`forward` then `backward`) stores activations inside
//! the layers and leaves parameter gradients on them for the optimizer.
//! The pure path (`trace_eval`, `backward_from_trace`,
//! `multipliers_from_traces`) works on an explicit activation trace and
//! never mutates the network, so explainers can query a discriminator
//! mid-step without disturbing its caches.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::layers::{Layer, ParamGradMut, Phase};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Network<T = f64> {
    pub name: String,
    layers: Vec<Layer<T>>,
}

/// Boundary activations of a pure forward pass: `values[0]` is the input,
/// `values[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Trace<T = f64> {
    pub values: Vec<Tensor<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.values.last().expect("trace always holds the input")
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(name: impl Into<String>, layers: Vec<Layer<T>>) -> Self {
        Network { name: name.into(), layers }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Training-path forward. Caches are overwritten layer by layer; a
    /// non-finite activation aborts with the offending layer named.
    pub fn forward(&mut self, x: &Tensor<T>, phase: Phase, rng: &mut dyn RngCore) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            cur = layer.forward(&cur, phase, rng)?;
            if !cur.all_finite() {
                return Err(Error::NonFinite {
                    context: format!("{} forward, layer {} ({})", self.name, i, layer.kind_name()),
                });
            }
        }
        Ok(cur)
    }

    /// Pure inference through the whole stack.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_eval_prefix(x, self.layers.len())
    }

    /// Pure inference through the first `n_layers` layers only.
    pub fn forward_eval_prefix(&self, x: &Tensor<T>, n_layers: usize) -> Result<Tensor<T>> {
        if n_layers > self.layers.len() {
            return Err(Error::Config(format!(
                "prefix of {} layers requested from {}-layer network {}",
                n_layers,
                self.layers.len(),
                self.name
            )));
        }
        let mut cur = x.clone();
        for layer in &self.layers[..n_layers] {
            cur = layer.forward_eval(&cur)?;
        }
        Ok(cur)
    }

    /// Pure forward that records every boundary activation.
    pub fn trace_eval(&self, x: &Tensor<T>) -> Result<Trace<T>> {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward_eval(values.last().unwrap())?;
            values.push(next);
        }
        Ok(Trace { values })
    }

    /// Training-path backward. Consumes the caches set by the most recent
    /// `forward`, deposits parameter gradients on the layers, and returns
    /// the gradient with respect to the network input.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mut grad = grad_out.clone();
        let name = self.name.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            grad = layer.backward(&grad)?;
            if !grad.all_finite() {
                return Err(Error::NonFinite {
                    context: format!("{} backward, layer {} ({})", name, i, layer.kind_name()),
                });
            }
        }
        Ok(grad)
    }

    /// Pure input gradient under eval semantics, from a recorded trace.
    /// Parameter gradients are not touched.
    pub fn backward_from_trace(&self, trace: &Trace<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_trace(trace)?;
        let mut grad = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            grad = layer.input_gradient_from(&trace.values[i], &trace.values[i + 1], &grad)?;
        }
        Ok(grad)
    }

    /// Transports DeepLIFT multipliers from the output back to the input,
    /// given traces of the instance and of the reference.
    pub fn multipliers_from_traces(
        &self,
        trace_x: &Trace<T>,
        trace_r: &Trace<T>,
        m_out: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        self.check_trace(trace_x)?;
        self.check_trace(trace_r)?;
        let mut m = m_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            m = layer.multipliers(
                &trace_x.values[i],
                &trace_x.values[i + 1],
                &trace_r.values[i],
                &trace_r.values[i + 1],
                &m,
            )?;
        }
        Ok(m)
    }

    fn check_trace(&self, trace: &Trace<T>) -> Result<()> {
        if trace.values.len() != self.layers.len() + 1 {
            return Err(Error::Config(format!(
                "trace has {} boundaries, network {} needs {}",
                trace.values.len(),
                self.name,
                self.layers.len() + 1
            )));
        }
        Ok(())
    }

    /// Trainable parameters, named `"<layer index>.<param>"`.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.params() {
                out.push((format!("{i}.{name}"), t));
            }
        }
        out
    }

    pub fn params_with_grads_mut(&mut self) -> Vec<(String, ParamGradMut<'_, T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for p in layer.params_with_grads_mut() {
                out.push((format!("{}.{}", i, p.name), p));
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Parameters plus persistent buffers (running statistics), named like
    /// `params`; the unit of checkpoint serialization.
    pub fn state(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.state() {
                out.push((format!("{i}.{name}"), t));
            }
        }
        out
    }

    /// Replaces every state tensor from `entries`. All names must be
    /// present with matching shapes, and no extras may remain.
    pub fn load_state(&mut self, entries: &mut std::collections::BTreeMap<String, Tensor<T>>) -> Result<()> {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (name, slot) in layer.state_mut() {
                let key = format!("{i}.{name}");
                let incoming = entries.remove(&key).ok_or_else(|| {
                    Error::Format(format!("state entry {key} missing for network {}", self.name))
                })?;
                if incoming.shape() != slot.shape() {
                    return Err(Error::shape(format!("state entry {key}"), slot.shape(), incoming.shape()));
                }
                *slot = incoming;
            }
        }
        if let Some(extra) = entries.keys().next() {
            return Err(Error::Format(format!(
                "state entry {extra} does not belong to network {}",
                self.name
            )));
        }
        Ok(())
    }
}
