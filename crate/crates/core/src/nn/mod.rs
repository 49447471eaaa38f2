//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector laid out layer by layer: the weight
//! matrix of each affine map in row-major `(out, in)` order, followed by its
//! bias vector. That same ordering is what [`Mlp::flatten`] exposes to
//! black-box optimizers, so flattening is a copy.
//!
//! A network may declare an auxiliary input that is concatenated onto the
//! input of one affine map. The critic uses this to receive the action after
//! its first hidden layer; [`Mlp::backward`] reports the gradient with respect
//! to that auxiliary vector alongside the parameter gradients.

pub mod checkpoint;
pub mod gradcheck;
pub mod optim;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Half-width of the uniform init range used for the final affine layer.
pub const FINAL_LAYER_INIT: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative given the pre-activation `z` and post-activation `y`.
    /// `relu'(0)` is taken as 0.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Linear => T::one(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::parse("activation", format!("unknown tag {other:?}"))),
        }
    }
}

/// Auxiliary input concatenated onto the input of the affine map that
/// produces layer `layer` (so `layer = 2` feeds it next to hidden layer 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxInput {
    pub layer: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Affine {
    in_dim: usize,
    out_dim: usize,
    weight_offset: usize,
    bias_offset: usize,
}

/// Dense feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    aux: Option<AuxInput>,
    affines: Vec<Affine>,
    params: Vec<T>,
}

/// Intermediates of one forward pass, sufficient for one backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardTrace<T> {
    /// Input seen by each affine map (including any auxiliary columns).
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn output(&self) -> &[T] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pre_activations(&self) -> &[Vec<T>] {
        &self.pre
    }

    pub fn post_activations(&self) -> &[Vec<T>] {
        &self.post
    }
}

/// Gradients mirroring an [`Mlp`]'s flat parameter layout, plus the gradient
/// with respect to the auxiliary input when the network has one.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    params: Vec<T>,
    aux: Option<Vec<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn aux(&self) -> Option<&[T]> {
        self.aux.as_deref()
    }

    pub fn fill_zero(&mut self) {
        self.params.iter_mut().for_each(|g| *g = T::zero());
        if let Some(a) = &mut self.aux {
            a.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.params.iter_mut().for_each(|g| *g *= factor);
        if let Some(a) = &mut self.aux {
            a.iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// Number of parameters of an architecture, without building it.
pub fn param_count(layer_sizes: &[usize], aux: Option<AuxInput>) -> usize {
    layer_sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let extra = match aux {
                Some(a) if a.layer == i + 1 => a.width,
                _ => 0,
            };
            w[1] * (w[0] + extra) + w[1]
        })
        .sum()
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, half_width: f64) -> T {
    T::lit((rng.random::<f64>() * 2.0 - 1.0) * half_width)
}

impl<T: Scalar> Mlp<T> {
    /// Network with every parameter zero.
    pub fn zeros(
        layer_sizes: &[usize],
        activations: &[Activation],
        aux: Option<AuxInput>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Architecture(format!(
                "need at least 2 layers, got {}",
                layer_sizes.len()
            )));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::Architecture(format!(
                "{} layers need {} activations, got {}",
                layer_sizes.len(),
                layer_sizes.len() - 1,
                activations.len()
            )));
        }
        if let Some(i) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::Architecture(format!("layer {i} has zero units")));
        }
        if let Some(a) = aux {
            if a.layer == 0 || a.layer >= layer_sizes.len() {
                return Err(Error::Architecture(format!(
                    "auxiliary input layer {} outside 1..{}",
                    a.layer,
                    layer_sizes.len()
                )));
            }
            if a.width == 0 {
                return Err(Error::Architecture("auxiliary input width 0".into()));
            }
        }

        let mut affines = Vec::with_capacity(layer_sizes.len() - 1);
        let mut offset = 0;
        for (i, w) in layer_sizes.windows(2).enumerate() {
            let extra = match aux {
                Some(a) if a.layer == i + 1 => a.width,
                _ => 0,
            };
            let (in_dim, out_dim) = (w[0] + extra, w[1]);
            affines.push(Affine {
                in_dim,
                out_dim,
                weight_offset: offset,
                bias_offset: offset + in_dim * out_dim,
            });
            offset += in_dim * out_dim + out_dim;
        }

        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            activations: activations.to_vec(),
            aux,
            affines,
            params: vec![T::zero(); offset],
        })
    }

    /// Seeded initialization: hidden affine maps uniform in `±1/sqrt(fan_in)`,
    /// the final one uniform in `±3e-3`.
    pub fn new(
        layer_sizes: &[usize],
        activations: &[Activation],
        aux: Option<AuxInput>,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, activations, aux)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = net.affines.len() - 1;
        for (i, a) in net.affines.iter().enumerate() {
            let half = if i == last {
                FINAL_LAYER_INIT
            } else {
                1.0 / (a.in_dim as f64).sqrt()
            };
            let end = a.bias_offset + a.out_dim;
            for p in &mut net.params[a.weight_offset..end] {
                *p = uniform(&mut rng, half);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn aux_input(&self) -> Option<AuxInput> {
        self.aux
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn num_affine(&self) -> usize {
        self.affines.len()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Row-major `(out, in)` weights of affine map `layer`.
    pub fn weights(&self, layer: usize) -> &[T] {
        let a = &self.affines[layer];
        &self.params[a.weight_offset..a.bias_offset]
    }

    pub fn biases(&self, layer: usize) -> &[T] {
        let a = &self.affines[layer];
        &self.params[a.bias_offset..a.bias_offset + a.out_dim]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [T] {
        let a = self.affines[layer];
        &mut self.params[a.weight_offset..a.bias_offset]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [T] {
        let a = self.affines[layer];
        &mut self.params[a.bias_offset..a.bias_offset + a.out_dim]
    }

    /// `(in_dim, out_dim)` of affine map `layer`, auxiliary columns included.
    pub fn affine_shape(&self, layer: usize) -> (usize, usize) {
        let a = &self.affines[layer];
        (a.in_dim, a.out_dim)
    }

    pub fn same_shape(&self, other: &Mlp<T>) -> bool {
        self.layer_sizes == other.layer_sizes
            && self.activations == other.activations
            && self.aux == other.aux
    }

    pub fn flatten(&self) -> Vec<T> {
        self.params.clone()
    }

    pub fn unflatten(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.params.len() {
            return Err(Error::Dimension {
                context: "unflatten",
                expected: self.params.len(),
                actual: flat.len(),
            });
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    pub fn zero_gradients(&self) -> GradientSet<T> {
        GradientSet {
            params: vec![T::zero(); self.params.len()],
            aux: self.aux.map(|a| vec![T::zero(); a.width]),
        }
    }

    /// Empty trace with buffers sized for this network.
    pub fn trace(&self) -> ForwardTrace<T> {
        ForwardTrace {
            inputs: self.affines.iter().map(|a| vec![T::zero(); a.in_dim]).collect(),
            pre: self.affines.iter().map(|a| vec![T::zero(); a.out_dim]).collect(),
            post: self.affines.iter().map(|a| vec![T::zero(); a.out_dim]).collect(),
        }
    }

    fn trace_matches(&self, trace: &ForwardTrace<T>) -> bool {
        trace.inputs.len() == self.affines.len()
            && self.affines.iter().enumerate().all(|(i, a)| {
                trace.inputs[i].len() == a.in_dim
                    && trace.pre[i].len() == a.out_dim
                    && trace.post[i].len() == a.out_dim
            })
    }

    pub fn forward(&self, input: &[T], aux: Option<&[T]>) -> Result<(Vec<T>, ForwardTrace<T>)> {
        let mut trace = self.trace();
        self.forward_into(input, aux, &mut trace)?;
        Ok((trace.output().to_vec(), trace))
    }

    /// Forward pass into a reusable trace (see [`Mlp::trace`]).
    pub fn forward_into(
        &self,
        input: &[T],
        aux: Option<&[T]>,
        trace: &mut ForwardTrace<T>,
    ) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "forward input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        match (self.aux, aux) {
            (Some(a), Some(v)) if v.len() != a.width => {
                return Err(Error::Dimension {
                    context: "forward auxiliary input",
                    expected: a.width,
                    actual: v.len(),
                })
            }
            (Some(a), None) => {
                return Err(Error::Dimension {
                    context: "forward auxiliary input",
                    expected: a.width,
                    actual: 0,
                })
            }
            (None, Some(v)) => {
                return Err(Error::Dimension {
                    context: "forward auxiliary input",
                    expected: 0,
                    actual: v.len(),
                })
            }
            _ => {}
        }
        if !self.trace_matches(trace) {
            *trace = self.trace();
        }

        for (l, a) in self.affines.iter().enumerate() {
            let x = &mut trace.inputs[l];
            let width = if l == 0 {
                x[..input.len()].copy_from_slice(input);
                input.len()
            } else {
                let p = &trace.post[l - 1];
                x[..p.len()].copy_from_slice(p);
                p.len()
            };
            if let (Some(spec), Some(v)) = (self.aux, aux) {
                if spec.layer == l + 1 {
                    x[width..width + v.len()].copy_from_slice(v);
                }
            }

            let w = &self.params[a.weight_offset..a.bias_offset];
            let b = &self.params[a.bias_offset..a.bias_offset + a.out_dim];
            let act = self.activations[l];
            let z = &mut trace.pre[l];
            let y = &mut trace.post[l];
            for o in 0..a.out_dim {
                let row = &w[o * a.in_dim..(o + 1) * a.in_dim];
                let mut acc = b[o];
                for (wi, xi) in row.iter().zip(x.iter()) {
                    acc += *wi * *xi;
                }
                z[o] = acc;
                y[o] = act.apply(acc);
            }
        }
        Ok(())
    }

    /// Reverse-mode gradients of `output_grad · output` with respect to every
    /// parameter and to the auxiliary input.
    pub fn backward(&self, trace: &ForwardTrace<T>, output_grad: &[T]) -> Result<GradientSet<T>> {
        let mut grads = self.zero_gradients();
        self.backward_accumulate(trace, output_grad, T::one(), &mut grads)?;
        Ok(grads)
    }

    /// Adds `scale ·` parameter gradients into `grads` and overwrites its
    /// auxiliary gradient with `scale · ∂/∂aux`.
    pub fn backward_accumulate(
        &self,
        trace: &ForwardTrace<T>,
        output_grad: &[T],
        scale: T,
        grads: &mut GradientSet<T>,
    ) -> Result<()> {
        if grads.params.len() != self.params.len() {
            return Err(Error::Dimension {
                context: "gradient set",
                expected: self.params.len(),
                actual: grads.params.len(),
            });
        }
        let mut aux_out = grads.aux.take();
        let res = self.backprop(
            trace,
            output_grad,
            scale,
            Some(&mut grads.params),
            aux_out.as_deref_mut(),
        );
        grads.aux = aux_out;
        res
    }

    /// Gradient of `output_grad · output` with respect to the auxiliary input
    /// only, skipping parameter gradients.
    pub fn aux_gradient(&self, trace: &ForwardTrace<T>, output_grad: &[T], out: &mut [T]) -> Result<()> {
        let width = self.aux.map_or(0, |a| a.width);
        if out.len() != width || width == 0 {
            return Err(Error::Dimension {
                context: "auxiliary gradient",
                expected: width,
                actual: out.len(),
            });
        }
        self.backprop(trace, output_grad, T::one(), None, Some(out))
    }

    fn backprop(
        &self,
        trace: &ForwardTrace<T>,
        output_grad: &[T],
        scale: T,
        mut param_grads: Option<&mut [T]>,
        mut aux_grad: Option<&mut [T]>,
    ) -> Result<()> {
        if !self.trace_matches(trace) {
            return Err(Error::Architecture("trace was not produced by this network".into()));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::Dimension {
                context: "backward output gradient",
                expected: self.output_dim(),
                actual: output_grad.len(),
            });
        }

        let stop_at = match (&param_grads, self.aux) {
            // Input gradients below the injection layer are never needed.
            (None, Some(a)) => a.layer - 1,
            _ => 0,
        };

        let mut delta: Vec<T> = output_grad.iter().map(|&g| g * scale).collect();
        let mut upstream: Vec<T> = Vec::new();
        for l in (stop_at..self.affines.len()).rev() {
            let a = &self.affines[l];
            let act = self.activations[l];
            for (o, d) in delta.iter_mut().enumerate() {
                *d *= act.derivative(trace.pre[l][o], trace.post[l][o]);
            }
            let x = &trace.inputs[l];
            if let Some(g) = param_grads.as_deref_mut() {
                let (gw, gb) = g[a.weight_offset..a.bias_offset + a.out_dim].split_at_mut(a.in_dim * a.out_dim);
                for (o, &d) in delta.iter().enumerate() {
                    if d == T::zero() {
                        continue;
                    }
                    let row = &mut gw[o * a.in_dim..(o + 1) * a.in_dim];
                    for (gi, &xi) in row.iter_mut().zip(x.iter()) {
                        *gi += d * xi;
                    }
                    gb[o] += d;
                }
            }

            let aux_here = matches!(self.aux, Some(s) if s.layer == l + 1);
            if l == stop_at && !aux_here {
                break;
            }
            let w = &self.params[a.weight_offset..a.bias_offset];
            upstream.clear();
            upstream.resize(a.in_dim, T::zero());
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                let row = &w[o * a.in_dim..(o + 1) * a.in_dim];
                for (u, &wi) in upstream.iter_mut().zip(row.iter()) {
                    *u += d * wi;
                }
            }
            let own = if l == 0 { self.input_dim() } else { self.layer_sizes[l] };
            if aux_here {
                if let Some(out) = aux_grad.as_deref_mut() {
                    out.copy_from_slice(&upstream[own..]);
                }
            }
            if l == stop_at {
                break;
            }
            upstream.truncate(own);
            std::mem::swap(&mut delta, &mut upstream);
        }
        Ok(())
    }

    /// Gradient-descent step `θ ← θ − lr · g`.
    pub fn sgd_step(&mut self, grads: &GradientSet<T>, learning_rate: T) -> Result<()> {
        if grads.params.len() != self.params.len() {
            return Err(Error::Dimension {
                context: "sgd step",
                expected: self.params.len(),
                actual: grads.params.len(),
            });
        }
        if !(learning_rate > T::zero()) {
            return Err(Error::Config(format!("learning rate must be positive, got {learning_rate}")));
        }
        for (p, &g) in self.params.iter_mut().zip(grads.params.iter()) {
            *p -= learning_rate * g;
        }
        Ok(())
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layer_sizes: self.layer_sizes.clone(),
            activations: self.activations.clone(),
            aux: self.aux,
            affines: self.affines.clone(),
            params: self.params.iter().map(|&p| U::lit(p.as_f64())).collect(),
        }
    }
}
