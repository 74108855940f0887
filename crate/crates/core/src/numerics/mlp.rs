use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::math::tanh;
use crate::{Error, Result, Rng};

/// Layer widths of a fully-connected network: `tanh` on every hidden layer,
/// identity on the output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MlpSpec {
    widths: Vec<usize>,
}

impl TryFrom<Vec<usize>> for MlpSpec {
    type Error = Error;
    fn try_from(widths: Vec<usize>) -> Result<Self> {
        Self::new(widths)
    }
}

impl From<MlpSpec> for Vec<usize> {
    fn from(spec: MlpSpec) -> Self {
        spec.widths
    }
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config("an MLP needs at least input and output widths".into()));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("MLP layer widths must be positive".into()));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Number of weight layers.
    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// `(weights offset, bias offset, fan_in, fan_out)` per layer.
    fn layout(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.widths.windows(2).map(move |w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let wo = offset;
            let bo = wo + fan_in * fan_out;
            offset = bo + fan_out;
            (wo, bo, fan_in, fan_out)
        })
    }

    /// Orthogonal-style initialization: each weight matrix has orthonormal
    /// rows (or columns when taller than wide) scaled by the layer gain;
    /// hidden layers use gain 1, the output layer `output_gain`. Biases start
    /// at zero.
    pub fn init(&self, rng: &mut Rng, output_gain: f64) -> FlatParams {
        let mut values = vec![0.0; self.param_count()];
        let last = self.layer_count() - 1;
        for (l, (wo, _, fan_in, fan_out)) in self.layout().enumerate() {
            let gain = if l == last { output_gain } else { 1.0 };
            let w = orthogonal(rng, fan_out, fan_in);
            for (dst, src) in values[wo..wo + fan_in * fan_out].iter_mut().zip(w) {
                *dst = gain * src;
            }
        }
        FlatParams(values)
    }
}

fn orthogonal(rng: &mut Rng, rows: usize, cols: usize) -> Vec<f64> {
    // Orthonormalize along the shorter dimension with Gram-Schmidt.
    let (n, len, transposed) = if rows <= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let p = crate::math::dot(&v, b);
            crate::math::axpy(-p, b, &mut v);
        }
        let norm = crate::math::norm2(&v);
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (i, b) in basis.iter().enumerate() {
        for (j, x) in b.iter().enumerate() {
            let (r, c) = if transposed { (j, i) } else { (i, j) };
            out[r * cols + c] = *x;
        }
    }
    out
}

/// All weights and biases in canonical order: for each layer, the row-major
/// `fan_out x fan_in` weight matrix followed by its bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlatParams(pub Vec<f64>);

/// Per-layer view of [`FlatParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl FlatParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self(vec![0.0; spec.param_count()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_layers(&self, spec: &MlpSpec) -> Result<Vec<LayerParams>> {
        Error::check_dim("flat parameters", spec.param_count(), self.0.len())?;
        spec.layout()
            .map(|(wo, bo, fan_in, fan_out)| {
                Ok(LayerParams {
                    weights: DenseMatrix::from_row_major(
                        fan_out,
                        fan_in,
                        self.0[wo..bo].to_vec(),
                    )?,
                    bias: self.0[bo..bo + fan_out].to_vec(),
                })
            })
            .collect()
    }

    pub fn from_layers(layers: &[LayerParams]) -> Self {
        let mut values = Vec::new();
        for layer in layers {
            values.extend_from_slice(layer.weights.entries());
            values.extend_from_slice(&layer.bias);
        }
        Self(values)
    }
}

/// Scratch buffers holding every layer's activations from the last forward
/// pass, reused across samples to avoid reallocation.
#[derive(Debug, Clone)]
pub struct MlpWorkspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl MlpWorkspace {
    pub fn new(spec: &MlpSpec) -> Self {
        Self {
            acts: spec.widths().iter().map(|&w| vec![0.0; w]).collect(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    /// Forward pass; the returned slice is the network output.
    pub fn forward(&mut self, spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<&[f64]> {
        Error::check_dim("network input", spec.input_dim(), input.len())?;
        Error::check_dim("flat parameters", spec.param_count(), params.len())?;
        if self.acts.len() != spec.widths().len()
            || self.acts.iter().zip(spec.widths()).any(|(a, &w)| a.len() != w)
        {
            *self = Self::new(spec);
        }
        self.acts[0].copy_from_slice(input);
        let last = spec.layer_count() - 1;
        for (l, (wo, bo, fan_in, fan_out)) in spec.layout().enumerate() {
            let (head, tail) = self.acts.split_at_mut(l + 1);
            let a_in = &head[l];
            let a_out = &mut tail[0];
            for r in 0..fan_out {
                let row = &params[wo + r * fan_in..wo + (r + 1) * fan_in];
                let z = crate::math::dot(row, a_in) + params[bo + r];
                a_out[r] = if l == last { z } else { tanh(z) };
            }
        }
        Ok(&self.acts[spec.layer_count()])
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    /// Adds `scale * d(output_grad . output)/d(params)` into `grad`, using the
    /// activations of the most recent [`forward`](Self::forward).
    pub fn backward_accumulate(
        &mut self,
        spec: &MlpSpec,
        params: &[f64],
        output_grad: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        Error::check_dim("output gradient", spec.output_dim(), output_grad.len())?;
        Error::check_dim("gradient buffer", spec.param_count(), grad.len())?;
        let layout: Vec<_> = spec.layout().collect();
        self.delta.clear();
        self.delta.extend(output_grad.iter().map(|g| g * scale));
        for l in (0..layout.len()).rev() {
            let (wo, bo, fan_in, fan_out) = layout[l];
            let a_in = &self.acts[l];
            for r in 0..fan_out {
                let d = self.delta[r];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[wo + r * fan_in..wo + (r + 1) * fan_in];
                crate::math::axpy(d, a_in, g);
                grad[bo + r] += d;
            }
            if l == 0 {
                break;
            }
            self.delta_prev.clear();
            self.delta_prev.resize(fan_in, 0.0);
            for r in 0..fan_out {
                let d = self.delta[r];
                if d == 0.0 {
                    continue;
                }
                let row = &params[wo + r * fan_in..wo + (r + 1) * fan_in];
                crate::math::axpy(d, row, &mut self.delta_prev);
            }
            for (dp, a) in self.delta_prev.iter_mut().zip(a_in) {
                *dp *= 1.0 - a * a;
            }
            core::mem::swap(&mut self.delta, &mut self.delta_prev);
        }
        Ok(())
    }

    /// Directional derivative of the output along `tangent` in parameter
    /// space, using the activations of the most recent forward pass.
    pub fn jvp(&self, spec: &MlpSpec, params: &[f64], tangent: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim("tangent", spec.param_count(), tangent.len())?;
        let last = spec.layer_count() - 1;
        let mut da: Vec<f64> = vec![0.0; spec.input_dim()];
        for (l, (wo, bo, fan_in, fan_out)) in spec.layout().enumerate() {
            let a_in = &self.acts[l];
            let a_out = &self.acts[l + 1];
            let mut dz = vec![0.0; fan_out];
            for r in 0..fan_out {
                let w_row = &params[wo + r * fan_in..wo + (r + 1) * fan_in];
                let dw_row = &tangent[wo + r * fan_in..wo + (r + 1) * fan_in];
                let mut s = crate::math::dot(dw_row, a_in) + tangent[bo + r];
                if l > 0 {
                    s += crate::math::dot(w_row, &da);
                }
                dz[r] = if l == last {
                    s
                } else {
                    s * (1.0 - a_out[r] * a_out[r])
                };
            }
            da = dz;
        }
        Ok(da)
    }
}

pub fn mlp_forward(spec: &MlpSpec, params: &FlatParams, input: &[f64]) -> Result<Vec<f64>> {
    let mut ws = MlpWorkspace::new(spec);
    Ok(ws.forward(spec, params.as_slice(), input)?.to_vec())
}

/// Gradient of `output_grad . output` with respect to every parameter.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &FlatParams,
    input: &[f64],
    output_grad: &[f64],
) -> Result<FlatParams> {
    let mut ws = MlpWorkspace::new(spec);
    ws.forward(spec, params.as_slice(), input)?;
    let mut grad = vec![0.0; spec.param_count()];
    ws.backward_accumulate(spec, params.as_slice(), output_grad, 1.0, &mut grad)?;
    Ok(FlatParams(grad))
}

/// Output and its derivative along a parameter-space tangent.
pub fn mlp_jvp(
    spec: &MlpSpec,
    params: &FlatParams,
    input: &[f64],
    tangent: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ws = MlpWorkspace::new(spec);
    let out = ws.forward(spec, params.as_slice(), input)?.to_vec();
    let d = ws.jvp(spec, params.as_slice(), tangent)?;
    Ok((out, d))
}
