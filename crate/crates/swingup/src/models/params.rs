//! Named parameter collections and their flat views.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
}

/// Ordered collection of named parameters. Order is insertion order and is
/// part of the contract: flat gradient vectors, optimizer state and
/// checkpoints all align to it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn add(&mut self, name: &str, tensor: Tensor) {
        debug_assert!(
            !self.params.iter().any(|p| p.name == name),
            "duplicate parameter {name}"
        );
        self.params.push(Param {
            name: name.to_string(),
            tensor,
        });
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.tensor)
            .ok_or_else(|| Error::InvalidArg(format!("unknown parameter {name}")))
    }

    /// Total number of scalar parameters.
    pub fn flat_len(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    /// Concatenate all parameter data in order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for p in &self.params {
            out.extend_from_slice(p.tensor.data());
        }
        out
    }

    /// Overwrite parameter data from a flat vector (inverse of `flatten`).
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::shape(
                "load_flat",
                format!("expected {} values, got {}", self.flat_len(), flat.len()),
            ));
        }
        let mut off = 0;
        for p in &mut self.params {
            let n = p.tensor.numel();
            p.tensor.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Register every parameter as a gradient-bearing leaf on `tape`,
    /// in order. The i-th returned var corresponds to the i-th parameter.
    pub fn leaves(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.tensor.clone(), true))
            .collect()
    }

    /// Collect the gradients of `leaves` (as returned by [`ParamSet::leaves`])
    /// into one flat vector aligned with [`ParamSet::flatten`]. Parameters
    /// whose leaf received no gradient contribute zeros.
    pub fn collect_grads(&self, tape: &Tape, leaves: &[Var]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for (p, &v) in self.params.iter().zip(leaves) {
            match tape.grad(v) {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat(0.0).take(p.tensor.numel())),
            }
        }
        out
    }
}

/// Xavier-uniform matrix init: U(−s, s) with s = √(6 / (fan_in + fan_out)).
pub fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-s..s)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

/// Xavier-uniform conv kernel init with fan counts per output/input patch.
pub fn xavier_conv<R: Rng>(rng: &mut R, co: usize, ci: usize, k: usize) -> Tensor {
    let fan_in = ci * k * k;
    let fan_out = co * k * k;
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data: Vec<f64> = (0..co * ci * k * k).map(|_| rng.gen_range(-s..s)).collect();
    Tensor::new(vec![co, ci, k, k], data).unwrap()
}
