use std::collections::BTreeMap;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Network weights (ω) versus architecture logits (α).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Arch,
}

/// A named trainable tensor with its adaptive-moment optimizer slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub kind: ParamKind,
    pub tensor: Tensor,
    pub(crate) first_moment: Vec<f64>,
    pub(crate) second_moment: Vec<f64>,
    pub(crate) step: u64,
}

impl Parameter {
    fn new(name: String, kind: ParamKind, tensor: Tensor) -> Self {
        let n = tensor.numel();
        Parameter { name, kind, tensor, first_moment: vec![0.0; n], second_moment: vec![0.0; n], step: 0 }
    }

    pub fn numel(&self) -> usize {
        self.tensor.numel()
    }

    pub fn optimizer_step(&self) -> u64 {
        self.step
    }

    pub fn reset_slots(&mut self) {
        self.first_moment.iter_mut().for_each(|v| *v = 0.0);
        self.second_moment.iter_mut().for_each(|v| *v = 0.0);
        self.step = 0;
    }
}

/// Ordered collection of parameters; ids are insertion positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    index: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, kind: ParamKind, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate parameter name `{name}`")));
        }
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.params.push(Parameter::new(name, kind, tensor));
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Parameter)> {
        self.params.iter_mut().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total scalar count of parameters of `kind`.
    pub fn numel(&self, kind: ParamKind) -> usize {
        self.params.iter().filter(|p| p.kind == kind).map(Parameter::numel).sum()
    }

    /// Copies the values of every parameter of `kind`, in id order.
    pub fn snapshot(&self, kind: ParamKind) -> Vec<Tensor> {
        self.params.iter().filter(|p| p.kind == kind).map(|p| p.tensor.clone()).collect()
    }

    /// Overwrites the values of every parameter of `kind` from `values` (id order).
    /// Optimizer slots are left untouched.
    pub fn load(&mut self, kind: ParamKind, values: &[Tensor]) -> Result<()> {
        let targets: Vec<&mut Parameter> = self.params.iter_mut().filter(|p| p.kind == kind).collect();
        if targets.len() != values.len() {
            return Err(Error::shape(format!("expected {} tensors, got {}", targets.len(), values.len())));
        }
        for (p, v) in targets.into_iter().zip(values) {
            if p.tensor.shape() != v.shape() {
                return Err(Error::shape(format!(
                    "parameter `{}` has shape {:?}, got {:?}",
                    p.name,
                    p.tensor.shape(),
                    v.shape()
                )));
            }
            p.tensor = v.clone();
        }
        Ok(())
    }
}
