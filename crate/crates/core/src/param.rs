//! Named parameter collections and their attachment to graphs.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Ordered collection of uniquely named parameters. Order is the declaration
/// order; it fixes checkpoint layout and optimizer-state pairing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Parameter>,
    index: BTreeMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidArg(format!("duplicate parameter name {name:?}")));
        }
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Parameter { name: name.to_string(), value, trainable });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::InvalidArg(format!("unknown parameter {name:?}")))
    }

    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::InvalidArg(format!("unknown parameter {name:?}")))?;
        if !self.params[i].value.same_shape(&value) {
            return Err(Error::shape(
                "set_value",
                format!("{name:?}: {:?} vs {:?}", self.params[i].value.shape(), value.shape()),
            ));
        }
        self.params[i].value = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Inserts every parameter into `g` as a leaf and returns the node handles.
    pub fn bind(&self, g: &mut Graph) -> Result<Binding> {
        let mut ids = BTreeMap::new();
        for p in &self.params {
            let id = g.param(&p.name, p.value.clone(), p.trainable)?;
            ids.insert(p.name.clone(), id);
        }
        Ok(Binding { ids })
    }

    /// Inserts every parameter as an unnamed constant: the forward pass is
    /// identical but nothing shows up in the gradient map. Used where another
    /// network's weights must stay fixed (fakes entering the discriminator
    /// step, the discriminator inside the generator step).
    pub fn bind_frozen(&self, g: &mut Graph) -> Binding {
        let mut ids = BTreeMap::new();
        for p in &self.params {
            let id = g.input(p.value.clone());
            ids.insert(p.name.clone(), id);
        }
        Binding { ids }
    }

    /// Copies values from `other` for every name present in both sets.
    pub fn copy_values_from(&mut self, other: &ParamSet) -> Result<()> {
        let names: Vec<String> = self.params.iter().map(|p| p.name.clone()).collect();
        for name in names {
            if let Some(src) = other.get(&name) {
                self.set_value(&name, src.value.clone())?;
            }
        }
        Ok(())
    }
}

/// Node handles of one [`ParamSet`] inside one graph.
#[derive(Debug, Clone)]
pub struct Binding {
    ids: BTreeMap<String, NodeId>,
}

impl Binding {
    pub fn node(&self, name: &str) -> Result<NodeId> {
        self.ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArg(format!("parameter {name:?} is not bound in this graph")))
    }
}
