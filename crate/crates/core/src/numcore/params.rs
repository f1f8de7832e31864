use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::graph::{Graph, Var};
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Named trainable matrices in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    entries: Vec<(String, Matrix)>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> Result<()> {
        let name = name.into();
        if self.position(&name).is_some() {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        self.entries.push((name, value));
        Ok(())
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.position(name).map(|i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.position(name).map(move |i| &mut self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.data().len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.entries.iter_mut().map(|(n, m)| (n.as_str(), m))
    }

    pub(crate) fn entry_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.entries[i].1
    }

    /// Records every parameter on `graph` as a trainable leaf.
    pub fn bind(&self, graph: &mut Graph) -> Bindings {
        Bindings {
            vars: self
                .entries
                .iter()
                .map(|(n, m)| (n.clone(), graph.parameter(m.clone())))
                .collect(),
        }
    }

    /// Plain gradient descent: `theta -= rate(name) * grad`.
    pub fn sgd_step(&mut self, graph: &Graph, bindings: &Bindings, rate: impl Fn(&str) -> f64) {
        for ((name, value), (_, var)) in self.entries.iter_mut().zip(&bindings.vars) {
            let lr = rate(name);
            if lr == 0.0 {
                continue;
            }
            for (p, g) in value.data_mut().iter_mut().zip(graph.gradient(*var).data()) {
                *p -= lr * g;
            }
        }
    }

    /// Bitwise-identical values and names.
    pub fn bit_eq(&self, other: &ParameterSet) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|((na, a), (nb, b))| {
                na == nb
                    && a.shape() == b.shape()
                    && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Graph handles for a bound [`ParameterSet`], same order as the set.
#[derive(Debug, Clone)]
pub struct Bindings {
    vars: Vec<(String, Var)>,
}

impl Bindings {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Contract(format!("parameter `{name}` is not bound")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(n, v)| (n.as_str(), *v))
    }
}
