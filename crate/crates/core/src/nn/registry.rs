use serde::{Deserialize, Serialize};

use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

/// θ marks ordinary model weights; Σ marks the adversarial perturbation scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamTag {
    Theta,
    Sigma,
}

/// Prefix carried by every Σ name; the tag is recoverable from the name alone.
pub const SIGMA_PREFIX: &str = "advstyle.";

impl ParamTag {
    pub fn of_name(name: &str) -> Self {
        if name.starts_with(SIGMA_PREFIX) {
            Self::Sigma
        } else {
            Self::Theta
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub tag: ParamTag,
    pub value: Tensor,
}

/// Which registered parameters get `requires_grad` when bound to a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradScope {
    All,
    Only(ParamTag),
    Frozen,
}

impl GradScope {
    fn includes(self, tag: ParamTag) -> bool {
        match self {
            Self::All => true,
            Self::Only(t) => t == tag,
            Self::Frozen => false,
        }
    }
}

/// Ordered, uniquely named parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterRegistry {
    params: Vec<Parameter>,
}

/// Tape handles of a registry, index-aligned with it.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, index: usize) -> Var {
        self.vars[index]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// The same binding with parameter `index` routed to `var` instead.
    pub fn with(&self, index: usize, var: Var) -> Self {
        let mut vars = self.vars.clone();
        vars[index] = var;
        Self { vars }
    }
}

impl ParameterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter, returning its index. The tag follows the name.
    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(Error::invalid("parameter registry", format!("duplicate name {name:?}")));
        }
        let tag = ParamTag::of_name(&name);
        self.params.push(Parameter { name, tag, value });
        Ok(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn get(&self, index: usize) -> &Parameter {
        &self.params[index]
    }

    pub fn value_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.params[index].value
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.index_of(name).map(|i| &self.params[i])
    }

    pub fn indices(&self, tag: ParamTag) -> Vec<usize> {
        (0..self.params.len()).filter(|&i| self.params[i].tag == tag).collect()
    }

    pub fn count(&self, tag: ParamTag) -> usize {
        self.params.iter().filter(|p| p.tag == tag).count()
    }

    /// Total number of scalars.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Places every parameter on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape, scope: GradScope) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|p| tape.leaf(p.value.clone(), scope.includes(p.tag)))
            .collect();
        Bound { vars }
    }

    /// Copies of the values carrying `tag`, used for bitwise before/after checks.
    pub fn snapshot(&self, tag: ParamTag) -> Vec<Tensor> {
        self.params.iter().filter(|p| p.tag == tag).map(|p| p.value.clone()).collect()
    }

    /// L2 norm of every Σ tensor, in registry order.
    pub fn sigma_norms(&self) -> Vec<(String, f64)> {
        self.params
            .iter()
            .filter(|p| p.tag == ParamTag::Sigma)
            .map(|p| (p.name.clone(), p.value.l2_norm()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_are_rejected() {
        let mut r = ParameterRegistry::new();
        r.register("fc.weight", Tensor::zeros(&[2, 2])).unwrap();
        assert!(r.register("fc.weight", Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn tags_follow_the_name() {
        let mut r = ParameterRegistry::new();
        r.register("conv1.weight", Tensor::zeros(&[1])).unwrap();
        r.register("advstyle.conv1.sigma_mu", Tensor::zeros(&[1])).unwrap();
        assert_eq!(r.indices(ParamTag::Theta), vec![0]);
        assert_eq!(r.indices(ParamTag::Sigma), vec![1]);
    }

    #[test]
    fn bind_respects_scope() {
        let mut r = ParameterRegistry::new();
        r.register("w", Tensor::zeros(&[1])).unwrap();
        r.register("advstyle.x.sigma_mu", Tensor::zeros(&[1])).unwrap();
        let mut tape = Tape::new();
        let b = r.bind(&mut tape, GradScope::Only(ParamTag::Sigma));
        assert!(!tape.requires_grad(b.var(0)));
        assert!(tape.requires_grad(b.var(1)));
        let b = r.bind(&mut tape, GradScope::Frozen);
        assert!(!tape.requires_grad(b.var(1)));
    }
}
