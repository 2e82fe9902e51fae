//! MiniNet, its specification and the tagged parameter registry.

mod mininet;
mod registry;
mod spec;

pub use mininet::{MiniNet, Output, Pass};
pub use registry::{Bound, GradScope, ParamTag, Parameter, ParameterRegistry, SIGMA_PREFIX};
pub use spec::{Backbone, InsertionPoint, Method, MethodConfig, ModelSpec};
