//! Parameter update rules applied to a [`GradientSet`].

use std::fmt;
use std::str::FromStr;

use super::{GradientSet, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::parse("optimizer", format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Stateful optimizer bound to one network's parameter layout.
#[derive(Debug, Clone)]
pub enum Optimizer<T> {
    Sgd {
        learning_rate: T,
    },
    Adam {
        learning_rate: T,
        beta1: T,
        beta2: T,
        epsilon: T,
        step: i32,
        m: Vec<T>,
        v: Vec<T>,
    },
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: T, net: &Mlp<T>) -> Result<Self> {
        if !(learning_rate > T::zero()) {
            return Err(Error::Config(format!("learning rate must be positive, got {learning_rate}")));
        }
        Ok(match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { learning_rate },
            OptimizerKind::Adam => Optimizer::Adam {
                learning_rate,
                beta1: T::lit(0.9),
                beta2: T::lit(0.999),
                epsilon: T::lit(1e-8),
                step: 0,
                m: vec![T::zero(); net.param_count()],
                v: vec![T::zero(); net.param_count()],
            },
        })
    }

    pub fn step(&mut self, net: &mut Mlp<T>, grads: &GradientSet<T>) -> Result<()> {
        match self {
            Optimizer::Sgd { learning_rate } => net.sgd_step(grads, *learning_rate),
            Optimizer::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
                step,
                m,
                v,
            } => {
                let g = grads.params();
                if g.len() != m.len() || net.param_count() != m.len() {
                    return Err(Error::Dimension {
                        context: "adam step",
                        expected: m.len(),
                        actual: g.len(),
                    });
                }
                *step += 1;
                let one = T::one();
                let c1 = one - beta1.powi(*step);
                let c2 = one - beta2.powi(*step);
                let lr = *learning_rate * c2.sqrt() / c1;
                for (((p, &gi), mi), vi) in net.params_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = *beta1 * *mi + (one - *beta1) * gi;
                    *vi = *beta2 * *vi + (one - *beta2) * gi * gi;
                    *p -= lr * *mi / (vi.sqrt() + *epsilon);
                }
                Ok(())
            }
        }
    }
}
