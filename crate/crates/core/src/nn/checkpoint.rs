//! Four-line text checkpoint format.
//!
//! ```text
//! 2,20,10,1
//! relu,tanh,linear
//! 2
//! 1.2345678901234567e-1,...
//! ```
//!
//! Line 3 is the auxiliary-input layer or `none`. The auxiliary width is not
//! stored; it is recovered from the parameter count.

use std::fs;
use std::path::Path;

use super::{param_count, Activation, AuxInput, Mlp};
use crate::error::{Error, Result};
use crate::scalar::{format_round_trip, Scalar};

pub fn to_string<T: Scalar>(net: &Mlp<T>) -> String {
    let join = |items: Vec<String>| items.join(",");
    let sizes = join(net.layer_sizes().iter().map(|n| n.to_string()).collect());
    let acts = join(net.activations().iter().map(|a| a.tag().to_string()).collect());
    let aux = net
        .aux_input()
        .map_or_else(|| "none".to_string(), |a| a.layer.to_string());
    let params = join(net.params().iter().map(|&p| format_round_trip(p)).collect());
    format!("{sizes}\n{acts}\n{aux}\n{params}\n")
}

pub fn from_str<T: Scalar>(text: &str) -> Result<Mlp<T>> {
    let mut lines = text.lines();
    let mut next = |what: &'static str| {
        lines
            .next()
            .map(str::trim)
            .ok_or_else(|| Error::parse("checkpoint", format!("missing {what} line")))
    };

    let sizes = next("layer sizes")?
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::parse("checkpoint", format!("layer size {s:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let acts = next("activations")?
        .split(',')
        .map(str::parse::<Activation>)
        .collect::<Result<Vec<_>>>()?;
    let aux_line = next("auxiliary input")?;
    let aux_layer = match aux_line {
        "none" => None,
        s => Some(
            s.parse::<usize>()
                .map_err(|e| Error::parse("checkpoint", format!("auxiliary layer {s:?}: {e}")))?,
        ),
    };
    let params_line = next("parameters")?;
    let params = if params_line.is_empty() {
        Vec::new()
    } else {
        params_line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|_| Error::parse("checkpoint", format!("parameter {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?
    };

    let aux = match aux_layer {
        None => None,
        Some(layer) => {
            if layer == 0 || layer >= sizes.len() {
                return Err(Error::parse("checkpoint", format!("auxiliary layer {layer} out of range")));
            }
            let base = param_count(&sizes, None);
            let fan_out = sizes[layer];
            let extra = params.len().saturating_sub(base);
            if params.len() <= base || extra % fan_out != 0 {
                return Err(Error::parse(
                    "checkpoint",
                    format!("{} parameters inconsistent with auxiliary input at layer {layer}", params.len()),
                ));
            }
            Some(AuxInput {
                layer,
                width: extra / fan_out,
            })
        }
    };

    let mut net = Mlp::zeros(&sizes, &acts, aux)?;
    net.unflatten(&params)?;
    Ok(net)
}

pub fn save<T: Scalar>(net: &Mlp<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_string(net)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Mlp<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation::*;

    #[test]
    fn critic_round_trips_bit_exactly() {
        let net: Mlp<f64> =
            Mlp::new(&[2, 20, 10, 1], &[Relu, Tanh, Linear], Some(AuxInput { layer: 2, width: 1 }), 11)
                .unwrap();
        let text = to_string(&net);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "2,20,10,1");
        assert_eq!(lines[1], "relu,tanh,linear");
        assert_eq!(lines[2], "2");
        let back: Mlp<f64> = from_str(&text).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn plain_actor_round_trips() {
        let net: Mlp<f32> = Mlp::new(&[2, 5, 5, 1], &[Relu, Tanh, Tanh], None, 1).unwrap();
        let text = to_string(&net);
        assert_eq!(text.lines().nth(2), Some("none"));
        assert_eq!(from_str::<f32>(&text).unwrap(), net);
    }

    #[test]
    fn malformed_inputs() {
        assert!(from_str::<f64>("").is_err());
        assert!(from_str::<f64>("2,1\nlinear\nnone\n").is_err());
        assert!(from_str::<f64>("2,1\nlinear\nnone\n1,2\n").is_err());
        assert!(from_str::<f64>("2,1\nsigmoid\nnone\n1,2,3\n").is_err());
        assert!(from_str::<f64>("2,1\nlinear\nnone\n1,x,3\n").is_err());
        assert!(from_str::<f64>("2,1\nlinear\n1\n1,2,3\n").is_err());
        assert!(from_str::<f64>("2,1\nlinear\nnone\n1,2,3\n").is_ok());
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("mcbench-ckpt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("actor.txt");
        let net: Mlp<f64> = Mlp::new(&[2, 5, 5, 1], &[Relu, Tanh, Tanh], None, 2).unwrap();
        save(&net, &path).unwrap();
        assert_eq!(load::<f64>(&path).unwrap(), net);
        assert!(load::<f64>(dir.join("missing.txt")).is_err());
        fs::remove_dir_all(&dir).ok();
    }
}
