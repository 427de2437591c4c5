//! ConvLSTM cell and the tSPM head.
//!
//! Each layer keeps one kernel over the channel concatenation `[x; h]` with
//! `4 * hidden` output channels, laid out as the input, forget, output and
//! candidate gates in that order. Convolving the concatenation is the same as
//! summing separate convolutions of `x` and `h`.

use crate::error::{Error, Result};
use crate::tensor::{Graph, Var};

/// Hidden and cell state of one layer, both `[hidden, H, W]`.
#[derive(Clone, Copy, Debug)]
pub struct LayerState {
    pub h: Var,
    pub c: Var,
}

/// One state per ConvLSTM layer, bottom first.
#[derive(Clone, Debug)]
pub struct LstmState {
    pub layers: Vec<LayerState>,
}

/// Advances one layer by one step.
///
/// `kernel` is `[4 * hidden, C_x + hidden, k, k]` and `bias` is
/// `[4 * hidden]`.
pub fn convlstm_step(g: &Graph, x: Var, prev: LayerState, kernel: Var, bias: Var) -> Result<LayerState> {
    let hs = g.shape(prev.h);
    if hs.len() != 3 || g.shape(prev.c) != hs {
        return Err(Error::Shape(format!(
            "hidden {:?} and cell {:?} must match and be [C, H, W]",
            hs,
            g.shape(prev.c)
        )));
    }
    let hidden = hs[0];
    let ks = g.shape(kernel);
    if ks.len() != 4 || ks[0] != 4 * hidden {
        return Err(Error::Shape(format!(
            "gate kernel {ks:?} needs {} output channels",
            4 * hidden
        )));
    }
    let xh = g.concat(&[x, prev.h])?;
    let z = g.conv2d(xh, kernel, Some(bias))?;
    let input_gate = g.sigmoid(g.slice(z, 0, hidden)?);
    let forget_gate = g.sigmoid(g.slice(z, hidden, hidden)?);
    let output_gate = g.sigmoid(g.slice(z, 2 * hidden, hidden)?);
    let candidate = g.tanh(g.slice(z, 3 * hidden, hidden)?);
    let c = g.add(g.hadamard(forget_gate, prev.c)?, g.hadamard(input_gate, candidate)?)?;
    let h = g.hadamard(output_gate, g.tanh(c))?;
    Ok(LayerState { h, c })
}

/// 1x1 convolution to a single channel followed by a softmax over the grid.
/// Returns an `[H, W]` map.
pub fn tspm_head(g: &Graph, h: Var, kernel: Var, bias: Var) -> Result<Var> {
    let logits = g.conv2d(h, kernel, Some(bias))?;
    let s = g.shape(logits);
    let flat = g.reshape(logits, &[s[1], s[2]])?;
    Ok(g.map_softmax(flat))
}
