//! Same-padded 2-D cross-correlation kernels over `[C, H, W]` buffers.
//!
//! The inner loops run over contiguous row segments so the compiler can
//! vectorize them; out-of-image taps are skipped rather than padded.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvDims {
    pub c_in: usize,
    pub c_out: usize,
    pub height: usize,
    pub width: usize,
    pub k: usize,
}

impl ConvDims {
    fn pad(&self) -> usize {
        self.k / 2
    }

    /// Valid output-column range for horizontal tap `kx`, and the signed
    /// offset from output column to input column.
    fn cols(&self, kx: usize) -> (usize, usize, isize) {
        let off = kx as isize - self.pad() as isize;
        let lo = (-off).max(0) as usize;
        let hi = (self.width as isize - off).min(self.width as isize).max(0) as usize;
        if hi <= lo {
            return (0, 0, 0);
        }
        (lo, hi, off)
    }

    fn rows(&self, ky: usize) -> (usize, usize, isize) {
        let off = ky as isize - self.pad() as isize;
        let lo = (-off).max(0) as usize;
        let hi = (self.height as isize - off).min(self.height as isize).max(0) as usize;
        if hi <= lo {
            return (0, 0, 0);
        }
        (lo, hi, off)
    }
}

pub fn forward(d: ConvDims, input: &[f64], kernel: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let plane = d.height * d.width;
    let kk = d.k * d.k;
    let mut out = vec![0.0; d.c_out * plane];
    for o in 0..d.c_out {
        let dst = &mut out[o * plane..(o + 1) * plane];
        if let Some(b) = bias {
            dst.iter_mut().for_each(|v| *v = b[o]);
        }
        for c in 0..d.c_in {
            let src = &input[c * plane..(c + 1) * plane];
            let kern = &kernel[(o * d.c_in + c) * kk..(o * d.c_in + c + 1) * kk];
            for ky in 0..d.k {
                let (ylo, yhi, yoff) = d.rows(ky);
                for kx in 0..d.k {
                    let w = kern[ky * d.k + kx];
                    if w == 0.0 {
                        continue;
                    }
                    let (xlo, xhi, xoff) = d.cols(kx);
                    for y in ylo..yhi {
                        let sy = (y as isize + yoff) as usize;
                        let s0 = sy * d.width;
                        let d0 = y * d.width;
                        let srow = &src[(s0 as isize + xlo as isize + xoff) as usize
                            ..(s0 as isize + xhi as isize + xoff) as usize];
                        let drow = &mut dst[d0 + xlo..d0 + xhi];
                        for (dv, sv) in drow.iter_mut().zip(srow) {
                            *dv += w * sv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of the loss with respect to input, kernel and bias given the
/// output gradient. Each returned buffer is freshly allocated.
pub fn backward(
    d: ConvDims,
    input: &[f64],
    kernel: &[f64],
    grad_out: &[f64],
    want_input: bool,
    want_kernel: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Vec<f64>) {
    let plane = d.height * d.width;
    let kk = d.k * d.k;
    let grad_bias = (0..d.c_out)
        .map(|o| grad_out[o * plane..(o + 1) * plane].iter().sum())
        .collect();

    let grad_input = want_input.then(|| {
        let mut gi = vec![0.0; d.c_in * plane];
        for c in 0..d.c_in {
            let dst = &mut gi[c * plane..(c + 1) * plane];
            for o in 0..d.c_out {
                let go = &grad_out[o * plane..(o + 1) * plane];
                let kern = &kernel[(o * d.c_in + c) * kk..(o * d.c_in + c + 1) * kk];
                for ky in 0..d.k {
                    let (ylo, yhi, yoff) = d.rows(ky);
                    for kx in 0..d.k {
                        let w = kern[ky * d.k + kx];
                        if w == 0.0 {
                            continue;
                        }
                        let (xlo, xhi, xoff) = d.cols(kx);
                        for y in ylo..yhi {
                            let sy = (y as isize + yoff) as usize;
                            let s0 = (sy * d.width) as isize + xoff;
                            let g0 = y * d.width;
                            let drow = &mut dst[(s0 + xlo as isize) as usize..(s0 + xhi as isize) as usize];
                            let grow = &go[g0 + xlo..g0 + xhi];
                            for (dv, gv) in drow.iter_mut().zip(grow) {
                                *dv += w * gv;
                            }
                        }
                    }
                }
            }
        }
        gi
    });

    let grad_kernel = want_kernel.then(|| {
        let mut gk = vec![0.0; d.c_out * d.c_in * kk];
        for o in 0..d.c_out {
            let go = &grad_out[o * plane..(o + 1) * plane];
            for c in 0..d.c_in {
                let src = &input[c * plane..(c + 1) * plane];
                for ky in 0..d.k {
                    let (ylo, yhi, yoff) = d.rows(ky);
                    for kx in 0..d.k {
                        let (xlo, xhi, xoff) = d.cols(kx);
                        let mut acc = 0.0;
                        for y in ylo..yhi {
                            let sy = (y as isize + yoff) as usize;
                            let s0 = (sy * d.width) as isize + xoff;
                            let g0 = y * d.width;
                            let srow = &src[(s0 + xlo as isize) as usize..(s0 + xhi as isize) as usize];
                            let grow = &go[g0 + xlo..g0 + xhi];
                            acc += srow.iter().zip(grow).map(|(a, b)| a * b).sum::<f64>();
                        }
                        gk[(o * d.c_in + c) * kk + ky * d.k + kx] = acc;
                    }
                }
            }
        }
        gk
    });

    (grad_input, grad_kernel, grad_bias)
}
