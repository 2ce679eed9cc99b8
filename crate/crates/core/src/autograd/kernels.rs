//! Raw convolution loops over flat row-major buffers.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub groups: usize,
}

impl ConvGeometry {
    pub fn span(&self) -> usize {
        (self.kernel - 1) * self.dilation + 1
    }

    pub fn out_len(&self, t_in: usize) -> usize {
        (t_in - self.span()) / self.stride + 1
    }

    fn in_per_group(&self) -> usize {
        self.c_in / self.groups
    }

    fn out_per_group(&self) -> usize {
        self.c_out / self.groups
    }
}

/// out[co, t] = sum_{ci in group(co), k} w[co, ci_local, k] * x[ci, t*stride + k*dilation]
pub fn conv1d_forward(x: &[f64], t_in: usize, w: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let t_out = g.out_len(t_in);
    let (ipg, opg) = (g.in_per_group(), g.out_per_group());
    let mut out = vec![0.0; g.c_out * t_out];
    for co in 0..g.c_out {
        let group = co / opg;
        let out_row = &mut out[co * t_out..(co + 1) * t_out];
        for cil in 0..ipg {
            let ci = group * ipg + cil;
            let x_row = &x[ci * t_in..(ci + 1) * t_in];
            for k in 0..g.kernel {
                let wv = w[(co * ipg + cil) * g.kernel + k];
                let off = k * g.dilation;
                if g.stride == 1 {
                    for (o, xv) in out_row.iter_mut().zip(&x_row[off..off + t_out]) {
                        *o += wv * xv;
                    }
                } else {
                    for (t, o) in out_row.iter_mut().enumerate() {
                        *o += wv * x_row[t * g.stride + off];
                    }
                }
            }
        }
    }
    out
}

/// Gradients of conv1d w.r.t. input and kernels, given the output gradient.
pub fn conv1d_backward(
    x: &[f64],
    t_in: usize,
    w: &[f64],
    g: &ConvGeometry,
    grad_out: &[f64],
    want_x: bool,
    want_w: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    let t_out = g.out_len(t_in);
    let (ipg, opg) = (g.in_per_group(), g.out_per_group());
    let mut gx = want_x.then(|| vec![0.0; x.len()]);
    let mut gw = want_w.then(|| vec![0.0; w.len()]);
    for co in 0..g.c_out {
        let group = co / opg;
        let go_row = &grad_out[co * t_out..(co + 1) * t_out];
        for cil in 0..ipg {
            let ci = group * ipg + cil;
            for k in 0..g.kernel {
                let widx = (co * ipg + cil) * g.kernel + k;
                let off = ci * t_in + k * g.dilation;
                if let Some(gx) = gx.as_mut() {
                    let wv = w[widx];
                    if g.stride == 1 {
                        for (d, gov) in gx[off..off + t_out].iter_mut().zip(go_row) {
                            *d += wv * gov;
                        }
                    } else {
                        for (t, gov) in go_row.iter().enumerate() {
                            gx[off + t * g.stride] += wv * gov;
                        }
                    }
                }
                if let Some(gw) = gw.as_mut() {
                    let acc: f64 = if g.stride == 1 {
                        go_row.iter().zip(&x[off..off + t_out]).map(|(a, b)| a * b).sum()
                    } else {
                        go_row
                            .iter()
                            .enumerate()
                            .map(|(t, gov)| gov * x[off + t * g.stride])
                            .sum()
                    };
                    gw[widx] += acc;
                }
            }
        }
    }
    (gx, gw)
}

/// Transposed convolution (overlap-add). Kernel layout is `[c_in, c_out, kernel]`,
/// the same buffer a conv1d from `c_out` to `c_in` channels would use.
pub fn conv_transpose1d_forward(
    x: &[f64],
    c_in: usize,
    t_in: usize,
    w: &[f64],
    c_out: usize,
    kernel: usize,
    stride: usize,
) -> Vec<f64> {
    let t_out = (t_in - 1) * stride + kernel;
    let mut out = vec![0.0; c_out * t_out];
    for ci in 0..c_in {
        let x_row = &x[ci * t_in..(ci + 1) * t_in];
        for co in 0..c_out {
            let out_row = &mut out[co * t_out..(co + 1) * t_out];
            let w_row = &w[(ci * c_out + co) * kernel..(ci * c_out + co + 1) * kernel];
            for (t, xv) in x_row.iter().enumerate() {
                let base = t * stride;
                for (o, wv) in out_row[base..base + kernel].iter_mut().zip(w_row) {
                    *o += xv * wv;
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn conv_transpose1d_backward(
    x: &[f64],
    c_in: usize,
    t_in: usize,
    w: &[f64],
    c_out: usize,
    kernel: usize,
    stride: usize,
    grad_out: &[f64],
    want_x: bool,
    want_w: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    let t_out = (t_in - 1) * stride + kernel;
    let mut gx = want_x.then(|| vec![0.0; x.len()]);
    let mut gw = want_w.then(|| vec![0.0; w.len()]);
    for ci in 0..c_in {
        for co in 0..c_out {
            let go_row = &grad_out[co * t_out..(co + 1) * t_out];
            let widx = (ci * c_out + co) * kernel;
            for t in 0..t_in {
                let base = t * stride;
                let window = &go_row[base..base + kernel];
                if let Some(gx) = gx.as_mut() {
                    let s: f64 = window.iter().zip(&w[widx..widx + kernel]).map(|(a, b)| a * b).sum();
                    gx[ci * t_in + t] += s;
                }
                if let Some(gw) = gw.as_mut() {
                    let xv = x[ci * t_in + t];
                    for (d, gov) in gw[widx..widx + kernel].iter_mut().zip(window) {
                        *d += xv * gov;
                    }
                }
            }
        }
    }
    (gx, gw)
}
