//! Value-level kernels behind the differentiable conv/pool ops.
//!
//! A [`WindowPlan`] lists, for every output submap, which input submaps feed
//! it and where its window grid starts. Output element `(i, j)` of an output
//! submap reads input rows `origin.0 + i * stride + tap * dilation` (and the
//! same for columns); reads outside the input are skipped, which is zero
//! fill for convolution and `-inf` fill for max pooling.

use std::ops::Range;

use crate::par;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct SubmapSource {
    /// `(input submap, weight depth slice)` pairs summed into this output.
    pub inputs: Vec<(usize, usize)>,
    pub origin: (isize, isize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct WindowPlan {
    pub kernel: (usize, usize),
    pub stride: usize,
    pub dilation: usize,
    pub out_hw: (usize, usize),
    pub submaps: Vec<SubmapSource>,
}

pub(crate) fn dims5(t: &Tensor) -> [usize; 5] {
    let s = t.shape();
    [s[0], s[1], s[2], s[3], s[4]]
}

/// Output indices whose tap lands inside `0..in_len`.
fn valid_outputs(origin: isize, tap: usize, stride: usize, in_len: usize, out_len: usize) -> Range<usize> {
    let base = origin + tap as isize;
    let lo = if base >= 0 {
        0
    } else {
        ((-base) as usize).div_ceil(stride)
    };
    let last = in_len as isize - 1 - base;
    let hi = if last < 0 { 0 } else { last as usize / stride + 1 };
    let hi = hi.min(out_len).max(lo);
    lo..hi
}

#[inline]
fn tap_index(origin: isize, o: usize, stride: usize, tap: usize) -> usize {
    (origin + (o * stride + tap) as isize) as usize
}

/// Weights are `(C_out, C_in, kh, kw)` or `(C_out, C_in, depth, kh, kw)`.
fn weight_dims(w: &Tensor) -> (usize, usize, usize) {
    let s = w.shape();
    if s.len() == 5 {
        (s[0], s[1], s[2])
    } else {
        (s[0], s[1], 1)
    }
}

pub(crate) fn conv_forward(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, plan: &WindowPlan) -> Tensor {
    let [batch, cin, m_in, h, wd] = dims5(x);
    let (cout, _, depth) = weight_dims(w);
    let (kh, kw) = plan.kernel;
    let (ho, wo) = plan.out_hw;
    let (stride, dil) = (plan.stride, plan.dilation);
    let m_out = plan.submaps.len();
    let mut out = Tensor::zeros(&[batch, cout, m_out, ho, wo]);
    let (xd, wdata) = (x.data(), w.data());
    let in_plane = h * wd;

    par::for_each_chunk(out.data_mut(), m_out * ho * wo, |idx, chunk| {
        let (b, co) = (idx / cout, idx % cout);
        chunk.fill(bias.map_or(0.0, |t| t.data()[co]));
        for (j, sm) in plan.submaps.iter().enumerate() {
            let oplane = &mut chunk[j * ho * wo..(j + 1) * ho * wo];
            for &(src, dz) in &sm.inputs {
                for ci in 0..cin {
                    let xin = &xd[((b * cin + ci) * m_in + src) * in_plane..][..in_plane];
                    let wbase = ((co * cin + ci) * depth + dz) * kh * kw;
                    for ki in 0..kh {
                        let rows = valid_outputs(sm.origin.0, ki * dil, stride, h, ho);
                        for kj in 0..kw {
                            let wv = wdata[wbase + ki * kw + kj];
                            let cols = valid_outputs(sm.origin.1, kj * dil, stride, wd, wo);
                            for oi in rows.clone() {
                                let iy = tap_index(sm.origin.0, oi, stride, ki * dil);
                                let xrow = &xin[iy * wd..(iy + 1) * wd];
                                let orow = &mut oplane[oi * wo..(oi + 1) * wo];
                                for oj in cols.clone() {
                                    orow[oj] += wv * xrow[tap_index(sm.origin.1, oj, stride, kj * dil)];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    out
}

/// Gradients `(dx, dw, db)` of [`conv_forward`].
pub(crate) fn conv_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
    plan: &WindowPlan,
) -> (Tensor, Tensor, Tensor) {
    let [batch, cin, m_in, h, wd] = dims5(x);
    let (cout, _, depth) = weight_dims(w);
    let (kh, kw) = plan.kernel;
    let (ho, wo) = plan.out_hw;
    let (stride, dil) = (plan.stride, plan.dilation);
    let m_out = plan.submaps.len();
    let (xd, wdata, gy) = (x.data(), w.data(), grad_out.data());
    let in_plane = h * wd;
    let out_plane = ho * wo;
    let gy_plane = |b: usize, co: usize, j: usize| {
        &gy[((b * cout + co) * m_out + j) * out_plane..][..out_plane]
    };

    let mut dx = Tensor::zeros(x.shape());
    par::for_each_chunk(dx.data_mut(), m_in * in_plane, |idx, chunk| {
        let (b, ci) = (idx / cin, idx % cin);
        for co in 0..cout {
            for (j, sm) in plan.submaps.iter().enumerate() {
                let g = gy_plane(b, co, j);
                for &(src, dz) in &sm.inputs {
                    let xplane = &mut chunk[src * in_plane..(src + 1) * in_plane];
                    let wbase = ((co * cin + ci) * depth + dz) * kh * kw;
                    for ki in 0..kh {
                        let rows = valid_outputs(sm.origin.0, ki * dil, stride, h, ho);
                        for kj in 0..kw {
                            let wv = wdata[wbase + ki * kw + kj];
                            let cols = valid_outputs(sm.origin.1, kj * dil, stride, wd, wo);
                            for oi in rows.clone() {
                                let iy = tap_index(sm.origin.0, oi, stride, ki * dil);
                                for oj in cols.clone() {
                                    let ix = tap_index(sm.origin.1, oj, stride, kj * dil);
                                    xplane[iy * wd + ix] += wv * g[oi * wo + oj];
                                }
                            }
                        }
                    }
                }
            }
        }
    });

    let mut dw = Tensor::zeros(w.shape());
    par::for_each_chunk(dw.data_mut(), cin * depth * kh * kw, |co, chunk| {
        for b in 0..batch {
            for (j, sm) in plan.submaps.iter().enumerate() {
                let g = gy_plane(b, co, j);
                for &(src, dz) in &sm.inputs {
                    for ci in 0..cin {
                        let xin = &xd[((b * cin + ci) * m_in + src) * in_plane..][..in_plane];
                        for ki in 0..kh {
                            let rows = valid_outputs(sm.origin.0, ki * dil, stride, h, ho);
                            for kj in 0..kw {
                                let cols = valid_outputs(sm.origin.1, kj * dil, stride, wd, wo);
                                let mut acc = 0.0;
                                for oi in rows.clone() {
                                    let iy = tap_index(sm.origin.0, oi, stride, ki * dil);
                                    for oj in cols.clone() {
                                        let ix = tap_index(sm.origin.1, oj, stride, kj * dil);
                                        acc += g[oi * wo + oj] * xin[iy * wd + ix];
                                    }
                                }
                                chunk[(ci * depth + dz) * kh * kw + ki * kw + kj] += acc;
                            }
                        }
                    }
                }
            }
        }
    });

    let mut db = Tensor::zeros(&[cout]);
    for (co, slot) in db.data_mut().iter_mut().enumerate() {
        *slot = (0..batch)
            .map(|b| gy[(b * cout + co) * m_out * out_plane..][..m_out * out_plane].iter().sum::<f64>())
            .sum();
    }
    (dx, dw, db)
}

/// Max pooling forward. Returns the output and, per output element, the
/// in-plane index (`submap * H * W + row * W + col`) of the winning input,
/// or `usize::MAX` for a window that lies wholly in the fill region.
pub(crate) fn pool_forward(x: &Tensor, plan: &WindowPlan) -> (Tensor, Vec<usize>) {
    let [batch, ch, m_in, h, wd] = dims5(x);
    let (kh, kw) = plan.kernel;
    let (ho, wo) = plan.out_hw;
    let (stride, dil) = (plan.stride, plan.dilation);
    let m_out = plan.submaps.len();
    let in_plane = h * wd;
    let xd = x.data();

    let planes: Vec<(Vec<f64>, Vec<usize>)> = par::map_range(batch * ch, |idx| {
        let base = idx * m_in * in_plane;
        let mut vals = vec![f64::NEG_INFINITY; m_out * ho * wo];
        let mut arg = vec![usize::MAX; m_out * ho * wo];
        for (j, sm) in plan.submaps.iter().enumerate() {
            let (src, _) = sm.inputs[0];
            for ki in 0..kh {
                let rows = valid_outputs(sm.origin.0, ki * dil, stride, h, ho);
                for kj in 0..kw {
                    let cols = valid_outputs(sm.origin.1, kj * dil, stride, wd, wo);
                    for oi in rows.clone() {
                        let iy = tap_index(sm.origin.0, oi, stride, ki * dil);
                        for oj in cols.clone() {
                            let ix = tap_index(sm.origin.1, oj, stride, kj * dil);
                            let local = src * in_plane + iy * wd + ix;
                            let o = (j * ho + oi) * wo + oj;
                            if xd[base + local] > vals[o] || arg[o] == usize::MAX {
                                vals[o] = xd[base + local];
                                arg[o] = local;
                            }
                        }
                    }
                }
            }
        }
        (vals, arg)
    });

    let mut data = Vec::with_capacity(batch * ch * m_out * ho * wo);
    let mut argmax = Vec::with_capacity(data.capacity());
    for (v, a) in planes {
        data.extend(v);
        argmax.extend(a);
    }
    let out = Tensor::new(vec![batch, ch, m_out, ho, wo], data).expect("sized by construction");
    (out, argmax)
}

pub(crate) fn pool_backward(x_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Tensor {
    let in_plane: usize = x_shape[2..].iter().product();
    let out_plane: usize = grad_out.shape()[2..].iter().product();
    let gy = grad_out.data();
    let mut dx = Tensor::zeros(x_shape);
    par::for_each_chunk(dx.data_mut(), in_plane, |idx, chunk| {
        let range = idx * out_plane..(idx + 1) * out_plane;
        for (&a, &g) in argmax[range.clone()].iter().zip(&gy[range]) {
            if a != usize::MAX {
                chunk[a] += g;
            }
        }
    });
    dx
}
