//! Shape-agnostic differentiable ops and the submap reductions.

use crate::autograd::{Tape, Var};
use crate::error::{invalid, Result};
use crate::tensor::Tensor;
use crate::trace::SubmapMeta;

use super::kernel::dims5;
use super::FeatureMap;

pub fn relu(tape: &mut Tape, x: Var) -> Var {
    let y = tape.value(x).map(|v| v.max(0.0));
    tape.push(
        y,
        &[x],
        Box::new(|g, inputs, _| {
            let mut dx = g.clone();
            for (d, &v) in dx.data_mut().iter_mut().zip(inputs[0].data()) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
            vec![dx]
        }),
    )
}

pub fn add(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let (va, vb) = (tape.value(a), tape.value(b));
    if va.shape() != vb.shape() {
        return Err(invalid(format!(
            "add: shapes {:?} and {:?} differ",
            va.shape(),
            vb.shape()
        )));
    }
    let mut y = va.clone();
    y.add_assign(vb);
    Ok(tape.push(y, &[a, b], Box::new(|g, _, _| vec![g.clone(), g.clone()])))
}

pub fn scale(tape: &mut Tape, x: Var, factor: f64) -> Var {
    let y = tape.value(x).map(|v| v * factor);
    tape.push(y, &[x], Box::new(move |g, _, _| vec![g.map(|v| v * factor)]))
}

/// Element-wise product with a constant tensor (masks, fixed projections).
pub fn mul_const(tape: &mut Tape, x: Var, c: &Tensor) -> Result<Var> {
    let vx = tape.value(x);
    if vx.shape() != c.shape() {
        return Err(invalid(format!(
            "mul_const: shapes {:?} and {:?} differ",
            vx.shape(),
            c.shape()
        )));
    }
    let data = vx.data().iter().zip(c.data()).map(|(a, b)| a * b).collect();
    let y = Tensor::new(vx.shape().to_vec(), data)?;
    let c = c.clone();
    Ok(tape.push(
        y,
        &[x],
        Box::new(move |g, _, _| {
            let d = g.data().iter().zip(c.data()).map(|(a, b)| a * b).collect();
            vec![Tensor::new(g.shape().to_vec(), d).expect("same shape")]
        }),
    ))
}

pub fn sum(tape: &mut Tape, x: Var) -> Var {
    let y = Tensor::scalar(tape.value(x).sum());
    tape.push(
        y,
        &[x],
        Box::new(|g, inputs, _| vec![Tensor::full(inputs[0].shape(), g.data()[0])]),
    )
}

pub fn mean(tape: &mut Tape, x: Var) -> Var {
    let n = tape.value(x).len() as f64;
    let s = sum(tape, x);
    scale(tape, s, 1.0 / n)
}

/// `sum(x * c)` for a constant `c`: a scalar probe for gradient checks.
pub fn dot_const(tape: &mut Tape, x: Var, c: &Tensor) -> Result<Var> {
    let p = mul_const(tape, x, c)?;
    Ok(sum(tape, p))
}

/// `y = flatten(x) W^T + b` with `x` flattened to `(batch, features)`.
pub fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let (vx, vw, vb) = (tape.value(x), tape.value(w), tape.value(b));
    let batch = *vx.shape().first().ok_or_else(|| invalid("linear: empty input shape"))?;
    let features = vx.len() / batch.max(1);
    let (out, fin) = match vw.shape() {
        &[o, i] => (o, i),
        s => return Err(invalid(format!("linear: weight must be 2D, got {s:?}"))),
    };
    if fin != features {
        return Err(invalid(format!(
            "linear: expects {fin} input features, input has {features}"
        )));
    }
    if vb.shape() != [out] {
        return Err(invalid(format!("linear: bias shape {:?}, expected [{out}]", vb.shape())));
    }
    let (xd, wd, bd) = (vx.data(), vw.data(), vb.data());
    let mut y = vec![0.0; batch * out];
    for n in 0..batch {
        let xr = &xd[n * fin..(n + 1) * fin];
        for o in 0..out {
            let wr = &wd[o * fin..(o + 1) * fin];
            y[n * out + o] = bd[o] + xr.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let y = Tensor::new(vec![batch, out], y)?;
    Ok(tape.push(
        y,
        &[x, w, b],
        Box::new(move |g, inputs, _| {
            let (xd, wd, gd) = (inputs[0].data(), inputs[1].data(), g.data());
            let mut dx = Tensor::zeros(inputs[0].shape());
            let mut dw = Tensor::zeros(inputs[1].shape());
            let mut db = Tensor::zeros(&[out]);
            for n in 0..batch {
                for o in 0..out {
                    let go = gd[n * out + o];
                    db.data_mut()[o] += go;
                    for f in 0..fin {
                        dx.data_mut()[n * fin + f] += go * wd[o * fin + f];
                        dw.data_mut()[o * fin + f] += go * xd[n * fin + f];
                    }
                }
            }
            vec![dx, dw, db]
        }),
    ))
}

/// Mean softmax cross-entropy of `(batch, classes)` logits.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let v = tape.value(logits);
    let (batch, classes) = match v.shape() {
        &[b, c] => (b, c),
        s => return Err(invalid(format!("cross_entropy: logits must be 2D, got {s:?}"))),
    };
    if labels.len() != batch || labels.iter().any(|&l| l >= classes) {
        return Err(invalid("cross_entropy: labels do not match logits"));
    }
    let mut probs = vec![0.0; batch * classes];
    let mut loss = 0.0;
    for n in 0..batch {
        let row = &v.data()[n * classes..(n + 1) * classes];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|&r| (r - max).exp()).sum();
        for c in 0..classes {
            probs[n * classes + c] = (row[c] - max).exp() / z;
        }
        loss -= (row[labels[n]] - max) - z.ln();
    }
    let labels = labels.to_vec();
    Ok(tape.push(
        Tensor::scalar(loss / batch as f64),
        &[logits],
        Box::new(move |g, _, _| {
            let scale = g.data()[0] / batch as f64;
            let mut d = probs.clone();
            for (n, &l) in labels.iter().enumerate() {
                d[n * classes + l] -= 1.0;
            }
            d.iter_mut().for_each(|v| *v *= scale);
            vec![Tensor::new(vec![batch, classes], d).expect("sized")]
        }),
    ))
}

/// Averages all submaps into one. The result keeps the first submap's step
/// stride with zero offsets.
pub fn mean_over_submaps(tape: &mut Tape, x: &FeatureMap) -> FeatureMap {
    let v = tape.value(x.var);
    let [batch, ch, m, h, w] = dims5(v);
    let plane = h * w;
    let mut y = Tensor::zeros(&[batch, ch, 1, h, w]);
    for bc in 0..batch * ch {
        let dst = &mut y.data_mut()[bc * plane..(bc + 1) * plane];
        for s in 0..m {
            let src = &v.data()[(bc * m + s) * plane..][..plane];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
        dst.iter_mut().for_each(|d| *d /= m as f64);
    }
    let var = tape.push(
        y,
        &[x.var],
        Box::new(move |g, inputs, _| {
            let mut dx = Tensor::zeros(inputs[0].shape());
            for bc in 0..batch * ch {
                let src = &g.data()[bc * plane..(bc + 1) * plane];
                for s in 0..m {
                    let dst = &mut dx.data_mut()[(bc * m + s) * plane..][..plane];
                    dst.iter_mut().zip(src).for_each(|(d, g)| *d = g / m as f64);
                }
            }
            vec![dx]
        }),
    );
    let stride = x.metas.first().map_or(1, |m| m.step_stride);
    FeatureMap {
        var,
        metas: vec![SubmapMeta {
            row_offset: 0,
            col_offset: 0,
            step_stride: stride,
            height: h,
            width: w,
        }],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolMode {
    Avg,
    Max,
}

/// Reduces `(submaps, height, width)` per channel, treating the submap axis
/// as a third spatial axis. Output is `(batch, channels)`.
pub fn global_pool3d(tape: &mut Tape, x: &FeatureMap, mode: PoolMode) -> Var {
    let v = tape.value(x.var);
    let [batch, ch, m, h, w] = dims5(v);
    let n = m * h * w;
    let mut y = Vec::with_capacity(batch * ch);
    let mut arg = Vec::with_capacity(batch * ch);
    for bc in 0..batch * ch {
        let block = &v.data()[bc * n..(bc + 1) * n];
        match mode {
            PoolMode::Avg => y.push(block.iter().sum::<f64>() / n as f64),
            PoolMode::Max => {
                let (i, &best) = block
                    .iter()
                    .enumerate()
                    .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
                y.push(best);
                arg.push(i);
            }
        }
    }
    let y = Tensor::new(vec![batch, ch], y).expect("sized");
    tape.push(
        y,
        &[x.var],
        Box::new(move |g, inputs, _| {
            let mut dx = Tensor::zeros(inputs[0].shape());
            for bc in 0..batch * ch {
                let go = g.data()[bc];
                let block = &mut dx.data_mut()[bc * n..(bc + 1) * n];
                match mode {
                    PoolMode::Avg => block.iter_mut().for_each(|d| *d = go / n as f64),
                    PoolMode::Max => block[arg[bc]] = go,
                }
            }
            vec![dx]
        }),
    )
}
