//! Raw f64 compute kernels. All loops are sequential with a fixed iteration
//! order so results are bitwise deterministic.

/// c += a[m,k] @ b[k,n]
pub fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// c += a[m,k] @ b[n,k]^T  (b stored row-major as [n,k])
pub fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (av, bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            c[i * n + j] += acc;
        }
    }
}

/// c += a[k,m]^T @ b[k,n]  (a stored row-major as [k,m])
pub fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for p in 0..k {
        let b_row = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            let c_row = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// How convolution fills positions outside the input.
///
/// Zero padding turns a non-zero background into a spurious bright border
/// halo; replicate (edge-clamp) padding extends the edge pixel instead.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    Replicate,
}

#[inline]
fn clamp_coord(v: isize, extent: usize) -> usize {
    v.clamp(0, extent as isize - 1) as usize
}

/// Unfold one image [c,h,w] into columns [c*kh*kw, oh*ow] for convolution
/// with the given stride and padding.
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    x: &[f64],
    cols: &mut [f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    mode: PadMode,
    oh: usize,
    ow: usize,
) {
    debug_assert_eq!(x.len(), c * h * w);
    debug_assert_eq!(cols.len(), c * kh * kw * oh * ow);
    let spatial = oh * ow;
    for ch in 0..c {
        let x_ch = &x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((ch * kh + ki) * kw + kj) * spatial;
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    let out = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                    let in_y = iy >= 0 && iy < h as isize;
                    if !in_y && mode == PadMode::Zero {
                        out.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let row_y = if in_y { iy as usize } else { clamp_coord(iy, h) };
                    let x_row = &x_ch[row_y * w..(row_y + 1) * w];
                    for (ox, slot) in out.iter_mut().enumerate() {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        let in_x = ix >= 0 && ix < w as isize;
                        *slot = match (in_x, mode) {
                            (true, _) => x_row[ix as usize],
                            (false, PadMode::Zero) => 0.0,
                            (false, PadMode::Replicate) => x_row[clamp_coord(ix, w)],
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add columns back into an image gradient; inverse of [`im2col`].
/// Replicate padding routes out-of-range contributions to the edge pixel
/// they were read from.
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    cols: &[f64],
    dx: &mut [f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    mode: PadMode,
    oh: usize,
    ow: usize,
) {
    debug_assert_eq!(dx.len(), c * h * w);
    debug_assert_eq!(cols.len(), c * kh * kw * oh * ow);
    let spatial = oh * ow;
    for ch in 0..c {
        let dx_ch = &mut dx[ch * h * w..(ch + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((ch * kh + ki) * kw + kj) * spatial;
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    let in_y = iy >= 0 && iy < h as isize;
                    if !in_y && mode == PadMode::Zero {
                        continue;
                    }
                    let row_y = if in_y { iy as usize } else { clamp_coord(iy, h) };
                    let src = &cols[row + oy * ow..row + (oy + 1) * ow];
                    for (ox, v) in src.iter().enumerate() {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        let in_x = ix >= 0 && ix < w as isize;
                        match (in_x, mode) {
                            (true, _) => dx_ch[row_y * w + ix as usize] += v,
                            (false, PadMode::Zero) => {}
                            (false, PadMode::Replicate) => {
                                dx_ch[row_y * w + clamp_coord(ix, w)] += v
                            }
                        }
                    }
                }
            }
        }
    }
}

/// y[b,c,oy,ox] = mean of the 2x2 input block.
pub fn avgpool2x(x: &[f64], y: &mut [f64], bc: usize, h: usize, w: usize) {
    let (oh, ow) = (h / 2, w / 2);
    for img in 0..bc {
        let xi = &x[img * h * w..(img + 1) * h * w];
        let yi = &mut y[img * oh * ow..(img + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let base = 2 * oy * w + 2 * ox;
                yi[oy * ow + ox] = 0.25 * (xi[base] + xi[base + 1] + xi[base + w] + xi[base + w + 1]);
            }
        }
    }
}

pub fn avgpool2x_backward(dy: &[f64], dx: &mut [f64], bc: usize, h: usize, w: usize) {
    let (oh, ow) = (h / 2, w / 2);
    for img in 0..bc {
        let gy = &dy[img * oh * ow..(img + 1) * oh * ow];
        let gx = &mut dx[img * h * w..(img + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let g = 0.25 * gy[oy * ow + ox];
                let base = 2 * oy * w + 2 * ox;
                gx[base] += g;
                gx[base + 1] += g;
                gx[base + w] += g;
                gx[base + w + 1] += g;
            }
        }
    }
}

/// Each input pixel replicated into a 2x2 output block.
pub fn upsample_nearest2x(x: &[f64], y: &mut [f64], bc: usize, h: usize, w: usize) {
    let (oh, ow) = (2 * h, 2 * w);
    for img in 0..bc {
        let xi = &x[img * h * w..(img + 1) * h * w];
        let yi = &mut y[img * oh * ow..(img + 1) * oh * ow];
        for iy in 0..h {
            for ix in 0..w {
                let v = xi[iy * w + ix];
                let base = 2 * iy * ow + 2 * ix;
                yi[base] = v;
                yi[base + 1] = v;
                yi[base + ow] = v;
                yi[base + ow + 1] = v;
            }
        }
    }
}

pub fn upsample_nearest2x_backward(dy: &[f64], dx: &mut [f64], bc: usize, h: usize, w: usize) {
    let ow = 2 * w;
    for img in 0..bc {
        let gy = &dy[img * 4 * h * w..(img + 1) * 4 * h * w];
        let gx = &mut dx[img * h * w..(img + 1) * h * w];
        for iy in 0..h {
            for ix in 0..w {
                let base = 2 * iy * ow + 2 * ix;
                gx[iy * w + ix] += gy[base] + gy[base + 1] + gy[base + ow] + gy[base + ow + 1];
            }
        }
    }
}

/// Row-wise softmax over the last dimension, numerically shifted by the max.
pub fn softmax_rows(x: &[f64], y: &mut [f64], rows: usize, cols: usize) {
    for r in 0..rows {
        let xi = &x[r * cols..(r + 1) * cols];
        let yi = &mut y[r * cols..(r + 1) * cols];
        let max = xi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, v) in yi.iter_mut().zip(xi) {
            *o = (v - max).exp();
            sum += *o;
        }
        let inv = 1.0 / sum;
        yi.iter_mut().for_each(|v| *v *= inv);
    }
}

/// Row mean and reciprocal standard deviation, shared by layer-norm forward
/// and backward so both see bitwise-identical statistics.
pub fn row_moments(x: &[f64], cols: usize, eps: f64) -> (f64, f64) {
    let mut mean = 0.0;
    for v in x {
        mean += v;
    }
    mean /= cols as f64;
    let mut var = 0.0;
    for v in x {
        let d = v - mean;
        var += d * d;
    }
    var /= cols as f64;
    (mean, 1.0 / (var + eps).sqrt())
}
