//! Dense convolution kernels (forward and backward) used by the graph ops.
//!
//! All loops have a fixed iteration order so accumulation is bit-reproducible.

use super::Scalar;

/// Stride/padding for 2-D convolutions (same value on both spatial axes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: usize,
    pub pad: usize,
}

impl Conv2dSpec {
    pub fn out_hw(&self, h: usize, w: usize, kh: usize, kw: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - kh) / self.stride + 1,
            (w + 2 * self.pad - kw) / self.stride + 1,
        )
    }

    pub fn transpose_out_hw(&self, h: usize, w: usize, kh: usize, kw: usize) -> (usize, usize) {
        (
            (h - 1) * self.stride + kh - 2 * self.pad,
            (w - 1) * self.stride + kw - 2 * self.pad,
        )
    }
}

/// Per-axis stride/padding for 3-D convolutions, ordered (t, h, w).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3dSpec {
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl Conv3dSpec {
    pub fn out_thw(&self, thw: [usize; 3], k: [usize; 3]) -> [usize; 3] {
        let mut out = [0; 3];
        for i in 0..3 {
            out[i] = (thw[i] + 2 * self.pad[i] - k[i]) / self.stride[i] + 1;
        }
        out
    }
}

// x: [b, ci, h, w]  w: [co, ci, kh, kw]  y: [b, co, oh, ow]
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward<S: Scalar>(
    x: &[S],
    w: &[S],
    bias: &[S],
    y: &mut [S],
    (b, ci, h, wd): (usize, usize, usize, usize),
    (co, kh, kw): (usize, usize, usize),
    spec: Conv2dSpec,
) {
    let (oh, ow) = spec.out_hw(h, wd, kh, kw);
    let (s, p) = (spec.stride, spec.pad);
    for ib in 0..b {
        for ic_out in 0..co {
            let ybase = (ib * co + ic_out) * oh * ow;
            y[ybase..ybase + oh * ow].fill(bias[ic_out]);
            for ic in 0..ci {
                let xbase = (ib * ci + ic) * h * wd;
                let wbase = (ic_out * ci + ic) * kh * kw;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = w[wbase + ky * kw + kx];
                        for oy in 0..oh {
                            let iy = (oy * s + ky) as isize - p as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = xbase + iy as usize * wd;
                            let yrow = ybase + oy * ow;
                            for ox in 0..ow {
                                let ix = (ox * s + kx) as isize - p as isize;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                y[yrow + ox] += wv * x[xrow + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<S: Scalar>(
    x: &[S],
    w: &[S],
    dy: &[S],
    dx: &mut [S],
    dw: &mut [S],
    db: &mut [S],
    (b, ci, h, wd): (usize, usize, usize, usize),
    (co, kh, kw): (usize, usize, usize),
    spec: Conv2dSpec,
) {
    let (oh, ow) = spec.out_hw(h, wd, kh, kw);
    let (s, p) = (spec.stride, spec.pad);
    for ib in 0..b {
        for ic_out in 0..co {
            let ybase = (ib * co + ic_out) * oh * ow;
            for v in &dy[ybase..ybase + oh * ow] {
                db[ic_out] += *v;
            }
            for ic in 0..ci {
                let xbase = (ib * ci + ic) * h * wd;
                let wbase = (ic_out * ci + ic) * kh * kw;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = w[wbase + ky * kw + kx];
                        let mut wacc = S::ZERO;
                        for oy in 0..oh {
                            let iy = (oy * s + ky) as isize - p as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = xbase + iy as usize * wd;
                            let yrow = ybase + oy * ow;
                            for ox in 0..ow {
                                let ix = (ox * s + kx) as isize - p as isize;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                let g = dy[yrow + ox];
                                wacc += g * x[xrow + ix as usize];
                                dx[xrow + ix as usize] += g * wv;
                            }
                        }
                        dw[wbase + ky * kw + kx] += wacc;
                    }
                }
            }
        }
    }
}

// x: [b, ci, h, w]  w: [ci, co, kh, kw]  y: [b, co, oh, ow]
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_forward<S: Scalar>(
    x: &[S],
    w: &[S],
    bias: &[S],
    y: &mut [S],
    (b, ci, h, wd): (usize, usize, usize, usize),
    (co, kh, kw): (usize, usize, usize),
    spec: Conv2dSpec,
) {
    let (oh, ow) = spec.transpose_out_hw(h, wd, kh, kw);
    let (s, p) = (spec.stride, spec.pad);
    for ib in 0..b {
        for ic_out in 0..co {
            let ybase = (ib * co + ic_out) * oh * ow;
            y[ybase..ybase + oh * ow].fill(bias[ic_out]);
        }
        for ic in 0..ci {
            let xbase = (ib * ci + ic) * h * wd;
            for ic_out in 0..co {
                let ybase = (ib * co + ic_out) * oh * ow;
                let wbase = (ic * co + ic_out) * kh * kw;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = w[wbase + ky * kw + kx];
                        for iy in 0..h {
                            let oy = (iy * s + ky) as isize - p as isize;
                            if oy < 0 || oy >= oh as isize {
                                continue;
                            }
                            let xrow = xbase + iy * wd;
                            let yrow = ybase + oy as usize * ow;
                            for ix in 0..wd {
                                let ox = (ix * s + kx) as isize - p as isize;
                                if ox < 0 || ox >= ow as isize {
                                    continue;
                                }
                                y[yrow + ox as usize] += wv * x[xrow + ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_backward<S: Scalar>(
    x: &[S],
    w: &[S],
    dy: &[S],
    dx: &mut [S],
    dw: &mut [S],
    db: &mut [S],
    (b, ci, h, wd): (usize, usize, usize, usize),
    (co, kh, kw): (usize, usize, usize),
    spec: Conv2dSpec,
) {
    let (oh, ow) = spec.transpose_out_hw(h, wd, kh, kw);
    let (s, p) = (spec.stride, spec.pad);
    for ib in 0..b {
        for ic_out in 0..co {
            let ybase = (ib * co + ic_out) * oh * ow;
            for v in &dy[ybase..ybase + oh * ow] {
                db[ic_out] += *v;
            }
        }
        for ic in 0..ci {
            let xbase = (ib * ci + ic) * h * wd;
            for ic_out in 0..co {
                let ybase = (ib * co + ic_out) * oh * ow;
                let wbase = (ic * co + ic_out) * kh * kw;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = w[wbase + ky * kw + kx];
                        let mut wacc = S::ZERO;
                        for iy in 0..h {
                            let oy = (iy * s + ky) as isize - p as isize;
                            if oy < 0 || oy >= oh as isize {
                                continue;
                            }
                            let xrow = xbase + iy * wd;
                            let yrow = ybase + oy as usize * ow;
                            for ix in 0..wd {
                                let ox = (ix * s + kx) as isize - p as isize;
                                if ox < 0 || ox >= ow as isize {
                                    continue;
                                }
                                let g = dy[yrow + ox as usize];
                                wacc += g * x[xrow + ix];
                                dx[xrow + ix] += g * wv;
                            }
                        }
                        dw[wbase + ky * kw + kx] += wacc;
                    }
                }
            }
        }
    }
}

// x: [b, ci, t, h, w]  w: [co, ci, kt, kh, kw]  y: [b, co, ot, oh, ow]
#[allow(clippy::too_many_arguments)]
pub fn conv3d_forward<S: Scalar>(
    x: &[S],
    w: &[S],
    bias: &[S],
    y: &mut [S],
    (b, ci, t, h, wd): (usize, usize, usize, usize, usize),
    (co, kt, kh, kw): (usize, usize, usize, usize),
    spec: Conv3dSpec,
) {
    let [ot, oh, ow] = spec.out_thw([t, h, wd], [kt, kh, kw]);
    let [st, sh, sw] = spec.stride;
    let [pt, ph, pw] = spec.pad;
    for ib in 0..b {
        for ic_out in 0..co {
            let ybase = (ib * co + ic_out) * ot * oh * ow;
            y[ybase..ybase + ot * oh * ow].fill(bias[ic_out]);
            for ic in 0..ci {
                let xbase = (ib * ci + ic) * t * h * wd;
                let wbase = (ic_out * ci + ic) * kt * kh * kw;
                for kz in 0..kt {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let wv = w[wbase + (kz * kh + ky) * kw + kx];
                            for oz in 0..ot {
                                let iz = (oz * st + kz) as isize - pt as isize;
                                if iz < 0 || iz >= t as isize {
                                    continue;
                                }
                                for oy in 0..oh {
                                    let iy = (oy * sh + ky) as isize - ph as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    let xrow = xbase + (iz as usize * h + iy as usize) * wd;
                                    let yrow = ybase + (oz * oh + oy) * ow;
                                    for ox in 0..ow {
                                        let ix = (ox * sw + kx) as isize - pw as isize;
                                        if ix < 0 || ix >= wd as isize {
                                            continue;
                                        }
                                        y[yrow + ox] += wv * x[xrow + ix as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv3d_backward<S: Scalar>(
    x: &[S],
    w: &[S],
    dy: &[S],
    dx: &mut [S],
    dw: &mut [S],
    db: &mut [S],
    (b, ci, t, h, wd): (usize, usize, usize, usize, usize),
    (co, kt, kh, kw): (usize, usize, usize, usize),
    spec: Conv3dSpec,
) {
    let [ot, oh, ow] = spec.out_thw([t, h, wd], [kt, kh, kw]);
    let [st, sh, sw] = spec.stride;
    let [pt, ph, pw] = spec.pad;
    for ib in 0..b {
        for ic_out in 0..co {
            let ybase = (ib * co + ic_out) * ot * oh * ow;
            for v in &dy[ybase..ybase + ot * oh * ow] {
                db[ic_out] += *v;
            }
            for ic in 0..ci {
                let xbase = (ib * ci + ic) * t * h * wd;
                let wbase = (ic_out * ci + ic) * kt * kh * kw;
                for kz in 0..kt {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let widx = wbase + (kz * kh + ky) * kw + kx;
                            let wv = w[widx];
                            let mut wacc = S::ZERO;
                            for oz in 0..ot {
                                let iz = (oz * st + kz) as isize - pt as isize;
                                if iz < 0 || iz >= t as isize {
                                    continue;
                                }
                                for oy in 0..oh {
                                    let iy = (oy * sh + ky) as isize - ph as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    let xrow = xbase + (iz as usize * h + iy as usize) * wd;
                                    let yrow = ybase + (oz * oh + oy) * ow;
                                    for ox in 0..ow {
                                        let ix = (ox * sw + kx) as isize - pw as isize;
                                        if ix < 0 || ix >= wd as isize {
                                            continue;
                                        }
                                        let g = dy[yrow + ox];
                                        wacc += g * x[xrow + ix as usize];
                                        dx[xrow + ix as usize] += g * wv;
                                    }
                                }
                            }
                            dw[widx] += wacc;
                        }
                    }
                }
            }
        }
    }
}

/// y = a · b with a: [m, k], b: [k, n].
pub fn matmul<S: Scalar>(a: &[S], bm: &[S], y: &mut [S], m: usize, k: usize, n: usize) {
    y.fill(S::ZERO);
    for i in 0..m {
        let arow = i * k;
        let yrow = i * n;
        for kk in 0..k {
            let av = a[arow + kk];
            let brow = kk * n;
            for j in 0..n {
                y[yrow + j] += av * bm[brow + j];
            }
        }
    }
}

/// y = a · bᵀ with a: [m, k], b: [n, k].
pub fn matmul_nt<S: Scalar>(a: &[S], bm: &[S], y: &mut [S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = i * k;
        let yrow = i * n;
        for j in 0..n {
            let brow = j * k;
            let mut acc = S::ZERO;
            for kk in 0..k {
                acc += a[arow + kk] * bm[brow + kk];
            }
            y[yrow + j] = acc;
        }
    }
}

/// y += aᵀ · b with a: [k, m], b: [k, n].
pub fn matmul_tn_acc<S: Scalar>(a: &[S], bm: &[S], y: &mut [S], m: usize, k: usize, n: usize) {
    for kk in 0..k {
        let arow = kk * m;
        let brow = kk * n;
        for i in 0..m {
            let av = a[arow + i];
            let yrow = i * n;
            for j in 0..n {
                y[yrow + j] += av * bm[brow + j];
            }
        }
    }
}


// ---- im2col-backed fast paths ----
//
// The strided gather loops above are the reference implementation; these
// wrappers lower convolutions onto matmul for speed and are checked against
// the reference in tests.

#[allow(clippy::too_many_arguments)]
fn im2col2d<S: Scalar>(
    x: &[S],
    cols: &mut [S],
    (b, ci, h, wd): (usize, usize, usize, usize),
    (kh, kw): (usize, usize),
    (oh, ow): (usize, usize),
    spec: Conv2dSpec,
) {
    let (s, p) = (spec.stride, spec.pad);
    let k_len = ci * kh * kw;
    for ib in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((ib * oh + oy) * ow + ox) * k_len;
                for ic in 0..ci {
                    let xbase = (ib * ci + ic) * h * wd;
                    for ky in 0..kh {
                        let iy = (oy * s + ky) as isize - p as isize;
                        let dst = row + (ic * kh + ky) * kw;
                        if iy < 0 || iy >= h as isize {
                            cols[dst..dst + kw].fill(S::ZERO);
                            continue;
                        }
                        let xrow = xbase + iy as usize * wd;
                        for kx in 0..kw {
                            let ix = (ox * s + kx) as isize - p as isize;
                            cols[dst + kx] = if ix < 0 || ix >= wd as isize {
                                S::ZERO
                            } else {
                                x[xrow + ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im2d<S: Scalar>(
    dcols: &[S],
    dx: &mut [S],
    (b, ci, h, wd): (usize, usize, usize, usize),
    (kh, kw): (usize, usize),
    (oh, ow): (usize, usize),
    spec: Conv2dSpec,
) {
    let (s, p) = (spec.stride, spec.pad);
    let k_len = ci * kh * kw;
    for ib in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((ib * oh + oy) * ow + ox) * k_len;
                for ic in 0..ci {
                    let xbase = (ib * ci + ic) * h * wd;
                    for ky in 0..kh {
                        let iy = (oy * s + ky) as isize - p as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = xbase + iy as usize * wd;
                        let src = row + (ic * kh + ky) * kw;
                        for kx in 0..kw {
                            let ix = (ox * s + kx) as isize - p as isize;
                            if ix >= 0 && ix < wd as isize {
                                dx[xrow + ix as usize] += dcols[src + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// conv2d forward via im2col + matmul; same results as [`conv2d_forward`].
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward_fast<S: Scalar>(
    x: &[S],
    w: &[S],
    bias: &[S],
    y: &mut [S],
    dims: (usize, usize, usize, usize),
    wdims: (usize, usize, usize),
    spec: Conv2dSpec,
) {
    let (b, ci, h, wd) = dims;
    let (co, kh, kw) = wdims;
    let (oh, ow) = spec.out_hw(h, wd, kh, kw);
    let rows = b * oh * ow;
    let k_len = ci * kh * kw;
    let mut cols = vec![S::ZERO; rows * k_len];
    im2col2d(x, &mut cols, dims, (kh, kw), (oh, ow), spec);
    let mut y_rows = vec![S::ZERO; rows * co];
    matmul_nt(&cols, w, &mut y_rows, rows, k_len, co);
    for ib in 0..b {
        for oc in 0..co {
            let ybase = (ib * co + oc) * oh * ow;
            for pix in 0..oh * ow {
                y[ybase + pix] = y_rows[(ib * oh * ow + pix) * co + oc] + bias[oc];
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward_fast<S: Scalar>(
    x: &[S],
    w: &[S],
    dy: &[S],
    dx: &mut [S],
    dw: &mut [S],
    db: &mut [S],
    dims: (usize, usize, usize, usize),
    wdims: (usize, usize, usize),
    spec: Conv2dSpec,
) {
    let (b, ci, h, wd) = dims;
    let (co, kh, kw) = wdims;
    let (oh, ow) = spec.out_hw(h, wd, kh, kw);
    let rows = b * oh * ow;
    let k_len = ci * kh * kw;
    let mut dy_rows = vec![S::ZERO; rows * co];
    for ib in 0..b {
        for oc in 0..co {
            let ybase = (ib * co + oc) * oh * ow;
            for pix in 0..oh * ow {
                let g = dy[ybase + pix];
                dy_rows[(ib * oh * ow + pix) * co + oc] = g;
                db[oc] += g;
            }
        }
    }
    let mut cols = vec![S::ZERO; rows * k_len];
    im2col2d(x, &mut cols, dims, (kh, kw), (oh, ow), spec);
    matmul_tn_acc(&dy_rows, &cols, dw, co, rows, k_len);
    let mut dcols = vec![S::ZERO; rows * k_len];
    matmul(&dy_rows, w, &mut dcols, rows, co, k_len);
    col2im2d(&dcols, dx, dims, (kh, kw), (oh, ow), spec);
}

#[allow(clippy::too_many_arguments)]
fn im2col3d<S: Scalar>(
    x: &[S],
    cols: &mut [S],
    (b, ci, t, h, wd): (usize, usize, usize, usize, usize),
    (kt, kh, kw): (usize, usize, usize),
    (ot, oh, ow): (usize, usize, usize),
    spec: Conv3dSpec,
) {
    let [st, sh, sw] = spec.stride;
    let [pt, ph, pw] = spec.pad;
    let k_len = ci * kt * kh * kw;
    for ib in 0..b {
        for oz in 0..ot {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = (((ib * ot + oz) * oh + oy) * ow + ox) * k_len;
                    for ic in 0..ci {
                        let xbase = (ib * ci + ic) * t * h * wd;
                        for kz in 0..kt {
                            let iz = (oz * st + kz) as isize - pt as isize;
                            for ky in 0..kh {
                                let iy = (oy * sh + ky) as isize - ph as isize;
                                let dst = row + ((ic * kt + kz) * kh + ky) * kw;
                                if iz < 0 || iz >= t as isize || iy < 0 || iy >= h as isize {
                                    cols[dst..dst + kw].fill(S::ZERO);
                                    continue;
                                }
                                let xrow = xbase + (iz as usize * h + iy as usize) * wd;
                                for kx in 0..kw {
                                    let ix = (ox * sw + kx) as isize - pw as isize;
                                    cols[dst + kx] = if ix < 0 || ix >= wd as isize {
                                        S::ZERO
                                    } else {
                                        x[xrow + ix as usize]
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im3d<S: Scalar>(
    dcols: &[S],
    dx: &mut [S],
    (b, ci, t, h, wd): (usize, usize, usize, usize, usize),
    (kt, kh, kw): (usize, usize, usize),
    (ot, oh, ow): (usize, usize, usize),
    spec: Conv3dSpec,
) {
    let [st, sh, sw] = spec.stride;
    let [pt, ph, pw] = spec.pad;
    let k_len = ci * kt * kh * kw;
    for ib in 0..b {
        for oz in 0..ot {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = (((ib * ot + oz) * oh + oy) * ow + ox) * k_len;
                    for ic in 0..ci {
                        let xbase = (ib * ci + ic) * t * h * wd;
                        for kz in 0..kt {
                            let iz = (oz * st + kz) as isize - pt as isize;
                            if iz < 0 || iz >= t as isize {
                                continue;
                            }
                            for ky in 0..kh {
                                let iy = (oy * sh + ky) as isize - ph as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let xrow = xbase + (iz as usize * h + iy as usize) * wd;
                                let src = row + ((ic * kt + kz) * kh + ky) * kw;
                                for kx in 0..kw {
                                    let ix = (ox * sw + kx) as isize - pw as isize;
                                    if ix >= 0 && ix < wd as isize {
                                        dx[xrow + ix as usize] += dcols[src + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv3d_forward_fast<S: Scalar>(
    x: &[S],
    w: &[S],
    bias: &[S],
    y: &mut [S],
    dims: (usize, usize, usize, usize, usize),
    wdims: (usize, usize, usize, usize),
    spec: Conv3dSpec,
) {
    let (b, ci, t, h, wd) = dims;
    let (co, kt, kh, kw) = wdims;
    let [ot, oh, ow] = spec.out_thw([t, h, wd], [kt, kh, kw]);
    let rows = b * ot * oh * ow;
    let k_len = ci * kt * kh * kw;
    let mut cols = vec![S::ZERO; rows * k_len];
    im2col3d(x, &mut cols, dims, (kt, kh, kw), (ot, oh, ow), spec);
    let mut y_rows = vec![S::ZERO; rows * co];
    matmul_nt(&cols, w, &mut y_rows, rows, k_len, co);
    let opix = ot * oh * ow;
    for ib in 0..b {
        for oc in 0..co {
            let ybase = (ib * co + oc) * opix;
            for pix in 0..opix {
                y[ybase + pix] = y_rows[(ib * opix + pix) * co + oc] + bias[oc];
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv3d_backward_fast<S: Scalar>(
    x: &[S],
    w: &[S],
    dy: &[S],
    dx: &mut [S],
    dw: &mut [S],
    db: &mut [S],
    dims: (usize, usize, usize, usize, usize),
    wdims: (usize, usize, usize, usize),
    spec: Conv3dSpec,
) {
    let (b, ci, t, h, wd) = dims;
    let (co, kt, kh, kw) = wdims;
    let [ot, oh, ow] = spec.out_thw([t, h, wd], [kt, kh, kw]);
    let rows = b * ot * oh * ow;
    let k_len = ci * kt * kh * kw;
    let opix = ot * oh * ow;
    let mut dy_rows = vec![S::ZERO; rows * co];
    for ib in 0..b {
        for oc in 0..co {
            let ybase = (ib * co + oc) * opix;
            for pix in 0..opix {
                let g = dy[ybase + pix];
                dy_rows[(ib * opix + pix) * co + oc] = g;
                db[oc] += g;
            }
        }
    }
    let mut cols = vec![S::ZERO; rows * k_len];
    im2col3d(x, &mut cols, dims, (kt, kh, kw), (ot, oh, ow), spec);
    matmul_tn_acc(&dy_rows, &cols, dw, co, rows, k_len);
    let mut dcols = vec![S::ZERO; rows * k_len];
    matmul(&dy_rows, w, &mut dcols, rows, co, k_len);
    col2im3d(&dcols, dx, dims, (kt, kh, kw), (ot, oh, ow), spec);
}
