//! Forward and backward kernels on raw row-major buffers.
//!
//! The tape in [`super::tape`] records which kernel produced a value and
//! calls the matching backward routine here.

use super::gemm::gemm;
use super::EngineError;

/// Geometry of a 2D cross-correlation over a `c_in × h × w` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
}

impl ConvGeometry {
    /// Square kernel, same stride and padding on both axes.
    pub fn square(c_in: usize, h: usize, w: usize, c_out: usize, k: usize, stride: usize, padding: usize) -> Self {
        ConvGeometry {
            c_in,
            h,
            w,
            c_out,
            kh: k,
            kw: k,
            sh: stride,
            sw: stride,
            ph: padding,
            pw: padding,
        }
    }

    /// Kernel along the first spatial axis only (time), width-1 along nodes.
    pub fn temporal(c_in: usize, t: usize, n: usize, c_out: usize, k: usize, stride: usize, padding: usize) -> Self {
        ConvGeometry {
            c_in,
            h: t,
            w: n,
            c_out,
            kh: k,
            kw: 1,
            sh: stride,
            sw: 1,
            ph: padding,
            pw: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.sh == 0 || self.sw == 0 {
            return Err(EngineError::Argument("convolution stride must be positive".into()));
        }
        if self.kh == 0 || self.kw == 0 {
            return Err(EngineError::Argument("kernel size must be positive".into()));
        }
        if self.kh > self.h + 2 * self.ph || self.kw > self.w + 2 * self.pw {
            return Err(EngineError::Shape(format!(
                "kernel {}×{} exceeds padded input {}×{}",
                self.kh,
                self.kw,
                self.h + 2 * self.ph,
                self.w + 2 * self.pw
            )));
        }
        Ok(())
    }

    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.ph - self.kh) / self.sh + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pw - self.kw) / self.sw + 1
    }

    fn patch(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn out_cells(&self) -> usize {
        self.out_h() * self.out_w()
    }
}

/// Unfolds input patches into a `(c_in·kh·kw) × (oh·ow)` matrix.
pub fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let cells = oh * ow;
    let mut cols = vec![0.0; g.patch() * cells];
    let whole_rows = g.kw == 1 && g.sw == 1 && g.pw == 0;
    for c in 0..g.c_in {
        let plane = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = ((c * g.kh + ky) * g.kw + kx) * cells;
                for oy in 0..oh {
                    let iy = (oy * g.sh + ky) as isize - g.ph as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let dst = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                    if whole_rows {
                        dst.copy_from_slice(src);
                        continue;
                    }
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.sw + kx) as isize - g.pw as isize;
                        if ix >= 0 && ix < g.w as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
pub fn col2im(cols: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let cells = oh * ow;
    let mut out = vec![0.0; g.c_in * g.h * g.w];
    let whole_rows = g.kw == 1 && g.sw == 1 && g.pw == 0;
    for c in 0..g.c_in {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = ((c * g.kh + ky) * g.kw + kx) * cells;
                for oy in 0..oh {
                    let iy = (oy * g.sh + ky) as isize - g.ph as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let base = c * g.h * g.w + iy as usize * g.w;
                    if whole_rows {
                        let src = &cols[row + oy * ow..row + (oy + 1) * ow];
                        for (o, v) in out[base..base + ow].iter_mut().zip(src) {
                            *o += v;
                        }
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * g.sw + kx) as isize - g.pw as isize;
                        if ix >= 0 && ix < g.w as isize {
                            out[base + ix as usize] += cols[row + oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns `(output, cols)`; `cols` is kept for the backward pass.
pub fn conv_forward(input: &[f64], kernel: &[f64], bias: Option<&[f64]>, g: &ConvGeometry) -> (Vec<f64>, Vec<f64>) {
    let cols = im2col(input, g);
    let cells = g.out_cells();
    let mut out = vec![0.0; g.c_out * cells];
    gemm(false, false, g.c_out, cells, g.patch(), 1.0, kernel, &cols, 0.0, &mut out);
    if let Some(b) = bias {
        for (o, bv) in b.iter().enumerate() {
            for v in &mut out[o * cells..(o + 1) * cells] {
                *v += bv;
            }
        }
    }
    (out, cols)
}

pub struct ConvGrads {
    pub input: Vec<f64>,
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn conv_backward(grad_out: &[f64], cols: &[f64], kernel: &[f64], g: &ConvGeometry, need_input: bool) -> ConvGrads {
    let cells = g.out_cells();
    let patch = g.patch();
    let mut dk = vec![0.0; g.c_out * patch];
    gemm(false, true, g.c_out, patch, cells, 1.0, grad_out, cols, 0.0, &mut dk);
    let db = (0..g.c_out)
        .map(|o| grad_out[o * cells..(o + 1) * cells].iter().sum())
        .collect();
    let input = if need_input {
        let mut dcols = vec![0.0; patch * cells];
        gemm(true, false, patch, cells, g.c_out, 1.0, kernel, grad_out, 0.0, &mut dcols);
        col2im(&dcols, g)
    } else {
        Vec::new()
    };
    ConvGrads {
        input,
        kernel: dk,
        bias: db,
    }
}

/// Shapes of one masked graph convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConvDims {
    pub c_in: usize,
    pub t: usize,
    pub n: usize,
    pub c_out: usize,
    pub k: usize,
}

pub struct GraphConvCache {
    /// A_k ∘ M_k per partition, N×N each.
    pub effective: Vec<Vec<f64>>,
    /// f_in (A_k ∘ M_k) per partition, laid out `[c_in][t][n]`.
    pub propagated: Vec<Vec<f64>>,
}

/// f_out = Σ_k W_k · (f_in (A_k ∘ M_k)), node axis contracted on the right.
pub fn graph_conv_forward(
    input: &[f64],
    partitions: &[f64],
    weights: &[f64],
    masks: &[f64],
    d: &GraphConvDims,
) -> (Vec<f64>, GraphConvCache) {
    let nn = d.n * d.n;
    let rows = d.c_in * d.t;
    let cells = d.t * d.n;
    let mut out = vec![0.0; d.c_out * cells];
    let mut effective = Vec::with_capacity(d.k);
    let mut propagated = Vec::with_capacity(d.k);
    for k in 0..d.k {
        let a = &partitions[k * nn..(k + 1) * nn];
        let m = &masks[k * nn..(k + 1) * nn];
        let eff: Vec<f64> = a.iter().zip(m).map(|(x, y)| x * y).collect();
        let mut y = vec![0.0; rows * d.n];
        gemm(false, false, rows, d.n, d.n, 1.0, input, &eff, 0.0, &mut y);
        let w = &weights[k * d.c_out * d.c_in..(k + 1) * d.c_out * d.c_in];
        gemm(false, false, d.c_out, cells, d.c_in, 1.0, w, &y, 1.0, &mut out);
        effective.push(eff);
        propagated.push(y);
    }
    (out, GraphConvCache { effective, propagated })
}

pub struct GraphConvGrads {
    pub input: Vec<f64>,
    pub weights: Vec<f64>,
    pub masks: Vec<f64>,
}

pub fn graph_conv_backward(
    grad_out: &[f64],
    input: &[f64],
    partitions: &[f64],
    weights: &[f64],
    cache: &GraphConvCache,
    d: &GraphConvDims,
) -> GraphConvGrads {
    let nn = d.n * d.n;
    let rows = d.c_in * d.t;
    let cells = d.t * d.n;
    let wk = d.c_out * d.c_in;
    let mut dx = vec![0.0; input.len()];
    let mut dw = vec![0.0; d.k * wk];
    let mut dm = vec![0.0; d.k * nn];
    let mut dy = vec![0.0; rows * d.n];
    let mut deff = vec![0.0; nn];
    for k in 0..d.k {
        let w = &weights[k * wk..(k + 1) * wk];
        gemm(false, true, d.c_out, d.c_in, cells, 1.0, grad_out, &cache.propagated[k], 0.0, &mut dw[k * wk..(k + 1) * wk]);
        gemm(true, false, d.c_in, cells, d.c_out, 1.0, w, grad_out, 0.0, &mut dy);
        gemm(true, false, d.n, d.n, rows, 1.0, input, &dy, 0.0, &mut deff);
        let a = &partitions[k * nn..(k + 1) * nn];
        for ((g, de), av) in dm[k * nn..(k + 1) * nn].iter_mut().zip(&deff).zip(a) {
            *g = de * av;
        }
        gemm(false, true, rows, d.n, d.n, 1.0, &dy, &cache.effective[k], 1.0, &mut dx);
    }
    GraphConvGrads {
        input: dx,
        weights: dw,
        masks: dm,
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// log Σ exp(x), max-shifted.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Direct loop over output cells, kernel taps, and input channels.
    fn naive_conv(input: &[f64], kernel: &[f64], bias: &[f64], g: &ConvGeometry) -> Vec<f64> {
        let (oh, ow) = (g.out_h(), g.out_w());
        let mut out = vec![0.0; g.c_out * oh * ow];
        for o in 0..g.c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = bias[o];
                    for c in 0..g.c_in {
                        for ky in 0..g.kh {
                            for kx in 0..g.kw {
                                let iy = (oy * g.sh + ky) as isize - g.ph as isize;
                                let ix = (ox * g.sw + kx) as isize - g.pw as isize;
                                if iy < 0 || ix < 0 || iy >= g.h as isize || ix >= g.w as isize {
                                    continue;
                                }
                                s += input[(c * g.h + iy as usize) * g.w + ix as usize]
                                    * kernel[((o * g.c_in + c) * g.kh + ky) * g.kw + kx];
                            }
                        }
                    }
                    out[(o * oh + oy) * ow + ox] = s;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let geoms = [
            ConvGeometry::square(2, 5, 5, 3, 3, 1, 0),
            ConvGeometry::square(2, 5, 5, 3, 3, 2, 1),
            ConvGeometry::square(3, 8, 6, 4, 3, 2, 1),
            ConvGeometry::temporal(3, 11, 4, 5, 3, 1, 1),
            ConvGeometry::temporal(2, 9, 3, 2, 5, 2, 2),
        ];
        for g in geoms {
            g.validate().unwrap();
            let x = rand_vec(&mut rng, g.c_in * g.h * g.w);
            let k = rand_vec(&mut rng, g.c_out * g.c_in * g.kh * g.kw);
            let b = rand_vec(&mut rng, g.c_out);
            let (out, _) = conv_forward(&x, &k, Some(&b), &g);
            let r = naive_conv(&x, &k, &b, &g);
            let worst = out.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-12, "{g:?}: {worst}");
        }
    }

    #[test]
    fn conv_geometry_errors() {
        assert!(ConvGeometry::square(1, 3, 3, 1, 3, 0, 0).validate().is_err());
        assert!(ConvGeometry::square(1, 2, 2, 1, 3, 1, 0).validate().is_err());
        assert!(ConvGeometry::square(1, 2, 2, 1, 3, 1, 1).validate().is_ok());
        let g = ConvGeometry::square(1, 7, 7, 1, 3, 2, 1);
        assert_eq!((g.out_h(), g.out_w()), (4, 4));
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), c> == <x, col2im(c)>
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in [ConvGeometry::square(2, 6, 5, 1, 3, 2, 1), ConvGeometry::temporal(2, 9, 4, 1, 3, 2, 1)] {
            let x = rand_vec(&mut rng, g.c_in * g.h * g.w);
            let cols = im2col(&x, &g);
            let c = rand_vec(&mut rng, cols.len());
            let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
            let back = col2im(&c, &g);
            let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_basics() {
        let p = softmax(&[2.0, 2.0, 2.0, 2.0]);
        assert!(p.iter().all(|v| *v == 0.25));
        let big = softmax(&[1000.0, 0.0]);
        assert!(big[0] > 0.999 && big.iter().all(|v| v.is_finite()));
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }
}
