use crate::parallel::for_each_chunk;
use super::Tensor;
use crate::error::{Error, Result};

/// Zero padding added around each spatial plane before a convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PadSpec {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl PadSpec {
    pub const NONE: PadSpec = PadSpec {
        top: 0,
        bottom: 0,
        left: 0,
        right: 0,
    };

    /// Padding that keeps the spatial size unchanged at stride 1. Even
    /// kernels get the extra row/column on the bottom/right, so a 4x4 kernel
    /// pads 1 above/left and 2 below/right.
    pub fn same(kh: usize, kw: usize) -> Self {
        let top = kh.saturating_sub(1) / 2;
        let left = kw.saturating_sub(1) / 2;
        PadSpec {
            top,
            bottom: kh.saturating_sub(1) - top,
            left,
            right: kw.saturating_sub(1) - left,
        }
    }
}

/// Gradients of a convolution with respect to its three operands.
#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

struct Geometry {
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    filters: usize,
    kh: usize,
    kw: usize,
    out_h: usize,
    out_w: usize,
    pad: PadSpec,
}

impl Geometry {
    fn new(input: &Tensor, kernel: &Tensor, pad: PadSpec) -> Result<Self> {
        let (batch, channels, height, width) = input.dims4()?;
        let (filters, kc, kh, kw) = kernel.dims4()?;
        if kc != channels {
            return Err(Error::shape(format!(
                "conv2d: input has {channels} channels, kernel expects {kc}"
            )));
        }
        let ph = height + pad.top + pad.bottom;
        let pw = width + pad.left + pad.right;
        if kh == 0 || kw == 0 || kh > ph || kw > pw {
            return Err(Error::shape(format!(
                "conv2d: kernel {kh}x{kw} does not fit padded input {ph}x{pw}"
            )));
        }
        Ok(Geometry {
            batch,
            channels,
            height,
            width,
            filters,
            kh,
            kw,
            out_h: ph - kh + 1,
            out_w: pw - kw + 1,
            pad,
        })
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_sample(&self) -> usize {
        self.channels * self.height * self.width
    }

    fn padded_h(&self) -> usize {
        self.height + self.pad.top + self.pad.bottom
    }

    fn padded_w(&self) -> usize {
        self.width + self.pad.left + self.pad.right
    }

    /// Copy one sample into a zero-padded `C x PH x PW` buffer.
    fn pad_sample(&self, x: &[f64]) -> Vec<f64> {
        let (ph, pw) = (self.padded_h(), self.padded_w());
        let mut out = vec![0.0; self.channels * ph * pw];
        for c in 0..self.channels {
            for y in 0..self.height {
                let src = &x[(c * self.height + y) * self.width..][..self.width];
                let dst = (c * ph + y + self.pad.top) * pw + self.pad.left;
                out[dst..dst + self.width].copy_from_slice(src);
            }
        }
        out
    }
}

/// Stride-1 cross-correlation of `input [B,C,H,W]` with `kernel [F,C,kh,kw]`
/// plus a per-filter `bias [F]`.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: &Tensor, pad: PadSpec) -> Result<Tensor> {
    let g = Geometry::new(input, kernel, pad)?;
    if bias.shape() != [g.filters] {
        return Err(Error::shape(format!(
            "conv2d: bias shape {:?}, expected [{}]",
            bias.shape(),
            g.filters
        )));
    }
    let plane = g.out_plane();
    let mut out = Tensor::zeros(&[g.batch, g.filters, g.out_h, g.out_w]);
    let x = input.data();
    let k = kernel.data();
    let b = bias.data();
    for_each_chunk(out.data_mut(), g.filters * plane, |n, y| {
        let xp = g.pad_sample(&x[n * g.in_sample()..(n + 1) * g.in_sample()]);
        for (f, row) in y.chunks_mut(plane).enumerate() {
            row.fill(b[f]);
        }
        kernels::forward(&g, &xp, k, y);
    });
    Ok(out)
}

/// Backward pass of [`conv2d`]. Per-sample kernel gradients are summed in
/// sample order, so the result does not depend on the thread count.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    pad: PadSpec,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let g = Geometry::new(input, kernel, pad)?;
    let expected = [g.batch, g.filters, g.out_h, g.out_w];
    if grad_out.shape() != expected {
        return Err(Error::shape(format!(
            "conv2d_backward: upstream gradient {:?}, expected {expected:?}",
            grad_out.shape()
        )));
    }
    let plane = g.out_plane();
    let x = input.data();
    let k = kernel.data();
    let gy = grad_out.data();

    // per sample: [input grad | kernel grad | bias grad]
    let (nx, nk) = (g.in_sample(), k.len());
    let stride = nx + nk + g.filters;
    let mut scratch = vec![0.0; g.batch * stride];
    for_each_chunk(&mut scratch, stride, |n, buf| {
        let gy_n = &gy[n * g.filters * plane..(n + 1) * g.filters * plane];
        let xp = g.pad_sample(&x[n * nx..(n + 1) * nx]);
        let (gx, rest) = buf.split_at_mut(nx);
        let (gk, gb) = rest.split_at_mut(nk);
        kernels::backward(&g, &xp, k, gy_n, gk, Some(gx));
        for (b, r) in gb.iter_mut().zip(gy_n.chunks(plane)) {
            *b = r.iter().sum();
        }
    });

    let mut grad_input = Vec::with_capacity(input.len());
    let mut grad_kernel = vec![0.0; nk];
    let mut grad_bias = vec![0.0; g.filters];
    for buf in scratch.chunks(stride) {
        grad_input.extend_from_slice(&buf[..nx]);
        for (a, b) in grad_kernel.iter_mut().zip(&buf[nx..nx + nk]) {
            *a += b;
        }
        for (a, b) in grad_bias.iter_mut().zip(&buf[nx + nk..]) {
            *a += b;
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), grad_input)?,
        kernel: Tensor::new(kernel.shape(), grad_kernel)?,
        bias: Tensor::new(&[g.filters], grad_bias)?,
    })
}

/// Direct convolution loops over padded rows. The bodies are plain
/// multiply-then-add (no fused multiply-add), so the vectorised builds
/// produce the same bits as the baseline build.
mod kernels {
    use super::Geometry;

    /// Plane geometry of a correlation source: `channels` planes of
    /// `height x width`, read starting at `(row0, col0)`.
    struct Src<'a> {
        data: &'a [f64],
        channels: usize,
        height: usize,
        width: usize,
        row0: usize,
        col0: usize,
    }

    /// One `FB` filters by `LN` columns tile of a correlation output row.
    /// The tile's accumulators stay in registers while every source load is
    /// shared by the `FB` filters.
    #[inline(always)]
    fn tile<const FB: usize, const LN: usize>(
        src: &Src,
        w: &[f64],
        kh: usize,
        kw: usize,
        out: &mut [f64],
        (oh, ow): (usize, usize),
        (o0, y, x0): (usize, usize, usize),
    ) {
        let plane = src.height * src.width;
        let wstride = src.channels * kh * kw;
        let mut acc = [[0.0f64; LN]; FB];
        for f in 0..FB {
            acc[f].copy_from_slice(&out[((o0 + f) * oh + y) * ow + x0..][..LN]);
        }
        for c in 0..src.channels {
            for i in 0..kh {
                let base = c * plane + (y + src.row0 + i) * src.width + src.col0 + x0;
                let woff = (o0 * src.channels + c) * kh * kw + i * kw;
                for j in 0..kw {
                    let s: &[f64; LN] = src.data[base + j..base + j + LN].try_into().unwrap();
                    for f in 0..FB {
                        let kv = w[woff + f * wstride + j];
                        for l in 0..LN {
                            acc[f][l] += kv * s[l];
                        }
                    }
                }
            }
        }
        for f in 0..FB {
            out[((o0 + f) * oh + y) * ow + x0..][..LN].copy_from_slice(&acc[f]);
        }
    }

    #[inline(always)]
    fn filter_rows<const FB: usize, const WIDE: usize>(
        src: &Src,
        w: &[f64],
        kh: usize,
        kw: usize,
        out: &mut [f64],
        dims: (usize, usize),
        o0: usize,
    ) {
        let (oh, ow) = dims;
        for y in 0..oh {
            let mut x0 = 0;
            while ow - x0 >= WIDE {
                tile::<FB, WIDE>(src, w, kh, kw, out, dims, (o0, y, x0));
                x0 += WIDE;
            }
            while ow - x0 >= 8 {
                tile::<FB, 8>(src, w, kh, kw, out, dims, (o0, y, x0));
                x0 += 8;
            }
            while x0 < ow {
                tile::<FB, 1>(src, w, kh, kw, out, dims, (o0, y, x0));
                x0 += 1;
            }
        }
    }

    /// `out[o][y][x] += sum_{c,i,j} w[o][c][i][j] * src[c][y + row0 + i][x + col0 + j]`.
    /// Each output element accumulates in `(c, i, j)` order.
    #[inline(always)]
    fn correlate(src: &Src, w: &[f64], kh: usize, kw: usize, out: &mut [f64], oh: usize, ow: usize) {
        let filters = out.len() / (oh * ow);
        let mut o = 0;
        while filters - o >= 4 {
            filter_rows::<4, 8>(src, w, kh, kw, out, (oh, ow), o);
            o += 4;
        }
        while o < filters {
            filter_rows::<1, 32>(src, w, kh, kw, out, (oh, ow), o);
            o += 1;
        }
    }

    /// `gk[j] = sum_{y,x} gy[y][x] * src[y + i][x + j]` for the `KW` taps of
    /// one kernel row, with every tap's partial sums kept in 8 lanes.
    #[inline(always)]
    fn kernel_row<const KW: usize>(gy: &[f64], src: &[f64], pw: usize, oh: usize, ow: usize, i: usize, gk: &mut [f64]) {
        let mut acc = [[0.0f64; 8]; KW];
        let mut tail = [0.0f64; KW];
        let full = ow / 8 * 8;
        for y in 0..oh {
            let g = &gy[y * ow..(y + 1) * ow];
            let s = &src[(y + i) * pw..];
            let mut x = 0;
            while x < full {
                let gv: &[f64; 8] = g[x..x + 8].try_into().unwrap();
                for j in 0..KW {
                    let sv: &[f64; 8] = s[x + j..x + j + 8].try_into().unwrap();
                    for l in 0..8 {
                        acc[j][l] += gv[l] * sv[l];
                    }
                }
                x += 8;
            }
            for x in full..ow {
                for j in 0..KW {
                    tail[j] += g[x] * s[x + j];
                }
            }
        }
        for j in 0..KW {
            let a = &acc[j];
            gk[j] = (((a[0] + a[1]) + (a[2] + a[3])) + ((a[4] + a[5]) + (a[6] + a[7]))) + tail[j];
        }
    }

    #[inline(always)]
    fn kernel_row_any(gy: &[f64], src: &[f64], pw: usize, oh: usize, ow: usize, i: usize, gk: &mut [f64]) {
        for (j, out) in gk.iter_mut().enumerate() {
            let mut acc = 0.0;
            for y in 0..oh {
                let s = &src[(y + i) * pw + j..];
                for x in 0..ow {
                    acc += gy[y * ow + x] * s[x];
                }
            }
            *out = acc;
        }
    }

    #[inline(always)]
    fn forward_impl(g: &Geometry, xp: &[f64], k: &[f64], out: &mut [f64]) {
        let src = Src {
            data: xp,
            channels: g.channels,
            height: g.padded_h(),
            width: g.padded_w(),
            row0: 0,
            col0: 0,
        };
        correlate(&src, k, g.kh, g.kw, out, g.out_h, g.out_w);
    }

    /// Kernel gradient by row correlations; input gradient as a correlation
    /// of the fully padded upstream gradient with the flipped kernel.
    #[inline(always)]
    fn backward_impl(g: &Geometry, xp: &[f64], k: &[f64], gy: &[f64], gk: &mut [f64], gx: Option<&mut [f64]>) {
        let (ph, pw) = (g.padded_h(), g.padded_w());
        let (oh, ow) = (g.out_h, g.out_w);
        let plane = oh * ow;
        for f in 0..g.filters {
            let gyf = &gy[f * plane..(f + 1) * plane];
            for c in 0..g.channels {
                let src = &xp[c * ph * pw..(c + 1) * ph * pw];
                for i in 0..g.kh {
                    let row = &mut gk[((f * g.channels + c) * g.kh + i) * g.kw..][..g.kw];
                    match g.kw {
                        4 => kernel_row::<4>(gyf, src, pw, oh, ow, i, row),
                        3 => kernel_row::<3>(gyf, src, pw, oh, ow, i, row),
                        _ => kernel_row_any(gyf, src, pw, oh, ow, i, row),
                    }
                }
            }
        }

        let Some(gx) = gx else { return };
        let (gh, gw) = (oh + 2 * (g.kh - 1), ow + 2 * (g.kw - 1));
        let mut gyp = vec![0.0; g.filters * gh * gw];
        for f in 0..g.filters {
            for y in 0..oh {
                let dst = (f * gh + y + g.kh - 1) * gw + g.kw - 1;
                gyp[dst..dst + ow].copy_from_slice(&gy[(f * oh + y) * ow..][..ow]);
            }
        }
        let mut flipped = vec![0.0; k.len()];
        for f in 0..g.filters {
            for c in 0..g.channels {
                for i in 0..g.kh {
                    for j in 0..g.kw {
                        flipped[((c * g.filters + f) * g.kh + (g.kh - 1 - i)) * g.kw + (g.kw - 1 - j)] =
                            k[((f * g.channels + c) * g.kh + i) * g.kw + j];
                    }
                }
            }
        }
        let src = Src {
            data: &gyp,
            channels: g.filters,
            height: gh,
            width: gw,
            row0: g.pad.top,
            col0: g.pad.left,
        };
        gx.fill(0.0);
        correlate(&src, &flipped, g.kh, g.kw, gx, g.height, g.width);
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn forward_avx2(g: &Geometry, xp: &[f64], k: &[f64], out: &mut [f64]) {
        forward_impl(g, xp, k, out)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn backward_avx2(g: &Geometry, xp: &[f64], k: &[f64], gy: &[f64], gk: &mut [f64], gx: Option<&mut [f64]>) {
        backward_impl(g, xp, k, gy, gk, gx)
    }

    fn has_avx2() -> bool {
        #[cfg(target_arch = "x86_64")]
        {
            std::is_x86_feature_detected!("avx2")
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            false
        }
    }

    pub(super) fn forward(g: &Geometry, xp: &[f64], k: &[f64], out: &mut [f64]) {
        #[cfg(target_arch = "x86_64")]
        if has_avx2() {
            // SAFETY: the CPU supports AVX2, checked at runtime.
            return unsafe { forward_avx2(g, xp, k, out) };
        }
        forward_impl(g, xp, k, out)
    }

    pub(super) fn backward(g: &Geometry, xp: &[f64], k: &[f64], gy: &[f64], gk: &mut [f64], gx: Option<&mut [f64]>) {
        #[cfg(target_arch = "x86_64")]
        if has_avx2() {
            // SAFETY: the CPU supports AVX2, checked at runtime.
            return unsafe { backward_avx2(g, xp, k, gy, gk, gx) };
        }
        backward_impl(g, xp, k, gy, gk, gx)
    }
}
