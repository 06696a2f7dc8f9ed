//! Forward and adjoint kernels behind the graph operations.

use num_complex::Complex;
use rustfft::FftDirection;

use super::scalar::{gemm, Scalar};
use super::tensor::Tensor4;
use crate::spectral::{fft2_in_place, ishift_slice, shift_slice};

/// Unfolds one sample `[cin, h, w]` into `[cin*k*k, h*w]` columns with zero
/// padding `k/2` (same-size output).
pub fn im2col<T: Scalar>(x: &[T], cin: usize, h: usize, w: usize, k: usize, col: &mut [T]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..cin {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * hw..(row + 1) * hw];
                let dx = kx as isize - pad;
                let dy = ky as isize - pad;
                // valid output x range: 0 <= x + dx < w
                let x_lo = (-dx).max(0) as usize;
                let x_hi = ((w as isize - dx).min(w as isize)).max(0) as usize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    let out = &mut dst[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        out.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    out[..x_lo].iter_mut().for_each(|v| *v = T::zero());
                    out[x_hi..].iter_mut().for_each(|v| *v = T::zero());
                    let s0 = (x_lo as isize + dx) as usize;
                    out[x_lo..x_hi].copy_from_slice(&src[s0..s0 + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into `dx`.
pub fn col2im<T: Scalar>(col: &[T], cin: usize, h: usize, w: usize, k: usize, dx: &mut [T]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..cin {
        let plane = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * hw..(row + 1) * hw];
                let dx_off = kx as isize - pad;
                let dy = ky as isize - pad;
                let x_lo = (-dx_off).max(0) as usize;
                let x_hi = ((w as isize - dx_off).min(w as isize)).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s0 = (x_lo as isize + dx_off) as usize;
                    let dst = &mut plane[sy as usize * w + s0..sy as usize * w + s0 + (x_hi - x_lo)];
                    for (d, &s) in dst.iter_mut().zip(&src[y * w + x_lo..y * w + x_hi]) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

/// Same-padded stride-1 convolution. `weight` is `[cout, cin, k, k]`,
/// `bias` is `[cout, 1, 1, 1]`.
pub fn conv2d_forward<T: Scalar>(x: &Tensor4<T>, weight: &Tensor4<T>, bias: &Tensor4<T>) -> Tensor4<T> {
    let [n, cin, h, w] = x.shape();
    let [cout, _, k, _] = weight.shape();
    let hw = h * w;
    let kk = cin * k * k;
    let mut out = Tensor4::zeros([n, cout, h, w]);
    let mut col = if k == 1 { Vec::new() } else { vec![T::zero(); kk * hw] };
    for b in 0..n {
        let dst = out.sample_mut(b);
        for (o, plane) in dst.chunks_mut(hw).enumerate() {
            let bv = bias.data()[o];
            plane.iter_mut().for_each(|v| *v = bv);
        }
        let cols: &[T] = if k == 1 {
            x.sample(b)
        } else {
            im2col(x.sample(b), cin, h, w, k, &mut col);
            &col
        };
        gemm(cout, kk, hw, T::one(), weight.data(), false, cols, false, T::one(), dst);
    }
    out
}

/// Gradients of [`conv2d_forward`]. Returns `(dx, dweight, dbias)`; `dx` is
/// skipped when `need_dx` is false.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &Tensor4<T>,
    dy: &Tensor4<T>,
    need_dx: bool,
    need_dw: bool,
) -> (Option<Tensor4<T>>, Option<Tensor4<T>>, Option<Tensor4<T>>) {
    let [n, cin, h, w] = x.shape();
    let [cout, _, k, _] = weight.shape();
    let hw = h * w;
    let kk = cin * k * k;
    let mut dx = need_dx.then(|| Tensor4::zeros(x.shape()));
    let mut dw = need_dw.then(|| Tensor4::zeros(weight.shape()));
    let mut db = need_dw.then(|| Tensor4::zeros([cout, 1, 1, 1]));
    let mut col = if k == 1 { Vec::new() } else { vec![T::zero(); kk * hw] };
    let mut dcol = if need_dx && k != 1 { vec![T::zero(); kk * hw] } else { Vec::new() };
    for b in 0..n {
        let g = dy.sample(b);
        if let (Some(dw), Some(db)) = (dw.as_mut(), db.as_mut()) {
            let cols: &[T] = if k == 1 {
                x.sample(b)
            } else {
                im2col(x.sample(b), cin, h, w, k, &mut col);
                &col
            };
            // dW += dY (cout x hw) * cols^T (hw x kk)
            gemm(cout, hw, kk, T::one(), g, false, cols, true, T::one(), dw.data_mut());
            for (o, plane) in g.chunks(hw).enumerate() {
                let s: T = plane.iter().copied().sum();
                db.data_mut()[o] = db.data()[o] + s;
            }
        }
        if let Some(dx) = dx.as_mut() {
            if k == 1 {
                gemm(kk, cout, hw, T::one(), weight.data(), true, g, false, T::one(), dx.sample_mut(b));
            } else {
                gemm(kk, cout, hw, T::one(), weight.data(), true, g, false, T::zero(), &mut dcol);
                col2im(&dcol, cin, h, w, k, dx.sample_mut(b));
            }
        }
    }
    (dx, dw, db)
}

/// 2x2 stride-2 transposed convolution. `weight` is `[cin, cout, 2, 2]`.
pub fn tconv2_forward<T: Scalar>(x: &Tensor4<T>, weight: &Tensor4<T>, bias: &Tensor4<T>) -> Tensor4<T> {
    let [n, cin, h, w] = x.shape();
    let cout = weight.shape()[1];
    let hw = h * w;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor4::zeros([n, cout, oh, ow]);
    let mut y4 = vec![T::zero(); cout * 4 * hw];
    for b in 0..n {
        // Y4 (cout*4 x hw) = W^T (cout*4 x cin) * X (cin x hw)
        gemm(cout * 4, cin, hw, T::one(), weight.data(), true, x.sample(b), false, T::zero(), &mut y4);
        let dst = out.sample_mut(b);
        for o in 0..cout {
            let bv = bias.data()[o];
            for a in 0..2 {
                for bb in 0..2 {
                    let src = &y4[(o * 4 + a * 2 + bb) * hw..(o * 4 + a * 2 + bb + 1) * hw];
                    for i in 0..h {
                        let row = &mut dst[(o * oh + 2 * i + a) * ow..(o * oh + 2 * i + a + 1) * ow];
                        for j in 0..w {
                            row[2 * j + bb] = src[i * w + j] + bv;
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn tconv2_backward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &Tensor4<T>,
    dy: &Tensor4<T>,
    need_dx: bool,
    need_dw: bool,
) -> (Option<Tensor4<T>>, Option<Tensor4<T>>, Option<Tensor4<T>>) {
    let [n, cin, h, w] = x.shape();
    let cout = weight.shape()[1];
    let hw = h * w;
    let (oh, ow) = (2 * h, 2 * w);
    let mut dx = need_dx.then(|| Tensor4::zeros(x.shape()));
    let mut dw = need_dw.then(|| Tensor4::zeros(weight.shape()));
    let mut db = need_dw.then(|| Tensor4::zeros([cout, 1, 1, 1]));
    let mut dy4 = vec![T::zero(); cout * 4 * hw];
    for b in 0..n {
        let g = dy.sample(b);
        for o in 0..cout {
            for a in 0..2 {
                for bb in 0..2 {
                    let dst = &mut dy4[(o * 4 + a * 2 + bb) * hw..(o * 4 + a * 2 + bb + 1) * hw];
                    for i in 0..h {
                        let row = &g[(o * oh + 2 * i + a) * ow..(o * oh + 2 * i + a + 1) * ow];
                        for j in 0..w {
                            dst[i * w + j] = row[2 * j + bb];
                        }
                    }
                }
            }
        }
        if let Some(dx) = dx.as_mut() {
            // dX (cin x hw) = W (cin x cout*4) * dY4 (cout*4 x hw)
            gemm(cin, cout * 4, hw, T::one(), weight.data(), false, &dy4, false, T::zero(), dx.sample_mut(b));
        }
        if let (Some(dw), Some(db)) = (dw.as_mut(), db.as_mut()) {
            // dW (cin x cout*4) += X (cin x hw) * dY4^T (hw x cout*4)
            gemm(cin, hw, cout * 4, T::one(), x.sample(b), false, &dy4, true, T::one(), dw.data_mut());
            for o in 0..cout {
                let s: T = g[o * oh * ow..(o + 1) * oh * ow].iter().copied().sum();
                db.data_mut()[o] = db.data()[o] + s;
            }
        }
    }
    (dx, dw, db)
}

/// 2x2 stride-2 convolution sharing the transposed-convolution weight
/// layout `[cout_of_tconv, cin_of_tconv, 2, 2]` read in reverse; this is the
/// adjoint of [`tconv2_forward`] with zero bias.
pub fn conv2_stride2<T: Scalar>(y: &Tensor4<T>, weight: &Tensor4<T>) -> Tensor4<T> {
    let [n, cout, oh, ow] = y.shape();
    let [cin, wc, _, _] = weight.shape();
    assert_eq!(wc, cout);
    let (h, w) = (oh / 2, ow / 2);
    let mut out = Tensor4::zeros([n, cin, h, w]);
    for b in 0..n {
        for c in 0..cin {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = T::zero();
                    for o in 0..cout {
                        for a in 0..2 {
                            for bb in 0..2 {
                                acc = acc + weight.at(c, o, a, bb) * y.at(b, o, 2 * i + a, 2 * j + bb);
                            }
                        }
                    }
                    let idx = out.index(b, c, i, j);
                    out.data_mut()[idx] = acc;
                }
            }
        }
    }
    out
}

/// 2x2 max pooling; returns the output and the flat input index of each max.
pub fn maxpool2_forward<T: Scalar>(x: &Tensor4<T>) -> (Tensor4<T>, Vec<usize>) {
    let [n, c, h, w] = x.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let data = x.data();
    let mut k = 0;
    for b in 0..n {
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let base = x.index(b, ch, 2 * i, 2 * j);
                    let cands = [base, base + 1, base + w, base + w + 1];
                    let mut best = cands[0];
                    for &idx in &cands[1..] {
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                    out.data_mut()[k] = data[best];
                    argmax.push(best);
                    k += 1;
                }
            }
        }
    }
    (out, argmax)
}

/// Normalized 1D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Depthwise separable valid filtering with the same taps on both axes.
pub fn blur_valid_forward<T: Scalar>(x: &Tensor4<T>, taps: &[T]) -> Tensor4<T> {
    let [n, c, h, w] = x.shape();
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let mut tmp = vec![T::zero(); h * ow];
    for b in 0..n {
        for ch in 0..c {
            let src = x.plane(b, ch);
            for y in 0..h {
                for xo in 0..ow {
                    let mut acc = T::zero();
                    for (t, &tap) in taps.iter().enumerate() {
                        acc = acc + tap * src[y * w + xo + t];
                    }
                    tmp[y * ow + xo] = acc;
                }
            }
            let dst = out.plane_mut(b, ch);
            for yo in 0..oh {
                for xo in 0..ow {
                    let mut acc = T::zero();
                    for (t, &tap) in taps.iter().enumerate() {
                        acc = acc + tap * tmp[(yo + t) * ow + xo];
                    }
                    dst[yo * ow + xo] = acc;
                }
            }
        }
    }
    out
}

pub fn blur_valid_backward<T: Scalar>(dy: &Tensor4<T>, taps: &[T], in_shape: [usize; 4]) -> Tensor4<T> {
    let [n, c, h, w] = in_shape;
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut dx = Tensor4::zeros(in_shape);
    let mut tmp = vec![T::zero(); h * ow];
    for b in 0..n {
        for ch in 0..c {
            let g = dy.plane(b, ch);
            tmp.iter_mut().for_each(|v| *v = T::zero());
            for yo in 0..oh {
                for xo in 0..ow {
                    let gv = g[yo * ow + xo];
                    for (t, &tap) in taps.iter().enumerate() {
                        let i = (yo + t) * ow + xo;
                        tmp[i] = tmp[i] + tap * gv;
                    }
                }
            }
            let dst = dx.plane_mut(b, ch);
            for y in 0..h {
                for xo in 0..ow {
                    let gv = tmp[y * ow + xo];
                    for (t, &tap) in taps.iter().enumerate() {
                        let i = y * w + xo + t;
                        dst[i] = dst[i] + tap * gv;
                    }
                }
            }
        }
    }
    dx
}

/// 2x2 average pooling (odd trailing rows/columns dropped).
pub fn avgpool2_forward<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let [n, c, h, w] = x.shape();
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    for b in 0..n {
        for ch in 0..c {
            let src = x.plane(b, ch);
            let dst = out.plane_mut(b, ch);
            for i in 0..oh {
                for j in 0..ow {
                    let s = src[2 * i * w + 2 * j]
                        + src[2 * i * w + 2 * j + 1]
                        + src[(2 * i + 1) * w + 2 * j]
                        + src[(2 * i + 1) * w + 2 * j + 1];
                    dst[i * ow + j] = s * quarter;
                }
            }
        }
    }
    out
}

pub fn avgpool2_backward<T: Scalar>(dy: &Tensor4<T>, in_shape: [usize; 4]) -> Tensor4<T> {
    let [n, c, _, w] = in_shape;
    let [_, _, oh, ow] = dy.shape();
    let quarter = T::of(0.25);
    let mut dx = Tensor4::zeros(in_shape);
    for b in 0..n {
        for ch in 0..c {
            let g = dy.plane(b, ch);
            let dst = dx.plane_mut(b, ch);
            for i in 0..oh {
                for j in 0..ow {
                    let v = g[i * ow + j] * quarter;
                    dst[2 * i * w + 2 * j] = v;
                    dst[2 * i * w + 2 * j + 1] = v;
                    dst[(2 * i + 1) * w + 2 * j] = v;
                    dst[(2 * i + 1) * w + 2 * j + 1] = v;
                }
            }
        }
    }
    dx
}

/// Image `[n, 1, s, s]` to packed spectrum `[n, 2, s, s]` (orthonormal FFT,
/// optionally DC-centered).
pub fn image_to_spectrum<T: Scalar>(x: &Tensor4<T>, shifted: bool) -> Tensor4<T> {
    let [n, _, s, _] = x.shape();
    let mut out = Tensor4::zeros([n, 2, s, s]);
    for b in 0..n {
        let mut buf: Vec<Complex<T>> = x.plane(b, 0).iter().map(|&v| Complex::new(v, T::zero())).collect();
        fft2_in_place(&mut buf, s, FftDirection::Forward);
        if shifted {
            buf = shift_slice(&buf, s);
        }
        write_complex(&mut out, b, &buf);
    }
    out
}

/// Adjoint of [`image_to_spectrum`]: `Re(F^H unshift(g))`.
pub fn image_to_spectrum_backward<T: Scalar>(dy: &Tensor4<T>, shifted: bool) -> Tensor4<T> {
    let [n, _, s, _] = dy.shape();
    let mut dx = Tensor4::zeros([n, 1, s, s]);
    for b in 0..n {
        let mut buf = read_complex(dy, b);
        if shifted {
            buf = ishift_slice(&buf, s);
        }
        fft2_in_place(&mut buf, s, FftDirection::Inverse);
        for (d, c) in dx.plane_mut(b, 0).iter_mut().zip(&buf) {
            *d = c.re;
        }
    }
    dx
}

/// Packed spectrum `[n, 2, s, s]` to the real part of its inverse transform
/// `[n, 1, s, s]`; also returns the largest discarded imaginary magnitude.
pub fn spectrum_to_image<T: Scalar>(z: &Tensor4<T>, shifted: bool) -> (Tensor4<T>, f64) {
    let [n, _, s, _] = z.shape();
    let mut out = Tensor4::zeros([n, 1, s, s]);
    let mut max_imag = 0.0f64;
    for b in 0..n {
        let mut buf = read_complex(z, b);
        if shifted {
            buf = ishift_slice(&buf, s);
        }
        fft2_in_place(&mut buf, s, FftDirection::Inverse);
        for (d, c) in out.plane_mut(b, 0).iter_mut().zip(&buf) {
            *d = c.re;
            max_imag = max_imag.max(c.im.abs().as_f64());
        }
    }
    (out, max_imag)
}

/// Adjoint of [`spectrum_to_image`]: `shift(F g)` packed.
pub fn spectrum_to_image_backward<T: Scalar>(dy: &Tensor4<T>, shifted: bool) -> Tensor4<T> {
    let [n, _, s, _] = dy.shape();
    let mut dz = Tensor4::zeros([n, 2, s, s]);
    for b in 0..n {
        let mut buf: Vec<Complex<T>> = dy.plane(b, 0).iter().map(|&v| Complex::new(v, T::zero())).collect();
        fft2_in_place(&mut buf, s, FftDirection::Forward);
        if shifted {
            buf = shift_slice(&buf, s);
        }
        write_complex(&mut dz, b, &buf);
    }
    dz
}

fn read_complex<T: Scalar>(t: &Tensor4<T>, b: usize) -> Vec<Complex<T>> {
    t.plane(b, 0)
        .iter()
        .zip(t.plane(b, 1))
        .map(|(&re, &im)| Complex::new(re, im))
        .collect()
}

fn write_complex<T: Scalar>(t: &mut Tensor4<T>, b: usize, buf: &[Complex<T>]) {
    for (d, c) in t.plane_mut(b, 0).iter_mut().zip(buf) {
        *d = c.re;
    }
    for (d, c) in t.plane_mut(b, 1).iter_mut().zip(buf) {
        *d = c.im;
    }
}
