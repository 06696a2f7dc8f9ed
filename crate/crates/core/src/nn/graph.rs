//! Define-by-run tape with reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the tape in reverse from a scalar root, accumulating gradients into
//! every node that (transitively) depends on a variable or parameter leaf.

use super::kernels;
use super::params::{ParamId, ParamStore};
use super::scalar::Scalar;
use super::tensor::Tensor4;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Input,
    Variable,
    Param(ParamId),
    Conv2d { x: NodeId, w: NodeId, b: NodeId },
    TransposeConv2 { x: NodeId, w: NodeId, b: NodeId },
    MaxPool2 { x: NodeId, argmax: Vec<usize> },
    Relu { x: NodeId },
    Concat { a: NodeId, b: NodeId },
    ToSpectrum { x: NodeId, shifted: bool },
    FromSpectrum { x: NodeId, shifted: bool },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Div { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: T },
    AddScalar { x: NodeId },
    Abs { x: NodeId },
    Pow { x: NodeId, p: T },
    ClampMin { x: NodeId, floor: T },
    Blur { x: NodeId, taps: Vec<T> },
    AvgPool2 { x: NodeId },
    SpatialMean { x: NodeId },
    MeanAll { x: NodeId },
    SumAll { x: NodeId },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor4<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Recorded computation for one forward pass.
#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor4<T>>>,
    /// Largest imaginary residual discarded by any inverse-FFT bridge.
    max_bridge_imag: f64,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
            max_bridge_imag: 0.0,
        }
    }

    fn push(&mut self, value: Tensor4<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, id: NodeId) -> &Tensor4<T> {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> T {
        self.nodes[id.0].value.data()[0]
    }

    pub fn max_bridge_imag(&self) -> f64 {
        self.max_bridge_imag
    }

    /// Frozen input: never receives a gradient.
    pub fn input(&mut self, value: Tensor4<T>) -> NodeId {
        self.push(value, Op::Input, false)
    }

    /// Differentiable leaf whose gradient can be read back with [`Graph::grad`].
    pub fn variable(&mut self, value: Tensor4<T>) -> NodeId {
        self.push(value, Op::Variable, true)
    }

    /// Leaf bound to a trainable parameter.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> NodeId {
        self.push(store.get(id).value.clone(), Op::Param(id), true)
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        let k = ws[2];
        if k % 2 == 0 || ws[3] != k {
            return Err(Error::shape(format!("conv kernel must be odd and square, got {ws:?}")));
        }
        if ws[1] != xs[1] {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {}",
                ws[1], xs[1]
            )));
        }
        if bs != [ws[0], 1, 1, 1] {
            return Err(Error::shape(format!("conv bias shape {bs:?} does not match {ws:?}")));
        }
        let out = kernels::conv2d_forward(self.value(x), self.value(w), self.value(b));
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(out, Op::Conv2d { x, w, b }, rg))
    }

    pub fn transpose_conv2(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if ws[2] != 2 || ws[3] != 2 || ws[0] != xs[1] {
            return Err(Error::shape(format!(
                "transpose conv weight {ws:?} incompatible with input {xs:?}"
            )));
        }
        if bs != [ws[1], 1, 1, 1] {
            return Err(Error::shape(format!("transpose conv bias shape {bs:?}")));
        }
        let out = kernels::tconv2_forward(self.value(x), self.value(w), self.value(b));
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(out, Op::TransposeConv2 { x, w, b }, rg))
    }

    pub fn maxpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let [_, _, h, w] = self.value(x).shape();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape(format!("maxpool needs even spatial dims, got {h}x{w}")));
        }
        let (out, argmax) = kernels::maxpool2_forward(self.value(x));
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::MaxPool2 { x, argmax }, rg))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(|v| v.max(T::zero()));
        let rg = self.rg(&[x]);
        self.push(out, Op::Relu { x }, rg)
    }

    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3] {
            return Err(Error::shape(format!("concat of {sa:?} and {sb:?}")));
        }
        let [n, ca, h, w] = sa;
        let cb = sb[1];
        let mut data = Vec::with_capacity(n * (ca + cb) * h * w);
        for i in 0..n {
            data.extend_from_slice(self.value(a).sample(i));
            data.extend_from_slice(self.value(b).sample(i));
        }
        let out = Tensor4::from_vec([n, ca + cb, h, w], data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Concat { a, b }, rg))
    }

    /// Image `[n, 1, s, s]` to packed spectrum `[n, 2, s, s]`.
    pub fn to_spectrum(&mut self, x: NodeId, shifted: bool) -> Result<NodeId> {
        let [_, c, h, w] = self.value(x).shape();
        if c != 1 || h != w {
            return Err(Error::shape(format!(
                "spectrum bridge needs square single-channel input, got {c}x{h}x{w}"
            )));
        }
        let out = kernels::image_to_spectrum(self.value(x), shifted);
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::ToSpectrum { x, shifted }, rg))
    }

    /// Packed spectrum `[n, 2, s, s]` to the real image `[n, 1, s, s]`.
    pub fn from_spectrum(&mut self, x: NodeId, shifted: bool) -> Result<NodeId> {
        let [_, c, h, w] = self.value(x).shape();
        if c != 2 || h != w {
            return Err(Error::shape(format!(
                "inverse bridge needs a square 2-channel spectrum, got {c}x{h}x{w}"
            )));
        }
        let (out, imag) = kernels::spectrum_to_image(self.value(x), shifted);
        if imag > crate::spectral::IMAG_WARN_THRESHOLD {
            log::debug!("inverse bridge discarded imaginary residual {imag:.3e}");
        }
        self.max_bridge_imag = self.max_bridge_imag.max(imag);
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::FromSpectrum { x, shifted }, rg))
    }

    fn binary(&mut self, a: NodeId, b: NodeId, name: &str, f: impl Fn(T, T) -> T) -> Result<Tensor4<T>> {
        same_shape(self.value(a), self.value(b), name)?;
        Ok(self.value(a).zip_map(self.value(b), f))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub { a, b }, rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul { a, b }, rg))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.binary(a, b, "div", |x, y| x / y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Div { a, b }, rg))
    }

    pub fn scale(&mut self, x: NodeId, c: T) -> NodeId {
        let out = self.value(x).map(|v| v * c);
        let rg = self.rg(&[x]);
        self.push(out, Op::Scale { x, c }, rg)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: T) -> NodeId {
        let out = self.value(x).map(|v| v + c);
        let rg = self.rg(&[x]);
        self.push(out, Op::AddScalar { x }, rg)
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(|v| v.abs());
        let rg = self.rg(&[x]);
        self.push(out, Op::Abs { x }, rg)
    }

    /// Elementwise `x^p` for positive inputs.
    pub fn pow(&mut self, x: NodeId, p: T) -> NodeId {
        let out = self.value(x).map(|v| v.powf(p));
        let rg = self.rg(&[x]);
        self.push(out, Op::Pow { x, p }, rg)
    }

    pub fn clamp_min(&mut self, x: NodeId, floor: T) -> NodeId {
        let out = self.value(x).map(|v| v.max(floor));
        let rg = self.rg(&[x]);
        self.push(out, Op::ClampMin { x, floor }, rg)
    }

    /// Depthwise separable valid filtering with `taps` along both axes.
    pub fn blur(&mut self, x: NodeId, taps: &[T]) -> Result<NodeId> {
        let [_, _, h, w] = self.value(x).shape();
        if taps.len() > h || taps.len() > w {
            return Err(Error::shape(format!(
                "{}-tap window exceeds {h}x{w} input",
                taps.len()
            )));
        }
        let out = kernels::blur_valid_forward(self.value(x), taps);
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Blur { x, taps: taps.to_vec() }, rg))
    }

    pub fn avgpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let [_, _, h, w] = self.value(x).shape();
        if h < 2 || w < 2 {
            return Err(Error::shape("avgpool needs at least 2x2 input"));
        }
        let out = kernels::avgpool2_forward(self.value(x));
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::AvgPool2 { x }, rg))
    }

    /// Mean over height and width: `[n, c, h, w] -> [n, c, 1, 1]`.
    pub fn spatial_mean(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let [n, c, h, w] = v.shape();
        let inv = T::of(1.0 / (h * w) as f64);
        let mut out = Tensor4::zeros([n, c, 1, 1]);
        for b in 0..n {
            for ch in 0..c {
                let s: T = v.plane(b, ch).iter().copied().sum();
                out.data_mut()[b * c + ch] = s * inv;
            }
        }
        let rg = self.rg(&[x]);
        self.push(out, Op::SpatialMean { x }, rg)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let m = v.sum() / T::of(v.numel() as f64);
        let rg = self.rg(&[x]);
        self.push(Tensor4::scalar(m), Op::MeanAll { x }, rg)
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).sum();
        let rg = self.rg(&[x]);
        self.push(Tensor4::scalar(s), Op::SumAll { x }, rg)
    }

    fn accumulate(&mut self, id: NodeId, g: Tensor4<T>) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut self.grads[id.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Reverse-mode sweep from a scalar `root`.
    ///
    /// Afterwards [`Graph::grad`] returns gradients of variable and parameter
    /// leaves; intermediate gradients are released as they are consumed.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.value(root).numel() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.needs(root) {
            return Ok(());
        }
        self.grads[root.0] = Some(Tensor4::full(self.value(root).shape(), T::one()));
        for i in (0..=root.0).rev() {
            let is_leaf = matches!(self.nodes[i].op, Op::Input | Op::Variable | Op::Param(_));
            if is_leaf {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            let op = self.nodes[i].op.clone();
            self.backward_op(i, op, g);
        }
        Ok(())
    }

    fn backward_op(&mut self, i: usize, op: Op<T>, g: Tensor4<T>) {
        match op {
            Op::Input | Op::Variable | Op::Param(_) => {}
            Op::Conv2d { x, w, b } => {
                let (dx, dw, db) = kernels::conv2d_backward(
                    self.value(x),
                    self.value(w),
                    &g,
                    self.needs(x),
                    self.needs(w) || self.needs(b),
                );
                if let Some(dx) = dx {
                    self.accumulate(x, dx);
                }
                if let (Some(dw), Some(db)) = (dw, db) {
                    self.accumulate(w, dw);
                    self.accumulate(b, db);
                }
            }
            Op::TransposeConv2 { x, w, b } => {
                let (dx, dw, db) = kernels::tconv2_backward(
                    self.value(x),
                    self.value(w),
                    &g,
                    self.needs(x),
                    self.needs(w) || self.needs(b),
                );
                if let Some(dx) = dx {
                    self.accumulate(x, dx);
                }
                if let (Some(dw), Some(db)) = (dw, db) {
                    self.accumulate(w, dw);
                    self.accumulate(b, db);
                }
            }
            Op::MaxPool2 { x, argmax } => {
                let mut dx = Tensor4::zeros(self.value(x).shape());
                for (k, &idx) in argmax.iter().enumerate() {
                    dx.data_mut()[idx] = dx.data()[idx] + g.data()[k];
                }
                self.accumulate(x, dx);
            }
            Op::Relu { x } => {
                let out = &self.nodes[i].value;
                let dx = g.zip_map(out, |gv, o| if o > T::zero() { gv } else { T::zero() });
                self.accumulate(x, dx);
            }
            Op::Concat { a, b } => {
                let [n, ca, h, w] = self.value(a).shape();
                let cb = self.value(b).shape()[1];
                let (pa, pb) = (ca * h * w, cb * h * w);
                if self.needs(a) {
                    let mut da = Vec::with_capacity(n * pa);
                    for s in 0..n {
                        da.extend_from_slice(&g.sample(s)[..pa]);
                    }
                    self.accumulate(a, Tensor4::from_vec([n, ca, h, w], da).expect("concat grad"));
                }
                if self.needs(b) {
                    let mut db = Vec::with_capacity(n * pb);
                    for s in 0..n {
                        db.extend_from_slice(&g.sample(s)[pa..]);
                    }
                    self.accumulate(b, Tensor4::from_vec([n, cb, h, w], db).expect("concat grad"));
                }
            }
            Op::ToSpectrum { x, shifted } => {
                let dx = kernels::image_to_spectrum_backward(&g, shifted);
                self.accumulate(x, dx);
            }
            Op::FromSpectrum { x, shifted } => {
                let dz = kernels::spectrum_to_image_backward(&g, shifted);
                self.accumulate(x, dz);
            }
            Op::Add { a, b } => {
                if self.needs(b) {
                    self.accumulate(b, g.clone());
                }
                self.accumulate(a, g);
            }
            Op::Sub { a, b } => {
                if self.needs(b) {
                    self.accumulate(b, g.map(|v| -v));
                }
                self.accumulate(a, g);
            }
            Op::Mul { a, b } => {
                if self.needs(a) {
                    let da = g.zip_map(self.value(b), |gv, bv| gv * bv);
                    self.accumulate(a, da);
                }
                if self.needs(b) {
                    let db = g.zip_map(self.value(a), |gv, av| gv * av);
                    self.accumulate(b, db);
                }
            }
            Op::Div { a, b } => {
                if self.needs(a) {
                    let da = g.zip_map(self.value(b), |gv, bv| gv / bv);
                    self.accumulate(a, da);
                }
                if self.needs(b) {
                    // d(a/b)/db = -(a/b) / b
                    let out = &self.nodes[i].value;
                    let q = out.zip_map(self.value(b), |o, bv| o / bv);
                    let db = g.zip_map(&q, |gv, qv| -gv * qv);
                    self.accumulate(b, db);
                }
            }
            Op::Scale { x, c } => self.accumulate(x, g.map(|v| v * c)),
            Op::AddScalar { x } => self.accumulate(x, g),
            Op::Abs { x } => {
                let dx = g.zip_map(self.value(x), |gv, xv| {
                    if xv > T::zero() {
                        gv
                    } else if xv < T::zero() {
                        -gv
                    } else {
                        T::zero()
                    }
                });
                self.accumulate(x, dx);
            }
            Op::Pow { x, p } => {
                let pm1 = p - T::one();
                let dx = g.zip_map(self.value(x), |gv, xv| gv * p * xv.powf(pm1));
                self.accumulate(x, dx);
            }
            Op::ClampMin { x, floor } => {
                let dx = g.zip_map(self.value(x), |gv, xv| if xv > floor { gv } else { T::zero() });
                self.accumulate(x, dx);
            }
            Op::Blur { x, taps } => {
                let dx = kernels::blur_valid_backward(&g, &taps, self.value(x).shape());
                self.accumulate(x, dx);
            }
            Op::AvgPool2 { x } => {
                let dx = kernels::avgpool2_backward(&g, self.value(x).shape());
                self.accumulate(x, dx);
            }
            Op::SpatialMean { x } => {
                let shape = self.value(x).shape();
                let [_, c, h, w] = shape;
                let inv = T::of(1.0 / (h * w) as f64);
                let mut dx = Tensor4::zeros(shape);
                for (k, &gv) in g.data().iter().enumerate() {
                    let (b, ch) = (k / c, k % c);
                    dx.plane_mut(b, ch).iter_mut().for_each(|v| *v = gv * inv);
                }
                self.accumulate(x, dx);
            }
            Op::MeanAll { x } => {
                let shape = self.value(x).shape();
                let n: usize = shape.iter().product();
                let gv = g.data()[0] / T::of(n as f64);
                self.accumulate(x, Tensor4::full(shape, gv));
            }
            Op::SumAll { x } => {
                let shape = self.value(x).shape();
                self.accumulate(x, Tensor4::full(shape, g.data()[0]));
            }
        }
    }

    /// Gradient of the last `backward` root with respect to a leaf.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor4<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Adds parameter-leaf gradients into the store's gradient buffers.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore<T>) {
        for (node, grad) in self.nodes.iter().zip(&self.grads) {
            if let (Op::Param(pid), Some(g)) = (&node.op, grad) {
                store.get_mut(*pid).grad.add_assign(g);
            }
        }
    }
}
