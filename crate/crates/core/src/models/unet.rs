use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{init_bias, init_weights, Graph, NodeId, ParamId, ParamStore, Scalar, Tensor4};

/// U-net template: `depth` resolution levels of double 3x3 convolutions,
/// 2x2 max pooling on the way down, 2x2 transposed convolutions and skip
/// concatenations on the way up, and a final 1x1 projection.
///
/// With `residual` set the input is added to the projection and the
/// projection starts at zero, so a fresh network is the identity map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub depth: usize,
    pub base_filters: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    #[serde(default)]
    pub residual: bool,
}

pub const BASE_FILTERS: usize = 64;
pub const CONVS_PER_LEVEL: usize = 2;
const KERNEL: usize = 3;

impl UNetConfig {
    pub fn image(depth: usize) -> Self {
        UNetConfig {
            depth,
            base_filters: BASE_FILTERS,
            in_channels: 1,
            out_channels: 1,
            residual: true,
        }
    }

    pub fn fourier(depth: usize) -> Self {
        UNetConfig {
            depth,
            base_filters: BASE_FILTERS,
            in_channels: 2,
            out_channels: 2,
            residual: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::invalid("U-net depth must be at least 1"));
        }
        if self.base_filters != BASE_FILTERS {
            return Err(Error::invalid(format!(
                "base_filters must be {BASE_FILTERS} (first conv and 1x1 head are pinned), got {}",
                self.base_filters
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::invalid("channel counts must be positive"));
        }
        if self.residual && self.in_channels != self.out_channels {
            return Err(Error::invalid("a residual U-net needs equal input and output channels"));
        }
        Ok(())
    }

    /// Channels at level `l` (0-based).
    pub fn channels(&self, level: usize) -> usize {
        self.base_filters << level
    }

    /// Required divisor of the input height/width.
    pub fn size_divisor(&self) -> usize {
        1 << (self.depth - 1)
    }

    /// Closed-form trainable-scalar count: `k*k*cin*cout + cout` summed over
    /// every layer.
    pub fn param_count(&self) -> usize {
        let layer = |k: usize, cin: usize, cout: usize| k * k * cin * cout + cout;
        let mut total = 0;
        let mut cin = self.in_channels;
        for l in 0..self.depth {
            let c = self.channels(l);
            total += layer(KERNEL, cin, c) + layer(KERNEL, c, c);
            cin = c;
        }
        for l in (0..self.depth - 1).rev() {
            let (c, below) = (self.channels(l), self.channels(l + 1));
            total += layer(2, below, c);
            total += layer(KERNEL, 2 * c, c) + layer(KERNEL, c, c);
        }
        total + layer(1, self.base_filters, self.out_channels)
    }
}

#[derive(Debug, Clone, Copy)]
struct Conv {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct UNet {
    pub config: UNetConfig,
    down: Vec<[Conv; CONVS_PER_LEVEL]>,
    up: Vec<Conv>,
    up_convs: Vec<[Conv; CONVS_PER_LEVEL]>,
    head: Conv,
}

fn add_conv<T: Scalar, R: Rng + ?Sized>(
    store: &mut ParamStore<T>,
    rng: &mut R,
    name: &str,
    k: usize,
    cin: usize,
    cout: usize,
) -> Conv {
    let w = init_weights(cout * cin * k * k, cin * k * k, rng);
    let weight = store.add(
        format!("{name}.weight"),
        Tensor4::from_vec([cout, cin, k, k], w).expect("conv weight shape"),
    );
    let bias = store.add(
        format!("{name}.bias"),
        Tensor4::from_vec([cout, 1, 1, 1], init_bias(cout)).expect("conv bias shape"),
    );
    Conv { weight, bias }
}

fn add_tconv<T: Scalar, R: Rng + ?Sized>(
    store: &mut ParamStore<T>,
    rng: &mut R,
    name: &str,
    cin: usize,
    cout: usize,
) -> Conv {
    // each output pixel sees one tap per input channel
    let w = init_weights(cin * cout * 4, cin, rng);
    let weight = store.add(
        format!("{name}.weight"),
        Tensor4::from_vec([cin, cout, 2, 2], w).expect("tconv weight shape"),
    );
    let bias = store.add(
        format!("{name}.bias"),
        Tensor4::from_vec([cout, 1, 1, 1], init_bias(cout)).expect("tconv bias shape"),
    );
    Conv { weight, bias }
}

impl UNet {
    /// Registers the layers in `store` under `prefix`, drawing initial
    /// weights from `rng` in a fixed order.
    pub fn build<T: Scalar, R: Rng + ?Sized>(
        config: UNetConfig,
        store: &mut ParamStore<T>,
        rng: &mut R,
        prefix: &str,
    ) -> Result<Self> {
        config.validate()?;
        let mut down = Vec::with_capacity(config.depth);
        let mut cin = config.in_channels;
        for l in 0..config.depth {
            let c = config.channels(l);
            down.push([
                add_conv(store, rng, &format!("{prefix}.down{l}.conv0"), KERNEL, cin, c),
                add_conv(store, rng, &format!("{prefix}.down{l}.conv1"), KERNEL, c, c),
            ]);
            cin = c;
        }
        let mut up = Vec::new();
        let mut up_convs = Vec::new();
        for l in (0..config.depth - 1).rev() {
            let (c, below) = (config.channels(l), config.channels(l + 1));
            up.push(add_tconv(store, rng, &format!("{prefix}.up{l}.tconv"), below, c));
            up_convs.push([
                add_conv(store, rng, &format!("{prefix}.up{l}.conv0"), KERNEL, 2 * c, c),
                add_conv(store, rng, &format!("{prefix}.up{l}.conv1"), KERNEL, c, c),
            ]);
        }
        let head = add_conv(
            store,
            rng,
            &format!("{prefix}.head"),
            1,
            config.base_filters,
            config.out_channels,
        );
        if config.residual {
            store.get_mut(head.weight).value.fill(T::zero());
        }
        Ok(UNet {
            config,
            down,
            up,
            up_convs,
            head,
        })
    }

    fn conv<T: Scalar>(g: &mut Graph<T>, store: &ParamStore<T>, c: Conv, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, c.weight);
        let b = g.param(store, c.bias);
        g.conv2d(x, w, b)
    }

    fn double<T: Scalar>(
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        convs: &[Conv; CONVS_PER_LEVEL],
        mut x: NodeId,
    ) -> Result<NodeId> {
        for &c in convs {
            let y = Self::conv(g, store, c, x)?;
            x = g.relu(y);
        }
        Ok(x)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: NodeId) -> Result<NodeId> {
        let [_, c, h, w] = g.value(x).shape();
        if c != self.config.in_channels {
            return Err(Error::shape(format!(
                "U-net expects {} input channels, got {c}",
                self.config.in_channels
            )));
        }
        let div = self.config.size_divisor();
        if h % div != 0 || w % div != 0 {
            return Err(Error::shape(format!(
                "input {h}x{w} is not divisible by {div} (depth {})",
                self.config.depth
            )));
        }
        let mut skips = Vec::with_capacity(self.config.depth);
        let mut cur = x;
        for (l, convs) in self.down.iter().enumerate() {
            if l > 0 {
                cur = g.maxpool2(cur)?;
            }
            cur = Self::double(g, store, convs, cur)?;
            skips.push(cur);
        }
        skips.pop();
        for (tconv, convs) in self.up.iter().zip(&self.up_convs) {
            let w = g.param(store, tconv.weight);
            let b = g.param(store, tconv.bias);
            let upsampled = g.transpose_conv2(cur, w, b)?;
            let skip = skips.pop().expect("one skip per decoder level");
            let merged = g.concat_channels(skip, upsampled)?;
            cur = Self::double(g, store, convs, merged)?;
        }
        let out = Self::conv(g, store, self.head, cur)?;
        if self.config.residual {
            g.add(out, x)
        } else {
            Ok(out)
        }
    }
}

/// Builds a standalone U-net with its own parameter store.
pub fn build_unet<T: Scalar, R: Rng + ?Sized>(
    config: UNetConfig,
    rng: &mut R,
) -> Result<(UNet, ParamStore<T>)> {
    let mut store = ParamStore::new();
    let net = UNet::build(config, &mut store, rng, "stage0")?;
    Ok((net, store))
}
