use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::unet::{UNet, UNetConfig};
use crate::error::{Error, Result};
use crate::nn::{Graph, NodeId, ParamStore, Scalar, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Image,
    Fourier,
}

impl Domain {
    pub fn letter(self) -> char {
        match self {
            Domain::Image => 'I',
            Domain::Fourier => 'F',
        }
    }
}

/// The six cascades: single-stage U-nets and two-stage W-nets, named by the
/// domains of their stages in processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    I,
    F,
    II,
    FF,
    FI,
    IF,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::I,
        Variant::F,
        Variant::II,
        Variant::FF,
        Variant::FI,
        Variant::IF,
    ];

    pub fn domains(self) -> &'static [Domain] {
        use Domain::{Fourier as F, Image as I};
        match self {
            Variant::I => &[I],
            Variant::F => &[F],
            Variant::II => &[I, I],
            Variant::FF => &[F, F],
            Variant::FI => &[F, I],
            Variant::IF => &[I, F],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::I => "I",
            Variant::F => "F",
            Variant::II => "II",
            Variant::FF => "FF",
            Variant::FI => "FI",
            Variant::IF => "IF",
        }
    }

    /// Display label, e.g. "FI W-net".
    pub fn label(self) -> String {
        let kind = if self.domains().len() == 1 { "U-net" } else { "W-net" };
        format!("{} {kind}", self.name())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s
            .trim()
            .trim_end_matches("U-net")
            .trim_end_matches("W-net")
            .trim()
            .to_ascii_uppercase();
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown network variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub domain: Domain,
    pub config: UNetConfig,
}

/// Fixed transform between consecutive representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bridge {
    Identity,
    /// fft2 then pack into real/imaginary channels.
    ToFourier,
    /// unpack then ifft2, keeping the real part.
    ToImage,
}

fn bridge_between(from: Domain, to: Domain) -> Bridge {
    match (from, to) {
        (Domain::Image, Domain::Fourier) => Bridge::ToFourier,
        (Domain::Fourier, Domain::Image) => Bridge::ToImage,
        _ => Bridge::Identity,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WNetSpec {
    pub variant: Variant,
    pub stages: Vec<StageSpec>,
    /// Spectra are DC-centered before entering a Fourier stage.
    pub shifted: bool,
}

impl WNetSpec {
    pub fn new(variant: Variant, depth: usize) -> Self {
        let stages = variant
            .domains()
            .iter()
            .map(|&domain| StageSpec {
                domain,
                config: match domain {
                    Domain::Image => UNetConfig::image(depth),
                    Domain::Fourier => UNetConfig::fourier(depth),
                },
            })
            .collect();
        WNetSpec {
            variant,
            stages,
            shifted: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let domains: Vec<Domain> = self.stages.iter().map(|s| s.domain).collect();
        if domains != self.variant.domains() {
            return Err(Error::invalid(format!(
                "stages {domains:?} do not match variant {}",
                self.variant
            )));
        }
        for s in &self.stages {
            s.config.validate()?;
            let channels = match s.domain {
                Domain::Image => 1,
                Domain::Fourier => 2,
            };
            if s.config.in_channels != channels || s.config.out_channels != channels {
                return Err(Error::invalid(format!(
                    "{:?} stage must map {channels} channels to {channels}",
                    s.domain
                )));
            }
        }
        Ok(())
    }

    /// Bridges in order: before each stage, then after the last one.
    pub fn bridges(&self) -> Vec<Bridge> {
        let mut out = Vec::with_capacity(self.stages.len() + 1);
        let mut current = Domain::Image;
        for s in &self.stages {
            out.push(bridge_between(current, s.domain));
            current = s.domain;
        }
        out.push(bridge_between(current, Domain::Image));
        out
    }

    pub fn size_divisor(&self) -> usize {
        self.stages.iter().map(|s| s.config.size_divisor()).max().unwrap_or(1)
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(|s| s.config.param_count()).sum()
    }
}

/// Per-stage outputs in stage order, each tagged with its domain.
#[derive(Debug, Clone)]
pub struct StageOutputs {
    pub entries: Vec<(Domain, NodeId)>,
}

/// A composed cascade with its own parameters.
#[derive(Debug, Clone)]
pub struct Network<T> {
    pub spec: WNetSpec,
    pub stages: Vec<UNet>,
    pub params: ParamStore<T>,
}

/// Builds every stage independently (no weight sharing) from one seed.
pub fn compose<T: Scalar>(spec: &WNetSpec, seed: u64) -> Result<Network<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let stages = spec
        .stages
        .iter()
        .enumerate()
        .map(|(i, s)| UNet::build(s.config, &mut params, &mut rng, &format!("stage{i}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Network {
        spec: spec.clone(),
        stages,
        params,
    })
}

pub fn param_count<T: Scalar>(network: &Network<T>) -> usize {
    network.params.scalar_count()
}

impl<T: Scalar> Network<T> {
    fn apply_bridge(&self, g: &mut Graph<T>, bridge: Bridge, x: NodeId) -> Result<NodeId> {
        match bridge {
            Bridge::Identity => Ok(x),
            Bridge::ToFourier => g.to_spectrum(x, self.spec.shifted),
            Bridge::ToImage => g.from_spectrum(x, self.spec.shifted),
        }
    }

    /// Records the cascade on `g` for an image batch `[n, 1, s, s]`.
    pub fn forward(&self, g: &mut Graph<T>, input: NodeId) -> Result<(NodeId, StageOutputs)> {
        let [_, c, h, w] = g.value(input).shape();
        if c != 1 || h != w {
            return Err(Error::shape(format!(
                "network input must be [n, 1, s, s], got c={c}, {h}x{w}"
            )));
        }
        let div = self.spec.size_divisor();
        if h % div != 0 {
            return Err(Error::shape(format!(
                "input size {h} is not divisible by {div}"
            )));
        }
        let bridges = self.spec.bridges();
        let mut entries = Vec::with_capacity(self.stages.len());
        let mut cur = input;
        for (i, stage) in self.stages.iter().enumerate() {
            cur = self.apply_bridge(g, bridges[i], cur)?;
            cur = stage.forward(g, &self.params, cur)?;
            entries.push((self.spec.stages[i].domain, cur));
        }
        let out = self.apply_bridge(g, bridges[self.stages.len()], cur)?;
        Ok((out, StageOutputs { entries }))
    }

    /// Evaluation-time inference: output clamped to `[0, 1]`. Also returns
    /// the largest imaginary residual discarded by an inverse bridge.
    pub fn enhance(&self, batch: &Tensor4<T>) -> Result<(Tensor4<T>, f64)> {
        let mut g = Graph::new();
        let x = g.input(batch.clone());
        let (out, _) = self.forward(&mut g, x)?;
        let clamped = g.value(out).map(|v| v.max(T::zero()).min(T::one()));
        Ok((clamped, g.max_bridge_imag()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_parse() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
        }
        assert!("FX".parse::<Variant>().is_err());
    }

    #[test]
    fn bridges_follow_domains() {
        use Bridge::*;
        let b = |v| WNetSpec::new(v, 1).bridges();
        assert_eq!(b(Variant::I), vec![Identity, Identity]);
        assert_eq!(b(Variant::F), vec![ToFourier, ToImage]);
        assert_eq!(b(Variant::FI), vec![ToFourier, ToImage, Identity]);
        assert_eq!(b(Variant::IF), vec![Identity, ToFourier, ToImage]);
        assert_eq!(b(Variant::FF), vec![ToFourier, Identity, ToImage]);
        assert_eq!(b(Variant::II), vec![Identity, Identity, Identity]);
    }

    #[test]
    fn mismatched_stage_spec_rejected() {
        let mut spec = WNetSpec::new(Variant::FI, 1);
        spec.stages.swap(0, 1);
        assert!(compose::<f32>(&spec, 0).is_err());
    }
}
