//! Binary model files.
//!
//! ```text
//! "KANF"                      4 bytes
//! version                     u32
//! spec length                 u32, then that many bytes of JSON (0 = none)
//! layer count                 u32
//! per layer:
//!   kind tag                  u8   (0 = KAN, 1 = layernorm, 2 = linear)
//!   KAN:       family u8 (0 = spline, 1 = rbf), in u32, out u32,
//!              lo f64, hi f64, grid size u32, order u32, bandwidth f64,
//!              weights out × (in · basis count) f64
//!   layernorm: dim u32, epsilon f64, gain dim f64, bias dim f64
//!   linear:    in u32, out u32, weights out × in f64, bias out f64
//! ```
//!
//! Every integer and float is little-endian. Floats are stored bit-exactly,
//! so a loaded network reproduces the saved one's outputs exactly.

use std::path::Path;

use super::{Network, NetworkSpec};
use crate::basis::{BSplineBasis, Basis, GaussianRbfBasis, GridSpec};
use crate::error::{KanError, Result};
use crate::layers::{KanLayer, Layer, LayerNorm, LinearLayer};
use crate::tensor::Matrix;

pub const MODEL_MAGIC: &[u8; 4] = b"KANF";
pub const MODEL_FORMAT_VERSION: u32 = 1;

const TAG_KAN: u8 = 0;
const TAG_LAYERNORM: u8 = 1;
const TAG_LINEAR: u8 = 2;

const FAMILY_SPLINE: u8 = 0;
const FAMILY_RBF: u8 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
}

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MODEL_MAGIC);
    w.u32(MODEL_FORMAT_VERSION as usize);
    let spec = net
        .spec()
        .map(|s| serde_json::to_vec(s).expect("spec serializes"))
        .unwrap_or_default();
    w.u32(spec.len());
    w.0.extend_from_slice(&spec);
    w.u32(net.layers().len());
    for layer in net.layers() {
        match layer {
            Layer::Kan(l) => {
                w.u8(TAG_KAN);
                let (family, bandwidth) = match l.basis() {
                    Basis::BSpline(_) => (FAMILY_SPLINE, 0.0),
                    Basis::Rbf(b) => (FAMILY_RBF, b.bandwidth()),
                };
                let grid = l.basis().grid();
                w.u8(family);
                w.u32(l.in_dim());
                w.u32(l.out_dim());
                w.f64(grid.lo);
                w.f64(grid.hi);
                w.u32(grid.size);
                w.u32(grid.order);
                w.f64(bandwidth);
                w.f64s(l.weights().as_slice());
            }
            Layer::LayerNorm(l) => {
                w.u8(TAG_LAYERNORM);
                w.u32(l.dim());
                w.f64(l.epsilon());
                w.f64s(l.gain());
                w.f64s(l.bias());
            }
            Layer::Linear(l) => {
                w.u8(TAG_LINEAR);
                w.u32(l.in_dim());
                w.u32(l.out_dim());
                w.f64s(l.weights().as_slice());
                w.f64s(l.bias());
            }
        }
    }
    w.0
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(net)).map_err(|e| KanError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(format!(
                "truncated while reading {what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )),
        }
    }

    fn u8(&mut self, what: &str) -> std::result::Result<u8, String> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> std::result::Result<usize, String> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self, what: &str) -> std::result::Result<f64, String> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| format!("{what}: declared size {n} overflows"))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn read_layer(r: &mut Reader<'_>, index: usize) -> std::result::Result<Layer, String> {
    let ctx = |what: &str| format!("layer {index} {what}");
    match r.u8(&ctx("kind tag"))? {
        TAG_KAN => {
            let family = r.u8(&ctx("family"))?;
            let in_dim = r.u32(&ctx("in_dim"))?;
            let out_dim = r.u32(&ctx("out_dim"))?;
            let lo = r.f64(&ctx("grid lo"))?;
            let hi = r.f64(&ctx("grid hi"))?;
            let size = r.u32(&ctx("grid size"))?;
            let order = r.u32(&ctx("order"))?;
            let bandwidth = r.f64(&ctx("bandwidth"))?;
            let grid = GridSpec::new(lo, hi, size, order)
                .map_err(|e| format!("layer {index} (kan): {e}"))?;
            let basis = match family {
                FAMILY_SPLINE => Basis::BSpline(BSplineBasis::new(grid)),
                FAMILY_RBF => Basis::Rbf(
                    GaussianRbfBasis::with_bandwidth(grid, bandwidth)
                        .map_err(|e| format!("layer {index} (rbf_kan): {e}"))?,
                ),
                other => return Err(format!("layer {index}: unknown basis family {other}")),
            };
            let kind = if family == FAMILY_SPLINE { "spline_kan" } else { "rbf_kan" };
            if in_dim == 0 || out_dim == 0 {
                return Err(format!("layer {index} ({kind}): declared shape {in_dim} -> {out_dim}"));
            }
            let width = in_dim * crate::basis::BasisFamily::count(&basis);
            let data = r.f64s(out_dim * width, &ctx("weights"))?;
            let weights = Matrix::from_vec(out_dim, width, data).map_err(|e| e.to_string())?;
            KanLayer::with_weights(in_dim, basis, weights)
                .map(Layer::Kan)
                .map_err(|e| format!("layer {index} ({kind}): {e}"))
        }
        TAG_LAYERNORM => {
            let dim = r.u32(&ctx("dim"))?;
            if dim == 0 {
                return Err(format!("layer {index} (layernorm): declared dim 0"));
            }
            let epsilon = r.f64(&ctx("epsilon"))?;
            let gain = r.f64s(dim, &ctx("gain"))?;
            let bias = r.f64s(dim, &ctx("bias"))?;
            LayerNorm::with_params(gain, bias, epsilon)
                .map(Layer::LayerNorm)
                .map_err(|e| format!("layer {index} (layernorm): {e}"))
        }
        TAG_LINEAR => {
            let in_dim = r.u32(&ctx("in_dim"))?;
            let out_dim = r.u32(&ctx("out_dim"))?;
            if in_dim == 0 || out_dim == 0 {
                return Err(format!("layer {index} (linear): declared shape {in_dim} -> {out_dim}"));
            }
            let data = r.f64s(out_dim * in_dim, &ctx("weights"))?;
            let bias = r.f64s(out_dim, &ctx("bias"))?;
            let weights = Matrix::from_vec(out_dim, in_dim, data).map_err(|e| e.to_string())?;
            LinearLayer::with_params(weights, bias)
                .map(Layer::Linear)
                .map_err(|e| format!("layer {index} (linear): {e}"))
        }
        other => Err(format!("layer {index}: unknown kind tag {other}")),
    }
}

pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Network, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MODEL_MAGIC {
        return Err("not a model file (bad magic)".into());
    }
    let version = r.u32("version")?;
    if version != MODEL_FORMAT_VERSION as usize {
        return Err(format!(
            "unsupported format version {version} (expected {MODEL_FORMAT_VERSION})"
        ));
    }
    let spec_len = r.u32("spec length")?;
    let spec = if spec_len == 0 {
        None
    } else {
        let raw = r.take(spec_len, "spec")?;
        Some(
            serde_json::from_slice::<NetworkSpec>(raw)
                .map_err(|e| format!("invalid embedded spec: {e}"))?,
        )
    };
    let count = r.u32("layer count")?;
    if count == 0 {
        return Err("model declares no layers".into());
    }
    let mut layers = Vec::with_capacity(count.min(1024));
    for index in 0..count {
        let layer = read_layer(&mut r, index)?;
        if let Some(prev) = layers.last().map(|l: &Layer| l.out_dim()) {
            if prev != layer.in_dim() {
                return Err(format!(
                    "layer {index} ({}) declares input width {} but layer {} outputs {prev}",
                    layer.kind(),
                    layer.in_dim(),
                    index - 1
                ));
            }
        }
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes after last layer", bytes.len() - r.pos));
    }
    if let Some(s) = &spec {
        let first = layers[0].in_dim();
        let last = layers[layers.len() - 1].out_dim();
        if s.widths.first() != Some(&first) || s.widths.last() != Some(&last) {
            return Err(format!(
                "embedded spec widths {:?} disagree with layers ({first} -> {last})",
                s.widths
            ));
        }
    }
    Ok(Network::from_layers(layers)
        .map_err(|e| e.to_string())?
        .with_spec(spec))
}

pub fn load(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| KanError::io(path, e))?;
    from_bytes(&bytes).map_err(|msg| KanError::format(path, msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Family;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_net() -> Network {
        Network::build(&NetworkSpec::new(&[3, 5, 2], Family::Rbf).with_seed(17)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_fn(6, 3, |_, _| rng.gen_range(-2.0..2.0));
        for net in [
            sample_net(),
            Network::build(&NetworkSpec::new(&[3, 4, 2], Family::Spline)).unwrap(),
        ] {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.kanf");
            save(&net, &path).unwrap();
            let loaded = load(&path).unwrap();
            assert_eq!(loaded.predict(&x).unwrap(), net.predict(&x).unwrap());
            assert_eq!(loaded.spec(), net.spec());
        }
    }

    #[test]
    fn linear_layers_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::from_layers(vec![
            Layer::LayerNorm(LayerNorm::new(3)),
            Layer::Linear(LinearLayer::new(3, 2, &mut rng).unwrap()),
        ])
        .unwrap();
        let back = from_bytes(&to_bytes(&net)).unwrap();
        let x = Matrix::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        assert_eq!(back.predict(&x).unwrap(), net.predict(&x).unwrap());
        assert!(back.spec().is_none());
    }

    #[test]
    fn truncation_anywhere_is_a_format_error() {
        let bytes = to_bytes(&sample_net());
        for cut in [0, 3, 4, 9, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.kanf");
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load(&path), Err(KanError::Format { .. })));
    }

    #[test]
    fn bad_version_and_magic() {
        let mut bytes = to_bytes(&sample_net());
        bytes[4] = 9;
        assert!(from_bytes(&bytes).unwrap_err().contains("version"));
        bytes[0] = b'X';
        assert!(from_bytes(&bytes).unwrap_err().contains("magic"));
    }
}
