//! Versioned text checkpoints made of key-length-value blocks.
//!
//! ```text
//! GDU-CHECKPOINT 1
//! <key> <payload byte length>
//! <payload>
//! <key> <payload byte length>
//! <payload>
//! ```
//!
//! Every payload is followed by a single `\n`. Scalars are written with the
//! shortest representation that parses back to the same value, vectors as
//! `len v_0 .. v_{len-1}` and matrices as `rows cols v_00 v_01 ..` (row-major),
//! all space separated. Reading a written checkpoint reproduces every value
//! bit for bit.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use crate::error::{GduError, Result};
use crate::kernel::KernelConfig;
use crate::layer::{DomainBasis, GatingMode, GduLayer, LearningMachine};
use crate::scalar::Scalar;

pub const MAGIC: &str = "GDU-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Default)]
pub struct CheckpointWriter {
    buf: String,
}

impl CheckpointWriter {
    pub fn new() -> Self {
        Self {
            buf: format!("{MAGIC} {FORMAT_VERSION}\n"),
        }
    }

    pub fn text(&mut self, key: &str, value: &str) {
        assert!(
            !key.is_empty() && !key.contains(char::is_whitespace),
            "checkpoint keys are single tokens"
        );
        self.buf.push_str(&format!("{key} {}\n", value.len()));
        self.buf.push_str(value);
        self.buf.push('\n');
    }

    pub fn scalar<T: Scalar>(&mut self, key: &str, v: T) {
        self.text(key, &v.to_string());
    }

    pub fn usize(&mut self, key: &str, v: usize) {
        self.text(key, &v.to_string());
    }

    pub fn vector<T: Scalar>(&mut self, key: &str, v: &Array1<T>) {
        let mut s = v.len().to_string();
        for x in v.iter() {
            s.push(' ');
            s.push_str(&x.to_string());
        }
        self.text(key, &s);
    }

    pub fn matrix<T: Scalar>(&mut self, key: &str, m: &Array2<T>) {
        let mut s = format!("{} {}", m.nrows(), m.ncols());
        for x in m.iter() {
            s.push(' ');
            s.push_str(&x.to_string());
        }
        self.text(key, &s);
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

#[derive(Debug)]
pub struct CheckpointReader {
    blocks: BTreeMap<String, (usize, String)>,
}

fn parse_num<V: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<V> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| GduError::parse(line, format!("invalid {what}")))
}

impl CheckpointReader {
    pub fn parse(input: &str) -> Result<Self> {
        let header_end = input
            .find('\n')
            .ok_or_else(|| GduError::parse(1, "missing header"))?;
        let header = &input[..header_end];
        let mut parts = header.split(' ');
        if parts.next() != Some(MAGIC) {
            return Err(GduError::parse(1, "not a checkpoint file"));
        }
        let version: u32 = parse_num(parts.next(), 1, "format version")?;
        if version != FORMAT_VERSION {
            return Err(GduError::parse(
                1,
                format!("unsupported format version {version}"),
            ));
        }
        let mut rest = &input[header_end + 1..];
        let mut line = 2;
        let mut blocks = BTreeMap::new();
        while !rest.is_empty() {
            let nl = rest
                .find('\n')
                .ok_or_else(|| GduError::parse(line, "truncated block header"))?;
            let mut head = rest[..nl].split(' ');
            let key = head
                .next()
                .filter(|k| !k.is_empty())
                .ok_or_else(|| GduError::parse(line, "missing key"))?
                .to_string();
            let len: usize = parse_num(head.next(), line, "payload length")?;
            let body = &rest[nl + 1..];
            if body.len() < len + 1 || !body.is_char_boundary(len) || &body[len..len + 1] != "\n" {
                return Err(GduError::parse(
                    line,
                    format!("payload of `{key}` is truncated"),
                ));
            }
            let payload = body[..len].to_string();
            let payload_lines = payload.matches('\n').count();
            if blocks.insert(key.clone(), (line, payload)).is_some() {
                return Err(GduError::parse(line, format!("duplicate key `{key}`")));
            }
            line += 2 + payload_lines;
            rest = &body[len + 1..];
        }
        Ok(Self { blocks })
    }

    pub fn has(&self, key: &str) -> bool {
        self.blocks.contains_key(key)
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        self.blocks
            .get(key)
            .map(|(_, p)| p.as_str())
            .ok_or_else(|| GduError::parse(0, format!("missing key `{key}`")))
    }

    fn line_of(&self, key: &str) -> usize {
        self.blocks.get(key).map(|(l, _)| *l).unwrap_or(0)
    }

    pub fn scalar<T: Scalar>(&self, key: &str) -> Result<T> {
        let line = self.line_of(key);
        parse_num(Some(self.text(key)?), line, key)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let line = self.line_of(key);
        parse_num(Some(self.text(key)?), line, key)
    }

    pub fn vector<T: Scalar>(&self, key: &str) -> Result<Array1<T>> {
        let line = self.line_of(key);
        let mut toks = self.text(key)?.split(' ');
        let len: usize = parse_num(toks.next(), line, "vector length")?;
        let values = toks
            .map(|t| parse_num::<T>(Some(t), line, key))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != len {
            return Err(GduError::parse(
                line,
                format!("`{key}` declares {len} values, has {}", values.len()),
            ));
        }
        Ok(Array1::from(values))
    }

    pub fn matrix<T: Scalar>(&self, key: &str) -> Result<Array2<T>> {
        let line = self.line_of(key);
        let mut toks = self.text(key)?.split(' ');
        let rows: usize = parse_num(toks.next(), line, "row count")?;
        let cols: usize = parse_num(toks.next(), line, "column count")?;
        let values = toks
            .map(|t| parse_num::<T>(Some(t), line, key))
            .collect::<Result<Vec<_>>>()?;
        Array2::from_shape_vec((rows, cols), values).map_err(|_| {
            GduError::parse(line, format!("`{key}` does not hold {rows}x{cols} values"))
        })
    }
}

pub(crate) fn write_machine<T: Scalar>(
    w: &mut CheckpointWriter,
    prefix: &str,
    f: &LearningMachine<T>,
) {
    w.matrix(&format!("{prefix}.weights"), &f.weights);
    w.vector(&format!("{prefix}.bias"), &f.bias);
    w.text(&format!("{prefix}.activation"), &f.activation.to_string());
}

pub(crate) fn read_machine<T: Scalar>(
    r: &CheckpointReader,
    prefix: &str,
) -> Result<LearningMachine<T>> {
    LearningMachine::new(
        r.matrix(&format!("{prefix}.weights"))?,
        r.vector(&format!("{prefix}.bias"))?,
        r.text(&format!("{prefix}.activation"))?.parse()?,
    )
}

pub(crate) fn write_layer<T: Scalar>(w: &mut CheckpointWriter, prefix: &str, layer: &GduLayer<T>) {
    w.text(&format!("{prefix}.mode"), &layer.mode().to_string());
    w.scalar(&format!("{prefix}.sigma"), layer.kernel().sigma());
    w.scalar(&format!("{prefix}.kappa"), layer.kappa());
    w.usize(&format!("{prefix}.m"), layer.num_bases());
    for (j, b) in layer.bases().iter().enumerate() {
        w.matrix(&format!("{prefix}.basis.{j}"), &b.vectors().to_owned());
    }
    for (j, f) in layer.machines().iter().enumerate() {
        write_machine(w, &format!("{prefix}.machine.{j}"), f);
    }
}

pub(crate) fn read_layer<T: Scalar>(r: &CheckpointReader, prefix: &str) -> Result<GduLayer<T>> {
    let mode: GatingMode = r.text(&format!("{prefix}.mode"))?.parse()?;
    let sigma: T = r.scalar(&format!("{prefix}.sigma"))?;
    let kappa: T = r.scalar(&format!("{prefix}.kappa"))?;
    let m = r.usize(&format!("{prefix}.m"))?;
    let bases = (0..m)
        .map(|j| DomainBasis::new(r.matrix(&format!("{prefix}.basis.{j}"))?))
        .collect::<Result<Vec<_>>>()?;
    let machines = (0..m)
        .map(|j| read_machine(r, &format!("{prefix}.machine.{j}")))
        .collect::<Result<Vec<_>>>()?;
    GduLayer::new(bases, machines, KernelConfig::new(sigma)?, mode, kappa)
}

impl<T: Scalar> GduLayer<T> {
    pub fn to_checkpoint(&self) -> String {
        let mut w = CheckpointWriter::new();
        write_layer(&mut w, "layer", self);
        w.finish()
    }

    pub fn from_checkpoint(input: &str) -> Result<Self> {
        read_layer(&CheckpointReader::parse(input)?, "layer")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{Activation, LayerShape};
    use proptest::prelude::*;

    fn random_layer(seed: u64, mode: GatingMode) -> GduLayer<f64> {
        GduLayer::init_layer(
            LayerShape {
                m: 3,
                n: 4,
                e: 5,
                c: 2,
            },
            seed,
            mode,
            KernelConfig::new(1.7).unwrap(),
            2.0,
            Activation::Tanh,
        )
        .unwrap()
    }

    fn bits(layer: &GduLayer<f64>) -> Vec<u64> {
        let mut out = vec![layer.kernel().sigma().to_bits(), layer.kappa().to_bits()];
        for b in layer.bases() {
            out.extend(b.vectors().iter().map(|v| v.to_bits()));
        }
        for f in layer.machines() {
            out.extend(f.weights.iter().map(|v| v.to_bits()));
            out.extend(f.bias.iter().map(|v| v.to_bits()));
        }
        out
    }

    proptest! {
        #[test]
        fn layer_round_trip_is_bit_exact(seed in 0u64..10_000, mode_idx in 0usize..3) {
            let layer = random_layer(seed, GatingMode::ALL[mode_idx]);
            let text = layer.to_checkpoint();
            let back = GduLayer::<f64>::from_checkpoint(&text).unwrap();
            prop_assert_eq!(bits(&layer), bits(&back));
            prop_assert_eq!(back.mode(), layer.mode());
            prop_assert_eq!(back.to_checkpoint(), text);
        }

        #[test]
        fn extreme_values_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let mut w = CheckpointWriter::new();
            w.scalar("x", v);
            let r = CheckpointReader::parse(&w.finish()).unwrap();
            prop_assert_eq!(r.scalar::<f64>("x").unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn single_precision_round_trip() {
        let layer = GduLayer::<f32>::init_layer(
            LayerShape {
                m: 2,
                n: 3,
                e: 4,
                c: 2,
            },
            3,
            GatingMode::Cs,
            KernelConfig::new(0.9).unwrap(),
            2.0,
            Activation::Identity,
        )
        .unwrap();
        let back = GduLayer::<f32>::from_checkpoint(&layer.to_checkpoint()).unwrap();
        assert_eq!(back, layer);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(CheckpointReader::parse("nope 1\n").is_err());
        assert!(CheckpointReader::parse("GDU-CHECKPOINT 2\n").is_err());
        assert!(CheckpointReader::parse("GDU-CHECKPOINT 1\nx 10\nabc\n").is_err());
        assert!(CheckpointReader::parse("GDU-CHECKPOINT 1\nx 1\na\nx 1\nb\n").is_err());
        let r = CheckpointReader::parse("GDU-CHECKPOINT 1\nm 9\n2 2 1 2 3\n").unwrap();
        assert!(r.matrix::<f64>("m").is_err());
        assert!(r.text("missing").is_err());
    }

    #[test]
    fn multi_line_payloads() {
        let mut w = CheckpointWriter::new();
        w.text("note", "two\nlines");
        w.usize("n", 4);
        let r = CheckpointReader::parse(&w.finish()).unwrap();
        assert_eq!(r.text("note").unwrap(), "two\nlines");
        assert_eq!(r.usize("n").unwrap(), 4);
    }
}
