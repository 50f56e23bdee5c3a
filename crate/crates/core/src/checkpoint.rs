//! Binary serialization of a training state: parameters, Adam moments and
//! the position of the sampling stream. Restoring a checkpoint and resuming
//! reproduces an uninterrupted run bitwise.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "CASNET01"
//! precision  u8       4 = f32, 8 = f64
//! activation u8       0 = relu, 1 = tanh, 2 = elu
//! dims       4 x u32  input_dim, depth, width, output_dim
//! step       u64      Adam step counter
//! adam       3 x f64  beta1, beta2, epsilon
//! rng        32 bytes key, u64 stream, u128 word position
//! arrays     each as u64 element count + raw values
//! ```
//!
//! Arrays appear as parameters (per layer: weights then bias, the final
//! linear layer has no bias), then the first Adam moments in the same order,
//! then the second moments. Every count is validated against the declared
//! architecture and the remaining buffer before anything is allocated, so a
//! corrupt or hostile file fails cleanly.

use crate::error::{Error, Result};
use crate::neural_net::{Activation, AdamState, Architecture, NetworkParams};
use crate::precision::{Precision, Real};
use crate::rng::RngState;
use ndarray::{Array1, Array2};
use std::path::Path;

const MAGIC: &[u8; 8] = b"CASNET01";
/// Upper bound on any declared dimension; real runs use widths below 10^3.
const MAX_DIM: u32 = 1 << 20;

/// A resumable training state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<F: Real> {
    pub params: NetworkParams<F>,
    pub adam: AdamState<F>,
    pub rng: RngState,
}

/// A decoded checkpoint of either precision.
#[derive(Debug, Clone)]
pub enum AnyCheckpoint {
    Single(Checkpoint<f32>),
    Double(Checkpoint<f64>),
}

fn activation_tag(act: Activation) -> u8 {
    match act {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Elu => 2,
    }
}

fn activation_from_tag(tag: u8) -> Result<Activation> {
    match tag {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Elu),
        other => Err(Error::Checkpoint(format!("unknown activation tag {other}"))),
    }
}

fn push_array2<F: Real>(out: &mut Vec<u8>, a: &Array2<F>) {
    out.extend_from_slice(&(a.len() as u64).to_le_bytes());
    for v in a.iter() {
        v.write_le(out);
    }
}

fn push_array1<F: Real>(out: &mut Vec<u8>, a: &Array1<F>) {
    out.extend_from_slice(&(a.len() as u64).to_le_bytes());
    for v in a.iter() {
        v.write_le(out);
    }
}

/// Serializes a checkpoint to bytes.
pub fn encode<F: Real>(ck: &Checkpoint<F>) -> Vec<u8> {
    let arch = ck.params.arch();
    let (beta1, beta2, epsilon) = ck.adam.hyperparams();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(F::BYTES as u8);
    out.push(activation_tag(arch.activation));
    for dim in [arch.input_dim, arch.depth, arch.width, arch.output_dim] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&ck.adam.step().to_le_bytes());
    out.extend_from_slice(&beta1.to_le_bytes());
    out.extend_from_slice(&beta2.to_le_bytes());
    out.extend_from_slice(&epsilon.to_le_bytes());
    out.extend_from_slice(&ck.rng.key);
    out.extend_from_slice(&ck.rng.stream.to_le_bytes());
    out.extend_from_slice(&ck.rng.word_pos.to_le_bytes());

    let push_param_group = |out: &mut Vec<u8>, weights: &[Array2<F>], biases: &[Array1<F>]| {
        for (l, w) in weights.iter().enumerate() {
            push_array2(out, w);
            if l < biases.len() {
                push_array1(out, &biases[l]);
            }
        }
    };
    push_param_group(&mut out, ck.params.weights(), ck.params.biases());
    let (m_w, v_w) = ck.adam.moment_weights();
    let (m_b, v_b) = ck.adam.moment_biases();
    push_param_group(&mut out, m_w, m_b);
    push_param_group(&mut out, v_w, v_b);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated: wanted {n} bytes at offset {}, {} remain",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn values<F: Real>(&mut self, expected: usize) -> Result<Vec<F>> {
        let declared = self.u64()?;
        if declared != expected as u64 {
            return Err(Error::Checkpoint(format!(
                "array length {declared} does not match architecture ({expected})"
            )));
        }
        let bytes = self.take(expected * F::BYTES)?;
        Ok(bytes.chunks_exact(F::BYTES).map(F::read_le).collect())
    }
}

fn decode_typed<F: Real>(r: &mut Reader<'_>, arch: Architecture) -> Result<Checkpoint<F>> {
    let step = r.u64()?;
    let beta1 = r.f64()?;
    let beta2 = r.f64()?;
    let epsilon = r.f64()?;
    let key: [u8; 32] = r.take(32)?.try_into().unwrap();
    let stream = r.u64()?;
    let word_pos = r.u128()?;

    let read_group = |r: &mut Reader<'_>| -> Result<(Vec<Array2<F>>, Vec<Array1<F>>)> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, (rows, cols)) in arch.weight_shapes().into_iter().enumerate() {
            let w = r.values::<F>(rows * cols)?;
            weights.push(Array2::from_shape_vec((rows, cols), w).expect("checked length"));
            if l < arch.bias_count() {
                let b = r.values::<F>(arch.width)?;
                biases.push(Array1::from_vec(b));
            }
        }
        Ok((weights, biases))
    };

    let (weights, biases) = read_group(r)?;
    let (m_w, m_b) = read_group(r)?;
    let (v_w, v_b) = read_group(r)?;
    if r.pos != r.buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last array",
            r.buf.len() - r.pos
        )));
    }

    let params = NetworkParams::from_parts(arch, weights, biases)
        .map_err(|e| Error::Checkpoint(format!("invalid parameters: {e}")))?;
    let adam = AdamState::from_parts(m_w, v_w, m_b, v_b, step, beta1, beta2, epsilon);
    Ok(Checkpoint { params, adam, rng: RngState { key, stream, word_pos } })
}

/// Parses a checkpoint from bytes, validating structure before allocation.
pub fn decode(bytes: &[u8]) -> Result<AnyCheckpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
    }
    let precision = match r.u8()? {
        4 => Precision::Single,
        8 => Precision::Double,
        other => return Err(Error::Checkpoint(format!("unknown precision tag {other}"))),
    };
    let activation = activation_from_tag(r.u8()?)?;
    let input_dim = r.u32()?;
    let depth = r.u32()?;
    let width = r.u32()?;
    let output_dim = r.u32()?;
    for (name, v) in [("input_dim", input_dim), ("width", width), ("output_dim", output_dim)] {
        if v == 0 {
            return Err(Error::Checkpoint(format!("{name} must be positive")));
        }
    }
    if input_dim > MAX_DIM || depth > MAX_DIM || width > MAX_DIM || output_dim > MAX_DIM {
        return Err(Error::Checkpoint("implausibly large architecture".into()));
    }
    let arch = Architecture {
        input_dim: input_dim as usize,
        depth: depth as usize,
        width: width as usize,
        output_dim: output_dim as usize,
        activation,
    };
    match precision {
        Precision::Single => Ok(AnyCheckpoint::Single(decode_typed::<f32>(&mut r, arch)?)),
        Precision::Double => Ok(AnyCheckpoint::Double(decode_typed::<f64>(&mut r, arch)?)),
    }
}

pub fn save<F: Real>(ck: &Checkpoint<F>, path: &Path) -> Result<()> {
    std::fs::write(path, encode(ck))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<AnyCheckpoint> {
    decode(&std::fs::read(path)?)
}

/// Human-readable view of a checkpoint header.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub precision: Precision,
    pub activation: Activation,
    pub input_dim: usize,
    pub depth: usize,
    pub width: usize,
    pub output_dim: usize,
    pub parameter_count: usize,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}

impl AnyCheckpoint {
    pub fn summary(&self) -> Summary {
        fn of<F: Real>(ck: &Checkpoint<F>, precision: Precision) -> Summary {
            let arch = ck.params.arch();
            let (beta1, beta2, epsilon) = ck.adam.hyperparams();
            Summary {
                precision,
                activation: arch.activation,
                input_dim: arch.input_dim,
                depth: arch.depth,
                width: arch.width,
                output_dim: arch.output_dim,
                parameter_count: arch.parameter_count(),
                step: ck.adam.step(),
                beta1,
                beta2,
                epsilon,
                rng_stream: ck.rng.stream,
                rng_word_pos: ck.rng.word_pos,
            }
        }
        match self {
            AnyCheckpoint::Single(ck) => of(ck, Precision::Single),
            AnyCheckpoint::Double(ck) => of(ck, Precision::Double),
        }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "precision:   {}", self.precision)?;
        writeln!(f, "activation:  {}", self.activation.as_str())?;
        writeln!(
            f,
            "network:     {} -> {} ({} activated layers of width {}) -> {}",
            self.input_dim,
            self.width,
            self.depth + 1,
            self.width,
            self.output_dim
        )?;
        writeln!(f, "parameters:  {}", self.parameter_count)?;
        writeln!(f, "adam step:   {}", self.step)?;
        writeln!(
            f,
            "adam:        beta1 = {}, beta2 = {}, epsilon = {:e}",
            self.beta1, self.beta2, self.epsilon
        )?;
        write!(f, "rng:         stream {} at word {}", self.rng_stream, self.rng_word_pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural_net::{
        adam_step, gradient, init_params, train, Architecture, LrSchedule,
    };
    use crate::rng::{Purpose, RngStream, StreamId};
    use ndarray::{Array1, Array2};
    use rand::{Rng, RngCore};

    fn arch() -> Architecture {
        Architecture {
            input_dim: 2,
            depth: 1,
            width: 5,
            output_dim: 1,
            activation: Activation::Tanh,
        }
    }

    fn make_checkpoint(seed: u64) -> Checkpoint<f64> {
        let a = arch();
        let mut rng = RngStream::from_seed(seed);
        let mut params = init_params::<f64>(a, &mut rng).unwrap();
        let mut adam = AdamState::new(a);
        let pts = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-1.0..1.0));
        let tgt = Array2::from_shape_fn((6, 1), |_| rng.gen_range(-1.0..1.0));
        let w = Array1::ones(6);
        for _ in 0..7 {
            let g = gradient(&params, pts.view(), tgt.view(), w.view()).unwrap();
            adam_step(&mut params, &mut adam, &g, 1e-3).unwrap();
        }
        let mut stream = RngStream::substream(seed, StreamId::new(Purpose::Draw, 1, 0, 1));
        for _ in 0..13 {
            stream.next_u64();
        }
        Checkpoint { params, adam, rng: stream.state() }
    }

    #[test]
    fn round_trips_bitwise_in_double_precision() {
        let ck = make_checkpoint(41);
        let bytes = encode(&ck);
        match decode(&bytes).unwrap() {
            AnyCheckpoint::Double(back) => assert_eq!(back, ck),
            _ => panic!("wrong precision branch"),
        }
    }

    #[test]
    fn round_trips_bitwise_in_single_precision() {
        let a = arch();
        let mut rng = RngStream::from_seed(43);
        let params = init_params::<f32>(a, &mut rng).unwrap();
        let adam = AdamState::<f32>::new(a);
        let ck = Checkpoint { params, adam, rng: rng.state() };
        match decode(&encode(&ck)).unwrap() {
            AnyCheckpoint::Single(back) => assert_eq!(back, ck),
            _ => panic!("wrong precision branch"),
        }
    }

    #[test]
    fn file_round_trip_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let ck = make_checkpoint(44);
        save(&ck, &path).unwrap();
        let loaded = load(&path).unwrap();
        let s = loaded.summary();
        assert_eq!(s.precision, Precision::Double);
        assert_eq!(s.activation, Activation::Tanh);
        assert_eq!((s.input_dim, s.depth, s.width, s.output_dim), (2, 1, 5, 1));
        assert_eq!(s.step, 7);
        assert_eq!(s.parameter_count, arch().parameter_count());
        assert!(s.rng_word_pos > 0);
        let text = s.to_string();
        assert!(text.contains("tanh"));
        assert!(text.contains("adam step:   7"));
    }

    #[test]
    fn rejects_corrupt_input() {
        let ck = make_checkpoint(45);
        let bytes = encode(&ck);

        let mut bad_magic = bytes.clone();
        bad_magic[0] ^= 0xff;
        assert!(matches!(decode(&bad_magic), Err(Error::Checkpoint(_))));

        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(Error::Checkpoint(_))));
        assert!(matches!(decode(&[]), Err(Error::Checkpoint(_))));

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(decode(&trailing), Err(Error::Checkpoint(_))));

        let mut bad_precision = bytes.clone();
        bad_precision[8] = 2;
        assert!(matches!(decode(&bad_precision), Err(Error::Checkpoint(_))));

        let mut bad_activation = bytes.clone();
        bad_activation[9] = 9;
        assert!(matches!(decode(&bad_activation), Err(Error::Checkpoint(_))));

        // Implausible width: header promises more data than any sane file.
        let mut huge = bytes.clone();
        huge[18..22].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode(&huge), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn restart_from_checkpoint_matches_uninterrupted_run() {
        let a = arch();
        let mut rng = RngStream::from_seed(46);
        let pts = Array2::from_shape_fn((10, 2), |_| rng.gen_range(-1.0..1.0));
        let tgt = Array2::from_shape_fn((10, 1), |_| rng.gen_range(-1.0..1.0));
        let w = Array1::ones(10);
        let schedule = LrSchedule::exponential_drop(1e-3, 80, 10.0);

        let mut p_full = init_params::<f64>(a, &mut RngStream::from_seed(47)).unwrap();
        let mut s_full = AdamState::new(a);
        train(&mut p_full, &mut s_full, pts.view(), tgt.view(), w.view(), 80, schedule, 0)
            .unwrap();

        let mut p_half = init_params::<f64>(a, &mut RngStream::from_seed(47)).unwrap();
        let mut s_half = AdamState::new(a);
        train(&mut p_half, &mut s_half, pts.view(), tgt.view(), w.view(), 30, schedule, 0)
            .unwrap();
        let mut draw = RngStream::substream(47, StreamId::new(Purpose::Draw, 1, 0, 2));
        draw.next_u64();
        let ck = Checkpoint { params: p_half, adam: s_half, rng: draw.state() };

        let restored = match decode(&encode(&ck)).unwrap() {
            AnyCheckpoint::Double(ck) => ck,
            _ => panic!("wrong precision"),
        };
        let mut p_rest = restored.params;
        let mut s_rest = restored.adam;
        train(&mut p_rest, &mut s_rest, pts.view(), tgt.view(), w.view(), 50, schedule, 30)
            .unwrap();
        assert_eq!(p_rest, p_full);
        assert_eq!(s_rest, s_full);

        // The resumed sampling stream continues exactly where it stopped.
        let mut resumed = RngStream::restore(&restored.rng);
        assert_eq!(resumed.next_u64(), RngStream::restore(&draw.state()).next_u64());
    }
}
