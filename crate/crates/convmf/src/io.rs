//! Binary kernel-file format.
//!
//! A kernel file records everything needed to reproduce and verify a
//! generated convolution kernel: a fixed-layout header (format version,
//! spatial size 𝕜, channel counts, gain, the RNG algorithm name and seed
//! that produced the kernel, and the construction kind) followed by the
//! kernel payload as row-major 64-bit little-endian floats in index order
//! [β, β′, i, j] (spatial row, spatial column, input channel, output
//! channel).
//!
//! The format is bit-exact: write → read → write reproduces the original
//! byte stream, and the declared shape must match the payload length
//! exactly (truncated or oversized files are rejected).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::ConvKernel;

/// Leading magic bytes of a kernel file.
const MAGIC: &[u8; 8] = b"CONVKRNL";

/// Format version written by this crate.
pub const FORMAT_VERSION: u32 = 1;

/// How a stored kernel was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Norm-preserving kernel from the block-convolution construction.
    Orthogonal,
    /// Orthogonal kernel concentrated on the center tap.
    Delta,
    /// Independent Gaussian taps.
    Gaussian,
}

impl KernelKind {
    /// Stable one-byte tag used in the binary header.
    fn as_byte(self) -> u8 {
        match self {
            KernelKind::Orthogonal => 0,
            KernelKind::Delta => 1,
            KernelKind::Gaussian => 2,
        }
    }

    fn from_byte(byte: u8) -> Result<Self> {
        match byte {
            0 => Ok(KernelKind::Orthogonal),
            1 => Ok(KernelKind::Delta),
            2 => Ok(KernelKind::Gaussian),
            other => Err(Error::Format(format!("unknown kernel kind tag {other}"))),
        }
    }

    /// Lowercase name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Orthogonal => "orthogonal",
            KernelKind::Delta => "delta",
            KernelKind::Gaussian => "gaussian",
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(KernelKind::Orthogonal),
            "delta" => Ok(KernelKind::Delta),
            "gaussian" => Ok(KernelKind::Gaussian),
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel kind '{other}' (expected orthogonal, delta, or gaussian)"
            ))),
        }
    }
}

/// A convolution kernel together with the provenance header that lets a
/// reader regenerate or verify it.
#[derive(Debug, Clone)]
pub struct KernelFile {
    /// Construction kind.
    pub kind: KernelKind,
    /// Gain applied to the center tap (1 unless the kernel is a scaled
    /// Delta-Orthogonal construction).
    pub gain: f64,
    /// Name of the RNG algorithm that produced the kernel (e.g. "chacha8").
    pub rng_algorithm: String,
    /// Seed the kernel was drawn from.
    pub seed: u64,
    /// The kernel payload.
    pub kernel: ConvKernel,
}

impl KernelFile {
    /// Assemble a kernel file record.
    ///
    /// The RNG algorithm name must be short (≤ 255 bytes) ASCII.
    pub fn new(
        kind: KernelKind,
        gain: f64,
        rng_algorithm: &str,
        seed: u64,
        kernel: ConvKernel,
    ) -> Result<Self> {
        if rng_algorithm.is_empty()
            || rng_algorithm.len() > 255
            || !rng_algorithm.is_ascii()
        {
            return Err(Error::InvalidParameter(
                "RNG algorithm name must be nonempty ASCII of at most 255 bytes".into(),
            ));
        }
        if !gain.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gain must be finite, got {gain}"
            )));
        }
        Ok(Self {
            kind,
            gain,
            rng_algorithm: rng_algorithm.to_owned(),
            seed,
            kernel,
        })
    }

    /// Serialize to a writer. The byte stream is a pure function of the
    /// record contents.
    pub fn write_to<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(MAGIC)?;
        writer.write_all(&FORMAT_VERSION.to_le_bytes())?;
        writer.write_all(&[self.kind.as_byte()])?;
        writer.write_all(&(self.kernel.k_size() as u32).to_le_bytes())?;
        writer.write_all(&(self.kernel.c_in() as u32).to_le_bytes())?;
        writer.write_all(&(self.kernel.c_out() as u32).to_le_bytes())?;
        writer.write_all(&self.gain.to_le_bytes())?;
        writer.write_all(&[self.rng_algorithm.len() as u8])?;
        writer.write_all(self.rng_algorithm.as_bytes())?;
        writer.write_all(&self.seed.to_le_bytes())?;
        // Payload: [β, β′, i, j] row-major. Slices are stored in row-major
        // tap order already, so iterate taps then entries.
        for slice in self.kernel.slices() {
            for i in 0..self.kernel.c_in() {
                for j in 0..self.kernel.c_out() {
                    writer.write_all(&slice[(i, j)].to_le_bytes())?;
                }
            }
        }
        writer.flush()?;
        Ok(())
    }

    /// Deserialize from a reader, validating the header and that the
    /// payload length matches the declared shape exactly.
    pub fn read_from<R: Read>(reader: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(reader, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Format("not a kernel file (bad magic)".into()));
        }
        let version = read_u32(reader, "format version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let kind = KernelKind::from_byte(read_u8(reader, "kernel kind")?)?;
        let k_size = read_u32(reader, "kernel size")? as usize;
        let c_in = read_u32(reader, "input channels")? as usize;
        let c_out = read_u32(reader, "output channels")? as usize;
        let gain = f64::from_le_bytes(read_8(reader, "gain")?);
        let alg_len = read_u8(reader, "algorithm name length")? as usize;
        let mut alg = vec![0u8; alg_len];
        read_exact(reader, &mut alg, "algorithm name")?;
        let rng_algorithm = String::from_utf8(alg)
            .map_err(|_| Error::Format("RNG algorithm name is not UTF-8".into()))?;
        let seed = u64::from_le_bytes(read_8(reader, "seed")?);

        if k_size == 0 || c_in == 0 || c_out == 0 {
            return Err(Error::Format(format!(
                "declared shape 𝕜={k_size}, c_in={c_in}, c_out={c_out} is degenerate"
            )));
        }
        let mut slices = Vec::with_capacity(k_size * k_size);
        for _ in 0..k_size * k_size {
            let mut slice = DMatrix::<f64>::zeros(c_in, c_out);
            for i in 0..c_in {
                for j in 0..c_out {
                    slice[(i, j)] = f64::from_le_bytes(read_8(reader, "kernel payload")?);
                }
            }
            slices.push(slice);
        }
        // The payload must end exactly where the shape says it does.
        let mut probe = [0u8; 1];
        match reader.read(&mut probe)? {
            0 => {}
            _ => {
                return Err(Error::Format(
                    "trailing bytes after the declared payload".into(),
                ))
            }
        }

        let kernel = ConvKernel::new(k_size, c_in, c_out, slices)
            .map_err(|e| Error::Format(format!("declared shape is inconsistent: {e}")))?;
        if !gain.is_finite() {
            return Err(Error::Format(format!("gain must be finite, got {gain}")));
        }
        Ok(Self {
            kind,
            gain,
            rng_algorithm,
            seed,
            kernel,
        })
    }

    /// Write to a file path.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        self.write_to(&mut writer)
    }

    /// Read from a file path.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        Self::read_from(&mut reader)
    }
}

fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|_| Error::Format(format!("kernel file truncated while reading {what}")))
}

fn read_u8<R: Read>(reader: &mut R, what: &str) -> Result<u8> {
    let mut buf = [0u8; 1];
    read_exact(reader, &mut buf, what)?;
    Ok(buf[0])
}

fn read_u32<R: Read>(reader: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(reader, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_8<R: Read>(reader: &mut R, what: &str) -> Result<[u8; 8]> {
    let mut buf = [0u8; 8];
    read_exact(reader, &mut buf, what)?;
    Ok(buf)
}
