//! Windowed datasets and their on-disk format.
//!
//! Little-endian layout:
//!
//! ```text
//! "CKAN"  u32 version
//! u32 n_h  u32 n_v  u32 n_r  u32 K  f64 f_c  f64 delta_f  f64 dt
//! u32 T  u32 L  u64 count
//! count x { history (T*K*A complex) , future (L*K*A complex) }
//! ```
//!
//! Complex payloads are interleaved `(re, im)` f64 pairs in row-major
//! `(time, subcarrier, antenna pair)` order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampler::{kmh_to_mps, sample_clusters, ClusterProfile};
use super::window::{add_noise, windows_from, WindowedSample};
use super::{generate_sequence, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{ComplexTensor, Tensor};

pub const DATASET_MAGIC: &[u8; 4] = b"CKAN";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system: SystemConfig,
    pub history_len: usize,
    pub horizon: usize,
    pub samples: Vec<WindowedSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// How to synthesise one dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub velocity_kmh: f64,
    /// Noise level on the histories; `None` leaves them clean.
    pub snr_db: Option<f64>,
    pub windows: usize,
    /// Windows cut from each independent channel realisation.
    pub windows_per_sequence: usize,
    pub stride: usize,
    pub history_len: usize,
    pub horizon: usize,
    pub profile: ClusterProfile,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            velocity_kmh: 60.0,
            snr_db: Some(10.0),
            windows: 800,
            windows_per_sequence: 1,
            stride: 2,
            history_len: 16,
            horizon: 4,
            profile: ClusterProfile::default(),
        }
    }
}

impl DatasetSpec {
    pub fn sequence_len(&self) -> usize {
        self.history_len + self.horizon + (self.windows_per_sequence.max(1) - 1) * self.stride
    }
}

/// Generates `spec.windows` samples. Sequence `i` of a split draws from its own
/// ChaCha stream `(split << 32) | i` under `seed`, so splits never share a
/// channel realisation and any single sequence can be regenerated alone.
pub fn generate_dataset(
    spec: &DatasetSpec,
    system: &SystemConfig,
    seed: u64,
    split: u32,
) -> Result<Dataset> {
    system.validate()?;
    if spec.windows_per_sequence == 0 || spec.stride == 0 {
        return Err(Error::Config("windows_per_sequence and stride must be >= 1".into()));
    }
    let snr = spec.snr_db.unwrap_or(f64::INFINITY);
    let velocity = kmh_to_mps(spec.velocity_kmh);
    let mut samples = Vec::with_capacity(spec.windows);
    let mut seq_idx: u64 = 0;
    while samples.len() < spec.windows {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((u64::from(split) << 32) | seq_idx);
        seq_idx += 1;
        let per_ue = (0..system.n_r)
            .map(|_| sample_clusters(velocity, system, &spec.profile, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let clean = generate_sequence(&per_ue, system, spec.sequence_len())?;
        let noisy = add_noise(&clean, snr, &mut rng)?;
        let windows = windows_from(&noisy, &clean, spec.history_len, spec.horizon, spec.stride)?;
        let need = spec.windows - samples.len();
        samples.extend(windows.into_iter().take(need));
    }
    Ok(Dataset {
        system: system.clone(),
        history_len: spec.history_len,
        horizon: spec.horizon,
        samples,
    })
}

/// Window counts of the three splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train: 800,
            val: 100,
            test: 100,
        }
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

/// Train, validation and test sets of one condition, drawn as splits 0, 1
/// and 2 under the same seed.
pub fn generate_splits(
    spec: &DatasetSpec,
    sizes: &SplitSizes,
    system: &SystemConfig,
    seed: u64,
) -> Result<[Dataset; 3]> {
    let make = |windows: usize, split: u32| {
        generate_dataset(&DatasetSpec { windows, ..spec.clone() }, system, seed, split)
    };
    Ok([make(sizes.train, 0)?, make(sizes.val, 1)?, make(sizes.test, 2)?])
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    let s = &dataset.system;
    for v in [s.n_h, s.n_v, s.n_r, s.subcarriers] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for v in [s.carrier_hz, s.subcarrier_spacing_hz, s.frame_interval_s] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(dataset.history_len as u32).to_le_bytes())?;
    w.write_all(&(dataset.horizon as u32).to_le_bytes())?;
    w.write_all(&(dataset.samples.len() as u64).to_le_bytes())?;
    for sample in &dataset.samples {
        write_complex(&mut w, &sample.history)?;
        write_complex(&mut w, &sample.future)?;
    }
    w.flush()?;
    Ok(())
}

fn write_complex(w: &mut impl Write, x: &ComplexTensor) -> Result<()> {
    for (r, i) in x.re.data().iter().zip(x.im.data()) {
        w.write_all(&r.to_le_bytes())?;
        w.write_all(&i.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let mut r = Reader::new(&bytes);
    let magic = r.take(4).map_err(|_| Error::MalformedHeader("file shorter than magic".into()))?;
    if magic != DATASET_MAGIC {
        return Err(Error::MalformedHeader(format!(
            "bad magic {magic:?}, expected {DATASET_MAGIC:?}"
        )));
    }
    let header = |e: Error| match e {
        Error::Truncated(m) => Error::MalformedHeader(format!("header cut short: {m}")),
        other => other,
    };
    let version = r.u32().map_err(header)?;
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let system = SystemConfig {
        n_h: r.u32().map_err(header)? as usize,
        n_v: r.u32().map_err(header)? as usize,
        n_r: r.u32().map_err(header)? as usize,
        subcarriers: r.u32().map_err(header)? as usize,
        carrier_hz: r.f64().map_err(header)?,
        subcarrier_spacing_hz: r.f64().map_err(header)?,
        frame_interval_s: r.f64().map_err(header)?,
    };
    system
        .validate()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let history_len = r.u32().map_err(header)? as usize;
    let horizon = r.u32().map_err(header)? as usize;
    let count = r.u64().map_err(header)?;
    if history_len == 0 || horizon == 0 {
        return Err(Error::MalformedHeader("zero window length".into()));
    }
    let (k, a) = (system.subcarriers, system.pairs());
    let per_sample = 16 * (history_len + horizon) * k * a;
    let expected = (count as usize)
        .checked_mul(per_sample)
        .ok_or_else(|| Error::MalformedHeader(format!("implausible sample count {count}")))?;
    if r.remaining() < expected {
        return Err(Error::Truncated(format!(
            "{count} samples need {expected} payload bytes, found {}",
            r.remaining()
        )));
    }
    if r.remaining() > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after payload",
            r.remaining() - expected
        )));
    }
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let history = r.complex(&[history_len, k, a])?;
        let future = r.complex(&[horizon, k, a])?;
        samples.push(WindowedSample { history, future });
    }
    Ok(Dataset {
        system,
        history_len,
        horizon,
        samples,
    })
}

/// Writes a `key = value` text sidecar next to a dataset file.
pub fn write_metadata(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(k);
        text.push_str(" = ");
        text.push_str(v);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated(format!(
                "needed {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn complex(&mut self, shape: &[usize]) -> Result<ComplexTensor> {
        let n: usize = shape.iter().product();
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for _ in 0..n {
            re.push(self.f64()?);
            im.push(self.f64()?);
        }
        ComplexTensor::new(Tensor::new(shape.to_vec(), re)?, Tensor::new(shape.to_vec(), im)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> DatasetSpec {
        DatasetSpec {
            windows: 5,
            windows_per_sequence: 2,
            history_len: 4,
            horizon: 2,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn generates_requested_window_count() {
        let ds = generate_dataset(&small_spec(), &SystemConfig::desk(), 1, 0).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.samples[0].history.shape(), &[4, 4, 2]);
        assert_eq!(ds.samples[0].future.shape(), &[2, 4, 2]);
    }

    #[test]
    fn splits_draw_distinct_realisations() {
        let a = generate_dataset(&small_spec(), &SystemConfig::desk(), 1, 0).unwrap();
        let b = generate_dataset(&small_spec(), &SystemConfig::desk(), 1, 1).unwrap();
        assert_ne!(a.samples[0], b.samples[0]);
    }

    #[test]
    fn corrupted_magic_is_malformed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let ds = generate_dataset(&small_spec(), &SystemConfig::desk(), 1, 0).unwrap();
        save_dataset(&ds, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn truncated_and_version_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let ds = generate_dataset(&small_spec(), &SystemConfig::desk(), 1, 0).unwrap();
        save_dataset(&ds, &path).unwrap();
        let bytes = fs::read(&path).unwrap();

        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Truncated(_))));

        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(&2u32.to_le_bytes());
        fs::write(&path, &v2).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn empty_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        let ds = Dataset {
            system: SystemConfig::default(),
            history_len: 16,
            horizon: 4,
            samples: vec![],
        };
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }
}
