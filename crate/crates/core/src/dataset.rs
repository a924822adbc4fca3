//! Paired (image, field-amplitude) corpus: deterministic generation,
//! bit-exact binary persistence, and split bookkeeping.
//!
//! On-disk layout is one directory holding `manifest.json` plus one record
//! file per split. Record files (integers little-endian):
//!
//! ```text
//! magic   b"EMDS"
//! u32     format version (currently 1)
//! u32     header length
//! [u8]    header JSON: {format_version, split, first_index, n_records,
//!          grid_n, field_len, seed}
//! records n_records x [grid_n^2 mask bytes (0/1) | field_len f64 LE]
//! ```
//!
//! The manifest echoes the full scene/shape/solver configuration, the frozen
//! operator convention, the split index ranges, and a CRC32 per file.
//! Sample `k` draws everything from its own stream seeded with `seed ^ k`,
//! so generation is reproducible for any worker count and any single record
//! can be regenerated in place.

use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{add_noise, simulate_response, FieldVector, SolverOptions};
use crate::scene::{sample_scatterer, ContrastImage, SceneConfig, ShapeConfig};

const MAGIC: &[u8; 4] = b"EMDS";
pub const FORMAT_VERSION: u32 = 1;

/// The frozen sign/scale convention of the simulator, echoed into manifests.
pub const OPERATOR_CONVENTION: &str =
    "unit line source (1/4j)H0^(2); total: (I - G diag(tau)) E_tot = E_inc; \
     scattered: E_sca = +G_R diag(tau) E_tot; response = |E_sca|";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SplitRange {
    pub name: String,
    /// Global sample indices `[start, end)`.
    pub start: usize,
    pub end: usize,
}

impl SplitRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub records: usize,
    pub crc32: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub scene: SceneConfig,
    pub shape: ShapeConfig,
    pub solver: SolverOptions,
    pub n_samples: usize,
    pub field_len: usize,
    pub seed: u64,
    pub noise_snr_db: Option<f64>,
    pub operator_convention: String,
    pub splits: Vec<SplitRange>,
    pub files: Vec<FileEntry>,
}

impl DatasetManifest {
    pub fn record_size(&self) -> usize {
        self.scene.grid_n * self.scene.grid_n + self.field_len * 8
    }

    pub fn split(&self, name: &str) -> Result<&SplitRange> {
        self.splits
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("dataset has no split named '{name}'")))
    }
}

/// How to divide `n` samples into contiguous train/validation/test ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitScheme {
    /// 26,000 / 2,000 / 2,000 at n = 30,000 (13:1:1).
    AaePaper,
    /// 27,000 / 3,000, no validation split (9:1).
    FnnPaper,
    /// 2,000 / 200 / 200 at n = 2,400 (10:1:1).
    Desk,
    /// Explicit counts; must sum to n.
    Explicit {
        train: usize,
        val: usize,
        test: usize,
    },
}

impl SplitScheme {
    /// Contiguous-by-index deterministic ranges.
    pub fn ranges(&self, n: usize) -> Result<Vec<SplitRange>> {
        let (train, val, test) = match *self {
            SplitScheme::AaePaper => proportional(n, 26_000, 2_000, 2_000)?,
            SplitScheme::FnnPaper => proportional(n, 27_000, 0, 3_000)?,
            SplitScheme::Desk => proportional(n, 2_000, 200, 200)?,
            SplitScheme::Explicit { train, val, test } => {
                if train + val + test != n {
                    return Err(Error::Config(format!(
                        "split counts {train}+{val}+{test} do not sum to {n}"
                    )));
                }
                (train, val, test)
            }
        };
        let mut out = Vec::new();
        let mut cursor = 0;
        for (name, count) in [("train", train), ("val", val), ("test", test)] {
            if count > 0 {
                out.push(SplitRange {
                    name: name.into(),
                    start: cursor,
                    end: cursor + count,
                });
                cursor += count;
            }
        }
        Ok(out)
    }
}

fn proportional(n: usize, a: usize, b: usize, c: usize) -> Result<(usize, usize, usize)> {
    let total = a + b + c;
    if n % total == 0 {
        let f = n / total;
        return Ok((a * f, b * f, c * f));
    }
    // Scale and round, giving the remainder to the training split.
    let scale = n as f64 / total as f64;
    let vb = (b as f64 * scale).round() as usize;
    let vc = (c as f64 * scale).round() as usize;
    if vb + vc >= n {
        return Err(Error::Config(format!(
            "dataset of {n} samples is too small for this split scheme"
        )));
    }
    Ok((n - vb - vc, vb, vc))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FileHeader {
    format_version: u32,
    split: String,
    first_index: usize,
    n_records: usize,
    grid_n: usize,
    field_len: usize,
    seed: u64,
}

fn header_bytes(h: &FileHeader) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(h)?;
    let mut out = Vec::with_capacity(12 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(out)
}

/// Generate one sample from its per-index stream.
pub fn generate_sample(
    index: usize,
    scene: &SceneConfig,
    shape: &ShapeConfig,
    opts: &SolverOptions,
    seed: u64,
    noise_snr_db: Option<f64>,
) -> Result<(ContrastImage, FieldVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index as u64);
    let img = sample_scatterer(&mut rng, scene.grid_n, shape, scene.tau())?;
    let mut fields = simulate_response(&img, scene, opts)?;
    if let Some(snr) = noise_snr_db {
        fields = add_noise(&fields, snr, &mut rng)?;
    }
    Ok((img, fields))
}

fn encode_record(img: &ContrastImage, fields: &FieldVector, buf: &mut Vec<u8>) {
    buf.clear();
    buf.extend_from_slice(&img.mask);
    for v in &fields.0 {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Generate `n` samples and persist them under `dir`. Deterministic for a
/// fixed seed regardless of `workers`; returns the written manifest.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset(
    dir: &Path,
    n: usize,
    scene: &SceneConfig,
    shape: &ShapeConfig,
    opts: &SolverOptions,
    seed: u64,
    noise_snr_db: Option<f64>,
    scheme: SplitScheme,
    workers: usize,
) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(Error::Config("dataset size must be >= 1".into()));
    }
    scene.validate()?;
    opts.validate()?;
    let splits = scheme.ranges(n)?;
    std::fs::create_dir_all(dir)?;
    let workers = workers.max(1);
    let field_len = scene.field_len();
    let record_size = scene.grid_n * scene.grid_n + field_len * 8;

    let mut files = Vec::new();
    for split in &splits {
        let path = dir.join(format!("{}.emds", split.name));
        let header = header_bytes(&FileHeader {
            format_version: FORMAT_VERSION,
            split: split.name.clone(),
            first_index: split.start,
            n_records: split.len(),
            grid_n: scene.grid_n,
            field_len,
            seed,
        })?;
        // Pre-size the file, then let workers fill disjoint offsets.
        {
            let f = std::fs::File::create(&path)?;
            f.set_len((header.len() + split.len() * record_size) as u64)?;
        }
        {
            let mut f = std::fs::OpenOptions::new().write(true).open(&path)?;
            f.write_all(&header)?;
        }
        let header_len = header.len();
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::new();
            for w in 0..workers {
                let path = path.clone();
                let scene = scene.clone();
                let shape = shape.clone();
                let opts = *opts;
                let split = split.clone();
                handles.push(scope.spawn(move || -> Result<()> {
                    let mut file = std::fs::OpenOptions::new().write(true).open(&path)?;
                    let mut buf = Vec::with_capacity(record_size);
                    for local in (w..split.len()).step_by(workers) {
                        let global = split.start + local;
                        let (img, fields) =
                            generate_sample(global, &scene, &shape, &opts, seed, noise_snr_db)?;
                        encode_record(&img, &fields, &mut buf);
                        debug_assert_eq!(buf.len(), record_size);
                        file.seek(SeekFrom::Start((header_len + local * record_size) as u64))?;
                        file.write_all(&buf)?;
                    }
                    Ok(())
                }));
            }
            for h in handles {
                h.join().expect("generation worker panicked")?;
            }
            Ok(())
        })?;
        let bytes = std::fs::read(&path)?;
        files.push(FileEntry {
            name: format!("{}.emds", split.name),
            records: split.len(),
            crc32: crc32fast::hash(&bytes),
        });
    }

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        scene: scene.clone(),
        shape: shape.clone(),
        solver: *opts,
        n_samples: n,
        field_len,
        seed,
        noise_snr_db,
        operator_convention: OPERATOR_CONVENTION.into(),
        splits,
        files,
    };
    let mut mf = std::fs::File::create(dir.join("manifest.json"))?;
    mf.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    mf.write_all(b"\n")?;
    Ok(manifest)
}

/// Recompute sample `k` and overwrite its record in place; byte-identical to
/// what a full run writes there.
pub fn regenerate_sample(dir: &Path, manifest: &DatasetManifest, k: usize) -> Result<()> {
    let split = manifest
        .splits
        .iter()
        .find(|s| (s.start..s.end).contains(&k))
        .ok_or_else(|| Error::Config(format!("sample index {k} out of range")))?;
    let path = dir.join(format!("{}.emds", split.name));
    let header_len = read_header(&path)?.1;
    let (img, fields) = generate_sample(
        k,
        &manifest.scene,
        &manifest.shape,
        &manifest.solver,
        manifest.seed,
        manifest.noise_snr_db,
    )?;
    let mut buf = Vec::new();
    encode_record(&img, &fields, &mut buf);
    let mut file = std::fs::OpenOptions::new().write(true).open(&path)?;
    file.seek(SeekFrom::Start(
        (header_len + (k - split.start) * manifest.record_size()) as u64,
    ))?;
    file.write_all(&buf)?;
    Ok(())
}

fn read_header(path: &Path) -> Result<(FileHeader, usize)> {
    let mut f = std::fs::File::open(path)?;
    let mut fixed = [0u8; 12];
    f.read_exact(&mut fixed)
        .map_err(|_| Error::Corruption(format!("{} shorter than its header", path.display())))?;
    if &fixed[0..4] != MAGIC {
        return Err(Error::Format(format!("{} is not a dataset file", path.display())));
    }
    let version = u32::from_le_bytes(fixed[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: format version {version}, expected {FORMAT_VERSION}",
            path.display()
        )));
    }
    let len = u32::from_le_bytes(fixed[8..12].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    f.read_exact(&mut json)
        .map_err(|_| Error::Corruption(format!("{} header truncated", path.display())))?;
    let header: FileHeader = serde_json::from_slice(&json)
        .map_err(|e| Error::Format(format!("{} header invalid: {e}", path.display())))?;
    Ok((header, 12 + len))
}

/// Read access to a generated dataset; all integrity checks run at `open`.
pub struct Dataset {
    pub manifest: DatasetManifest,
    dir: PathBuf,
    /// Per split (matching manifest order): header byte offset.
    header_offsets: Vec<usize>,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest_bytes = std::fs::read(dir.join("manifest.json"))?;
        let manifest: DatasetManifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| Error::Format(format!("manifest.json invalid: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "dataset format version {}, expected {FORMAT_VERSION}",
                manifest.format_version
            )));
        }
        let mut header_offsets = Vec::new();
        for (split, entry) in manifest.splits.iter().zip(&manifest.files) {
            let path = dir.join(&entry.name);
            let bytes = std::fs::read(&path)?;
            if crc32fast::hash(&bytes) != entry.crc32 {
                return Err(Error::Corruption(format!(
                    "{}: checksum mismatch against manifest",
                    entry.name
                )));
            }
            let (header, offset) = read_header(&path)?;
            if header.n_records != split.len()
                || header.grid_n != manifest.scene.grid_n
                || header.field_len != manifest.field_len
                || header.first_index != split.start
            {
                return Err(Error::Corruption(format!(
                    "{}: header disagrees with manifest",
                    entry.name
                )));
            }
            let expect = offset + split.len() * manifest.record_size();
            if bytes.len() != expect {
                return Err(Error::Corruption(format!(
                    "{}: {} bytes, expected {expect}",
                    entry.name,
                    bytes.len()
                )));
            }
            header_offsets.push(offset);
        }
        Ok(Dataset {
            manifest,
            dir: dir.to_path_buf(),
            header_offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.n_samples == 0
    }

    fn locate(&self, k: usize) -> Result<(usize, usize)> {
        for (i, split) in self.manifest.splits.iter().enumerate() {
            if (split.start..split.end).contains(&k) {
                return Ok((i, k - split.start));
            }
        }
        Err(Error::Config(format!(
            "sample index {k} out of range (n = {})",
            self.manifest.n_samples
        )))
    }

    /// Random access by global index.
    pub fn get(&self, k: usize) -> Result<(ContrastImage, FieldVector)> {
        let (split_idx, local) = self.locate(k)?;
        let entry = &self.manifest.files[split_idx];
        let mut f = std::fs::File::open(self.dir.join(&entry.name))?;
        let rs = self.manifest.record_size();
        f.seek(SeekFrom::Start(
            (self.header_offsets[split_idx] + local * rs) as u64,
        ))?;
        let mut buf = vec![0u8; rs];
        f.read_exact(&mut buf)
            .map_err(|_| Error::Corruption(format!("{}: record {local} truncated", entry.name)))?;
        self.decode(&buf)
    }

    fn decode(&self, buf: &[u8]) -> Result<(ContrastImage, FieldVector)> {
        let g = self.manifest.scene.grid_n;
        let mask = buf[..g * g].to_vec();
        if let Some(bad) = mask.iter().find(|&&p| p > 1) {
            return Err(Error::Corruption(format!("mask byte {bad} outside {{0,1}}")));
        }
        let mut fields = Vec::with_capacity(self.manifest.field_len);
        for chunk in buf[g * g..].chunks_exact(8) {
            fields.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        Ok((
            ContrastImage {
                mask,
                grid_n: g,
                tau: self.manifest.scene.tau(),
            },
            FieldVector(fields),
        ))
    }

    /// Stream samples in global index order.
    pub fn iter(&self) -> impl Iterator<Item = Result<(ContrastImage, FieldVector)>> + '_ {
        (0..self.len()).map(move |k| self.get(k))
    }

    /// Load a contiguous index range into memory.
    pub fn load_range(&self, start: usize, end: usize) -> Result<Vec<(ContrastImage, FieldVector)>> {
        (start..end).map(|k| self.get(k)).collect()
    }
}

/// The `split` operation: ranges for a scheme against an existing manifest.
pub fn split(manifest: &DatasetManifest, scheme: SplitScheme) -> Result<Vec<SplitRange>> {
    scheme.ranges(manifest.n_samples)
}
