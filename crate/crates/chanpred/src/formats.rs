//! Binary files: channel traces (`MCH1`), datasets (traces plus a task
//! index) and parameter checkpoints (`MPR1`). All integers and doubles are
//! little-endian.
//!
//! Trace file:
//!
//! ```text
//! "MCH1" | M: u32 | N: u32 | count: u32
//! per trace: ue_id: u32 | kind: u8 | snr_db: f64 | M·N × (re: f64, im: f64), row-major
//! ```
//!
//! A dataset file is a trace file followed by
//! `"IDX1" | n_o: u32 | tasks: u32` and, per task,
//! `task_id: u32 | ue_id: u32 | n_s: u32 | n_q: u32 | (n_s + n_q) × slot: u32`.
//!
//! Checkpoint:
//!
//! ```text
//! "MPR1" | version: u32 | input_dim, hidden_layers, hidden_width, output_dim: u32
//! tensors: u32 | per tensor: ndim: u32 | dims: ndim × u32 | data: f64…
//! sha256 of everything above: 32 bytes
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use chanpred_core::channel::{CMatrix, ChannelTrace, LsTrace};
use chanpred_core::dataset::{sample_pair, TaskDataset};
use chanpred_core::models::{Architecture, MlpSpec, ModelParams};
use chanpred_core::Tensor;
use num_complex::Complex64;

use crate::error::{Error, Result};

const TRACE_MAGIC: &[u8; 4] = b"MCH1";
const INDEX_MAGIC: &[u8; 4] = b"IDX1";
const CKPT_MAGIC: &[u8; 4] = b"MPR1";
pub const CKPT_VERSION: u32 = 1;

/// What a stored trace holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    True = 0,
    Ls = 1,
    Denoised = 2,
}

/// One stored trace.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredTrace {
    pub ue_id: u32,
    pub kind: TraceKind,
    /// `NaN` for true channels.
    pub snr_db: f64,
    pub h: CMatrix,
}

impl From<&ChannelTrace> for StoredTrace {
    fn from(t: &ChannelTrace) -> Self {
        StoredTrace {
            ue_id: t.ue_id,
            kind: TraceKind::True,
            snr_db: f64::NAN,
            h: t.h.clone(),
        }
    }
}

impl From<&LsTrace> for StoredTrace {
    fn from(t: &LsTrace) -> Self {
        StoredTrace {
            ue_id: t.ue_id,
            kind: if t.denoised { TraceKind::Denoised } else { TraceKind::Ls },
            snr_db: t.snr_db,
            h: t.h_ls.clone(),
        }
    }
}

impl StoredTrace {
    pub fn to_ls(&self) -> LsTrace {
        LsTrace {
            ue_id: self.ue_id,
            h_ls: self.h.clone(),
            snr_db: self.snr_db,
            denoised: self.kind == TraceKind::Denoised,
        }
    }

    pub fn to_truth(&self) -> ChannelTrace {
        ChannelTrace {
            ue_id: self.ue_id,
            h: self.h.clone(),
        }
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Config(format!("{what} = {v} does not fit the file format")))
}

/// Cursor that reports the offset of whatever it fails to read.
struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Reader { path, bytes, pos: 0 }
    }

    fn fail(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Integrity {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(self.pos, format!("truncated while reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let at = self.pos;
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(self.fail(
                at,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    fn finish(&self) -> Result<()> {
        if !self.at_end() {
            return Err(self.fail(
                self.pos,
                format!("{} unexpected trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn encode_traces(traces: &[StoredTrace]) -> Result<Vec<u8>> {
    let (m, n) = traces.first().map(|t| t.h.shape()).unwrap_or((0, 0));
    if let Some(bad) = traces.iter().find(|t| t.h.shape() != (m, n)) {
        return Err(Error::Config(format!(
            "trace of UE {} is {:?}, others are {:?}",
            bad.ue_id,
            bad.h.shape(),
            (m, n)
        )));
    }
    let mut buf = Vec::with_capacity(16 + traces.len() * (13 + 16 * m * n));
    buf.extend_from_slice(TRACE_MAGIC);
    put_u32(&mut buf, to_u32(m, "antennas")?);
    put_u32(&mut buf, to_u32(n, "slots")?);
    put_u32(&mut buf, to_u32(traces.len(), "trace count")?);
    for t in traces {
        put_u32(&mut buf, t.ue_id);
        buf.push(t.kind as u8);
        put_f64(&mut buf, t.snr_db);
        for i in 0..m {
            for j in 0..n {
                put_f64(&mut buf, t.h[(i, j)].re);
                put_f64(&mut buf, t.h[(i, j)].im);
            }
        }
    }
    Ok(buf)
}

fn decode_traces(r: &mut Reader) -> Result<Vec<StoredTrace>> {
    r.magic(TRACE_MAGIC)?;
    let m = r.u32("antenna count")? as usize;
    let n = r.u32("slot count")? as usize;
    let count = r.u32("trace count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let ue_id = r.u32("ue id")?;
        let at = r.pos;
        let kind = match r.u8("trace kind")? {
            0 => TraceKind::True,
            1 => TraceKind::Ls,
            2 => TraceKind::Denoised,
            k => return Err(r.fail(at, format!("unknown trace kind {k}"))),
        };
        let snr_db = r.f64("snr")?;
        if (m * n).saturating_mul(16) > r.bytes.len() - r.pos {
            return Err(r.fail(r.pos, "truncated while reading channel samples"));
        }
        let mut data = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            let re = r.f64("channel sample")?;
            let im = r.f64("channel sample")?;
            data.push(Complex64::new(re, im));
        }
        out.push(StoredTrace {
            ue_id,
            kind,
            snr_db,
            h: CMatrix::from_row_slice(m, n, &data),
        });
    }
    Ok(out)
}

pub fn write_traces(path: &Path, traces: &[StoredTrace]) -> Result<()> {
    write_file(path, &encode_traces(traces)?)
}

pub fn read_traces(path: &Path) -> Result<Vec<StoredTrace>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    let traces = decode_traces(&mut r)?;
    r.finish()?;
    Ok(traces)
}

/// Writes the LS traces the tasks were drawn from, then the task index.
pub fn write_dataset(path: &Path, traces: &[LsTrace], tasks: &[TaskDataset], n_o: usize) -> Result<()> {
    let stored: Vec<StoredTrace> = traces.iter().map(StoredTrace::from).collect();
    let mut buf = encode_traces(&stored)?;
    buf.extend_from_slice(INDEX_MAGIC);
    put_u32(&mut buf, to_u32(n_o, "n_o")?);
    put_u32(&mut buf, to_u32(tasks.len(), "task count")?);
    for t in tasks {
        put_u32(&mut buf, to_u32(t.task_id, "task id")?);
        put_u32(&mut buf, t.ue_id);
        put_u32(&mut buf, to_u32(t.support.len(), "n_s")?);
        put_u32(&mut buf, to_u32(t.query.len(), "n_q")?);
        for p in t.support.iter().chain(&t.query) {
            put_u32(&mut buf, to_u32(p.slot_index, "slot")?);
        }
    }
    write_file(path, &buf)
}

/// Reads a dataset file back into traces and rebuilt tasks.
pub fn read_dataset(path: &Path) -> Result<(Vec<LsTrace>, Vec<TaskDataset>)> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    let traces: Vec<LsTrace> = decode_traces(&mut r)?.iter().map(StoredTrace::to_ls).collect();
    r.magic(INDEX_MAGIC)?;
    let n_o = r.u32("n_o")? as usize;
    let count = r.u32("task count")? as usize;
    let mut tasks = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let task_id = r.u32("task id")? as usize;
        let at = r.pos;
        let ue_id = r.u32("ue id")?;
        let trace = traces
            .iter()
            .find(|t| t.ue_id == ue_id)
            .ok_or_else(|| r.fail(at, format!("task {task_id} refers to missing UE {ue_id}")))?;
        let n_s = r.u32("n_s")? as usize;
        let n_q = r.u32("n_q")? as usize;
        let mut pairs = Vec::with_capacity(n_s + n_q);
        for _ in 0..n_s + n_q {
            let at = r.pos;
            let slot = r.u32("slot")? as usize;
            if slot < n_o || slot >= trace.h_ls.ncols() {
                return Err(r.fail(at, format!("slot {slot} outside the valid windows")));
            }
            pairs.push(sample_pair(&trace.h_ls, &trace.h_ls, slot, n_o, ue_id));
        }
        let query = pairs.split_off(n_s);
        tasks.push(TaskDataset {
            task_id,
            ue_id,
            support: pairs,
            query,
        });
    }
    r.finish()?;
    Ok((traces, tasks))
}

pub fn encode_checkpoint(spec: &MlpSpec, params: &ModelParams) -> Result<Vec<u8>> {
    params.check_against(spec)?;
    let mut buf = Vec::with_capacity(64 + 8 * params.scalar_count());
    buf.extend_from_slice(CKPT_MAGIC);
    put_u32(&mut buf, CKPT_VERSION);
    for v in [spec.input_dim, spec.hidden_layers, spec.hidden_width, spec.output_dim] {
        put_u32(&mut buf, to_u32(v, "spec dimension")?);
    }
    put_u32(&mut buf, to_u32(params.len(), "tensor count")?);
    for t in &params.tensors {
        put_u32(&mut buf, to_u32(t.shape().len(), "rank")?);
        for &d in t.shape() {
            put_u32(&mut buf, to_u32(d, "dimension")?);
        }
        for &v in t.data() {
            put_f64(&mut buf, v);
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

pub fn save_checkpoint(path: &Path, spec: &MlpSpec, params: &ModelParams) -> Result<()> {
    write_file(path, &encode_checkpoint(spec, params)?)
}

/// Reads the spec and parameters stored in a checkpoint.
pub fn decode_checkpoint(path: &Path, bytes: &[u8]) -> Result<(MlpSpec, ModelParams)> {
    let mut r = Reader::new(path, bytes);
    r.magic(CKPT_MAGIC)?;
    let at = r.pos;
    let version = r.u32("version")?;
    if version != CKPT_VERSION {
        return Err(r.fail(at, format!("unsupported checkpoint version {version}")));
    }
    let spec = MlpSpec {
        input_dim: r.u32("spec")? as usize,
        hidden_layers: r.u32("spec")? as usize,
        hidden_width: r.u32("spec")? as usize,
        output_dim: r.u32("spec")? as usize,
    };
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let at = r.pos;
        let rank = r.u32("rank")? as usize;
        if rank > 8 {
            return Err(r.fail(at, format!("implausible tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let len = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let len = match len {
            Some(len) if len.saturating_mul(8) <= bytes.len() - r.pos => len,
            _ => return Err(r.fail(r.pos, "truncated while reading tensor data")),
        };
        let data = (0..len).map(|_| r.f64("tensor data")).collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor::new(&shape, data)?);
    }
    let body_end = r.pos;
    let stored = r.take(32, "checksum")?;
    if Sha256::digest(&bytes[..body_end]).as_slice() != stored {
        return Err(r.fail(body_end, "checksum mismatch"));
    }
    r.finish()?;
    let params = ModelParams { tensors };
    params.check_against(&spec)?;
    Ok((spec, params))
}

/// Loads a checkpoint, rejecting one saved for a different network.
pub fn load_checkpoint(path: &Path, expected: &MlpSpec) -> Result<ModelParams> {
    let bytes = read_file(path)?;
    let (spec, params) = decode_checkpoint(path, &bytes)?;
    if spec != *expected {
        return Err(Error::Config(format!(
            "{}: checkpoint is for {spec:?} but the configuration builds {expected:?} ({} parameters)",
            path.display(),
            expected.param_count()
        )));
    }
    Ok(params)
}
