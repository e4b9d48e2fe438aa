//! MAML datasets: windowed sample pairs drawn from LS traces.
//!
//! A sample pair uses the `n_o` consecutive slots `s − n_o .. s − 1` as input
//! and slot `s` as label. Slots are 0-based, so the valid label slots of an
//! `N`-slot trace are `n_o ..= N − 1`.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::seq::index;

use crate::channel::{CMatrix, CVector, ChannelTrace, LsTrace};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    /// `[re(h₁); im(h₁); …; re(h_{n_o}); im(h_{n_o})]`, length `2·M·n_o`.
    pub input: Vec<f64>,
    /// `[re(h); im(h)]` of the label slot, length `2·M`.
    pub label: Vec<f64>,
    /// Label slot.
    pub slot_index: usize,
    pub ue_id: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskDataset {
    pub task_id: usize,
    pub ue_id: u32,
    pub support: Vec<SamplePair>,
    pub query: Vec<SamplePair>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetSet {
    pub ue_id: u32,
    /// Labels from the (possibly denoised) LS trace.
    pub adapt: Vec<SamplePair>,
    /// Labels from the true channel.
    pub test: Vec<SamplePair>,
}

/// Stacks one complex vector as `[re; im]`.
pub fn encode_vector(h: &CVector) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * h.len());
    out.extend(h.iter().map(|c| c.re));
    out.extend(h.iter().map(|c| c.im));
    out
}

pub fn decode_vector(v: &[f64]) -> CVector {
    let m = v.len() / 2;
    CVector::from_iterator(m, (0..m).map(|i| Complex64::new(v[i], v[m + i])))
}

/// Encodes a window of `n_o` channel vectors into one real input vector.
pub fn encode(window: &[CVector], n_o: usize) -> Result<Vec<f64>> {
    if window.len() != n_o {
        return Err(Error::dim("encode", &[window.len()], &[n_o]));
    }
    Ok(window.iter().flat_map(encode_vector).collect())
}

/// Inverse of [`encode`] for `M`-antenna vectors.
pub fn decode(v: &[f64], antennas: usize) -> Result<Vec<CVector>> {
    if antennas == 0 || !v.len().is_multiple_of(2 * antennas) {
        return Err(Error::dim("decode", &[v.len()], &[2 * antennas]));
    }
    Ok(v.chunks(2 * antennas).map(decode_vector).collect())
}

fn window_input(h: &CMatrix, label_slot: usize, n_o: usize) -> Vec<f64> {
    let m = h.nrows();
    let mut out = Vec::with_capacity(2 * m * n_o);
    for slot in label_slot - n_o..label_slot {
        let col = h.column(slot);
        out.extend(col.iter().map(|c| c.re));
        out.extend(col.iter().map(|c| c.im));
    }
    out
}

fn column_label(h: &CMatrix, slot: usize) -> Vec<f64> {
    encode_vector(&h.column(slot).into_owned())
}

/// Sample pair with input from `inputs` and label from `labels` at `slot`.
pub fn sample_pair(inputs: &CMatrix, labels: &CMatrix, slot: usize, n_o: usize, ue_id: u32) -> SamplePair {
    SamplePair {
        input: window_input(inputs, slot, n_o),
        label: column_label(labels, slot),
        slot_index: slot,
        ue_id,
    }
}

/// Number of label slots available in an `slots`-long trace.
pub fn window_count(slots: usize, n_o: usize) -> usize {
    slots.saturating_sub(n_o)
}

/// Draws `count` distinct label slots uniformly from the valid windows.
fn draw_slots(rng: &mut rng::Rng, slots: usize, n_o: usize, count: usize) -> Vec<usize> {
    index::sample(rng, window_count(slots, n_o), count)
        .into_iter()
        .map(|i| i + n_o)
        .collect()
}

fn require_windows(what: &str, slots: usize, n_o: usize, needed: usize) -> Result<()> {
    if n_o == 0 {
        return Err(Error::Dataset("complexity order n_o must be at least 1".into()));
    }
    if window_count(slots, n_o) < needed {
        return Err(Error::Dataset(format!(
            "{what}: trace has {slots} slots but needs at least n_o + {needed} = {} \
             ({needed} disjoint windows of {n_o} inputs plus a label)",
            n_o + needed
        )));
    }
    Ok(())
}

/// Builds `T_u · K_s` source tasks, `K_s = ls.len()`. Task `t` (0-based)
/// draws from trace `⌊t / T_u⌋`; within a task the `N_s` support and `N_q`
/// query label slots are distinct.
pub fn build_source_tasks(
    ls: &[LsTrace],
    tasks_per_ue: usize,
    n_s: usize,
    n_q: usize,
    n_o: usize,
    seed: u64,
) -> Result<Vec<TaskDataset>> {
    for trace in ls {
        require_windows("source task", trace.h_ls.ncols(), n_o, n_s + n_q)?;
    }
    let mut tasks = Vec::with_capacity(tasks_per_ue * ls.len());
    for (k, trace) in ls.iter().enumerate() {
        for j in 0..tasks_per_ue {
            let task_id = k * tasks_per_ue + j;
            let mut rng = rng::stream(seed, "tasks", task_id as u64);
            let slots = draw_slots(&mut rng, trace.h_ls.ncols(), n_o, n_s + n_q);
            let pair = |&s: &usize| sample_pair(&trace.h_ls, &trace.h_ls, s, n_o, trace.ue_id);
            tasks.push(TaskDataset {
                task_id,
                ue_id: trace.ue_id,
                support: slots[..n_s].iter().map(pair).collect(),
                query: slots[n_s..].iter().map(pair).collect(),
            });
        }
    }
    Ok(tasks)
}

/// Builds the adaptation and test sets of one target UE. Inputs always come
/// from `ls`; adaptation labels from `ls`, test labels from `truth`.
///
/// The slot draw depends only on `seed` and the trace length, so target UEs
/// built with the same seed share test slots (needed for multi-user rates).
pub fn build_target_set(
    ls: &LsTrace,
    truth: &ChannelTrace,
    n_ad: usize,
    n_te: usize,
    n_o: usize,
    seed: u64,
) -> Result<TargetSet> {
    if ls.ue_id != truth.ue_id || ls.h_ls.shape() != truth.h.shape() {
        return Err(Error::Dataset(format!(
            "LS trace (ue {}, {:?}) does not match true trace (ue {}, {:?})",
            ls.ue_id,
            ls.h_ls.shape(),
            truth.ue_id,
            truth.h.shape()
        )));
    }
    let slots_total = ls.h_ls.ncols();
    require_windows("target set", slots_total, n_o, n_ad + n_te)?;
    let mut rng = rng::stream(seed, "target", 0);
    let slots = draw_slots(&mut rng, slots_total, n_o, n_ad + n_te);
    Ok(TargetSet {
        ue_id: ls.ue_id,
        adapt: slots[..n_ad]
            .iter()
            .map(|&s| sample_pair(&ls.h_ls, &ls.h_ls, s, n_o, ls.ue_id))
            .collect(),
        test: slots[n_ad..]
            .iter()
            .map(|&s| sample_pair(&ls.h_ls, &truth.h, s, n_o, ls.ue_id))
            .collect(),
    })
}

/// Number of label slots shared by two sample lists.
pub fn slot_overlap(a: &[SamplePair], b: &[SamplePair]) -> usize {
    a.iter()
        .filter(|p| b.iter().any(|q| q.slot_index == p.slot_index))
        .count()
}

/// Packs sample pairs column-wise: inputs `D × B`, labels `2M × B`.
pub fn batch_tensors<'a>(pairs: impl IntoIterator<Item = &'a SamplePair>) -> Result<(Tensor, Tensor)> {
    let pairs: Vec<&SamplePair> = pairs.into_iter().collect();
    let b = pairs.len();
    let (d, o) = match pairs.first() {
        Some(p) => (p.input.len(), p.label.len()),
        None => return Err(Error::Dataset("empty batch".into())),
    };
    let mut x = alloc::vec![0.0; d * b];
    let mut y = alloc::vec![0.0; o * b];
    for (j, p) in pairs.iter().enumerate() {
        if p.input.len() != d || p.label.len() != o {
            return Err(Error::dim("batch", &[d, o], &[p.input.len(), p.label.len()]));
        }
        for (i, &v) in p.input.iter().enumerate() {
            x[i * b + j] = v;
        }
        for (i, &v) in p.label.iter().enumerate() {
            y[i * b + j] = v;
        }
    }
    Ok((Tensor::matrix(d, b, x)?, Tensor::matrix(o, b, y)?))
}
