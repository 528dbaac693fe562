//! Minimum-edit-distance alignment of phoneme strings and the phoneme
//! correct rate.
//!
//! Edit costs are unit (substitution = deletion = insertion = 1). Among
//! alignments of equal cost the one with fewer insertions wins, which fixes
//! the hit/substitution/deletion/insertion counts uniquely.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AlignmentResult {
    pub n_ref: usize,
    pub hits: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl AlignmentResult {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn merge(&self, other: &AlignmentResult) -> AlignmentResult {
        AlignmentResult {
            n_ref: self.n_ref + other.n_ref,
            hits: self.hits + other.hits,
            substitutions: self.substitutions + other.substitutions,
            deletions: self.deletions + other.deletions,
            insertions: self.insertions + other.insertions,
        }
    }
}

/// One step of an alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Hit(usize),
    Substitution { reference: usize, hypothesis: usize },
    Deletion(usize),
    Insertion(usize),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Diagonal,
    Delete,
    Insert,
}

pub fn align(reference: &[usize], hypothesis: &[usize]) -> Result<AlignmentResult> {
    Ok(align_detailed(reference, hypothesis)?.0)
}

/// Alignment counts plus the edit operations in reference order.
pub fn align_detailed(reference: &[usize], hypothesis: &[usize]) -> Result<(AlignmentResult, Vec<EditOp>)> {
    if reference.is_empty() {
        return Err(Error::InvalidArgument("empty reference".into()));
    }
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    // (cost, insertions) compared lexicographically
    let mut key = vec![(0usize, 0usize); (n + 1) * width];
    let mut step = vec![Step::Diagonal; (n + 1) * width];
    for j in 1..=m {
        key[j] = (j, j);
        step[j] = Step::Insert;
    }
    for i in 1..=n {
        key[i * width] = (i, 0);
        step[i * width] = Step::Delete;
        for j in 1..=m {
            let (dc, di) = key[(i - 1) * width + j - 1];
            let diag = (dc + usize::from(reference[i - 1] != hypothesis[j - 1]), di);
            let (uc, ui) = key[(i - 1) * width + j];
            let del = (uc + 1, ui);
            let (lc, li) = key[i * width + j - 1];
            let ins = (lc + 1, li + 1);
            // earlier candidates win exact ties
            let mut best = (diag, Step::Diagonal);
            for cand in [(del, Step::Delete), (ins, Step::Insert)] {
                if cand.0 < best.0 {
                    best = cand;
                }
            }
            key[i * width + j] = best.0;
            step[i * width + j] = best.1;
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match step[i * width + j] {
            Step::Diagonal => {
                let (r, h) = (reference[i - 1], hypothesis[j - 1]);
                ops.push(if r == h {
                    EditOp::Hit(r)
                } else {
                    EditOp::Substitution { reference: r, hypothesis: h }
                });
                i -= 1;
                j -= 1;
            }
            Step::Delete => {
                ops.push(EditOp::Deletion(reference[i - 1]));
                i -= 1;
            }
            Step::Insert => {
                ops.push(EditOp::Insertion(hypothesis[j - 1]));
                j -= 1;
            }
        }
    }
    ops.reverse();
    let mut result = AlignmentResult {
        n_ref: n,
        ..AlignmentResult::default()
    };
    for op in &ops {
        match op {
            EditOp::Hit(_) => result.hits += 1,
            EditOp::Substitution { .. } => result.substitutions += 1,
            EditOp::Deletion(_) => result.deletions += 1,
            EditOp::Insertion(_) => result.insertions += 1,
        }
    }
    Ok((result, ops))
}

/// Confusion counts over `size` phonemes. Index `size` stands for "nothing":
/// row `size` counts insertions and column `size` deletions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub size: usize,
    pub counts: Vec<usize>,
}

impl Confusion {
    pub fn new(size: usize) -> Self {
        Confusion {
            size,
            counts: vec![0; (size + 1) * (size + 1)],
        }
    }

    pub fn get(&self, reference: usize, hypothesis: usize) -> usize {
        self.counts[reference * (self.size + 1) + hypothesis]
    }

    pub fn add(&mut self, ops: &[EditOp]) {
        let w = self.size + 1;
        for op in ops {
            let (r, h) = match *op {
                EditOp::Hit(p) => (p, p),
                EditOp::Substitution { reference, hypothesis } => (reference, hypothesis),
                EditOp::Deletion(p) => (p, self.size),
                EditOp::Insertion(p) => (self.size, p),
            };
            self.counts[r * w + h] += 1;
        }
    }
}

fn pooled(results: &[AlignmentResult]) -> Result<AlignmentResult> {
    let total = results.iter().fold(AlignmentResult::default(), |a, r| a.merge(r));
    if total.n_ref == 0 {
        return Err(Error::InvalidArgument("no reference phonemes to score".into()));
    }
    Ok(total)
}

/// Phoneme correct rate `100·(N − S − D)/N` with counts pooled over all
/// utterances. Insertions do not count against it.
pub fn pcr(results: &[AlignmentResult]) -> Result<f64> {
    let t = pooled(results)?;
    Ok(100.0 * t.hits as f64 / t.n_ref as f64)
}

/// Phoneme accuracy `100·(N − S − D − I)/N`; can be negative.
pub fn accuracy(results: &[AlignmentResult]) -> Result<f64> {
    let t = pooled(results)?;
    Ok(100.0 * (t.hits as f64 - t.insertions as f64) / t.n_ref as f64)
}
