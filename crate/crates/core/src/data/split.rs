use super::Dataset;
use crate::error::{KcError, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Two-way random partition. `fraction` is the share of the first part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(fraction: f64, seed: u64) -> Self {
        Self {
            fraction,
            seed,
            stratified: false,
        }
    }

    /// `a : b` ratio, e.g. `ratio(5, 1, seed)` for a 5:1 split.
    pub fn ratio(a: u32, b: u32, seed: u64) -> Self {
        Self::new(f64::from(a) / f64::from(a + b), seed)
    }

    pub fn stratified(mut self, yes: bool) -> Self {
        self.stratified = yes;
        self
    }
}

/// Index partition for `labels` under `spec`; both parts are returned in
/// ascending order.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(KcError::InvalidConfig(format!(
            "split fraction must lie in (0, 1), got {}",
            spec.fraction
        )));
    }
    let n = labels.len();
    let mut rng = SeededRng::new(spec.seed);
    let (mut a, mut b) = if spec.stratified {
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        for mut members in by_class {
            rng.shuffle(&mut members);
            let take = (members.len() as f64 * spec.fraction).round() as usize;
            a.extend_from_slice(&members[..take]);
            b.extend_from_slice(&members[take..]);
        }
        (a, b)
    } else {
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let take = (n as f64 * spec.fraction).round() as usize;
        let b = perm.split_off(take.min(n));
        (perm, b)
    };
    if a.is_empty() || b.is_empty() {
        return Err(KcError::EmptySplit {
            part_a: a.len(),
            part_b: b.len(),
        });
    }
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

pub fn split<T: Scalar>(data: &Dataset<T>, spec: &SplitSpec) -> Result<(Dataset<T>, Dataset<T>)> {
    let (a, b) = split_indices(data.labels(), spec)?;
    Ok((data.subset(&a)?, data.subset(&b)?))
}
