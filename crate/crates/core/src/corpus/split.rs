use rand::seq::SliceRandom;

use crate::rng;
use crate::{Error, Result};

/// Indices into the pool, each list in ascending pool order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn select<T: Clone>(&self, pool: &[T]) -> (Vec<T>, Vec<T>) {
        let pick = |ix: &[usize]| ix.iter().map(|&i| pool[i].clone()).collect();
        (pick(&self.train), pick(&self.test))
    }
}

/// Per-class shuffled orders from which stratified subsamples of any size
/// are drawn. Subsamples are nested: a smaller size is always a subset of a
/// larger one.
#[derive(Debug, Clone)]
pub struct NestedSample {
    yes: Vec<usize>,
    no: Vec<usize>,
}

impl NestedSample {
    /// Classes are shuffled independently (no first, then yes) with ChaCha8
    /// seeded from `seed`.
    pub fn new<T>(pool: &[T], label: impl Fn(&T) -> bool, seed: u64) -> Self {
        let mut yes = Vec::new();
        let mut no = Vec::new();
        for (i, item) in pool.iter().enumerate() {
            if label(item) {
                yes.push(i)
            } else {
                no.push(i)
            }
        }
        let mut rng = rng::seeded(seed);
        no.shuffle(&mut rng);
        yes.shuffle(&mut rng);
        NestedSample { yes, no }
    }

    pub fn pool_size(&self) -> usize {
        self.yes.len() + self.no.len()
    }

    /// (no, yes) counts for a stratified sample of `size`.
    ///
    /// Each class gets its proportional share rounded by largest remainder;
    /// an exact half goes to the larger class (to `no` when equal).
    pub fn quotas(&self, size: usize) -> (usize, usize) {
        let n = self.pool_size();
        if n == 0 {
            return (0, 0);
        }
        let (n_no, n_yes) = (self.no.len(), self.yes.len());
        let mut q_no = size * n_no / n;
        let mut q_yes = size * n_yes / n;
        if q_no + q_yes < size {
            let r_no = size * n_no % n;
            let r_yes = size * n_yes % n;
            let yes_wins = r_yes > r_no || (r_yes == r_no && n_yes > n_no);
            if yes_wins {
                q_yes += 1
            } else {
                q_no += 1
            }
        }
        (q_no, q_yes)
    }

    /// A stratified sample of `size` pool indices in ascending order.
    pub fn take(&self, size: usize) -> Vec<usize> {
        let (q_no, q_yes) = self.quotas(size.min(self.pool_size()));
        let mut out: Vec<usize> = self.no[..q_no].iter().chain(&self.yes[..q_yes]).copied().collect();
        out.sort_unstable();
        out
    }
}

/// Stratified train/test division of `pool` by a binary label.
///
/// The test partition holds `test_size` items whose yes/no ratio matches the
/// pool within one instance. Deterministic for a fixed seed.
pub fn stratified_split<T>(pool: &[T], label: impl Fn(&T) -> bool, test_size: usize, seed: u64) -> Result<Split> {
    let sample = NestedSample::new(pool, label, seed);
    if sample.yes.is_empty() || sample.no.is_empty() {
        return Err(Error::Stratification(format!(
            "both classes must be present (no={}, yes={})",
            sample.no.len(),
            sample.yes.len()
        )));
    }
    if test_size == 0 || test_size >= pool.len() {
        return Err(Error::Stratification(format!("test size {test_size} must be in 1..{}", pool.len())));
    }
    let test = sample.take(test_size);
    let mut in_test = vec![false; pool.len()];
    for &i in &test {
        in_test[i] = true;
    }
    let train = (0..pool.len()).filter(|&i| !in_test[i]).collect();
    Ok(Split { train, test })
}
