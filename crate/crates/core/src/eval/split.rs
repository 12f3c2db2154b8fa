use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    /// Test indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
    /// Set when a class has fewer members than folds.
    pub warning: Option<String>,
}

impl Folds {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// `(train, test)` indices of fold `i`, both ascending.
    pub fn split(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let test = self.folds[i].clone();
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        (train, test)
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("{k} folds requested for {n} rows")));
    }
    Ok(())
}

/// Shuffles each class, then deals positives and negatives round-robin
/// through the folds (negatives continue where positives stopped), so fold
/// class counts differ by at most one.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Folds> {
    check_k(labels.len(), k)?;
    let mut r = rng(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut r);
    neg.shuffle(&mut r);
    let warning = (pos.len() < k || neg.len() < k).then(|| {
        format!(
            "class sizes ({} positive, {} negative) below {k} folds; stratification is best-effort",
            pos.len(),
            neg.len()
        )
    });
    let mut folds = vec![Vec::new(); k];
    for (t, &i) in pos.iter().chain(&neg).enumerate() {
        folds[t % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(Folds { folds, warning })
}

/// Unstratified shuffled k-fold.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Folds> {
    check_k(n, k)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    let mut folds = vec![Vec::new(); k];
    for (t, &i) in idx.iter().enumerate() {
        folds[t % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(Folds {
        folds,
        warning: None,
    })
}
