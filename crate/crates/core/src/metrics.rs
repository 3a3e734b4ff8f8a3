//! External clustering quality scores.
//!
//! Both scores compare a predicted partition against ground truth without
//! caring how cluster ids are numbered.  AC is the fraction of sample pairs
//! the two partitions treat alike (together in both or separated in both),
//! scaled to percent.  MI is mutual information normalized by the larger of
//! the two partition entropies, in percent.

use crate::data::Labels;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MetricReport {
    pub ac: f64,
    pub mi: f64,
    /// Joint class counts, truth-major: contingency[i][j] counts samples in
    /// truth class i+1 and predicted cluster j+1.
    pub contingency: Vec<Vec<usize>>,
}

fn check_lengths(truth: &Labels, pred: &Labels) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::LabelLength {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyData("no samples to score".into()));
    }
    Ok(())
}

pub fn contingency(truth: &Labels, pred: &Labels) -> Result<Vec<Vec<usize>>> {
    check_lengths(truth, pred)?;
    let mut table = vec![vec![0usize; pred.k()]; truth.k()];
    for (&t, &p) in truth.as_slice().iter().zip(pred.as_slice()) {
        table[t - 1][p - 1] += 1;
    }
    Ok(table)
}

fn pairs(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Pairwise agreement accuracy in percent (the Rand index scaled by 100).
pub fn rand_accuracy(truth: &Labels, pred: &Labels) -> Result<f64> {
    check_lengths(truth, pred)?;
    let m = truth.len();
    if m < 2 {
        return Err(Error::EmptyData("pairwise accuracy needs at least two samples".into()));
    }
    let table = contingency(truth, pred)?;
    let same_both: u64 = table.iter().flatten().map(|&n| pairs(n)).sum();
    let same_truth: u64 = truth.counts()[1..].iter().map(|&n| pairs(n)).sum();
    let same_pred: u64 = pred.counts()[1..].iter().map(|&n| pairs(n)).sum();
    let total = pairs(m);
    let agree = total + 2 * same_both - same_truth - same_pred;
    Ok(100.0 * agree as f64 / total as f64)
}

fn entropy(counts: &[usize], m: f64) -> f64 {
    counts
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let p = n as f64 / m;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by max(H(truth), H(pred)), in percent.
/// Two single-class partitions agree perfectly (100); if exactly one side
/// has zero entropy the score is 0.
pub fn nmi(truth: &Labels, pred: &Labels) -> Result<f64> {
    check_lengths(truth, pred)?;
    let m = truth.len() as f64;
    let table = contingency(truth, pred)?;
    let a = truth.counts();
    let b = pred.counts();
    let ht = entropy(&a[1..], m);
    let hp = entropy(&b[1..], m);
    if ht == 0.0 && hp == 0.0 {
        return Ok(100.0);
    }
    if ht == 0.0 || hp == 0.0 {
        return Ok(0.0);
    }
    let mut info = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                info += nij / m * (m * nij / (a[i + 1] as f64 * b[j + 1] as f64)).ln();
            }
        }
    }
    Ok(100.0 * info / ht.max(hp))
}

pub fn report(truth: &Labels, pred: &Labels) -> Result<MetricReport> {
    Ok(MetricReport {
        ac: rand_accuracy(truth, pred)?,
        mi: nmi(truth, pred)?,
        contingency: contingency(truth, pred)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[usize], k: usize) -> Labels {
        Labels::new(v.to_vec(), k).unwrap()
    }

    #[test]
    fn perfect_and_permuted_partitions_score_100() {
        let t = labels(&[1, 1, 2, 2, 3], 3);
        assert_eq!(rand_accuracy(&t, &t).unwrap(), 100.0);
        assert_eq!(nmi(&t, &t).unwrap(), 100.0);

        let p = labels(&[3, 3, 1, 1, 2], 3);
        assert_eq!(rand_accuracy(&t, &p).unwrap(), 100.0);
        assert!((nmi(&t, &p).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn crossed_partition_scores() {
        let t = labels(&[1, 1, 2, 2], 2);
        let p = labels(&[1, 2, 1, 2], 2);
        let ac = rand_accuracy(&t, &p).unwrap();
        assert!((ac - 100.0 / 3.0).abs() < 1e-9);
        assert!(nmi(&t, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn singletons_against_two_classes() {
        let t = labels(&[1, 1, 2, 2], 2);
        let p = labels(&[1, 2, 3, 4], 4);
        // no pair is together in pred: agreements are exactly the 4 cross pairs
        assert!((rand_accuracy(&t, &p).unwrap() - 400.0 / 6.0).abs() < 1e-9);
        // I = ln 2, max entropy = ln 4
        assert!((nmi(&t, &p).unwrap() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn zero_entropy_rules() {
        let one = labels(&[1, 1, 1], 1);
        let split = labels(&[1, 2, 3], 3);
        assert_eq!(nmi(&one, &one).unwrap(), 100.0);
        assert_eq!(nmi(&one, &split).unwrap(), 0.0);
        assert_eq!(nmi(&split, &one).unwrap(), 0.0);
        // AC: one side all-same, other all-different: no pair agrees
        assert_eq!(rand_accuracy(&one, &split).unwrap(), 0.0);
    }

    #[test]
    fn symmetry_and_errors() {
        let t = labels(&[1, 2, 2, 3, 1], 3);
        let p = labels(&[2, 2, 1, 1, 1], 2);
        assert_eq!(rand_accuracy(&t, &p).unwrap(), rand_accuracy(&p, &t).unwrap());
        assert!((nmi(&t, &p).unwrap() - nmi(&p, &t).unwrap()).abs() < 1e-12);

        let short = labels(&[1, 2], 2);
        match rand_accuracy(&t, &short) {
            Err(Error::LabelLength { left: 5, right: 2 }) => {}
            other => panic!("expected length error, got {:?}", other),
        }

        let r = report(&t, &p).unwrap();
        assert_eq!(r.contingency.len(), 3);
        assert_eq!(r.contingency[0].len(), 2);
        let total: usize = r.contingency.iter().flatten().sum();
        assert_eq!(total, 5);
    }
}
