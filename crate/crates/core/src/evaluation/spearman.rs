//! Spearman rank correlation with averaged ranks for ties.

/// Ranks starting at 1; values within `tol` of the first member of a run are
/// one tie group and share the mean rank.
pub fn average_ranks(v: &[f64], tol: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] - v[idx[i]] <= tol {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Tie tolerance relative to the spread of the data.
pub const TIE_REL_TOL: f64 = 1e-9;

fn tol_for(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    (hi - lo) * TIE_REL_TOL
}

/// `None` when either variable has no spread.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x, tol_for(x)), &average_ranks(y, tol_for(y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0], 0.0), vec![2.0, 3.5, 3.5, 1.0]);
    }

    // scipy.stats.spearmanr([1,2,2,3,4,4,4,5], [3,1,4,1,5,9,2,6])
    #[test]
    fn matches_scipy_with_ties() {
        let a = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 5.0];
        let b = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        assert!((spearman(&a, &b).unwrap() - 0.5495502618648208).abs() < 1e-12);
    }

    #[test]
    fn monotone_is_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&a, &[1.0, 10.0, 100.0, 1000.0]), Some(1.0));
        assert_eq!(spearman(&a, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
    }

    #[test]
    fn constant_is_none() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), None);
    }

    #[test]
    fn near_ties_grouped() {
        let r = average_ranks(&[1.0, 1.0 + 1e-15, 2.0], 1e-9);
        assert_eq!(r, vec![1.5, 1.5, 3.0]);
    }
}
