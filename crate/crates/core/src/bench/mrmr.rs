//! Greedy minimum-redundancy maximum-relevance baseline.

use crate::error::{Error, Result};
use crate::solver::AssocSystem;

/// (1/|S|) Σ_{k∈S} 𝕁_k − (1/|S|²) Σ_{k,l∈S} 𝑲_kl.
pub fn mrmr_criterion(sys: &AssocSystem, set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let m = set.len() as f64;
    let rel: f64 = set.iter().map(|&k| sys.relevance()[k]).sum();
    let red: f64 = set
        .iter()
        .flat_map(|&k| set.iter().map(move |&l| (k, l)))
        .map(|(k, l)| sys.redundancy()[[k, l]])
        .sum();
    rel / m - red / (m * m)
}

/// Forward selection of `s` features: start from the most relevant feature,
/// then repeatedly add the one giving the largest criterion. Ties go to the
/// lowest index. Returned in the order of selection.
pub fn greedy_mrmr(sys: &AssocSystem, s: usize) -> Result<Vec<usize>> {
    let p = sys.dim();
    if s == 0 || s > p {
        return Err(Error::invalid(format!("need 1 <= s <= {p}, got {s}")));
    }
    let j = sys.relevance();
    let first = (0..p)
        .reduce(|b, k| if j[k] > j[b] { k } else { b })
        .expect("p >= 1");
    let mut chosen = vec![first];
    let mut used = vec![false; p];
    used[first] = true;
    let mut rel_sum = j[first];
    let mut red_sum = sys.redundancy()[[first, first]];
    while chosen.len() < s {
        let m = (chosen.len() + 1) as f64;
        let mut best: Option<(usize, f64)> = None;
        for k in (0..p).filter(|&k| !used[k]) {
            let cross: f64 = chosen.iter().map(|&l| sys.redundancy()[[k, l]]).sum();
            let red = red_sum + 2.0 * cross + sys.redundancy()[[k, k]];
            let score = (rel_sum + j[k]) / m - red / (m * m);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((k, score));
            }
        }
        let (k, _) = best.expect("unused feature remains");
        let cross: f64 = chosen.iter().map(|&l| sys.redundancy()[[k, l]]).sum();
        red_sum += 2.0 * cross + sys.redundancy()[[k, k]];
        rel_sum += j[k];
        used[k] = true;
        chosen.push(k);
    }
    Ok(chosen)
}
