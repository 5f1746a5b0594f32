//! Exhaustive meandric and Baxter permutation ensembles, and discrete re-rooting.
//!
//! Permutations are stored 0-based: `sigma[k]` is the image of position `k`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permuton::check_permutation;
use crate::seeds;

pub const MAX_MEANDER_N: usize = 7;
pub const MAX_EXHAUSTIVE_N: usize = 9;
pub const MAX_SAMPLED_BAXTER_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Meandric,
    Baxter,
    All,
}

/// Which curve indexes the rows of a meandric permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanderConvention {
    /// Row = position along the line, value = rank along the loop.
    #[default]
    LineRows,
    /// Row = rank along the loop, value = position along the line.
    LoopRows,
}

impl std::str::FromStr for MeanderConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line-rows" => Ok(MeanderConvention::LineRows),
            "loop-rows" => Ok(MeanderConvention::LoopRows),
            _ => Err(Error::Config(format!("unknown meander convention {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationEnsemble {
    pub n: usize,
    pub members: Vec<Vec<usize>>,
    pub kind: EnsembleKind,
}

impl PermutationEnsemble {
    /// One permutation per line, space-separated 1-based values.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.members {
            let line: Vec<String> = p.iter().map(|v| (v + 1).to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn sorted_members(&self) -> Vec<Vec<usize>> {
        let mut m = self.members.clone();
        m.sort();
        m
    }
}

/// All noncrossing perfect matchings of `2n` points as partner arrays.
pub fn noncrossing_matchings(n: usize) -> Vec<Vec<usize>> {
    fn fill(lo: usize, hi: usize, partner: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, rest: &mut Vec<(usize, usize)>) {
        // match point `lo` with some `j`, then solve (lo+1, j) and (j+1, hi)
        if lo >= hi {
            match rest.pop() {
                None => out.push(partner.clone()),
                Some((a, b)) => {
                    fill(a, b, partner, out, rest);
                    rest.push((a, b));
                }
            }
            return;
        }
        let mut j = lo + 1;
        while j < hi {
            partner[lo] = j;
            partner[j] = lo;
            rest.push((j + 1, hi));
            fill(lo + 1, j, partner, out, rest);
            rest.pop();
            j += 2;
        }
    }
    let mut out = Vec::new();
    let mut partner = vec![usize::MAX; 2 * n];
    fill(0, 2 * n, &mut partner, &mut out, &mut Vec::new());
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// The union of the two arch systems is one closed curve.
pub fn is_single_cycle(upper: &[usize], lower: &[usize]) -> bool {
    let m = upper.len();
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        for j in [upper[i], lower[i]] {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            parent[a.max(b)] = a.min(b);
        }
    }
    (0..m).all(|i| find(&mut parent, i) == 0)
}

/// Rooted at the rightmost crossing, the loop is followed from the root along
/// its upper arch; the root itself is visited last.
pub fn meandric_permutation(upper: &[usize], lower: &[usize], convention: MeanderConvention) -> Vec<usize> {
    let m = upper.len();
    let root = m - 1;
    let mut loop_rank = vec![0; m];
    let mut p = root;
    for k in 0..m {
        p = if k % 2 == 0 { upper[p] } else { lower[p] };
        loop_rank[p] = k;
    }
    match convention {
        MeanderConvention::LineRows => loop_rank,
        MeanderConvention::LoopRows => invert(&loop_rank),
    }
}

pub fn invert(sigma: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; sigma.len()];
    for (k, &s) in sigma.iter().enumerate() {
        inv[s] = k;
    }
    inv
}

/// Closed meanders with `2n` crossings, as permutations of size `2n`.
pub fn enumerate_meanders(n: usize, convention: MeanderConvention) -> Result<PermutationEnsemble> {
    if n == 0 || n > MAX_MEANDER_N {
        return Err(Error::TooLarge { n, max: MAX_MEANDER_N });
    }
    let matchings = noncrossing_matchings(n);
    let members: Vec<Vec<usize>> = matchings
        .par_iter()
        .map(|u| {
            matchings
                .iter()
                .filter(|l| is_single_cycle(u, l))
                .map(|l| meandric_permutation(u, l, convention))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(PermutationEnsemble {
        n: 2 * n,
        members,
        kind: EnsembleKind::Meandric,
    })
}

/// No occurrence of 2-41-3 or 3-14-2 with the middle entries adjacent.
pub fn is_baxter(sigma: &[usize]) -> bool {
    let n = sigma.len();
    for j in 0..n.saturating_sub(1) {
        let (a, b) = (sigma[j], sigma[j + 1]);
        let (lo, hi) = (a.min(b), a.max(b));
        let inside = |v: usize| v > lo && v < hi;
        let before = sigma[..j].iter().copied().filter(|&v| inside(v));
        let after = sigma[j + 2..].iter().copied().filter(|&v| inside(v));
        if a > b {
            // 2-41-3: an earlier value below a later value inside (b, a)
            if let (Some(e), Some(l)) = (before.min(), after.max()) {
                if e < l {
                    return false;
                }
            }
        } else if let (Some(e), Some(l)) = (before.max(), after.min()) {
            // 3-14-2: an earlier value above a later value inside (a, b)
            if e > l {
                return false;
            }
        }
    }
    true
}

/// Lexicographic successor; false at the last permutation.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("successor exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

pub fn enumerate_all(n: usize) -> Result<PermutationEnsemble> {
    if n == 0 || n > MAX_EXHAUSTIVE_N {
        return Err(Error::TooLarge { n, max: MAX_EXHAUSTIVE_N });
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut members = vec![p.clone()];
    while next_permutation(&mut p) {
        members.push(p.clone());
    }
    Ok(PermutationEnsemble {
        n,
        members,
        kind: EnsembleKind::All,
    })
}

pub fn enumerate_baxter(n: usize) -> Result<PermutationEnsemble> {
    let all = enumerate_all(n)?;
    Ok(PermutationEnsemble {
        n,
        members: all.members.into_iter().filter(|p| is_baxter(p)).collect(),
        kind: EnsembleKind::Baxter,
    })
}

/// Uniform Baxter permutation by rejection from uniform permutations.
pub fn sample_baxter(n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 || n > MAX_SAMPLED_BAXTER_N {
        return Err(Error::TooLarge { n, max: MAX_SAMPLED_BAXTER_N });
    }
    let mut rng = seeds::stream(seed, "baxter", 0);
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(&mut rng);
        if is_baxter(&p) {
            return Ok(p);
        }
    }
}

/// `tau(j) = ((sigma((j + i - 1) mod n + 1) - sigma(i) - 1) mod n) + 1` in
/// 1-based terms; `i` is 1-based. The root moves to the last position and value.
pub fn reroot_permutation(sigma: &[usize], i: usize) -> Result<Vec<usize>> {
    check_permutation(sigma)?;
    let n = sigma.len();
    if i == 0 || i > n {
        return Err(Error::BadRange { a: i, b: i, n });
    }
    let s = |k: usize| sigma[k - 1] as i64 + 1;
    let ni = n as i64;
    Ok((1..=n)
        .map(|j| {
            let v = (s((j + i - 1) % n + 1) - s(i) - 1).rem_euclid(ni) + 1;
            (v - 1) as usize
        })
        .collect())
}
