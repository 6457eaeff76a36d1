//! METEOR with exact and stem matching only (no synonym stage).

use std::collections::HashMap;
use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};

use super::tokenize::lowercase_tokens;

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Search nodes explored after a first complete alignment is known.
const SEARCH_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MeteorDetail {
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
    /// Candidate position → aligned reference position.
    pub alignment: Vec<Option<usize>>,
}

/// Candidate-side alignment search: maximal matching first, fewest chunks
/// second, lexicographically smallest alignment third.
struct Aligner<'a> {
    allowed: &'a [Vec<usize>],
    fixed: &'a [Option<usize>],
    target: usize,
    // Upper bound on matches still obtainable from position i onwards.
    reachable: Vec<usize>,
    best: Option<(usize, Vec<Option<usize>>)>,
    visited: usize,
}

impl<'a> Aligner<'a> {
    fn run(allowed: &'a [Vec<usize>], fixed: &'a [Option<usize>], n_ref: usize, target: usize) -> Vec<Option<usize>> {
        let n = allowed.len();
        let mut reachable = vec![0; n + 1];
        for i in (0..n).rev() {
            let can = fixed[i].is_some() || !allowed[i].is_empty();
            reachable[i] = reachable[i + 1] + usize::from(can);
        }
        let mut search = Aligner { allowed, fixed, target, reachable, best: None, visited: 0 };
        let mut used = vec![false; n_ref];
        for j in fixed.iter().flatten() {
            used[*j] = true;
        }
        let mut cur = vec![None; n];
        search.visit(0, &mut used, &mut cur, 0, 0);
        search.best.map(|(_, a)| a).unwrap_or_else(|| fixed.to_vec())
    }

    fn visit(&mut self, i: usize, used: &mut [bool], cur: &mut [Option<usize>], matched: usize, chunks: usize) {
        if let Some((best_chunks, _)) = &self.best {
            if chunks >= *best_chunks || self.visited >= SEARCH_BUDGET {
                return;
            }
        }
        self.visited += 1;
        if matched + self.reachable[i] < self.target {
            return;
        }
        if i == cur.len() {
            self.best = Some((chunks, cur.to_vec()));
            return;
        }
        let opens_chunk = |cur: &[Option<usize>], j: usize| -> usize {
            let continues = i > 0 && j > 0 && cur[i - 1] == Some(j - 1);
            usize::from(!continues)
        };
        if let Some(j) = self.fixed[i] {
            cur[i] = Some(j);
            let c = chunks + opens_chunk(cur, j);
            self.visit(i + 1, used, cur, matched + 1, c);
            cur[i] = None;
            return;
        }
        for &j in &self.allowed[i] {
            if used[j] {
                continue;
            }
            used[j] = true;
            cur[i] = Some(j);
            let c = chunks + opens_chunk(cur, j);
            self.visit(i + 1, used, cur, matched + 1, c);
            cur[i] = None;
            used[j] = false;
        }
        self.visit(i + 1, used, cur, matched, chunks);
    }
}

fn count_chunks(alignment: &[Option<usize>]) -> usize {
    alignment
        .iter()
        .enumerate()
        .filter(|(i, a)| match a {
            None => false,
            Some(j) => !(*i > 0 && *j > 0 && alignment[i - 1] == Some(j - 1)),
        })
        .count()
}

/// Size of a maximum matching when tokens match iff their keys are equal.
fn class_matching(cand: &[(usize, &str)], reference: &[(usize, &str)]) -> usize {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (_, k) in cand {
        counts.entry(k).or_default().0 += 1;
    }
    for (_, k) in reference {
        counts.entry(k).or_default().1 += 1;
    }
    counts.values().map(|(a, b)| a.min(b)).sum()
}

fn align_stage(cand_keys: &[String], ref_keys: &[String], fixed: &[Option<usize>]) -> Vec<Option<usize>> {
    let ref_used: Vec<bool> = {
        let mut u = vec![false; ref_keys.len()];
        for j in fixed.iter().flatten() {
            u[*j] = true;
        }
        u
    };
    let free_c: Vec<(usize, &str)> =
        cand_keys.iter().enumerate().filter(|(i, _)| fixed[*i].is_none()).map(|(i, k)| (i, k.as_str())).collect();
    let free_r: Vec<(usize, &str)> =
        ref_keys.iter().enumerate().filter(|(j, _)| !ref_used[*j]).map(|(j, k)| (j, k.as_str())).collect();
    let allowed: Vec<Vec<usize>> = cand_keys
        .iter()
        .enumerate()
        .map(|(i, k)| {
            if fixed[i].is_some() {
                return Vec::new();
            }
            free_r.iter().filter(|(_, rk)| *rk == k).map(|(j, _)| *j).collect()
        })
        .collect();
    let target = fixed.iter().flatten().count() + class_matching(&free_c, &free_r);
    Aligner::run(&allowed, fixed, ref_keys.len(), target)
}

pub fn meteor_detail(candidate: &str, reference: &str) -> MeteorDetail {
    let c = lowercase_tokens(candidate);
    let r = lowercase_tokens(reference);
    let none = vec![None; c.len()];
    let exact = align_stage(&c, &r, &none);
    let stem = |ts: &[String]| -> Vec<String> { ts.iter().map(|t| STEMMER.stem(t).into_owned()).collect() };
    let alignment = align_stage(&stem(&c), &stem(&r), &exact);

    let matches = alignment.iter().flatten().count();
    let chunks = count_chunks(&alignment);
    if matches == 0 {
        return MeteorDetail {
            matches,
            chunks,
            precision: 0.0,
            recall: 0.0,
            fmean: 0.0,
            penalty: 0.0,
            score: 0.0,
            alignment,
        };
    }
    let m = matches as f64;
    let precision = m / c.len() as f64;
    let recall = m / r.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    MeteorDetail { matches, chunks, precision, recall, fmean, penalty, score: fmean * (1.0 - penalty), alignment }
}

pub fn meteor(candidate: &str, reference: &str) -> f64 {
    meteor_detail(candidate, reference).score
}
