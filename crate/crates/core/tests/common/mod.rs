#![allow(dead_code)]

use acbc_core::survey::{generate_candidate_profiles, select_tournament_field, Bracket};
use acbc_core::{Profile, RespondentRecord, Side, SurveyDesign};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sample MT counts per attribute, FBO then NFBO, as printed in the
/// published results table.
pub const FBO_MT: [[u64; 3]; 4] = [[0, 6, 7], [0, 11, 2], [6, 7, 0], [0, 12, 1]];
pub const NFBO_MT: [[u64; 3]; 4] = [[1, 2, 3], [3, 2, 1], [5, 1, 0], [2, 3, 1]];
pub const FBO_N: u64 = 49;
pub const NFBO_N: u64 = 12;

/// Plain additive chooser with random utilities; ties go left.
pub fn random_utilities(rng: &mut impl Rng, counts: &[usize]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|&m| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect()
}

pub fn choose(utilities: &[Vec<f64>], left: &Profile, right: &Profile) -> Side {
    let total = |p: &Profile| -> f64 { (0..p.len()).map(|a| utilities[a][p.level(a)]).sum() };
    if total(left) >= total(right) {
        Side::Left
    } else {
        Side::Right
    }
}

/// One respondent answering a full tournament from `byo` with random
/// additive utilities.
pub fn consistent_record(design: &SurveyDesign, id: &str, tag: &str, byo: Profile, seed: u64) -> RespondentRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let utilities = random_utilities(&mut rng, &design.level_counts());
    let candidates = generate_candidate_profiles(&byo, design, &mut rng).unwrap();
    let field = select_tournament_field(&candidates, 16, &mut rng).unwrap();
    let mut bracket = Bracket::new(field.clone()).unwrap();
    bracket
        .play_out(|t| choose(&utilities, &t.left, &t.right))
        .unwrap();
    RespondentRecord {
        id: id.to_string(),
        population_tag: tag.to_string(),
        byo,
        field,
        tasks: bracket.tasks(),
        seed: Some(seed),
    }
}

/// BYO profiles whose per-attribute histogram equals `mt`, with level
/// assignments shuffled across respondents per attribute.
pub fn byos_from_counts(mt: &[[u64; 3]; 4], seed: u64) -> Vec<Profile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mt[0].iter().sum::<u64>() as usize;
    let mut columns: Vec<Vec<usize>> = Vec::new();
    for counts in mt {
        let mut col: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(l, &c)| std::iter::repeat_n(l, c as usize))
            .collect();
        assert_eq!(col.len(), n);
        col.shuffle(&mut rng);
        columns.push(col);
    }
    (0..n)
        .map(|r| Profile::from_indices(&columns.iter().map(|c| c[r]).collect::<Vec<_>>()))
        .collect()
}

/// Field and choices that say A1 beats A2 in one round-1 task and A2 beats
/// A1 in another, with everything else equal inside each pair.
pub fn inconsistent_record(id: &str, tag: &str) -> RespondentRecord {
    let p = |l: [usize; 4]| Profile::from_indices(&l);
    let mut field = vec![
        p([0, 0, 0, 0]),
        p([1, 0, 0, 0]),
        p([0, 1, 1, 1]),
        p([1, 1, 1, 1]),
    ];
    let mut rest = Vec::new();
    for b in 0..3 {
        for c in 0..3 {
            for d in 0..3 {
                let q = p([2, b, c, d]);
                if rest.len() < 12 {
                    rest.push(q);
                }
            }
        }
    }
    field.extend(rest);
    let mut bracket = Bracket::new(field.clone()).unwrap();
    bracket.record_choice(Side::Left).unwrap();
    bracket.record_choice(Side::Right).unwrap();
    bracket.play_out(|_| Side::Left).unwrap();
    RespondentRecord {
        id: id.to_string(),
        population_tag: tag.to_string(),
        byo: p([1, 1, 0, 1]),
        field,
        tasks: bracket.tasks(),
        seed: None,
    }
}

/// 13 FBO and 6 NFBO respondents reproducing the published BYO tallies. The
/// last FBO respondent answers inconsistently.
pub fn study_fixture() -> (SurveyDesign, Vec<RespondentRecord>) {
    let design = SurveyDesign::four_by_three();
    let mut records = Vec::new();
    for (tag, mt, seed) in [("FBO", &FBO_MT, 11u64), ("NFBO", &NFBO_MT, 23u64)] {
        let byos = byos_from_counts(mt, seed);
        let n = byos.len();
        for (i, byo) in byos.into_iter().enumerate() {
            let id = format!("{tag}-{:02}", i + 1);
            if tag == "FBO" && i + 1 == n {
                let mut r = inconsistent_record(&id, tag);
                r.byo = byo;
                records.push(r);
            } else {
                records.push(consistent_record(&design, &id, tag, byo, seed * 100 + i as u64));
            }
        }
    }
    (design, records)
}

/// Exact binomial for test oracles, independent of the library's helpers.
pub fn choose_exact(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Every population with `N_i >= n_i` summing to `big_n`, lexicographic.
pub fn brute_force_populations(sample: &[u64], big_n: u64) -> Vec<Vec<u64>> {
    fn rec(sample: &[u64], left: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        let i = prefix.len();
        if i + 1 == sample.len() {
            if left >= sample[i] {
                prefix.push(left);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        let rest_min: u64 = sample[i + 1..].iter().sum();
        let mut v = sample[i];
        while v + rest_min <= left {
            prefix.push(v);
            rec(sample, left - v, prefix, out);
            prefix.pop();
            v += 1;
        }
    }
    let mut out = Vec::new();
    rec(sample, big_n, &mut Vec::new(), &mut out);
    out
}

pub fn hypergeometric(pop: &[u64], sample: &[u64]) -> f64 {
    let big_n: u64 = pop.iter().sum();
    let n: u64 = sample.iter().sum();
    pop.iter()
        .zip(sample)
        .map(|(&p, &s)| choose_exact(p, s))
        .product::<f64>()
        / choose_exact(big_n, n)
}

/// Weighted mean absolute error straight from its definition.
pub fn wmae_oracle(estimate: &[u64], sample: &[u64], big_n: u64) -> f64 {
    let pops = brute_force_populations(sample, big_n);
    let weights: Vec<f64> = pops.iter().map(|p| hypergeometric(p, sample)).collect();
    let total: f64 = weights.iter().sum();
    pops.iter()
        .zip(&weights)
        .map(|(p, w)| {
            let e: f64 = p
                .iter()
                .zip(estimate)
                .map(|(&a, &b)| (a as f64 - b as f64).abs())
                .sum::<f64>()
                / p.len() as f64;
            w * e
        })
        .sum::<f64>()
        / total
}

/// Exact integer binomial; every partial product is itself a binomial, so the
/// division is exact.
pub fn choose_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
    }
    acc
}
