//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::HashSet;

use lsimpute::corpus::tokenize_sentence;
use lsimpute::{EmbeddingMatrix, LabeledGraph};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Projected gradient with Nesterov momentum and adaptive restart, iterated
/// until the iterate stops moving.
pub fn projected_gradient_nnls(cols: &[Vec<f64>], b: &[f64], tol: f64) -> Vec<f64> {
    let n = cols.len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let g: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dot(&cols[i], &cols[j])).collect()).collect();
    let c: Vec<f64> = cols.iter().map(|col| dot(col, b)).collect();
    // Lipschitz bound: Frobenius norm of the Gram matrix
    let lip = g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let grad = |y: &[f64]| -> Vec<f64> { (0..n).map(|i| dot(&g[i], y) - c[i]).collect() };
    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..2_000_000 {
        let gy = grad(&y);
        let next: Vec<f64> = (0..n).map(|i| (y[i] - gy[i] / lip).max(0.0)).collect();
        let step = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        // restart momentum when it points uphill
        let uphill = (0..n).map(|i| gy[i] * (next[i] - x[i])).sum::<f64>() > 0.0;
        if uphill {
            t = 1.0;
            y = x.clone();
            continue;
        }
        y = (0..n)
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - x[i]))
            .collect();
        x = next;
        t = t_next;
        if step < tol {
            break;
        }
    }
    x
}

pub fn residual(cols: &[Vec<f64>], x: &[f64], b: &[f64]) -> f64 {
    let mut r = b.to_vec();
    for (xi, col) in x.iter().zip(cols) {
        for (rk, ak) in r.iter_mut().zip(col) {
            *rk -= xi * ak;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Kruskal over the complete graph; edges as sorted `(u, v)` with `u < v`.
pub fn kruskal_mst(points: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            edges.push((d, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut out = Vec::new();
    for (_, i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

pub fn random_points(r: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

pub fn matrix(points: &[Vec<f64>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(
        points[0].len(),
        points.iter().enumerate().map(|(i, p)| (format!("t{i}"), p.clone())),
    )
    .unwrap()
}

/// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(r));
    let qr = g.qr();
    let (q, rr) = (qr.q(), qr.r());
    let signs = DMatrix::from_diagonal(&rr.diagonal().map(|d| if d < 0.0 { -1.0 } else { 1.0 }));
    q * signs
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Textbook two-pass Pearson, returning `None` on constant input.
pub fn pearson_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// Shared-latent benchmark: rows of `z·A + noise` in two spaces, with the
/// last `hidden` semantic rows withheld.
pub struct SyntheticSpaces {
    pub semantic_visible: EmbeddingMatrix,
    pub domain: EmbeddingMatrix,
    pub hidden_truth: EmbeddingMatrix,
}

pub fn synthetic_spaces(seed: u64, n: usize, latent: usize, dim: usize, hidden: usize, noise: f64) -> SyntheticSpaces {
    let mut r = rng(seed);
    let z: Vec<Vec<f64>> = (0..n).map(|_| (0..latent).map(|_| gaussian(&mut r)).collect()).collect();
    let a_s: Vec<Vec<f64>> = (0..latent).map(|_| (0..dim).map(|_| gaussian(&mut r)).collect()).collect();
    let a_d: Vec<Vec<f64>> = (0..latent).map(|_| (0..dim).map(|_| gaussian(&mut r)).collect()).collect();
    let mut project = |a: &Vec<Vec<f64>>, zi: &Vec<f64>| -> Vec<f64> {
        (0..dim)
            .map(|c| (0..latent).map(|l| zi[l] * a[l][c]).sum::<f64>() + noise * gaussian(&mut r))
            .collect()
    };
    let sem: Vec<Vec<f64>> = z.iter().map(|zi| project(&a_s, zi)).collect();
    let dom: Vec<Vec<f64>> = z.iter().map(|zi| project(&a_d, zi)).collect();
    let tok = |i: usize| format!("w{i}");
    SyntheticSpaces {
        semantic_visible: EmbeddingMatrix::from_rows(dim, (0..n - hidden).map(|i| (tok(i), sem[i].clone()))).unwrap(),
        domain: EmbeddingMatrix::from_rows(dim, (0..n).map(|i| (tok(i), dom[i].clone()))).unwrap(),
        hidden_truth: EmbeddingMatrix::from_rows(dim, (n - hidden..n).map(|i| (tok(i), sem[i].clone()))).unwrap(),
    }
}

/// Two 5-cliques `a0..a4` and `b0..b4` joined by the edge a0–b0.
pub fn barbell() -> LabeledGraph {
    let names: Vec<String> = ["a", "b"]
        .iter()
        .flat_map(|c| (0..5).map(move |i| format!("{c}{i}")))
        .collect();
    let mut edges = Vec::new();
    for c in ["a", "b"] {
        for i in 0..5 {
            for j in i + 1..5 {
                edges.push((format!("{c}{i}"), format!("{c}{j}")));
            }
        }
    }
    edges.push(("a0".into(), "b0".into()));
    LabeledGraph::new(names.iter().map(|n| (n.clone(), n.clone())), edges).unwrap()
}

/// Per-sentence brute force: tokenize, then test every term and plural form.
pub fn naive_filter(lines: &[String], terms: &[String]) -> (Vec<String>, usize) {
    let mut kept = Vec::new();
    let mut removed = 0;
    for line in lines {
        let toks: HashSet<String> = tokenize_sentence(line).into_iter().collect();
        let hit = terms
            .iter()
            .any(|t| toks.contains(t) || toks.contains(&format!("{t}s")) || toks.contains(&format!("{t}es")));
        if hit {
            removed += 1;
        } else {
            kept.push(line.clone());
        }
    }
    (kept, removed)
}

pub const FILTER_VOCAB: [&str; 12] = [
    "anemia", "anemias", "anemic", "virus", "viruses", "Lasix", "coumadin.", "(rales)", "the", "with", "patient",
    "alpha-2-HS",
];

pub fn random_sentences(r: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let len = r.random_range(0..10);
            (0..len)
                .map(|_| FILTER_VOCAB[r.random_range(0..FILTER_VOCAB.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
