//! K-SVD dictionary training.
//!
//! Each sweep codes every training patch with OMP and then refits the atoms
//! one at a time. The refit of atom k is the best rank-one approximation of
//! the residual restricted to the patches whose code uses k, computed by
//! power iteration started from the current atom. A patch keeps its previous
//! code when the fresh OMP code represents it worse, so the training
//! objective Σ‖x_s − Dα_s‖² never increases from one sweep to the next.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

use super::dictionary::dot;
use super::{Dictionary, ErrorBound, OmpCoder, PatchSet, SparseCode};

const POWER_ITERS: usize = 200;
const POWER_TOL: f64 = 1e-12;

/// Result of a training run with its per-sweep objective.
#[derive(Debug, Clone)]
pub struct KsvdOutput {
    pub dictionary: Dictionary,
    pub codes: Vec<SparseCode>,
    /// Σ_s ‖x_s − Dα_s‖² after each sweep.
    pub objective: Vec<f64>,
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// K distinct randomly chosen non-zero patches, normalised; random unit
/// vectors fill in when there are fewer than K usable patches.
pub fn initial_dictionary(patches: &PatchSet, n_atoms: usize, seed: u64) -> Result<Dictionary> {
    if n_atoms == 0 {
        return Err(invalid("dictionary needs at least one atom"));
    }
    if patches.is_empty() {
        return Err(invalid("empty training set"));
    }
    let dim = patches.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let usable: Vec<usize> = (0..patches.len())
        .filter(|&s| {
            let p = patches.patch(s);
            dot(p, p) > 0.0
        })
        .collect();
    let take = n_atoms.min(usable.len());
    let mut picked: Vec<usize> = index::sample(&mut rng, usable.len(), take)
        .into_iter()
        .map(|i| usable[i])
        .collect();
    picked.sort_unstable();
    let mut atoms = Vec::with_capacity(dim * n_atoms);
    for s in picked {
        atoms.extend_from_slice(patches.patch(s));
    }
    while atoms.len() < dim * n_atoms {
        atoms.extend(random_unit(dim, &mut rng));
    }
    Dictionary::normalized(dim, atoms)
}

/// Trains a K-atom dictionary on `patches`; deterministic for `seed`.
pub fn train_dictionary(
    patches: &PatchSet,
    n_atoms: usize,
    sweeps: usize,
    sparsity: usize,
    bound: ErrorBound,
    seed: u64,
) -> Result<Dictionary> {
    train_dictionary_traced(patches, n_atoms, sweeps, sparsity, bound, seed).map(|o| o.dictionary)
}

/// As [`train_dictionary`], also returning final codes and the objective trace.
pub fn train_dictionary_traced(
    patches: &PatchSet,
    n_atoms: usize,
    sweeps: usize,
    sparsity: usize,
    bound: ErrorBound,
    seed: u64,
) -> Result<KsvdOutput> {
    if sparsity == 0 {
        return Err(invalid("sparsity level must be at least 1"));
    }
    let mut dict = initial_dictionary(patches, n_atoms, seed)?;
    // a separate stream for replacement atoms keeps initialisation stable
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let dim = patches.dim();
    let s_count = patches.len();
    let mut codes: Vec<Option<SparseCode>> = vec![None; s_count];
    let mut objective = Vec::with_capacity(sweeps);
    let mut scratch = vec![0.0; dim];

    for _ in 0..sweeps {
        // sparse coding stage
        let coder = OmpCoder::new(&dict);
        let mut errors = vec![0.0; s_count];
        for s in 0..s_count {
            let x = patches.patch(s);
            let eps = bound.for_signal(dot(x, x));
            let (fresh, fresh_err) = coder.encode(x, sparsity, eps)?;
            let keep_old = match &codes[s] {
                Some(old) => {
                    let old_err = residual_sq(&dict, x, old, &mut scratch);
                    (old_err < fresh_err).then_some(old_err)
                }
                None => None,
            };
            match keep_old {
                Some(e) => errors[s] = e,
                None => {
                    codes[s] = Some(fresh);
                    errors[s] = fresh_err;
                }
            }
        }

        // atom users: (patch, position in its support)
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); dict.n_atoms()];
        for (s, code) in codes.iter().enumerate() {
            if let Some(code) = code {
                for (pos, &k) in code.support.iter().enumerate() {
                    users[k].push((s, pos));
                }
            }
        }

        let mut replaced = vec![false; s_count];
        for k in 0..dict.n_atoms() {
            if users[k].is_empty() {
                let worst = (0..s_count)
                    .filter(|&s| !replaced[s])
                    .fold(None, |best: Option<usize>, s| match best {
                        Some(b) if errors[b] >= errors[s] => Some(b),
                        _ => Some(s),
                    });
                let new_atom = match worst {
                    Some(s) if errors[s] > 0.0 => {
                        replaced[s] = true;
                        let p = patches.patch(s);
                        let n = dot(p, p).sqrt();
                        p.iter().map(|v| v / n).collect()
                    }
                    _ => random_unit(dim, &mut rng),
                };
                dict.set_atom(k, &new_atom);
                continue;
            }
            refit_atom(&mut dict, k, &users[k], patches, &mut codes, &mut scratch);
        }

        let total: f64 = (0..s_count)
            .map(|s| match &codes[s] {
                Some(c) => residual_sq(&dict, patches.patch(s), c, &mut scratch),
                None => dot(patches.patch(s), patches.patch(s)),
            })
            .sum();
        objective.push(total);
    }

    let codes = codes.into_iter().map(Option::unwrap_or_default).collect();
    Ok(KsvdOutput {
        dictionary: dict,
        codes,
        objective,
    })
}

fn residual_sq(dict: &Dictionary, x: &[f64], code: &SparseCode, scratch: &mut [f64]) -> f64 {
    dict.reconstruct_into(code, scratch);
    x.iter().zip(scratch.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Rank-one refit of atom `k` and its coefficients over its users.
fn refit_atom(
    dict: &mut Dictionary,
    k: usize,
    users: &[(usize, usize)],
    patches: &PatchSet,
    codes: &mut [Option<SparseCode>],
    scratch: &mut [f64],
) {
    let dim = dict.dim();
    let m = users.len();
    // residuals without atom k's contribution, one row per user
    let mut resid = vec![0.0; m * dim];
    for (u, &(s, _)) in users.iter().enumerate() {
        let code = codes[s].as_ref().expect("users have codes");
        dict.reconstruct_into(code, scratch);
        let coef_k = code.coefs[code.support.iter().position(|&a| a == k).unwrap()];
        let row = &mut resid[u * dim..(u + 1) * dim];
        for (((r, x), approx), d) in row.iter_mut().zip(patches.patch(s)).zip(scratch.iter()).zip(dict.atom(k)) {
            *r = x - approx + coef_k * d;
        }
    }

    let mut v = dict.atom(k).to_vec();
    let mut g = vec![0.0; m];
    let start_gain = apply_rt(&resid, dim, &v, &mut g);
    if start_gain <= 1e-300 {
        // start from the strongest residual instead
        let best = (0..m)
            .max_by(|&a, &b| {
                let ra = &resid[a * dim..(a + 1) * dim];
                let rb = &resid[b * dim..(b + 1) * dim];
                dot(ra, ra).total_cmp(&dot(rb, rb))
            })
            .unwrap();
        let r = &resid[best * dim..(best + 1) * dim];
        let n = dot(r, r).sqrt();
        if n == 0.0 {
            // nothing left to explain: zero the coefficients, keep the atom
            for &(s, pos) in users {
                codes[s].as_mut().unwrap().coefs[pos] = 0.0;
            }
            return;
        }
        v = r.iter().map(|x| x / n).collect();
        apply_rt(&resid, dim, &v, &mut g);
    }

    let mut next = vec![0.0; dim];
    for _ in 0..POWER_ITERS {
        // next = R^T g where rows of `resid` are residual vectors
        next.iter_mut().for_each(|x| *x = 0.0);
        for (u, &gu) in g.iter().enumerate() {
            for (n, r) in next.iter_mut().zip(&resid[u * dim..(u + 1) * dim]) {
                *n += gu * r;
            }
        }
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            break;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        let change: f64 = next.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v.copy_from_slice(&next);
        apply_rt(&resid, dim, &v, &mut g);
        if change < POWER_TOL {
            break;
        }
    }

    dict.set_atom(k, &v);
    for (&(s, pos), &gu) in users.iter().zip(&g) {
        codes[s].as_mut().unwrap().coefs[pos] = gu;
    }
}

/// g = R v (one entry per user); returns ‖g‖².
fn apply_rt(resid: &[f64], dim: usize, v: &[f64], g: &mut [f64]) -> f64 {
    for (u, gu) in g.iter_mut().enumerate() {
        *gu = dot(&resid[u * dim..(u + 1) * dim], v);
    }
    dot(g, g)
}
