//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SegmentError;
use crate::text::hash_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LdaParams {
    pub k: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self { k: 8, iterations: 200, alpha: 0.1, beta: 0.01, seed: 17 }
    }
}

/// Fitted topic model. `topic_term[k][v]` is `P(term v | topic k)`; rows sum
/// to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LdaModel {
    pub k: usize,
    pub topic_term: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: BTreeMap<String, u32>,
    pub seed: u64,
    /// Overall topic prevalence in the training corpus, summing to one.
    pub topic_prevalence: Vec<f64>,
    pub infer_iterations: usize,
    pub infer_burn_in: usize,
}

/// Result of folding a token sequence into a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicInference {
    pub dist: Vec<f64>,
    /// Modal topic of each input token; `None` for out-of-vocabulary tokens.
    pub assignments: Vec<Option<usize>>,
    /// False when no token was in the vocabulary and `dist` is uniform.
    pub in_vocabulary: bool,
}

fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Fits `params.k` topics to tokenized documents. Documents should already
/// be stopworded; the vocabulary is every remaining token.
pub fn fit_lda<S: AsRef<str>>(docs: &[Vec<S>], params: &LdaParams) -> Result<LdaModel, SegmentError> {
    if docs.is_empty() {
        return Err(SegmentError::EmptyCorpus);
    }
    if params.k < 2 {
        return Err(SegmentError::InvalidParams("K must be at least 2".into()));
    }
    if !(params.alpha > 0.0 && params.beta > 0.0) {
        return Err(SegmentError::InvalidParams("alpha and beta must be positive".into()));
    }
    let mut vocab: BTreeMap<String, u32> = BTreeMap::new();
    for d in docs {
        for t in d {
            vocab.entry(String::from(t.as_ref())).or_insert(0);
        }
    }
    if vocab.is_empty() {
        return Err(SegmentError::EmptyVocabulary);
    }
    for (i, v) in vocab.values_mut().enumerate() {
        *v = i as u32;
    }
    let k = params.k;
    let v_len = vocab.len();
    let words: Vec<Vec<usize>> =
        docs.iter().map(|d| d.iter().map(|t| vocab[t.as_ref()] as usize).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut n_dk = vec![vec![0u32; k]; docs.len()];
    let mut n_kw = vec![vec![0u32; v_len]; k];
    let mut n_k = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, ws) in words.iter().enumerate() {
        let zs: Vec<usize> = ws.iter().map(|_| rng.gen_range(0..k)).collect();
        for (&w, &t) in ws.iter().zip(&zs) {
            n_dk[d][t] += 1;
            n_kw[t][w] += 1;
            n_k[t] += 1;
        }
        z.push(zs);
    }

    let vbeta = v_len as f64 * params.beta;
    let mut weights = vec![0.0; k];
    for _ in 0..params.iterations {
        for (d, ws) in words.iter().enumerate() {
            for (i, &w) in ws.iter().enumerate() {
                let old = z[d][i];
                n_dk[d][old] -= 1;
                n_kw[old][w] -= 1;
                n_k[old] -= 1;
                for t in 0..k {
                    weights[t] = (n_dk[d][t] as f64 + params.alpha) * (n_kw[t][w] as f64 + params.beta)
                        / (n_k[t] as f64 + vbeta);
                }
                let new = sample(&mut rng, &weights);
                z[d][i] = new;
                n_dk[d][new] += 1;
                n_kw[new][w] += 1;
                n_k[new] += 1;
            }
        }
    }

    let topic_term: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            let row: Vec<f64> = n_kw[t].iter().map(|&c| c as f64 + params.beta).collect();
            normalized(row)
        })
        .collect();
    let topic_prevalence = normalized(n_k.iter().map(|&c| c as f64 + params.alpha).collect());

    Ok(LdaModel {
        k,
        topic_term,
        alpha: params.alpha,
        beta: params.beta,
        vocab,
        seed: params.seed,
        topic_prevalence,
        infer_iterations: 40,
        infer_burn_in: 15,
    })
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

impl LdaModel {
    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.k as f64; self.k]
    }

    /// Infers the topic mixture of `tokens` with a fixed number of Gibbs
    /// sweeps. The sampler is seeded from the token hash, so the result is a
    /// pure function of model and input.
    pub fn infer<S: AsRef<str>>(&self, tokens: &[S]) -> TopicInference {
        let ids: Vec<Option<usize>> = tokens.iter().map(|t| self.vocab.get(t.as_ref()).map(|&i| i as usize)).collect();
        let known: Vec<(usize, usize)> = ids.iter().enumerate().filter_map(|(i, w)| w.map(|w| (i, w))).collect();
        if known.is_empty() {
            return TopicInference { dist: self.uniform(), assignments: vec![None; tokens.len()], in_vocabulary: false };
        }
        let k = self.k;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ hash_tokens(tokens));
        let mut n_k = vec![0u32; k];
        let mut z: Vec<usize> = known.iter().map(|_| rng.gen_range(0..k)).collect();
        for &t in &z {
            n_k[t] += 1;
        }
        let mut tallies = vec![vec![0u32; k]; known.len()];
        let mut theta = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let kept = self.infer_iterations.saturating_sub(self.infer_burn_in).max(1);
        let sweeps = self.infer_burn_in + kept;
        let n = known.len() as f64;
        for sweep in 0..sweeps {
            for (j, &(_, w)) in known.iter().enumerate() {
                n_k[z[j]] -= 1;
                for t in 0..k {
                    weights[t] = (n_k[t] as f64 + self.alpha) * self.topic_term[t][w];
                }
                let new = sample(&mut rng, &weights);
                z[j] = new;
                n_k[new] += 1;
            }
            if sweep >= self.infer_burn_in {
                for (j, &t) in z.iter().enumerate() {
                    tallies[j][t] += 1;
                }
                for t in 0..k {
                    theta[t] += (n_k[t] as f64 + self.alpha) / (n + k as f64 * self.alpha);
                }
            }
        }
        let mut assignments = vec![None; tokens.len()];
        for (j, &(i, _)) in known.iter().enumerate() {
            // ties resolve to the smaller topic id
            let mut best = 0;
            for t in 1..k {
                if tallies[j][t] > tallies[j][best] {
                    best = t;
                }
            }
            assignments[i] = Some(best);
        }
        TopicInference { dist: normalized(theta), assignments, in_vocabulary: true }
    }

    /// Topic mixture of `tokens`; uniform when none are in the vocabulary.
    pub fn infer_topic_dist<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        self.infer(tokens).dist
    }

    /// The `n` most probable terms of topic `k`, ties broken alphabetically.
    pub fn top_terms(&self, k: usize, n: usize) -> Vec<&str> {
        let mut terms: Vec<(&str, f64)> =
            self.vocab.iter().map(|(t, &i)| (t.as_str(), self.topic_term[k][i as usize])).collect();
        terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        terms.into_iter().take(n).map(|(t, _)| t).collect()
    }

    /// Topic ids ordered by corpus prevalence, most prevalent first.
    pub fn topics_by_prevalence(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.k).collect();
        ids.sort_by(|&a, &b| self.topic_prevalence[b].total_cmp(&self.topic_prevalence[a]).then(a.cmp(&b)));
        ids
    }

    pub fn validate(&self) -> Result<(), SegmentError> {
        let bad = |m: &str| Err(SegmentError::InvalidModel(m.into()));
        if self.k < 2 || self.topic_term.len() != self.k || self.topic_prevalence.len() != self.k {
            return bad("topic count does not match matrix shape");
        }
        let v = self.vocab.len();
        let mut seen = vec![false; v];
        for &i in self.vocab.values() {
            match seen.get_mut(i as usize) {
                Some(s) if !*s => *s = true,
                _ => return bad("vocabulary indices are not a permutation"),
            }
        }
        for row in &self.topic_term {
            if row.len() != v {
                return bad("topic row length differs from vocabulary size");
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|x| !(*x >= 0.0)) {
                return bad("topic row is not a probability vector");
            }
        }
        Ok(())
    }
}
