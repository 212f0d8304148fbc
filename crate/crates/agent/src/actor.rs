//! Two-tower softmax policy: a user tower embeds the user state, a candidate
//! tower embeds `[topic one-hot, provider state]`, and the policy is a
//! temperature softmax over their inner products across the whole candidate
//! set.

use ecosim_core::{DocId, ProviderId};
use ecosim_kernel::{Activation, KernelError, Mlp, MlpTrace, Parameterized, Visitor};
use rand::Rng;

/// Candidates that share a (provider, topic) pair share an embedding, so the
/// candidate set is stored grouped.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGroup {
    pub topic: usize,
    pub provider_id: ProviderId,
    pub provider_state: Vec<f64>,
    pub doc_ids: Vec<DocId>,
}

/// Frozen view of one step's candidate set, as the policy saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSnapshot {
    pub num_topics: usize,
    pub groups: Vec<CandidateGroup>,
    /// Candidate documents in observation order.
    pub doc_ids: Vec<DocId>,
    /// Group index of each entry of `doc_ids`.
    pub doc_group: Vec<usize>,
}

impl CandidateSnapshot {
    /// Groups `(doc id, topic, provider id, provider state)` candidates.
    pub fn build<'a, I>(num_topics: usize, candidates: I) -> Self
    where
        I: IntoIterator<Item = (DocId, usize, ProviderId, &'a [f64])>,
    {
        let mut groups: Vec<CandidateGroup> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let mut doc_ids = Vec::new();
        let mut doc_group = Vec::new();
        for (doc, topic, provider, state) in candidates {
            let g = *index.entry((provider, topic)).or_insert_with(|| {
                groups.push(CandidateGroup {
                    topic,
                    provider_id: provider,
                    provider_state: state.to_vec(),
                    doc_ids: Vec::new(),
                });
                groups.len() - 1
            });
            groups[g].doc_ids.push(doc);
            doc_ids.push(doc);
            doc_group.push(g);
        }
        CandidateSnapshot {
            num_topics,
            groups,
            doc_ids,
            doc_group,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    fn candidate_input(&self, g: usize) -> Vec<f64> {
        let group = &self.groups[g];
        let mut x = vec![0.0; self.num_topics];
        x[group.topic] = 1.0;
        x.extend_from_slice(&group.provider_state);
        x
    }

    pub fn group_of_doc(&self, doc: DocId) -> Option<usize> {
        self.doc_ids
            .iter()
            .position(|&d| d == doc)
            .map(|i| self.doc_group[i])
    }
}

/// One REINFORCE term: the user state the policy acted on, the group of the
/// chosen document, and the reward weighting its score function.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorSample {
    pub snapshot: usize,
    pub user_state: Vec<f64>,
    pub chosen_group: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub user_tower: Mlp,
    pub candidate_tower: Mlp,
    pub temperature: f64,
}

/// Stable `log(sum_g n_g exp(l_g))` and per-group probabilities.
fn group_distribution(logits: &[f64], counts: impl Iterator<Item = usize>) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits
        .iter()
        .zip(counts)
        .map(|(&l, n)| n as f64 * (l - max).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let log_z = max + total.ln();
    (log_z, weights.into_iter().map(|w| w / total).collect())
}

impl Actor {
    /// Towers use ReLU hidden layers and a linear last layer.
    pub fn new<R: Rng + ?Sized>(
        user_dim: usize,
        candidate_dim: usize,
        widths: &[usize],
        temperature: f64,
        rng: &mut R,
    ) -> Self {
        Actor {
            user_tower: Mlp::new(
                user_dim,
                widths,
                Activation::ReLU,
                Activation::Identity,
                rng,
            ),
            candidate_tower: Mlp::new(
                candidate_dim,
                widths,
                Activation::ReLU,
                Activation::Identity,
                rng,
            ),
            temperature,
        }
    }

    pub fn user_embedding(&self, user_state: &[f64]) -> Result<Vec<f64>, KernelError> {
        self.user_tower.forward(user_state)
    }

    pub fn candidate_embeddings(
        &self,
        snapshot: &CandidateSnapshot,
    ) -> Result<Vec<Vec<f64>>, KernelError> {
        (0..snapshot.groups.len())
            .map(|g| self.candidate_tower.forward(&snapshot.candidate_input(g)))
            .collect()
    }

    /// Per-group logits `<u, e_g> / T`.
    pub fn group_logits(
        &self,
        user_embedding: &[f64],
        candidate_embeddings: &[Vec<f64>],
    ) -> Vec<f64> {
        candidate_embeddings
            .iter()
            .map(|e| ecosim_kernel::tensor::dot(user_embedding, e) / self.temperature)
            .collect()
    }

    /// Per-group log normalizer and probability mass.
    pub fn group_probabilities(
        &self,
        logits: &[f64],
        snapshot: &CandidateSnapshot,
    ) -> (f64, Vec<f64>) {
        group_distribution(logits, snapshot.groups.iter().map(|g| g.doc_ids.len()))
    }

    /// Policy over the snapshot's documents, in `snapshot.doc_ids` order.
    pub fn doc_probabilities(
        &self,
        user_state: &[f64],
        snapshot: &CandidateSnapshot,
    ) -> Result<Vec<f64>, KernelError> {
        let u = self.user_embedding(user_state)?;
        let e = self.candidate_embeddings(snapshot)?;
        Ok(self.doc_probabilities_from(&u, &e, snapshot))
    }

    pub fn doc_probabilities_from(
        &self,
        u: &[f64],
        e: &[Vec<f64>],
        snapshot: &CandidateSnapshot,
    ) -> Vec<f64> {
        let logits = self.group_logits(u, e);
        let (log_z, _) = self.group_probabilities(&logits, snapshot);
        snapshot
            .doc_group
            .iter()
            .map(|&g| (logits[g] - log_z).exp())
            .collect()
    }

    /// Surrogate loss `-(1/N) sum_i R_i log pi(a_i | s_i)` and its gradient
    /// with respect to both towers.
    pub fn reinforce_loss_and_grad(
        &self,
        samples: &[ActorSample],
        snapshots: &[&CandidateSnapshot],
    ) -> Result<(f64, Actor), KernelError> {
        let mut grads = self.zeros_like();
        if samples.is_empty() {
            return Ok((0.0, grads));
        }
        let inv_n = 1.0 / samples.len() as f64;
        let inv_t = 1.0 / self.temperature;
        let mut by_snapshot: Vec<Vec<&ActorSample>> = vec![Vec::new(); snapshots.len()];
        for s in samples {
            by_snapshot[s.snapshot].push(s);
        }
        let mut loss = 0.0;
        for (snap, group_samples) in snapshots.iter().zip(by_snapshot) {
            if group_samples.is_empty() {
                continue;
            }
            let traces: Vec<MlpTrace> = (0..snap.groups.len())
                .map(|g| self.candidate_tower.forward_trace(&snap.candidate_input(g)))
                .collect::<Result<_, _>>()?;
            let emb: Vec<&[f64]> = traces.iter().map(|t| t.output()).collect();
            let dim = self.candidate_tower.output_dim();
            let mut grad_emb = vec![vec![0.0; dim]; emb.len()];
            for s in group_samples {
                let ut = self.user_tower.forward_trace(&s.user_state)?;
                let u = ut.output();
                let logits: Vec<f64> = emb
                    .iter()
                    .map(|e| ecosim_kernel::tensor::dot(u, e) * inv_t)
                    .collect();
                let (log_z, probs) = self.group_probabilities(&logits, snap);
                loss -= s.reward * (logits[s.chosen_group] - log_z) * inv_n;
                // d(-R log pi)/d logit_g = -R (1[g = a] - P_g)
                let coef = -s.reward * inv_n * inv_t;
                let mut grad_u = vec![0.0; dim];
                for (g, e) in emb.iter().enumerate() {
                    let w = coef * (if g == s.chosen_group { 1.0 } else { 0.0 } - probs[g]);
                    if w != 0.0 {
                        ecosim_kernel::tensor::axpy(w, e, &mut grad_u);
                        ecosim_kernel::tensor::axpy(w, u, &mut grad_emb[g]);
                    }
                }
                self.user_tower
                    .backward(&ut, &grad_u, &mut grads.user_tower)?;
            }
            for (t, ge) in traces.iter().zip(&grad_emb) {
                self.candidate_tower
                    .backward(t, ge, &mut grads.candidate_tower)?;
            }
        }
        Ok((loss, grads))
    }
}

impl Parameterized for Actor {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_>) {
        let p = |n: &str| {
            if prefix.is_empty() {
                n.to_string()
            } else {
                format!("{prefix}.{n}")
            }
        };
        self.user_tower.visit(&p("user_tower"), f);
        self.candidate_tower.visit(&p("candidate_tower"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.user_tower.visit_mut(f);
        self.candidate_tower.visit_mut(f);
    }

    fn zeros_like(&self) -> Self {
        Actor {
            user_tower: self.user_tower.zeros_like(),
            candidate_tower: self.candidate_tower.zeros_like(),
            temperature: self.temperature,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ecosim_core::{Purpose, RngStream};
    use ecosim_kernel::finite_difference_check;

    fn actor(seed: u64) -> Actor {
        let mut rng = RngStream::new(seed, Purpose::Test, 0, 0);
        Actor::new(4, 3 + 4, &[6, 6, 5], 1.0, &mut rng)
    }

    fn snapshot(seed: u64, docs: &[(usize, usize)]) -> CandidateSnapshot {
        let mut rng = RngStream::new(seed, Purpose::Test, 1, 0);
        let states: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
            .collect();
        CandidateSnapshot::build(
            3,
            docs.iter()
                .enumerate()
                .map(|(i, &(topic, p))| (i as DocId, topic, p, states[p].as_slice())),
        )
    }

    #[test]
    fn single_candidate_gets_all_mass() {
        let a = actor(0);
        let snap = snapshot(0, &[(1, 0)]);
        assert_eq!(
            a.doc_probabilities(&[0.3, 0.1, -0.2, 0.5], &snap).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn duplicated_candidates_share_mass() {
        let a = actor(1);
        let snap = snapshot(1, &[(1, 0), (2, 1), (1, 0)]);
        assert_eq!(snap.groups.len(), 2);
        let p = a.doc_probabilities(&[0.3, 0.1, -0.2, 0.5], &snap).unwrap();
        assert!((p[0] - p[2]).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reinforce_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let a = actor(seed);
            let owned = [
                snapshot(seed, &[(0, 0), (1, 0), (1, 1), (2, 2), (1, 1)]),
                snapshot(seed + 9, &[(2, 0), (0, 1)]),
            ];
            let snaps: Vec<&CandidateSnapshot> = owned.iter().collect();
            let mut rng = RngStream::new(seed, Purpose::Test, 2, 0);
            let samples: Vec<ActorSample> = (0..6)
                .map(|i| ActorSample {
                    snapshot: i % 2,
                    user_state: (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
                    chosen_group: if i % 2 == 0 { i % 4 } else { i % 2 },
                    // Small rewards keep the loss, and so its roundoff, small next to
                    // the checker's 1e-8 denominator floor.
                    reward: rng.uniform_range(-0.02, 0.02),
                })
                .collect();
            let report = finite_difference_check(
                &a,
                |m| m.reinforce_loss_and_grad(&samples, &snaps).unwrap(),
                1e-5,
            );
            assert!(report.passes(1e-4), "seed {seed}: {report:?}");
        }
    }
}
