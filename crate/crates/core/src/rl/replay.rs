use rand::Rng;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition<T> {
    pub state: usize,
    pub action: usize,
    pub reward: T,
    pub next_state: usize,
    pub priority: T,
}

/// Priority-ordered experience store.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    items: Vec<Transition<T>>,
    capacity: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::new(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn items(&self) -> &[Transition<T>] {
        &self.items
    }

    pub fn max_priority(&self) -> Option<T> {
        self.items
            .iter()
            .map(|t| t.priority)
            .fold(None, |m, p| Some(m.map_or(p, |m: T| m.max(p))))
    }

    /// Stores a transition at the current maximum priority (1 when empty).
    pub fn push(&mut self, state: usize, action: usize, reward: T, next_state: usize) {
        let priority = self.max_priority().unwrap_or_else(T::one);
        self.items.push(Transition {
            state,
            action,
            reward,
            next_state,
            priority,
        });
    }

    pub fn set_priority(&mut self, j: usize, p: T) {
        self.items[j].priority = p;
    }

    /// Keeps the `capacity` highest-priority transitions. Among equal
    /// priorities older entries survive; survivors keep insertion order.
    pub fn prune(&mut self) {
        if self.items.len() <= self.capacity {
            return;
        }
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        order.sort_by(|&a, &b| {
            self.items[b]
                .priority
                .partial_cmp(&self.items[a].priority)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut keep = vec![false; self.items.len()];
        for &i in &order[..self.capacity] {
            keep[i] = true;
        }
        let mut i = 0;
        self.items.retain(|_| {
            let k = keep[i];
            i += 1;
            k
        });
    }

    /// Sampling distribution `p_j^alpha / sum p^alpha`; uniform when every
    /// priority is zero.
    pub fn probabilities(&self, alpha: f64) -> Vec<T> {
        let a = T::lit(alpha);
        let raw: Vec<T> = self
            .items
            .iter()
            .map(|t| {
                if t.priority > T::zero() {
                    t.priority.powf(a)
                } else if alpha == 0.0 {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        let total = raw.iter().fold(T::zero(), |s, &x| s + x);
        if !(total > T::zero()) || !total.is_finite() {
            let u = T::one() / T::from_usize_lossy(raw.len());
            return vec![u; raw.len()];
        }
        raw.into_iter().map(|x| x / total).collect()
    }

    /// Draws `k` indices with replacement and returns them with their
    /// importance weights `(N P(j))^-beta`, normalised by the batch maximum.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        k: usize,
        alpha: f64,
        beta: f64,
        rng: &mut R,
    ) -> Vec<(usize, T)> {
        if self.items.is_empty() || k == 0 {
            return Vec::new();
        }
        let probs = self.probabilities(alpha);
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0f64;
        for p in &probs {
            acc += p.as_f64();
            cdf.push(acc);
        }
        let n = T::from_usize_lossy(self.items.len());
        let b = T::lit(beta);
        let mut picks: Vec<(usize, T)> = (0..k)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let mut j = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
                while probs[j] <= T::zero() && j > 0 {
                    j -= 1;
                }
                let w = (n * probs[j]).powf(-b);
                (j, w)
            })
            .collect();
        let max = picks.iter().fold(T::zero(), |m, &(_, w)| m.max(w));
        if max > T::zero() && max.is_finite() {
            for p in &mut picks {
                p.1 = p.1 / max;
            }
        }
        picks
    }
}
