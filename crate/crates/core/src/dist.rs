//! Probability vectors over the vocabulary.

use rand::Rng;

use crate::corpus::TokenId;

/// A probability distribution over token ids.
///
/// `Dense` stores one entry per vocabulary id. `Sparse` stores `(id, p)`
/// pairs sorted by probability descending, ties by id ascending; ids not
/// listed have probability zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Dense(Vec<f64>),
    Sparse(Vec<(TokenId, f64)>),
}

impl Distribution {
    /// Point mass on `id`.
    pub fn point(id: TokenId) -> Self {
        Distribution::Sparse(vec![(id, 1.0)])
    }

    /// Builds a sparse distribution, sorting entries into canonical order.
    pub fn sparse(mut entries: Vec<(TokenId, f64)>) -> Self {
        sort_canonical(&mut entries);
        Distribution::Sparse(entries)
    }

    /// Normalized distribution proportional to `counts`.
    pub fn from_counts(counts: &[u64]) -> Option<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return None;
        }
        let total = total as f64;
        Some(Distribution::Dense(
            counts.iter().map(|&c| c as f64 / total).collect(),
        ))
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        match self {
            Distribution::Dense(p) => p.get(id.index()).copied().unwrap_or(0.0),
            Distribution::Sparse(entries) => entries
                .iter()
                .find(|(j, _)| *j == id)
                .map_or(0.0, |&(_, p)| p),
        }
    }

    /// Stored `(id, p)` entries; dense distributions yield every id.
    pub fn entries(&self) -> Box<dyn Iterator<Item = (TokenId, f64)> + '_> {
        match self {
            Distribution::Dense(p) => Box::new(
                p.iter()
                    .enumerate()
                    .map(|(j, &p)| (TokenId::new(j as u32), p)),
            ),
            Distribution::Sparse(entries) => Box::new(entries.iter().copied()),
        }
    }

    /// Number of stored entries.
    pub fn support_len(&self) -> usize {
        match self {
            Distribution::Dense(p) => p.len(),
            Distribution::Sparse(e) => e.len(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.entries().map(|(_, p)| p).sum()
    }

    /// Largest id referenced by a stored entry, if any.
    pub fn max_id(&self) -> Option<TokenId> {
        match self {
            Distribution::Dense(p) => p.len().checked_sub(1).map(|j| TokenId::new(j as u32)),
            Distribution::Sparse(e) => e.iter().map(|&(j, _)| j).max(),
        }
    }

    /// True when every entry is finite and non-negative, sparse ids are
    /// unique, and the total is within `tol` of one.
    pub fn is_valid(&self, tol: f64) -> bool {
        if self.entries().any(|(_, p)| !(p.is_finite() && p >= 0.0)) {
            return false;
        }
        if let Distribution::Sparse(e) = self {
            let mut ids: Vec<_> = e.iter().map(|&(j, _)| j).collect();
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return false;
            }
        }
        (self.sum() - 1.0).abs() <= tol
    }

    /// Keeps the `k` most probable entries (ties by smaller id) and
    /// renormalizes them to sum to one. `k == 0` returns the distribution
    /// unchanged.
    pub fn top_k(&self, k: usize) -> Distribution {
        if k == 0 {
            return self.clone();
        }
        let mut entries: Vec<(TokenId, f64)> = match self {
            Distribution::Dense(_) => self.entries().filter(|&(_, p)| p > 0.0).collect(),
            Distribution::Sparse(e) => e.clone(),
        };
        sort_canonical(&mut entries);
        entries.truncate(k);
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if total > 0.0 {
            for (_, p) in &mut entries {
                *p /= total;
            }
        }
        Distribution::Sparse(entries)
    }

    /// Dense copy with `len` entries.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (j, p) in self.entries() {
            if j.index() < len {
                out[j.index()] += p;
            }
        }
        out
    }

    /// Draws an id by inverse CDF in ascending id order, skipping ids for
    /// which `excluded` returns true. Returns `None` if no mass remains.
    pub fn sample_excluding<R, F>(&self, rng: &mut R, excluded: F) -> Option<TokenId>
    where
        R: Rng + ?Sized,
        F: Fn(TokenId) -> bool,
    {
        let mut support: Vec<(TokenId, f64)> = self
            .entries()
            .filter(|&(j, p)| p > 0.0 && !excluded(j))
            .collect();
        if let Distribution::Sparse(_) = self {
            support.sort_unstable_by_key(|&(j, _)| j);
        }
        let total: f64 = support.iter().map(|&(_, p)| p).sum();
        if support.is_empty() || total <= 0.0 {
            return None;
        }
        let u = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for &(j, p) in &support {
            acc += p;
            if u < acc {
                return Some(j);
            }
        }
        support.last().map(|&(j, _)| j)
    }

    /// Inverse-CDF draw over all stored entries.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<TokenId> {
        self.sample_excluding(rng, |_| false)
    }
}

fn sort_canonical(entries: &mut [(TokenId, f64)]) {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn t(i: u32) -> TokenId {
        TokenId::new(i)
    }

    #[test]
    fn top_k_orders_and_renormalizes() {
        let d = Distribution::Dense(vec![0.1, 0.3, 0.3, 0.2, 0.1]);
        let k = d.top_k(3);
        let Distribution::Sparse(e) = &k else {
            panic!("expected sparse")
        };
        assert_eq!(e.iter().map(|x| x.0).collect::<Vec<_>>(), vec![t(1), t(2), t(3)]);
        assert!((e[0].1 - 0.375).abs() < 1e-15);
        assert!((e[2].1 - 0.25).abs() < 1e-15);
        assert!(k.is_valid(1e-9));
    }

    #[test]
    fn top_one_is_point_mass_on_argmax() {
        let d = Distribution::Dense(vec![0.2, 0.2, 0.6]);
        assert_eq!(d.top_k(1), Distribution::point(t(2)));
        // tie goes to smaller id
        let d = Distribution::Dense(vec![0.4, 0.4, 0.2]);
        assert_eq!(d.top_k(1), Distribution::point(t(0)));
    }

    #[test]
    fn top_zero_is_identity() {
        let d = Distribution::Dense(vec![0.5, 0.5]);
        assert_eq!(d.top_k(0), d);
    }

    #[test]
    fn point_mass_always_sampled() {
        let d = Distribution::point(t(3));
        let mut rng = SplitMix64::new(1);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), Some(t(3)));
        }
    }

    #[test]
    fn excluded_ids_never_sampled() {
        let d = Distribution::Dense(vec![0.25, 0.25, 0.25, 0.25]);
        let mut rng = SplitMix64::new(9);
        for _ in 0..1000 {
            let j = d.sample_excluding(&mut rng, |j| j.index() < 2).unwrap();
            assert!(j.index() >= 2);
        }
        assert_eq!(d.sample_excluding(&mut rng, |_| true), None);
    }

    #[test]
    fn validity_checks() {
        assert!(!Distribution::Dense(vec![0.5, 0.6]).is_valid(1e-9));
        assert!(!Distribution::Dense(vec![-0.1, 1.1]).is_valid(1e-9));
        assert!(!Distribution::Sparse(vec![(t(1), 0.5), (t(1), 0.5)]).is_valid(1e-9));
        assert!(Distribution::point(t(0)).is_valid(0.0));
    }
}
