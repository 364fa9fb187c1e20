//! Streaming enumeration of the probability simplex at a fixed step.

use crate::error::{Error, Result};

/// All nonnegative vectors of `dim` multiples of `1/steps` summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexGrid {
    pub dim: usize,
    /// Number of steps per unit, `1/step`.
    pub steps: u32,
}

pub fn simplex_grid(dim: usize, step: f64) -> Result<SimplexGrid> {
    if dim < 1 {
        return Err(Error::invalid("simplex grid needs dim >= 1"));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("grid step must be in (0, 1], got {step}")));
    }
    let steps = (1.0 / step).round();
    if (steps * step - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("grid step {step} does not divide 1")));
    }
    Ok(SimplexGrid {
        dim,
        steps: steps as u32,
    })
}

/// `C(n, k)` in exact integer arithmetic.
pub fn binomial(n: u64, k: u64) -> u128 {
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

impl SimplexGrid {
    pub fn step(&self) -> f64 {
        1.0 / self.steps as f64
    }

    /// `C(steps + dim - 1, dim - 1)`.
    pub fn count(&self) -> u128 {
        binomial(self.steps as u64 + self.dim as u64 - 1, self.dim as u64 - 1)
    }

    pub fn to_weights(&self, counts: &[u32]) -> Vec<f64> {
        counts.iter().map(|&c| c as f64 / self.steps as f64).collect()
    }

    /// Integer compositions in ascending lexicographic order.
    pub fn compositions(&self) -> Compositions {
        Compositions::new(Vec::new(), self.dim, self.steps)
    }

    /// Compositions starting with `prefix`, in ascending lexicographic order.
    /// Concatenating the blocks of every valid prefix of one length, in
    /// ascending prefix order, reproduces [`SimplexGrid::compositions`].
    pub fn compositions_with_prefix(&self, prefix: &[u32]) -> Compositions {
        let used: u32 = prefix.iter().sum();
        if prefix.len() > self.dim || used > self.steps {
            return Compositions::exhausted();
        }
        Compositions::new(prefix.to_vec(), self.dim - prefix.len(), self.steps - used)
    }

    /// Every prefix of `len` leading components that still leaves a valid
    /// remainder, ascending.
    pub fn prefixes(&self, len: usize) -> Vec<Vec<u32>> {
        let len = len.min(self.dim.saturating_sub(1));
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(len);
        fn rec(cur: &mut Vec<u32>, len: usize, left: u32, out: &mut Vec<Vec<u32>>) {
            if cur.len() == len {
                out.push(cur.clone());
                return;
            }
            for v in 0..=left {
                cur.push(v);
                rec(cur, len, left - v, out);
                cur.pop();
            }
        }
        rec(&mut cur, len, self.steps, &mut out);
        out
    }

    /// Weight vectors, streamed.
    pub fn iter(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.compositions().map(|c| self.to_weights(&c))
    }
}

/// Iterator over `prefix ++ tail` for every composition `tail` of `total`
/// into `parts` nonnegative parts.
#[derive(Debug, Clone)]
pub struct Compositions {
    prefix_len: usize,
    current: Option<Vec<u32>>,
}

impl Compositions {
    fn new(prefix: Vec<u32>, parts: usize, total: u32) -> Self {
        if parts == 0 {
            return Compositions {
                prefix_len: prefix.len(),
                current: (total == 0).then_some(prefix),
            };
        }
        let prefix_len = prefix.len();
        let mut v = prefix;
        v.extend(std::iter::repeat_n(0, parts - 1));
        v.push(total);
        Compositions {
            prefix_len,
            current: Some(v),
        }
    }

    fn exhausted() -> Self {
        Compositions {
            prefix_len: 0,
            current: None,
        }
    }

    fn advance(prefix_len: usize, v: &mut [u32]) -> bool {
        let d = v.len();
        if d - prefix_len < 2 {
            return false;
        }
        // Largest free index i < d-1 whose suffix still has mass to move.
        let last_nonzero = match (prefix_len..d).rev().find(|&j| v[j] > 0) {
            Some(j) => j,
            None => return false,
        };
        let i = if last_nonzero == d - 1 {
            d - 2
        } else if last_nonzero > prefix_len {
            last_nonzero - 1
        } else {
            return false;
        };
        let rest: u32 = v[i + 1..].iter().sum::<u32>() - 1;
        v[i] += 1;
        for x in &mut v[i + 1..d - 1] {
            *x = 0;
        }
        v[d - 1] = rest;
        true
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        self.current = Self::advance(self.prefix_len, &mut next).then_some(next);
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_enumerations() {
        let g = simplex_grid(2, 0.5).unwrap();
        let all: Vec<Vec<f64>> = g.iter().collect();
        assert_eq!(all, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(simplex_grid(3, 0.5).unwrap().iter().count(), 6);
        assert_eq!(simplex_grid(1, 0.1).unwrap().iter().count(), 1);
    }

    #[test]
    fn five_dim_hundredth_step_count() {
        assert_eq!(simplex_grid(5, 0.01).unwrap().count(), 4_598_126);
    }

    #[test]
    fn prefixed_blocks_concatenate_to_the_full_grid() {
        let g = simplex_grid(4, 0.2).unwrap();
        let full: Vec<Vec<u32>> = g.compositions().collect();
        for len in 0..4 {
            let joined: Vec<Vec<u32>> = g
                .prefixes(len)
                .iter()
                .flat_map(|p| g.compositions_with_prefix(p))
                .collect();
            assert_eq!(joined, full, "prefix length {len}");
        }
        let mut sorted = full.clone();
        sorted.sort();
        assert_eq!(sorted, full);
    }

    #[test]
    fn bad_steps_are_rejected() {
        assert!(simplex_grid(3, 0.3).is_err());
        assert!(simplex_grid(3, 0.0).is_err());
        assert!(simplex_grid(0, 0.5).is_err());
    }
}
