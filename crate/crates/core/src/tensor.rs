//! Dense coordinate tensors of small rank.

use serde::Serialize;

/// Row-major tensor with all indices running over `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor {
    pub n: usize,
    pub rank: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Tensor {
            n,
            rank,
            data: vec![0.0; n.pow(rank as u32)],
        }
    }

    /// Fills every entry from its index tuple.
    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(n, rank);
        let mut idx = vec![0usize; rank];
        for k in 0..t.data.len() {
            let mut r = k;
            for slot in idx.iter_mut().rev() {
                *slot = r % n;
                r /= n;
            }
            t.data[k] = f(&idx);
        }
        t
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    /// Full contraction with one vector per slot.
    pub fn apply(&self, vs: &[&[f64]]) -> f64 {
        assert_eq!(vs.len(), self.rank);
        let mut acc = 0.0;
        let mut idx = vec![0usize; self.rank];
        for k in 0..self.data.len() {
            let mut r = k;
            for slot in idx.iter_mut().rev() {
                *slot = r % self.n;
                r /= self.n;
            }
            let w: f64 = idx.iter().zip(vs).map(|(&i, v)| v[i]).product();
            acc += w * self.data[k];
        }
        acc
    }

    /// Contracts all slots but the first, giving a vector.
    pub fn apply_tail(&self, vs: &[&[f64]]) -> Vec<f64> {
        assert_eq!(vs.len() + 1, self.rank);
        let stride = self.n.pow(self.rank as u32 - 1);
        (0..self.n)
            .map(|i| {
                let sub = Tensor {
                    n: self.n,
                    rank: self.rank - 1,
                    data: self.data[i * stride..(i + 1) * stride].to_vec(),
                };
                sub.apply(vs)
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest difference between entries related by permuting the slots
    /// listed in `slots`.
    pub fn symmetry_spread(&self, slots: &[usize]) -> f64 {
        let mut worst: f64 = 0.0;
        let mut idx = vec![0usize; self.rank];
        for k in 0..self.data.len() {
            let mut r = k;
            for slot in idx.iter_mut().rev() {
                *slot = r % self.n;
                r /= self.n;
            }
            for a in 0..slots.len() {
                for b in a + 1..slots.len() {
                    let mut p = idx.clone();
                    p.swap(slots[a], slots[b]);
                    worst = worst.max((self.data[k] - self.get(&p)).abs());
                }
            }
        }
        worst
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_and_symmetry() {
        let t = Tensor::from_fn(2, 3, |i| (i[0] + i[1] + i[2]) as f64);
        assert_eq!(t.symmetry_spread(&[0, 1, 2]), 0.0);
        let u = [1.0, 2.0];
        // Σ (i+j+k) u_i u_j u_k = 3 (Σ i u_i)(Σ u)^2 = 3 * 2 * 9
        assert!((t.apply(&[&u, &u, &u]) - 54.0).abs() < 1e-12);
        let v = t.apply_tail(&[&u, &u]);
        assert_eq!(v.len(), 2);
        assert!((v[0] * u[0] + v[1] * u[1] - 54.0).abs() < 1e-12);
        let a = Tensor::from_fn(2, 2, |i| i[0] as f64);
        assert_eq!(a.symmetry_spread(&[0, 1]), 1.0);
    }
}
