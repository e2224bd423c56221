//! Dirichlet-multinomial marginals over sparse count histograms.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Sparse counts over outcome ids, kept sorted by id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hist {
    entries: Vec<(u32, u32)>,
    total: u32,
}

impl Hist {
    pub fn new() -> Hist {
        Hist::default()
    }

    pub fn single(y: u32) -> Hist {
        Hist {
            entries: vec![(y, 1)],
            total: 1,
        }
    }

    pub fn from_counts(counts: &[u32]) -> Hist {
        let mut h = Hist::new();
        for (y, &c) in counts.iter().enumerate() {
            if c > 0 {
                h.entries.push((y as u32, c));
                h.total += c;
            }
        }
        h
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn get(&self, y: u32) -> u32 {
        match self.entries.binary_search_by_key(&y, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn add(&mut self, other: &Hist) {
        for (y, c) in other.iter() {
            match self.entries.binary_search_by_key(&y, |e| e.0) {
                Ok(i) => self.entries[i].1 += c,
                Err(i) => self.entries.insert(i, (y, c)),
            }
        }
        self.total += other.total;
    }

    /// Panics if `other` is not contained in `self`.
    pub fn sub(&mut self, other: &Hist) {
        for (y, c) in other.iter() {
            let i = self
                .entries
                .binary_search_by_key(&y, |e| e.0)
                .expect("subtracting an absent outcome");
            assert!(self.entries[i].1 >= c, "histogram underflow");
            self.entries[i].1 -= c;
            if self.entries[i].1 == 0 {
                self.entries.remove(i);
            }
        }
        self.total -= other.total;
    }
}

/// `ln(a (a+1) ... (a+n-1))`.
pub fn log_rising(a: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n <= 16 {
        (0..n).map(|i| (a + i as f64).ln()).sum()
    } else {
        ln_gamma(a + n as f64) - ln_gamma(a)
    }
}

/// Log probability of the outcome sequence summarized by `y` given that the
/// cluster has already generated `h`, under a symmetric or general
/// Dirichlet base with parameters `beta`.
pub fn collapsed_log_likelihood(y: &Hist, h: &Hist, beta: &[f64], beta_sum: f64) -> f64 {
    if y.total == 0 {
        return 0.0;
    }
    if y.total == 1 {
        let (v, _) = y.entries[0];
        return ((beta[v as usize] + h.get(v) as f64) / (beta_sum + h.total as f64)).ln();
    }
    let num: f64 = y
        .iter()
        .map(|(v, c)| log_rising(beta[v as usize] + h.get(v) as f64, c))
        .sum();
    num - log_rising(beta_sum + h.total as f64, y.total)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
