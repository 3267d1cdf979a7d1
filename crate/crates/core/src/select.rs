//! Subset selection: the largest total capacitor VAr that fits under a cap.

use crate::bits::SwitchBits;

const BINARY_TOLERANCE: f64 = 1e-9;

/// Mask over `allowed` units maximising the summed weight subject to `sum ≤ cap`.
///
/// Binary-weighted candidate sets take the largest-first greedy path, which is
/// optimal for them; anything else goes through an exact branch and bound.
pub fn best_subset(weights: &[f64], cap: f64, allowed: SwitchBits) -> SwitchBits {
    let n = weights.len();
    let mut result = SwitchBits::zeros(n);
    if cap.is_nan() || cap < 0.0 {
        return result;
    }
    let mut order: Vec<usize> = allowed
        .ones_iter()
        .filter(|&i| weights[i] > 0.0 && weights[i] <= cap)
        .collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));

    let sorted: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    let chosen = if is_binary(&sorted) {
        largest_first(&sorted, cap)
    } else {
        branch_and_bound(&sorted, cap)
    };
    for (k, &i) in order.iter().enumerate() {
        if chosen >> k & 1 == 1 {
            result.set(i, true);
        }
    }
    result
}

/// Descending weights where each is twice the next.
fn is_binary(desc: &[f64]) -> bool {
    desc.windows(2)
        .all(|w| (w[0] - 2.0 * w[1]).abs() <= BINARY_TOLERANCE * w[0])
}

pub(crate) fn largest_first(desc: &[f64], cap: f64) -> u64 {
    let mut total = 0.0;
    let mut mask = 0u64;
    for (k, &w) in desc.iter().enumerate() {
        if total + w <= cap {
            total += w;
            mask |= 1 << k;
        }
    }
    mask
}

struct Search<'a> {
    desc: &'a [f64],
    suffix: Vec<f64>,
    cap: f64,
    best: f64,
    best_mask: u64,
}

impl Search<'_> {
    fn visit(&mut self, k: usize, total: f64, mask: u64) {
        if total > self.best {
            self.best = total;
            self.best_mask = mask;
        }
        if k == self.desc.len() || total + self.suffix[k] <= self.best {
            return;
        }
        if total + self.suffix[k] <= self.cap {
            // everything left fits
            let rest = low_bits(self.desc.len() - k) << k;
            self.best = total + self.suffix[k];
            self.best_mask = mask | rest;
            return;
        }
        let w = self.desc[k];
        if total + w <= self.cap {
            self.visit(k + 1, total + w, mask | 1 << k);
        }
        self.visit(k + 1, total, mask);
    }
}

fn low_bits(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub(crate) fn branch_and_bound(desc: &[f64], cap: f64) -> u64 {
    let mut suffix = vec![0.0; desc.len() + 1];
    for k in (0..desc.len()).rev() {
        suffix[k] = suffix[k + 1] + desc[k];
    }
    let mut search = Search {
        desc,
        suffix,
        cap,
        best: 0.0,
        best_mask: 0,
    };
    search.visit(0, 0.0, 0);
    search.best_mask
}
