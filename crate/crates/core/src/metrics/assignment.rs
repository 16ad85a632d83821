//! Linear assignment solvers: an exact shortest-augmenting-path method with
//! dual potentials (O(n^3)) and an epsilon-scaling auction for instances above
//! the exact cap.

/// Square cost matrix stored row-major.
pub(crate) struct CostMatrix {
    pub n: usize,
    pub c: Vec<f64>,
}

impl CostMatrix {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.n + j]
    }
}

const UNASSIGNED: usize = usize::MAX;

/// Exact minimum-cost perfect matching via shortest augmenting paths.
/// Returns the column assigned to each row and the total cost.
pub(crate) fn solve_exact(cost: &CostMatrix) -> (Vec<usize>, f64) {
    let n = cost.n;
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col4row = vec![UNASSIGNED; n];
    let mut row4col = vec![UNASSIGNED; n];

    for cur_row in 0..n {
        let mut shortest = vec![f64::INFINITY; n];
        let mut path = vec![UNASSIGNED; n];
        let mut in_rows = vec![false; n];
        let mut in_cols = vec![false; n];
        let mut remaining: Vec<usize> = (0..n).collect();
        let mut min_val = 0.0f64;
        let mut i = cur_row;
        let sink = loop {
            in_rows[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = UNASSIGNED;
            for (it, &j) in remaining.iter().enumerate() {
                let r = min_val + cost.at(i, j) - u[i] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest
                    || (shortest[j] == lowest && row4col[j] == UNASSIGNED)
                {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            debug_assert!(min_val.is_finite(), "infeasible assignment instance");
            let j = remaining[index];
            in_cols[j] = true;
            remaining.swap_remove(index);
            if row4col[j] == UNASSIGNED {
                break j;
            }
            i = row4col[j];
        };

        u[cur_row] += min_val;
        for r in 0..n {
            if in_rows[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for j in 0..n {
            if in_cols[j] {
                v[j] -= min_val - shortest[j];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }

    let total = (0..n).map(|i| cost.at(i, col4row[i])).sum();
    (col4row, total)
}

/// Epsilon-scaling forward auction. Approximate: the matching cost is within
/// `n * eps_final` of optimal.
pub(crate) fn solve_auction(cost: &CostMatrix, eps_final: f64) -> (Vec<usize>, f64) {
    let n = cost.n;
    // Auction maximizes benefit; negate costs.
    let benefit = |i: usize, j: usize| -cost.at(i, j);
    let max_abs = cost.c.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut eps = (max_abs / 2.0).max(eps_final);
    let mut prices = vec![0.0f64; n];
    let mut col4row = vec![UNASSIGNED; n];
    let mut row4col = vec![UNASSIGNED; n];

    loop {
        for x in col4row.iter_mut() {
            *x = UNASSIGNED;
        }
        for x in row4col.iter_mut() {
            *x = UNASSIGNED;
        }
        let mut queue: Vec<usize> = (0..n).collect();
        while let Some(i) = queue.pop() {
            // Best and second-best net value for bidder i.
            let mut best_j = 0;
            let mut best = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            for (j, price) in prices.iter().enumerate() {
                let val = benefit(i, j) - price;
                if val > best {
                    second = best;
                    best = val;
                    best_j = j;
                } else if val > second {
                    second = val;
                }
            }
            let bid = if second.is_finite() { best - second + eps } else { eps };
            prices[best_j] += bid;
            if row4col[best_j] != UNASSIGNED {
                let evicted = row4col[best_j];
                col4row[evicted] = UNASSIGNED;
                queue.push(evicted);
            }
            row4col[best_j] = i;
            col4row[i] = best_j;
        }
        if eps <= eps_final {
            break;
        }
        eps = (eps / 4.0).max(eps_final);
    }

    let total = (0..n).map(|i| cost.at(i, col4row[i])).sum();
    (col4row, total)
}
