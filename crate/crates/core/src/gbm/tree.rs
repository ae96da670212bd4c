use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// rows with `x[feature] <= threshold` go left
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// variance reduction per sample reaching the node
        impurity_decrease: f64,
    },
    Leaf {
        value: f64,
    },
}

/// Binary tree stored as a node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }
}

/// Column-major copy of the training matrix with per-feature row order.
pub(crate) struct Presorted {
    rows: usize,
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &Matrix) -> Self {
        let cols: Vec<Vec<f64>> = (0..x.cols()).map(|j| (0..x.rows()).map(|i| x.get(i, j)).collect()).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut o: Vec<u32> = (0..x.rows() as u32).collect();
                o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                o
            })
            .collect();
        Presorted { rows: x.rows(), cols, order }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Midpoint between consecutive distinct values that still separates them.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi { lo } else { m }
}

/// Exact greedy tree on `target`, grown level by level. Among equal gains
/// the lowest feature index, then the lowest threshold, wins.
pub(crate) fn grow(p: &Presorted, target: &[f64], max_depth: usize, min_leaf: usize) -> RegressionTree {
    let n = p.rows;
    let mut node_of = vec![0usize; n];
    // per node: (sum, count)
    let mut stats: Vec<(f64, usize)> = vec![(target.iter().sum(), n)];
    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut frontier: Vec<usize> = if n >= 2 * min_leaf { vec![0] } else { vec![] };

    for _ in 0..max_depth {
        if frontier.is_empty() {
            break;
        }
        let k = frontier.len();
        let mut slot_of = vec![usize::MAX; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot_of[id] = s;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; k];
        let mut left_sum = vec![0.0; k];
        let mut left_cnt = vec![0usize; k];
        let mut last = vec![0.0; k];
        for (f, col) in p.cols.iter().enumerate() {
            left_sum.iter_mut().for_each(|v| *v = 0.0);
            left_cnt.iter_mut().for_each(|v| *v = 0);
            for &r in &p.order[f] {
                let r = r as usize;
                let s = slot_of[node_of[r]];
                if s == usize::MAX {
                    continue;
                }
                let v = col[r];
                let nl = left_cnt[s];
                if nl >= min_leaf && v > last[s] {
                    let (tot, cnt) = stats[frontier[s]];
                    let nr = cnt - nl;
                    if nr >= min_leaf {
                        let sl = left_sum[s];
                        let sr = tot - sl;
                        let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - tot * tot / cnt as f64;
                        if best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate { gain, feature: f, threshold: midpoint(last[s], v) });
                        }
                    }
                }
                left_sum[s] += target[r];
                left_cnt[s] += 1;
                last[s] = v;
            }
        }

        let mut split_of = vec![None; nodes.len()];
        let mut next = Vec::new();
        for (s, &id) in frontier.iter().enumerate() {
            let (tot, cnt) = stats[id];
            // ignore gains that are rounding noise relative to the node's signal
            let noise = 1e-12 * (tot * tot / cnt as f64).abs().max(1e-300);
            let Some(c) = best[s].filter(|c| c.gain > noise) else { continue };
            let l = nodes.len();
            nodes.push(None);
            nodes.push(None);
            stats.push((0.0, 0));
            stats.push((0.0, 0));
            nodes[id] = Some(Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left: l,
                right: l + 1,
                n_samples: cnt,
                impurity_decrease: c.gain / cnt as f64,
            });
            split_of.resize(nodes.len(), None);
            split_of[id] = Some((c.feature, c.threshold, l));
        }
        for r in 0..n {
            if let Some((f, t, l)) = split_of[node_of[r]] {
                let child = if p.cols[f][r] <= t { l } else { l + 1 };
                node_of[r] = child;
                stats[child].0 += target[r];
                stats[child].1 += 1;
            }
        }
        for &id in &frontier {
            if let Some(Some(Node::Split { left, right, .. })) = nodes.get(id) {
                for c in [*left, *right] {
                    if stats[c].1 >= 2 * min_leaf {
                        next.push(c);
                    }
                }
            }
        }
        frontier = next;
    }

    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            n.unwrap_or_else(|| {
                let (s, c) = stats[i];
                Node::Leaf { value: if c > 0 { s / c as f64 } else { 0.0 } }
            })
        })
        .collect();
    RegressionTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_on_step_data() {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let t = grow(&Presorted::new(&x), &[0.0, 0.0, 10.0, 10.0], 1, 1);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((*feature, *threshold), (0, 1.5)),
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict(&[2.0]), 10.0);
        assert_eq!(t.predict(&[0.5]), 0.0);
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert!(midpoint(lo, hi) < hi);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }

    #[test]
    fn leaf_size_respected() {
        let x = Matrix::new(6, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let t = grow(&Presorted::new(&x), &[0.0, 9.0, 9.0, 9.0, 9.0, 9.0], 1, 2);
        // the best unrestricted split (after the first row) is not allowed
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 1.5),
            _ => panic!("expected a split"),
        }
    }
}
