use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tree::{grow, Presorted};
use super::{FitConfig, Matrix, Node, RegressionTree};
use crate::error::{MtlError, Result};

const FORMAT_HEADER: &str = "gbm-ensemble v1";

/// Boosted trees: `base + learning_rate * sum(tree(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmEnsemble {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    pub n_features: usize,
    pub catalog_version: String,
}

/// Normalized split-gain importances; `has_splits` is false when every tree
/// is a single leaf, in which case the weights are all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub weights: Vec<f64>,
    pub has_splits: bool,
}

/// Stagewise residual fitting. Constant targets give an ensemble with no trees.
pub fn fit(x: &Matrix, y: &[f64], config: &FitConfig) -> Result<GbmEnsemble> {
    config.validate()?;
    if x.rows() != y.len() {
        return Err(MtlError::Shape { expected: x.rows(), got: y.len() });
    }
    if y.len() < 2 * config.min_samples_leaf {
        return Err(MtlError::Data(format!(
            "{} rows cannot hold two leaves of {} samples",
            y.len(),
            config.min_samples_leaf
        )));
    }
    x.check_finite()?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(MtlError::Data(format!("non-finite target at row {i}")));
    }
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut model = GbmEnsemble {
        base,
        learning_rate: config.learning_rate,
        trees: Vec::new(),
        n_features: x.cols(),
        catalog_version: String::new(),
    };
    if y.iter().all(|v| *v == y[0]) {
        return Ok(model);
    }
    let presorted = Presorted::new(x);
    let mut pred = vec![base; y.len()];
    let mut residual = vec![0.0; y.len()];
    for _ in 0..config.n_estimators {
        for i in 0..y.len() {
            residual[i] = y[i] - pred[i];
        }
        let tree = grow(&presorted, &residual, config.max_depth, config.min_samples_leaf);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += config.learning_rate * tree.predict(x.row(i));
        }
        model.trees.push(tree);
    }
    Ok(model)
}

impl GbmEnsemble {
    pub fn with_catalog(mut self, version: &str) -> Self {
        self.catalog_version = version.to_string();
        self
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(MtlError::Shape { expected: self.n_features, got: x.len() });
        }
        let s: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(self.base + self.learning_rate * s)
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }

    /// Predictions after each number of trees in `counts` (ascending order
    /// not required); counts above the tree total use every tree.
    pub fn staged_predict(&self, x: &Matrix, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
        if x.cols() != self.n_features {
            return Err(MtlError::Shape { expected: self.n_features, got: x.cols() });
        }
        let mut out = vec![vec![0.0; x.rows()]; counts.len()];
        for i in 0..x.rows() {
            let row = x.row(i);
            let mut acc = 0.0;
            let mut partial = Vec::with_capacity(self.trees.len() + 1);
            partial.push(0.0);
            for t in &self.trees {
                acc += t.predict(row);
                partial.push(acc);
            }
            for (k, &c) in counts.iter().enumerate() {
                out[k][i] = self.base + self.learning_rate * partial[c.min(self.trees.len())];
            }
        }
        Ok(out)
    }

    pub fn feature_importance(&self) -> Importance {
        let mut w = vec![0.0; self.n_features];
        for t in &self.trees {
            let total = match t.nodes.first() {
                Some(Node::Split { n_samples, .. }) => *n_samples as f64,
                _ => continue,
            };
            for n in &t.nodes {
                if let Node::Split { feature, n_samples, impurity_decrease, .. } = n {
                    w[*feature] += *n_samples as f64 / total * impurity_decrease;
                }
            }
        }
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            w.iter_mut().for_each(|v| *v /= s);
            Importance { weights: w, has_splits: true }
        } else {
            Importance { weights: vec![0.0; self.n_features], has_splits: false }
        }
    }

    /// Text form: a header block, then one line per node in pre-order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER}");
        let _ = writeln!(s, "learning_rate {}", self.learning_rate);
        let _ = writeln!(s, "base {}", self.base);
        let _ = writeln!(s, "n_features {}", self.n_features);
        let _ = writeln!(s, "catalog {}", self.catalog_version);
        let _ = writeln!(s, "trees {}", self.trees.len());
        for t in &self.trees {
            let _ = writeln!(s, "tree {}", t.nodes.len());
            write_preorder(t, 0, &mut s);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| -> Result<&str> {
            lines.next().ok_or_else(|| MtlError::Parse(format!("ensemble text ended before {what}")))
        };
        if next("header")? != FORMAT_HEADER {
            return Err(MtlError::Parse("not a gbm ensemble file".into()));
        }
        let field = |line: &str, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' ').or(if r.is_empty() { Some("") } else { None }))
                .map(str::to_string)
                .ok_or_else(|| MtlError::Parse(format!("expected {key}, found {line:?}")))
        };
        let learning_rate = num(&field(next("learning_rate")?, "learning_rate")?)?;
        let base = num(&field(next("base")?, "base")?)?;
        let n_features = int(&field(next("n_features")?, "n_features")?)?;
        let catalog_version = field(next("catalog")?, "catalog")?;
        let n_trees = int(&field(next("trees")?, "trees")?)?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = int(&field(next("tree")?, "tree")?)?;
            let mut raw = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                raw.push(next("node")?);
            }
            let mut nodes = Vec::with_capacity(n_nodes);
            let mut pos = 0;
            read_preorder(&raw, &mut pos, &mut nodes, n_features)?;
            if pos != raw.len() {
                return Err(MtlError::Parse("tree node count does not match its structure".into()));
            }
            trees.push(RegressionTree { nodes });
        }
        Ok(GbmEnsemble { base, learning_rate, trees, n_features, catalog_version })
    }
}

fn write_preorder(t: &RegressionTree, i: usize, s: &mut String) {
    match &t.nodes[i] {
        Node::Leaf { value } => {
            let _ = writeln!(s, "L {value}");
        }
        Node::Split { feature, threshold, left, right, n_samples, impurity_decrease } => {
            let _ = writeln!(s, "S {feature} {threshold} {n_samples} {impurity_decrease}");
            write_preorder(t, *left, s);
            write_preorder(t, *right, s);
        }
    }
}

fn read_preorder(raw: &[&str], pos: &mut usize, nodes: &mut Vec<Node>, n_features: usize) -> Result<usize> {
    let line = raw.get(*pos).ok_or_else(|| MtlError::Parse("tree truncated".into()))?;
    *pos += 1;
    let parts: Vec<&str> = line.split(' ').collect();
    let id = nodes.len();
    match parts.as_slice() {
        ["L", v] => {
            nodes.push(Node::Leaf { value: num(v)? });
        }
        ["S", f, t, n, g] => {
            let feature = int(f)?;
            if feature >= n_features {
                return Err(MtlError::Parse(format!("split feature {feature} out of range")));
            }
            nodes.push(Node::Leaf { value: 0.0 });
            let left = read_preorder(raw, pos, nodes, n_features)?;
            let right = read_preorder(raw, pos, nodes, n_features)?;
            nodes[id] = Node::Split {
                feature,
                threshold: num(t)?,
                left,
                right,
                n_samples: int(n)?,
                impurity_decrease: num(g)?,
            };
        }
        _ => return Err(MtlError::Parse(format!("bad node line {line:?}"))),
    }
    Ok(id)
}

fn num(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| MtlError::Parse(format!("bad number {s:?}")))
}

fn int(s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| MtlError::Parse(format!("bad count {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    fn step_data() -> (Matrix, Vec<f64>) {
        (Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0, 10.0, 10.0])
    }

    fn stump_config() -> FitConfig {
        FitConfig { n_estimators: 1, learning_rate: 1.0, max_depth: 1, min_samples_leaf: 1, seed: 0 }
    }

    #[test]
    fn zero_trees_predict_mean() {
        let (x, y) = step_data();
        let m = fit(&x, &y, &FitConfig { n_estimators: 0, min_samples_leaf: 1, ..FitConfig::default() }).unwrap();
        assert_eq!(m.predict(&[7.0]).unwrap(), 5.0);
        assert!(m.trees.is_empty());
    }

    #[test]
    fn stump_fits_step_exactly() {
        let (x, y) = step_data();
        let m = fit(&x, &y, &stump_config()).unwrap();
        assert_eq!(m.predict_batch(&x).unwrap(), y);
        assert_eq!(m.predict(&[2.0]).unwrap(), 10.0);
        assert_eq!(m.feature_importance().weights, vec![1.0]);
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(MtlError::Shape { .. })));
    }

    #[test]
    fn constant_target_has_no_trees() {
        let x = Matrix::new(10, 2, (0..20).map(f64::from).collect()).unwrap();
        let m = fit(&x, &[3.0; 10], &FitConfig::default()).unwrap();
        assert!(m.trees.is_empty());
        let imp = m.feature_importance();
        assert!(!imp.has_splits && imp.weights.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn rejects_non_finite_inputs() {
        let x = Matrix::new(10, 1, (0..10).map(|i| if i == 3 { f64::NAN } else { i as f64 }).collect()).unwrap();
        assert!(matches!(fit(&x, &[1.0; 10], &FitConfig::default()), Err(MtlError::Data(_))));
    }

    fn noisy_problem(seed: u64, rows: usize, cols: usize) -> (Matrix, Vec<f64>) {
        let mut rng = rng_for(seed, "gbm-test", "");
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        let x = Matrix::new(rows, cols, data).unwrap();
        let y = (0..rows).map(|i| 5.0 * (x.get(i, 0) * 6.0).sin() + 0.01 * rng.random::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn informative_feature_dominates_importance() {
        let (x, y) = noisy_problem(4, 300, 6);
        let m = fit(&x, &y, &FitConfig { n_estimators: 50, ..FitConfig::default() }).unwrap();
        let imp = m.feature_importance();
        assert!(imp.weights[0] > 0.9, "{:?}", imp.weights);
        assert!((imp.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(imp.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn training_error_never_increases() {
        let (x, y) = noisy_problem(9, 120, 3);
        let m = fit(&x, &y, &FitConfig { n_estimators: 40, learning_rate: 0.3, ..FitConfig::default() }).unwrap();
        let counts: Vec<usize> = (0..=40).collect();
        let staged = m.staged_predict(&x, &counts).unwrap();
        let errs: Vec<f64> = staged.iter().map(|p| super::super::mse(p, &y)).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errs:?}");
        assert_eq!(staged[40], m.predict_batch(&x).unwrap());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let (x, y) = noisy_problem(2, 80, 4);
        let m = fit(&x, &y, &FitConfig { n_estimators: 15, ..FitConfig::default() }).unwrap().with_catalog("cat-x");
        let back = GbmEnsemble::from_text(&m.to_text()).unwrap();
        assert_eq!(back.catalog_version, "cat-x");
        let a = m.predict_batch(&x).unwrap();
        let b = back.predict_batch(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert_eq!(back.to_text(), m.to_text());
        assert!(GbmEnsemble::from_text("nonsense").is_err());
    }

    /// Exhaustive search over every (feature, midpoint) split, scored by the
    /// summed squared error of the two children computed directly.
    fn oracle_stump(x: &Matrix, y: &[f64]) -> (usize, f64, f64, f64) {
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = (0..x.rows()).map(|i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = w[0] + (w[1] - w[0]) / 2.0;
                let (l, r): (Vec<f64>, Vec<f64>) = {
                    let mut l = Vec::new();
                    let mut r = Vec::new();
                    for i in 0..x.rows() {
                        if x.get(i, f) <= thr { l.push(y[i]) } else { r.push(y[i]) }
                    }
                    (l, r)
                };
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let sse = |v: &[f64]| {
                    let m = mean(v);
                    v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
                };
                let total = sse(&l) + sse(&r);
                if best.is_none_or(|b| total < b.0 - 1e-9 * b.0.abs().max(1e-12)) {
                    best = Some((total, f, thr, mean(&l), mean(&r)));
                }
            }
        }
        let b = best.expect("at least one split");
        (b.1, b.2, b.3, b.4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn stump_equals_exhaustive_oracle(seed in 0u64..10_000, rows in 4usize..=64, cols in 1usize..=6) {
            let (x, _) = noisy_problem(seed, rows, cols);
            let mut rng = rng_for(seed, "targets", "");
            let y: Vec<f64> = (0..rows).map(|_| rng.random::<f64>() * 10.0).collect();
            let m = fit(&x, &y, &stump_config()).unwrap();
            let (f, thr, lv, rv) = oracle_stump(&x, &y);
            match &m.trees[0].nodes[0] {
                Node::Split { feature, threshold, left, right, .. } => {
                    prop_assert_eq!(*feature, f);
                    prop_assert_eq!(*threshold, thr);
                    let leaf = |i: usize| match m.trees[0].nodes[i] { Node::Leaf { value } => value, _ => f64::NAN };
                    prop_assert!((m.base + leaf(*left) - lv).abs() < 1e-9);
                    prop_assert!((m.base + leaf(*right) - rv).abs() < 1e-9);
                }
                _ => prop_assert!(false, "expected a split"),
            }
        }
    }
}
