//! CART building blocks shared by the forest (Gini classification trees) and
//! the booster (squared-error regression trees with Newton leaf values).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

pub fn predict_row(nodes: &[Node], row: &[f64]) -> f64 {
    let mut idx = 0;
    loop {
        match &nodes[idx] {
            Node::Leaf { value } => return *value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                idx = if row[*feature] <= *threshold {
                    *left
                } else {
                    *right
                };
            }
        }
    }
}

pub struct TreeConfig {
    pub max_depth: usize,
    /// Number of candidate features sampled per node.
    pub max_features: usize,
    pub min_leaf: usize,
}

const MIN_DECREASE: f64 = 1e-12;

/// Sample `k` distinct feature indices, in draw order (partial Fisher-Yates).
fn sample_features<R: Rng>(d: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if k >= d {
        return (0..d).collect();
    }
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.random_range(i..d);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Grow a Gini-impurity classification tree over `rows`. Leaves hold the
/// class-1 fraction. Returns the node arena and the per-feature weighted
/// impurity decrease (unnormalised).
pub fn grow_classification<R: Rng>(
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    cfg: &TreeConfig,
    rng: &mut R,
) -> (Vec<Node>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut importance = vec![0.0; x.n_cols()];
    let n_root = rows.len() as f64;
    let mut work = rows.to_vec();
    build_cls(
        x,
        y,
        &mut work,
        0,
        cfg,
        rng,
        n_root,
        &mut nodes,
        &mut importance,
    );
    (nodes, importance)
}

fn gini(n1: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p1 = n1 / n;
    let p0 = 1.0 - p1;
    1.0 - p0 * p0 - p1 * p1
}

#[allow(clippy::too_many_arguments)]
fn build_cls<R: Rng>(
    x: &Matrix,
    y: &[u8],
    rows: &mut [usize],
    depth: usize,
    cfg: &TreeConfig,
    rng: &mut R,
    n_root: f64,
    nodes: &mut Vec<Node>,
    importance: &mut [f64],
) -> usize {
    let n = rows.len();
    let n1: usize = rows.iter().filter(|i| y[**i] == 1).count();
    let leaf_value = n1 as f64 / n as f64;

    let make_leaf = |nodes: &mut Vec<Node>| {
        nodes.push(Node::Leaf { value: leaf_value });
        nodes.len() - 1
    };

    if depth >= cfg.max_depth || n < 2 * cfg.min_leaf || n1 == 0 || n1 == n {
        return make_leaf(nodes);
    }

    let parent_gini = gini(n1 as f64, n as f64);
    let candidates = sample_features(x.n_cols(), cfg.max_features, rng);

    let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &feature in &candidates {
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (x.get(i, feature), y[i])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_n = 0.0;
        let mut left_1 = 0.0;
        let total_1 = n1 as f64;
        for k in 0..n - 1 {
            left_n += 1.0;
            left_1 += pairs[k].1 as f64;
            if pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let right_n = n as f64 - left_n;
            if (left_n as usize) < cfg.min_leaf || (right_n as usize) < cfg.min_leaf {
                continue;
            }
            let w = (left_n * gini(left_1, left_n) + right_n * gini(total_1 - left_1, right_n))
                / n as f64;
            let decrease = parent_gini - w;
            if decrease > MIN_DECREASE
                && best.map_or(true, |(bd, _, _)| decrease > bd + MIN_DECREASE)
            {
                let threshold = 0.5 * (pairs[k].0 + pairs[k + 1].0);
                best = Some((decrease, feature, threshold));
            }
        }
    }

    let Some((decrease, feature, threshold)) = best else {
        return make_leaf(nodes);
    };

    importance[feature] += (n as f64 / n_root) * decrease;

    let split_at = partition(rows, |i| x.get(i, feature) <= threshold);
    let node_idx = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 }); // placeholder
    let (left_rows, right_rows) = rows.split_at_mut(split_at);
    let left = build_cls(x, y, left_rows, depth + 1, cfg, rng, n_root, nodes, importance);
    let right = build_cls(
        x,
        y,
        right_rows,
        depth + 1,
        cfg,
        rng,
        n_root,
        nodes,
        importance,
    );
    nodes[node_idx] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    node_idx
}

/// Grow a squared-error regression tree on `targets`, with leaf values set to
/// the Newton step `sum(targets) / sum(hessians)` of the leaf's rows.
pub fn grow_regression(
    x: &Matrix,
    targets: &[f64],
    hessians: &[f64],
    rows: &[usize],
    cfg: &TreeConfig,
    leaf_clamp: f64,
) -> Vec<Node> {
    let mut nodes = Vec::new();
    let mut work = rows.to_vec();
    build_reg(x, targets, hessians, &mut work, 0, cfg, leaf_clamp, &mut nodes);
    nodes
}

#[allow(clippy::too_many_arguments)]
fn build_reg(
    x: &Matrix,
    targets: &[f64],
    hessians: &[f64],
    rows: &mut [usize],
    depth: usize,
    cfg: &TreeConfig,
    leaf_clamp: f64,
    nodes: &mut Vec<Node>,
) -> usize {
    let n = rows.len();
    let sum_t: f64 = rows.iter().map(|&i| targets[i]).sum();
    let sum_h: f64 = rows.iter().map(|&i| hessians[i]).sum();
    let leaf_value = (sum_t / sum_h.max(1e-9)).clamp(-leaf_clamp, leaf_clamp);

    let make_leaf = |nodes: &mut Vec<Node>| {
        nodes.push(Node::Leaf { value: leaf_value });
        nodes.len() - 1
    };

    if depth >= cfg.max_depth || n < 2 * cfg.min_leaf {
        return make_leaf(nodes);
    }

    // SSE decrease via sufficient statistics
    let sum_sq: f64 = rows.iter().map(|&i| targets[i] * targets[i]).sum();
    let parent_sse = sum_sq - sum_t * sum_t / n as f64;

    let mut best: Option<(f64, usize, f64)> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in 0..x.n_cols() {
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (x.get(i, feature), targets[i])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_n = 0.0;
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for k in 0..n - 1 {
            left_n += 1.0;
            left_sum += pairs[k].1;
            left_sq += pairs[k].1 * pairs[k].1;
            if pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let right_n = n as f64 - left_n;
            if (left_n as usize) < cfg.min_leaf || (right_n as usize) < cfg.min_leaf {
                continue;
            }
            let right_sum = sum_t - left_sum;
            let right_sq = sum_sq - left_sq;
            let child_sse = (left_sq - left_sum * left_sum / left_n)
                + (right_sq - right_sum * right_sum / right_n);
            let decrease = parent_sse - child_sse;
            if decrease > MIN_DECREASE
                && best.map_or(true, |(bd, _, _)| decrease > bd + MIN_DECREASE)
            {
                let threshold = 0.5 * (pairs[k].0 + pairs[k + 1].0);
                best = Some((decrease, feature, threshold));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return make_leaf(nodes);
    };

    let split_at = partition(rows, |i| x.get(i, feature) <= threshold);
    let node_idx = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 });
    let (left_rows, right_rows) = rows.split_at_mut(split_at);
    let left = build_reg(x, targets, hessians, left_rows, depth + 1, cfg, leaf_clamp, nodes);
    let right = build_reg(
        x, targets, hessians, right_rows, depth + 1, cfg, leaf_clamp, nodes,
    );
    nodes[node_idx] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    node_idx
}

/// Stable in-place partition; returns the boundary index.
fn partition<F: Fn(usize) -> bool>(rows: &mut [usize], pred: F) -> usize {
    let mut left: Vec<usize> = Vec::with_capacity(rows.len());
    let mut right: Vec<usize> = Vec::with_capacity(rows.len());
    for &i in rows.iter() {
        if pred(i) {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    let split = left.len();
    rows[..split].copy_from_slice(&left);
    rows[split..].copy_from_slice(&right);
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn single_tree_memorizes_consistent_data() {
        let x = Matrix::from_rows(vec![
            vec![0.1, 5.0],
            vec![0.9, 4.0],
            vec![0.2, 3.0],
            vec![0.8, 2.0],
            vec![0.3, 1.0],
        ])
        .unwrap();
        let y = vec![0u8, 1, 0, 1, 0];
        let cfg = TreeConfig {
            max_depth: 64,
            max_features: 2,
            min_leaf: 1,
        };
        let rows: Vec<usize> = (0..5).collect();
        let mut rng = StdRng::seed_from_u64(0);
        let (nodes, _) = grow_classification(&x, &y, &rows, &cfg, &mut rng);
        for i in 0..5 {
            let p = predict_row(&nodes, x.row(i));
            assert_eq!(u8::from(p > 0.5), y[i]);
        }
    }

    #[test]
    fn regression_leaf_is_newton_step() {
        let x = Matrix::from_rows(vec![vec![1.0], vec![1.0]]).unwrap();
        let targets = vec![0.4, 0.2];
        let hessians = vec![0.25, 0.25];
        let cfg = TreeConfig {
            max_depth: 3,
            max_features: 1,
            min_leaf: 1,
        };
        let nodes = grow_regression(&x, &targets, &hessians, &[0, 1], &cfg, 10.0);
        // constant feature: no split, one leaf = (0.4+0.2)/(0.5)
        let v = predict_row(&nodes, &[1.0]);
        assert!((v - 1.2).abs() < 1e-12);
    }
}
