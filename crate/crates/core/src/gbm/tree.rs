//! Depth-bounded regression trees fitted to second-order logistic statistics.

/// Leaves must hold at least this many training rows.
pub const MIN_SAMPLES_LEAF: usize = 2;
/// Splits must reduce the second-order loss by more than this.
const MIN_GAIN: f64 = 1e-12;
const MIN_HESSIAN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go to `left`.
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

/// Nodes are stored in pre-order; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Builds a tree from pre-ordered nodes, checking child links.
    pub fn from_nodes(nodes: Vec<Node>) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *n {
                if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                    return None;
                }
            }
        }
        Some(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    /// Distance from `x` to the nearest split threshold on its decision path.
    pub fn path_margin(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut margin = f64::INFINITY;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[i]
        {
            margin = margin.min((x[feature] - threshold).abs());
            i = if x[feature] < threshold { left } else { right };
        }
        margin
    }
}

pub(crate) struct TreeBuilder<'a> {
    pub rows: &'a [Vec<f64>],
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub features: &'a [usize],
    pub max_depth: usize,
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    pub fn build(&self) -> Tree {
        let mut nodes = Vec::new();
        let indices: Vec<usize> = (0..self.rows.len()).collect();
        self.grow(&mut nodes, indices, 0);
        Tree { nodes }
    }

    fn sums(&self, indices: &[usize]) -> (f64, f64) {
        indices
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]))
    }

    fn grow(&self, nodes: &mut Vec<Node>, indices: Vec<usize>, depth: usize) -> usize {
        let id = nodes.len();
        let (g, h) = self.sums(&indices);
        let split = if depth < self.max_depth && indices.len() >= 2 * MIN_SAMPLES_LEAF {
            self.best_split(&indices, g, h)
        } else {
            None
        };
        match split {
            None => {
                let value = if h > MIN_HESSIAN { -g / h } else { 0.0 };
                nodes.push(Node::Leaf { value });
            }
            Some(s) => {
                nodes.push(Node::Leaf { value: 0.0 });
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .into_iter()
                    .partition(|&i| self.rows[i][s.feature] < s.threshold);
                let left = self.grow(nodes, left_idx, depth + 1);
                let right = self.grow(nodes, right_idx, depth + 1);
                nodes[id] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
            }
        }
        id
    }

    /// Exact greedy search over sorted unique values of every allowed feature.
    fn best_split(&self, indices: &[usize], g: f64, h: f64) -> Option<SplitCandidate> {
        let parent = g * g / h.max(MIN_HESSIAN);
        let mut best: Option<SplitCandidate> = None;
        let mut order = indices.to_vec();
        for &f in self.features {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 1..order.len() {
                gl += self.grad[order[k - 1]];
                hl += self.hess[order[k - 1]];
                let lo = self.rows[order[k - 1]][f];
                let hi = self.rows[order[k]][f];
                if lo == hi || k < MIN_SAMPLES_LEAF || order.len() - k < MIN_SAMPLES_LEAF {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < MIN_HESSIAN || hr < MIN_HESSIAN {
                    continue;
                }
                let gain = gl * gl / hl + gr * gr / hr - parent;
                if gain > MIN_GAIN && best.as_ref().map_or(true, |b| gain > b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if lo < mid && mid <= hi { mid } else { hi };
                    best = Some(SplitCandidate {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_walks_to_the_right_leaf() {
        let tree = Tree::from_nodes(vec![
            Node::Split {
                feature: 1,
                threshold: 0.5,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: -1.0 },
            Node::Leaf { value: 2.0 },
        ])
        .unwrap();
        assert_eq!(tree.predict(&[9.0, 0.2]), -1.0);
        assert_eq!(tree.predict(&[9.0, 0.5]), 2.0);
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.path_margin(&[0.0, 0.8]), 0.30000000000000004);
    }

    #[test]
    fn from_nodes_rejects_bad_links() {
        assert!(Tree::from_nodes(vec![]).is_none());
        assert!(Tree::from_nodes(vec![Node::Split {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 1
        }])
        .is_none());
    }

    #[test]
    fn builder_respects_depth_and_leaf_size() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let grad: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 0.5 } else { -0.5 }).collect();
        let hess = vec![0.25; 20];
        let tree = TreeBuilder {
            rows: &rows,
            grad: &grad,
            hess: &hess,
            features: &[0],
            max_depth: 3,
        }
        .build();
        assert!(tree.depth() <= 3);
        // Every leaf must be reachable by at least MIN_SAMPLES_LEAF rows.
        let mut counts = std::collections::HashMap::new();
        for r in &rows {
            *counts.entry(tree.predict(r).to_bits()).or_insert(0usize) += 1;
        }
        assert!(counts.values().all(|&c| c >= MIN_SAMPLES_LEAF));
    }
}
