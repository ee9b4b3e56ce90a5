//! Reference checker for online forests. It rebuilds every node's point list
//! from the sliding buffer and compares it with the incremental state.

use isoprefs_core::online::{OnlineForest, OnlineNode};

#[derive(Debug, Default)]
pub struct Audit {
    pub violations: Vec<String>,
    /// Node visits made while routing buffer points.
    pub routed: usize,
}

impl Audit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn structure(node: &OnlineNode, cap: usize, path: &mut String, out: &mut Vec<String>) {
    if node.depth() > cap {
        out.push(format!("node {path} at depth {} exceeds cap {cap}", node.depth()));
    }
    if let Some((l, r)) = node.children() {
        if node.height() != l.height() + r.height() {
            out.push(format!("node {path}: h = {} but children hold {} + {}", node.height(), l.height(), r.height()));
        }
        if l.depth() != node.depth() + 1 || r.depth() != node.depth() + 1 {
            out.push(format!("node {path}: child depth is not parent depth + 1"));
        }
        for (tag, child) in [('L', l), ('R', r)] {
            path.push(tag);
            structure(child, cap, path, out);
            path.pop();
        }
    }
}

/// Routes `x` through the current splits and checks it lies inside every
/// support on the way.
fn route(root: &OnlineNode, x: &[f64], tree: usize, audit: &mut Audit) {
    let mut node = root;
    let mut path = String::new();
    loop {
        audit.routed += 1;
        match node.support() {
            Some(b) if b.contains(x) => {}
            Some(_) => audit.violations.push(format!("tree {tree} node {path}: buffer point {x:?} outside its support")),
            None => audit.violations.push(format!("tree {tree} node {path}: buffer point routed to a node with no support")),
        }
        let Some(((dim, value), (l, r))) = node.split().zip(node.children()) else { break };
        let left = x[dim] < value;
        path.push(if left { 'L' } else { 'R' });
        node = if left { l } else { r };
    }
}

/// Checks containment, mass conservation, the depth cap and the root height.
pub fn audit(forest: &OnlineForest) -> Audit {
    let mut audit = Audit::default();
    let omega = forest.params().omega;
    let want = forest.processed().min(omega);
    if forest.buffer().len() != want {
        audit.violations.push(format!("buffer holds {} points, expected {want}", forest.buffer().len()));
    }
    for (t, root) in forest.roots().enumerate() {
        if root.height() != want {
            audit.violations.push(format!("tree {t}: root h = {} but min(t, omega) = {want}", root.height()));
        }
        structure(root, forest.depth_cap(), &mut String::new(), &mut audit.violations);
        for x in forest.buffer() {
            route(root, x, t, &mut audit);
        }
    }
    audit
}
