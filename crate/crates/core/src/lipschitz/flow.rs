//! Primal network simplex for min-cost circulations, used for its optimal node
//! potentials.
//!
//! Follows the usual strongly feasible spanning tree scheme (block pricing,
//! Cunningham's leaving-arc rule). The tree is small, so depths and potentials
//! are recomputed from the parent array after every pivot.

const NONE: usize = usize::MAX;
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub(super) struct Arc {
    pub src: usize,
    pub dst: usize,
    pub cost: f64,
    pub cap: i64,
}

struct Simplex<'a> {
    arcs: &'a [Arc],
    root: usize,
    flow: Vec<i64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `pred` points from the node to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<usize>,
    child_start: Vec<usize>,
    queue: Vec<usize>,
}

impl Simplex<'_> {
    fn reduced_cost(&self, e: usize) -> f64 {
        let a = &self.arcs[e];
        a.cost + self.pi[a.src] - self.pi[a.dst]
    }

    fn rebuild(&mut self) {
        let n = self.parent.len();
        self.child_start.iter_mut().for_each(|c| *c = 0);
        for v in 0..n {
            if v != self.root {
                self.child_start[self.parent[v] + 1] += 1;
            }
        }
        for v in 0..n {
            self.child_start[v + 1] += self.child_start[v];
        }
        let mut fill = self.child_start.clone();
        for v in 0..n {
            if v != self.root {
                let p = self.parent[v];
                self.children[fill[p]] = v;
                fill[p] += 1;
            }
        }
        self.queue.clear();
        self.queue.push(self.root);
        self.depth[self.root] = 0;
        self.pi[self.root] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let p = self.queue[head];
            head += 1;
            for k in self.child_start[p]..self.child_start[p + 1] {
                let w = self.children[k];
                let c = self.arcs[self.pred[w]].cost;
                self.depth[w] = self.depth[p] + 1;
                self.pi[w] = if self.up[w] { self.pi[p] - c } else { self.pi[p] + c };
                self.queue.push(w);
            }
        }
    }

    fn pivot(&mut self, entering: usize) {
        let a = self.arcs[entering];
        let lower = self.flow[entering] == 0;
        let (first, second) = if lower { (a.src, a.dst) } else { (a.dst, a.src) };

        let (mut x, mut y) = (a.src, a.dst);
        while x != y {
            if self.depth[x] >= self.depth[y] {
                x = self.parent[x];
            } else {
                y = self.parent[y];
            }
        }
        let join = x;

        let mut delta = a.cap;
        let mut u_out = NONE;
        let mut side = 0;
        let mut u = first;
        while u != join {
            let e = self.pred[u];
            let d = if self.up[u] { self.flow[e] } else { self.arcs[e].cap - self.flow[e] };
            if d < delta {
                delta = d;
                u_out = u;
                side = 1;
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            let e = self.pred[u];
            let d = if self.up[u] { self.arcs[e].cap - self.flow[e] } else { self.flow[e] };
            if d <= delta {
                delta = d;
                u_out = u;
                side = 2;
            }
            u = self.parent[u];
        }

        if delta > 0 {
            let val = if lower { delta } else { -delta };
            self.flow[entering] += val;
            let dir = |up: bool| if up { 1 } else { -1 };
            let mut u = a.src;
            while u != join {
                self.flow[self.pred[u]] -= dir(self.up[u]) * val;
                u = self.parent[u];
            }
            u = a.dst;
            while u != join {
                self.flow[self.pred[u]] += dir(self.up[u]) * val;
                u = self.parent[u];
            }
        }
        if u_out == NONE {
            // the entering arc moved to its other bound
            return;
        }

        let (u_in, v_in) = if side == 1 { (first, second) } else { (second, first) };
        let leaving = self.pred[u_out];
        let mut w = u_in;
        let mut new_parent = v_in;
        let mut new_pred = entering;
        let mut new_up = a.src == u_in;
        loop {
            let (old_parent, old_pred, old_up) = (self.parent[w], self.pred[w], self.up[w]);
            self.parent[w] = new_parent;
            self.pred[w] = new_pred;
            self.up[w] = new_up;
            if w == u_out {
                break;
            }
            new_parent = w;
            new_pred = old_pred;
            new_up = !old_up;
            w = old_parent;
        }
        self.in_tree[leaving] = false;
        self.in_tree[entering] = true;
        self.rebuild();
    }
}

/// Optimal potentials `pi` of the min-cost circulation on `nodes` nodes with
/// node `root` fixed at 0: every arc with spare capacity has
/// `cost + pi[src] - pi[dst] >= 0`, every arc with flow has `<= 0`.
///
/// `initial[v]` must be an arc from `root` to `v` for every `v != root`.
/// Returns `None` if the pivot limit is reached.
pub(super) fn potentials(nodes: usize, root: usize, arcs: &[Arc], initial: &[usize]) -> Option<Vec<f64>> {
    let m = arcs.len();
    let mut s = Simplex {
        arcs,
        root,
        flow: vec![0; m],
        in_tree: vec![false; m],
        parent: vec![NONE; nodes],
        pred: vec![NONE; nodes],
        up: vec![false; nodes],
        depth: vec![0; nodes],
        pi: vec![0.0; nodes],
        children: vec![0; nodes],
        child_start: vec![0; nodes + 1],
        queue: Vec::with_capacity(nodes),
    };
    for v in (0..nodes).filter(|&v| v != root) {
        let e = initial[v];
        debug_assert!(arcs[e].src == root && arcs[e].dst == v);
        s.parent[v] = root;
        s.pred[v] = e;
        s.in_tree[e] = true;
    }
    s.rebuild();

    let block = ((m as f64).sqrt() as usize).max(10);
    let limit = 50 * (m + nodes) + 1000;
    let mut next = 0;
    for _ in 0..limit {
        let mut best = -EPS;
        let mut entering = NONE;
        let mut count = 0;
        let mut e = next;
        for _ in 0..m {
            if !s.in_tree[e] {
                let sign = if s.flow[e] == 0 { 1.0 } else { -1.0 };
                let v = sign * s.reduced_cost(e);
                if v < best {
                    best = v;
                    entering = e;
                }
            }
            e = if e + 1 == m { 0 } else { e + 1 };
            count += 1;
            if count == block {
                if entering != NONE {
                    break;
                }
                count = 0;
            }
        }
        if entering == NONE {
            return Some(s.pi);
        }
        next = e;
        s.pivot(entering);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_label_is_matched() {
        let arcs = [
            Arc { src: 1, dst: 0, cost: 0.3, cap: 1 },
            Arc { src: 0, dst: 1, cost: -0.3, cap: 1 },
        ];
        let pi = potentials(2, 1, &arcs, &[0, NONE]).unwrap();
        assert!((pi[0] - 0.3).abs() < 1e-15);
    }
}
