//! Primal network simplex for the balanced, uncapacitated transportation
//! problem.
//!
//! Sources `0..n` ship to sinks `n..n+m` over the complete bipartite arc set.
//! The initial basis hangs every node from an artificial root through an
//! artificial arc; entering arcs are chosen by block search and the leaving
//! arc is the last blocking arc met when walking the cycle from its apex, which
//! keeps the spanning tree strongly feasible and rules out cycling.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `pred` arc is oriented node -> parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
}

impl Tree {
    fn detach(&mut self, u: usize) {
        let (prev, next) = (self.prev_sib[u], self.next_sib[u]);
        if prev == NONE {
            self.first_child[self.parent[u]] = next;
        } else {
            self.next_sib[prev] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[u] = NONE;
        self.next_sib[u] = NONE;
    }

    fn attach(&mut self, u: usize, parent: usize) {
        self.parent[u] = parent;
        let head = self.first_child[parent];
        self.next_sib[u] = head;
        self.prev_sib[u] = NONE;
        if head != NONE {
            self.prev_sib[head] = u;
        }
        self.first_child[parent] = u;
    }

    fn join(&self, mut a: usize, mut b: usize) -> usize {
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        a
    }
}

struct Problem<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    /// Artificial arc of node `u` is oriented u -> root.
    art_up: Vec<bool>,
    art_cost: f64,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    tree: Tree,
    next_arc: usize,
    block: usize,
    tol: f64,
}

impl Problem<'_> {
    fn real_arcs(&self) -> usize {
        self.n * self.m
    }

    fn endpoints(&self, e: usize) -> (usize, usize) {
        let nm = self.real_arcs();
        if e < nm {
            (e / self.m, self.n + e % self.m)
        } else {
            let u = e - nm;
            let root = self.n + self.m;
            if self.art_up[u] {
                (u, root)
            } else {
                (root, u)
            }
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        let nm = self.real_arcs();
        if e < nm {
            self.cost[e]
        } else if self.art_up[e - nm] {
            0.0
        } else {
            self.art_cost
        }
    }

    fn find_entering(&mut self) -> Option<usize> {
        let nm = self.real_arcs();
        let mut best = -self.tol;
        let mut chosen = NONE;
        let mut count = self.block;
        let start = self.next_arc;
        let mut e = start;
        for _ in 0..nm {
            if !self.in_tree[e] {
                let (s, t) = (e / self.m, self.n + e % self.m);
                let rc = self.cost[e] + self.tree.pi[s] - self.tree.pi[t];
                if rc < best {
                    best = rc;
                    chosen = e;
                }
            }
            e += 1;
            if e == nm {
                e = 0;
            }
            count -= 1;
            if count == 0 {
                if chosen != NONE {
                    self.next_arc = e;
                    return Some(chosen);
                }
                count = self.block;
            }
        }
        if chosen != NONE {
            self.next_arc = e;
            Some(chosen)
        } else {
            None
        }
    }

    fn pivot(&mut self, e_in: usize) -> Result<()> {
        let (first, second) = self.endpoints(e_in);
        let join = self.tree.join(first, second);

        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut out_on_first = true;
        let mut u = first;
        while u != join {
            if self.tree.up[u] {
                let d = self.flow[self.tree.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    out_on_first = true;
                }
            }
            u = self.tree.parent[u];
        }
        u = second;
        while u != join {
            if !self.tree.up[u] {
                let d = self.flow[self.tree.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    out_on_first = false;
                }
            }
            u = self.tree.parent[u];
        }
        if u_out == NONE {
            return Err(Error::InfeasibleMarginals("transport problem is unbounded".into()));
        }

        if delta > 0.0 {
            self.flow[e_in] += delta;
            let mut u = first;
            while u != join {
                let e = self.tree.pred[u];
                if self.tree.up[u] {
                    self.flow[e] -= delta;
                } else {
                    self.flow[e] += delta;
                }
                u = self.tree.parent[u];
            }
            u = second;
            while u != join {
                let e = self.tree.pred[u];
                if self.tree.up[u] {
                    self.flow[e] += delta;
                } else {
                    self.flow[e] -= delta;
                }
                u = self.tree.parent[u];
            }
        }

        let (u_in, v_in) = if out_on_first { (first, second) } else { (second, first) };
        let e_out = self.tree.pred[u_out];
        if e_out < self.real_arcs() {
            self.in_tree[e_out] = false;
        }
        self.in_tree[e_in] = true;
        // Exact zero keeps the leaving arc at its bound.
        self.flow[e_out] = 0.0;

        // Reverse the tree path u_in -> u_out and hang it below v_in.
        self.tree.detach(u_out);
        let mut prev = v_in;
        let mut prev_arc = e_in;
        let mut prev_up = first == u_in;
        let mut w = u_in;
        loop {
            let next = self.tree.parent[w];
            let arc = self.tree.pred[w];
            let was_up = self.tree.up[w];
            if w != u_out {
                self.tree.detach(w);
            }
            self.tree.pred[w] = prev_arc;
            self.tree.up[w] = prev_up;
            self.tree.attach(w, prev);
            if w == u_out {
                break;
            }
            prev = w;
            prev_arc = arc;
            prev_up = !was_up;
            w = next;
        }

        let c_in = self.arc_cost(e_in);
        let dir = if first == u_in { 1.0 } else { -1.0 };
        let sigma = self.tree.pi[v_in] - self.tree.pi[u_in] - dir * c_in;
        let mut stack = vec![u_in];
        while let Some(u) = stack.pop() {
            self.tree.pi[u] += sigma;
            self.tree.depth[u] = self.tree.depth[self.tree.parent[u]] + 1;
            let mut c = self.tree.first_child[u];
            while c != NONE {
                stack.push(c);
                c = self.tree.next_sib[c];
            }
        }
        Ok(())
    }
}

/// Optimal flows (row-major, `n * m`) of the transportation problem with
/// `supply` at the rows, `demand` at the columns and unit costs `cost`.
pub(crate) fn solve_transport(cost: &[f64], supply: &[f64], demand: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (supply.len(), demand.len());
    debug_assert_eq!(cost.len(), n * m);
    let nodes = n + m;
    let root = nodes;
    let nm = n * m;
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let art_cost = (max_cost + 1.0) * (nodes + 1) as f64;

    let mut art_up = vec![true; nodes];
    let mut flow = vec![0.0; nm + nodes];
    let mut tree = Tree {
        parent: vec![root; nodes + 1],
        pred: vec![NONE; nodes + 1],
        up: vec![true; nodes + 1],
        depth: vec![1; nodes + 1],
        pi: vec![0.0; nodes + 1],
        first_child: vec![NONE; nodes + 1],
        next_sib: vec![NONE; nodes + 1],
        prev_sib: vec![NONE; nodes + 1],
    };
    tree.parent[root] = NONE;
    tree.depth[root] = 0;
    for u in (0..nodes).rev() {
        let s = if u < n { supply[u] } else { -demand[u - n] };
        let e = nm + u;
        tree.pred[u] = e;
        if s >= 0.0 {
            art_up[u] = true;
            tree.up[u] = true;
            flow[e] = s;
        } else {
            art_up[u] = false;
            tree.up[u] = false;
            tree.pi[u] = art_cost;
            flow[e] = -s;
        }
        tree.attach(u, root);
    }

    let mut problem = Problem {
        n,
        m,
        cost,
        art_up,
        art_cost,
        flow,
        in_tree: vec![false; nm + nodes],
        tree,
        next_arc: 0,
        block: ((nm as f64).sqrt() as usize).max(10),
        tol: 1e-13 * art_cost,
    };
    for u in 0..nodes {
        problem.in_tree[nm + u] = true;
    }

    while let Some(e_in) = problem.find_entering() {
        problem.pivot(e_in)?;
    }

    let total: f64 = supply.iter().sum::<f64>().max(demand.iter().sum());
    let residual: f64 = problem.flow[nm..].iter().sum();
    if residual > 1e-9 * total.max(1.0) {
        return Err(Error::InfeasibleMarginals(format!("{residual:e} units could not be routed")));
    }
    problem.flow.truncate(nm);
    Ok(problem.flow)
}
