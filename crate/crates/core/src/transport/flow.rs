use std::collections::VecDeque;

use crate::scalar::Scalar;

/// Dense max-flow on float capacities (Edmonds–Karp).
pub struct FlowNetwork<T> {
    cap: Vec<Vec<T>>,
    flow: Vec<Vec<T>>,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn new(nodes: usize) -> Self {
        Self { cap: vec![vec![T::zero(); nodes]; nodes], flow: vec![vec![T::zero(); nodes]; nodes] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: T) {
        self.cap[from][to] += cap;
    }

    pub fn flow(&self, from: usize, to: usize) -> T {
        self.flow[from][to].max(T::zero())
    }

    fn residual(&self, u: usize, v: usize) -> T {
        self.cap[u][v] - self.flow[u][v]
    }

    /// Pushes flow along shortest augmenting paths; paths with less than `eps`
    /// residual capacity are ignored.
    pub fn max_flow(&mut self, source: usize, sink: usize, eps: T) -> T {
        let n = self.cap.len();
        let mut total = T::zero();
        loop {
            let mut prev = vec![usize::MAX; n];
            prev[source] = source;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for v in 0..n {
                    if prev[v] == usize::MAX && self.residual(u, v) > eps {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[sink] == usize::MAX {
                return total;
            }
            let mut push = T::infinity();
            let mut v = sink;
            while v != source {
                let u = prev[v];
                push = push.min(self.residual(u, v));
                v = u;
            }
            let mut v = sink;
            while v != source {
                let u = prev[v];
                self.flow[u][v] += push;
                self.flow[v][u] -= push;
                v = u;
            }
            total += push;
        }
    }
}
