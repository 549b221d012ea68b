//! Ordered multiset of reported values that tracks, for every agent `i`,
//! `g_i(x) = C(x) - n·c_i(x)` with `C` the pooled count of reports `<= x` and
//! `c_i` agent `i`'s count, together with its running max and min over `x`.

use crate::scalar::Scalar;

const NIL: u32 = u32::MAX;
const MAX_N: usize = 32;

#[derive(Debug, Clone)]
pub(crate) struct GapTreap<T> {
    n: usize,
    key: Vec<T>,
    pri: Vec<u64>,
    left: Vec<u32>,
    right: Vec<u32>,
    g: Vec<i64>,
    mx: Vec<i64>,
    mn: Vec<i64>,
    lazy: Vec<i64>,
    pending: Vec<bool>,
    root: u32,
    state: u64,
}

impl<T: Scalar> GapTreap<T> {
    pub(crate) fn new(n: usize) -> Self {
        assert!(n <= MAX_N, "at most {MAX_N} agents");
        Self {
            n,
            key: Vec::new(),
            pri: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            g: Vec::new(),
            mx: Vec::new(),
            mn: Vec::new(),
            lazy: Vec::new(),
            pending: Vec::new(),
            root: NIL,
            state: 0x9E37_79B9_7F4A_7C15,
        }
    }

    /// Number of distinct values stored.
    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.key.len()
    }

    /// `max_x g_i(x)` and `min_x g_i(x)`, including the zero below all values.
    pub(crate) fn extremes(&self, i: usize) -> (i64, i64) {
        if self.root == NIL {
            return (0, 0);
        }
        let at = self.root as usize * self.n + i;
        (self.mx[at].max(0), self.mn[at].min(0))
    }

    /// Records one report `v` by `agent`.
    pub(crate) fn insert(&mut self, v: T, agent: usize) {
        let n = self.n;
        let (l, r) = self.split(self.root, v);
        let r = if r != NIL && self.min_key(r) == v {
            r
        } else {
            let mut base = [0i64; MAX_N];
            if l != NIL {
                let last = self.max_node(l);
                base[..n].copy_from_slice(&self.g[last * n..last * n + n]);
            }
            let node = self.alloc(v, &base[..n]);
            self.merge(node, r)
        };
        let mut d = [1i64; MAX_N];
        d[agent] = 1 - n as i64;
        self.apply(r, &d[..n]);
        self.root = self.merge(l, r);
    }

    fn next_priority(&mut self) -> u64 {
        // splitmix64
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn alloc(&mut self, v: T, g: &[i64]) -> u32 {
        let id = self.key.len() as u32;
        let p = self.next_priority();
        self.key.push(v);
        self.pri.push(p);
        self.left.push(NIL);
        self.right.push(NIL);
        self.g.extend_from_slice(g);
        self.mx.extend_from_slice(g);
        self.mn.extend_from_slice(g);
        self.lazy.extend(std::iter::repeat_n(0, self.n));
        self.pending.push(false);
        id
    }

    fn apply(&mut self, t: u32, d: &[i64]) {
        if t == NIL {
            return;
        }
        let base = t as usize * self.n;
        for (k, dk) in d.iter().enumerate() {
            self.g[base + k] += dk;
            self.mx[base + k] += dk;
            self.mn[base + k] += dk;
            self.lazy[base + k] += dk;
        }
        self.pending[t as usize] = true;
    }

    fn push(&mut self, t: u32) {
        let ti = t as usize;
        if !self.pending[ti] {
            return;
        }
        let n = self.n;
        let mut d = [0i64; MAX_N];
        d[..n].copy_from_slice(&self.lazy[ti * n..ti * n + n]);
        let (l, r) = (self.left[ti], self.right[ti]);
        self.apply(l, &d[..n]);
        self.apply(r, &d[..n]);
        self.lazy[ti * n..ti * n + n].fill(0);
        self.pending[ti] = false;
    }

    fn pull(&mut self, t: u32) {
        let ti = t as usize;
        let n = self.n;
        let (l, r) = (self.left[ti], self.right[ti]);
        for k in 0..n {
            let mut hi = self.g[ti * n + k];
            let mut lo = hi;
            for c in [l, r] {
                if c != NIL {
                    hi = hi.max(self.mx[c as usize * n + k]);
                    lo = lo.min(self.mn[c as usize * n + k]);
                }
            }
            self.mx[ti * n + k] = hi;
            self.mn[ti * n + k] = lo;
        }
    }

    /// Splits into keys `< v` and keys `>= v`.
    fn split(&mut self, t: u32, v: T) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        self.push(t);
        let ti = t as usize;
        if self.key[ti] < v {
            let (a, b) = self.split(self.right[ti], v);
            self.right[ti] = a;
            self.pull(t);
            (t, b)
        } else {
            let (a, b) = self.split(self.left[ti], v);
            self.left[ti] = b;
            self.pull(t);
            (a, t)
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.pri[a as usize] > self.pri[b as usize] {
            self.push(a);
            let r = self.merge(self.right[a as usize], b);
            self.right[a as usize] = r;
            self.pull(a);
            a
        } else {
            self.push(b);
            let l = self.merge(a, self.left[b as usize]);
            self.left[b as usize] = l;
            self.pull(b);
            b
        }
    }

    fn min_key(&mut self, mut t: u32) -> T {
        loop {
            self.push(t);
            let l = self.left[t as usize];
            if l == NIL {
                return self.key[t as usize];
            }
            t = l;
        }
    }

    fn max_node(&mut self, mut t: u32) -> usize {
        loop {
            self.push(t);
            let r = self.right[t as usize];
            if r == NIL {
                return t as usize;
            }
            t = r;
        }
    }
}
