//! Dancing-links exact cover (Knuth's Algorithm X).
//!
//! Items are `0..n_items`. The first `n_primary` items must be covered exactly
//! once, the rest (secondary) at most once. Options are lists of distinct
//! items. The search always branches on the primary item with the fewest
//! remaining options.

use std::ops::ControlFlow;

#[derive(Debug, Clone)]
pub struct ExactCover {
    n_items: usize,
    left: Vec<usize>,
    right: Vec<usize>,
    up: Vec<usize>,
    down: Vec<usize>,
    col: Vec<usize>,
    size: Vec<usize>,
    option_of: Vec<usize>,
    n_options: usize,
    budget: Option<u64>,
    nodes: u64,
    exhausted: bool,
}

impl ExactCover {
    pub fn new(n_items: usize) -> Self {
        Self::with_secondary(n_items, 0)
    }

    /// `n_primary` exactly-once items followed by `n_secondary` at-most-once items.
    pub fn with_secondary(n_primary: usize, n_secondary: usize) -> Self {
        let n_items = n_primary + n_secondary;
        let headers = n_items + 1;
        let mut left = Vec::with_capacity(headers);
        let mut right = Vec::with_capacity(headers);
        for i in 0..headers {
            if i > n_primary {
                // secondary headers stay out of the active list
                left.push(i);
                right.push(i);
            } else {
                left.push(if i == 0 { n_primary } else { i - 1 });
                right.push(if i == n_primary { 0 } else { i + 1 });
            }
        }
        ExactCover {
            n_items,
            left,
            right,
            up: (0..headers).collect(),
            down: (0..headers).collect(),
            col: (0..headers).collect(),
            size: vec![0; headers],
            option_of: vec![usize::MAX; headers],
            n_options: 0,
            budget: None,
            nodes: 0,
            exhausted: false,
        }
    }

    /// Caps the number of search nodes per call; see [`ExactCover::exhausted`].
    pub fn set_node_budget(&mut self, budget: Option<u64>) {
        self.budget = budget;
    }

    /// Whether the last search stopped early because the node budget ran out.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_options(&self) -> usize {
        self.n_options
    }

    /// Appends an option and returns its index. Panics on repeated or out-of-range items.
    pub fn add_option(&mut self, items: &[usize]) -> usize {
        let id = self.n_options;
        self.n_options += 1;
        let mut sorted = items.to_vec();
        sorted.sort_unstable();
        assert!(
            sorted.windows(2).all(|w| w[0] != w[1]),
            "option repeats an item"
        );
        if items.is_empty() {
            return id;
        }
        let first = self.left.len();
        for (k, &item) in items.iter().enumerate() {
            assert!(item < self.n_items, "item {item} out of range");
            let c = item + 1;
            let node = self.left.len();
            let prev = if k == 0 { node } else { node - 1 };
            self.left.push(prev);
            self.right.push(first);
            if k > 0 {
                self.right[node - 1] = node;
            }
            self.left[first] = node;
            let last_in_col = self.up[c];
            self.up.push(last_in_col);
            self.down.push(c);
            self.down[last_in_col] = node;
            self.up[c] = node;
            self.col.push(c);
            self.option_of.push(id);
            self.size[c] += 1;
        }
        id
    }

    fn cover(&mut self, c: usize) {
        let (l, r) = (self.left[c], self.right[c]);
        self.right[l] = r;
        self.left[r] = l;
        let mut i = self.down[c];
        while i != c {
            let mut j = self.right[i];
            while j != i {
                let (u, d) = (self.up[j], self.down[j]);
                self.down[u] = d;
                self.up[d] = u;
                self.size[self.col[j]] -= 1;
                j = self.right[j];
            }
            i = self.down[i];
        }
    }

    fn uncover(&mut self, c: usize) {
        let mut i = self.up[c];
        while i != c {
            let mut j = self.left[i];
            while j != i {
                let (u, d) = (self.up[j], self.down[j]);
                self.size[self.col[j]] += 1;
                self.down[u] = j;
                self.up[d] = j;
                j = self.left[j];
            }
            i = self.up[i];
        }
        let (l, r) = (self.left[c], self.right[c]);
        self.right[l] = c;
        self.left[r] = c;
    }

    fn choose_item(&self) -> Option<usize> {
        let mut best = None;
        let mut best_size = usize::MAX;
        let mut c = self.right[0];
        while c != 0 {
            if self.size[c] < best_size {
                best_size = self.size[c];
                best = Some(c);
                if best_size == 0 {
                    break;
                }
            }
            c = self.right[c];
        }
        best
    }

    fn search<F>(&mut self, chosen: &mut Vec<usize>, visit: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[usize]) -> ControlFlow<()>,
    {
        let Some(c) = self.choose_item() else {
            return visit(chosen);
        };
        self.nodes += 1;
        if self.budget.is_some_and(|b| self.nodes > b) {
            self.exhausted = true;
            return ControlFlow::Break(());
        }
        if self.size[c] == 0 {
            return ControlFlow::Continue(());
        }
        self.cover(c);
        let mut r = self.down[c];
        let mut flow = ControlFlow::Continue(());
        while r != c {
            chosen.push(self.option_of[r]);
            let mut j = self.right[r];
            while j != r {
                self.cover(self.col[j]);
                j = self.right[j];
            }
            flow = self.search(chosen, visit);
            let mut j = self.left[r];
            while j != r {
                self.uncover(self.col[j]);
                j = self.left[j];
            }
            chosen.pop();
            if flow.is_break() {
                break;
            }
            r = self.down[r];
        }
        self.uncover(c);
        flow
    }

    /// Calls `visit` with the option indices of every exact cover until it breaks.
    /// Options that cover no item are never part of a reported solution.
    pub fn for_each_solution<F>(&mut self, mut visit: F)
    where
        F: FnMut(&[usize]) -> ControlFlow<()>,
    {
        let mut chosen = Vec::new();
        self.nodes = 0;
        self.exhausted = false;
        let _ = self.search(&mut chosen, &mut visit);
    }

    pub fn first_solution(&mut self) -> Option<Vec<usize>> {
        let mut out = None;
        self.for_each_solution(|s| {
            out = Some(s.to_vec());
            ControlFlow::Break(())
        });
        out
    }

    /// Number of exact covers, saturating at `cap`.
    pub fn count(&mut self, cap: u64) -> u64 {
        let mut n = 0u64;
        if cap == 0 {
            return 0;
        }
        self.for_each_solution(|_| {
            n += 1;
            if n >= cap {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        n
    }
}
