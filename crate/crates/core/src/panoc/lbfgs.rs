use std::collections::VecDeque;

/// Limited-memory BFGS inverse-Hessian approximation.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    memory: usize,
    pairs: VecDeque<Pair>,
    alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lbfgs {
    pub fn new(memory: usize) -> Self {
        Self {
            memory: memory.max(1),
            pairs: VecDeque::with_capacity(memory.max(1)),
            alpha: Vec::with_capacity(memory.max(1)),
        }
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stores `(s, y)` if it passes the cautious curvature test
    /// `s'y / s's >= 1e-8 * |r|`. Returns whether the pair was kept.
    pub fn update(&mut self, s: Vec<f64>, y: Vec<f64>, residual_norm: f64) -> bool {
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        if !(ss > 0.0) || !sy.is_finite() || sy / ss < 1e-8 * residual_norm.max(1e-12) {
            return false;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_back();
        }
        self.pairs.push_front(Pair { s, y, rho: 1.0 / sy });
        true
    }

    /// Overwrites `q` with `H q` (two-loop recursion). Newest pair first.
    pub fn apply(&mut self, q: &mut [f64]) {
        if self.pairs.is_empty() {
            return;
        }
        self.alpha.clear();
        for p in &self.pairs {
            let a = p.rho * dot(&p.s, q);
            for (qi, yi) in q.iter_mut().zip(&p.y) {
                *qi -= a * yi;
            }
            self.alpha.push(a);
        }
        let newest = &self.pairs[0];
        let gamma = 1.0 / (newest.rho * dot(&newest.y, &newest.y));
        q.iter_mut().for_each(|v| *v *= gamma);
        for (p, a) in self.pairs.iter().zip(&self.alpha).rev() {
            let b = p.rho * dot(&p.y, q);
            for (qi, si) in q.iter_mut().zip(&p.s) {
                *qi += (a - b) * si;
            }
        }
    }
}
