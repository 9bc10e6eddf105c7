use std::collections::VecDeque;

/// Fixed-depth history buffer. Index 0 is the newest sample; pushing beyond
/// the depth drops the oldest.
#[derive(Clone, Debug, PartialEq)]
pub struct Ring {
    depth: usize,
    buf: VecDeque<f64>,
}

impl Ring {
    /// Ring of `depth` zeros.
    pub fn zeros(depth: usize) -> Self {
        Self {
            depth,
            buf: std::iter::repeat_n(0.0, depth).collect(),
        }
    }

    /// Ring seeded newest-first; missing entries are zero, extra entries
    /// beyond `depth` are ignored.
    pub fn from_newest_first(depth: usize, values: &[f64]) -> Self {
        let mut ring = Self::zeros(depth);
        for (slot, v) in ring.buf.iter_mut().zip(values) {
            *slot = *v;
        }
        ring
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn push(&mut self, v: f64) {
        if self.depth == 0 {
            return;
        }
        if self.buf.len() == self.depth {
            self.buf.pop_back();
        }
        self.buf.push_front(v);
    }

    pub fn get(&self, lag: usize) -> Option<f64> {
        self.buf.get(lag).copied()
    }

    pub fn newest(&self) -> Option<f64> {
        self.buf.front().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.buf.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_drops_oldest() {
        let mut r = Ring::zeros(3);
        for v in 1..=5 {
            r.push(v as f64);
        }
        assert_eq!(r.iter().copied().collect::<Vec<_>>(), vec![5.0, 4.0, 3.0]);
        assert_eq!(r.get(3), None);
    }

    #[test]
    fn zero_depth_is_inert() {
        let mut r = Ring::zeros(0);
        r.push(1.0);
        assert_eq!(r.newest(), None);
    }

    #[test]
    fn seeded() {
        let r = Ring::from_newest_first(3, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.get(2), Some(3.0));
        let r = Ring::from_newest_first(3, &[7.0]);
        assert_eq!(r.get(1), Some(0.0));
    }
}
