//! Monte Carlo estimates and the order-fixed parallel reduction.

use rayon::prelude::*;

use crate::Scalar;

/// Mean with standard error over `n_paths` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate<S> {
    pub mean: S,
    pub std_error: S,
    pub n_paths: usize,
    pub n_exited_before_t: usize,
    /// Paths on which a numerical safeguard was applied (e.g. the exit time
    /// clamp near `T`).
    pub n_flagged: usize,
}

impl<S: Scalar> McEstimate<S> {
    /// CSV row `x,t,mean,std_error,n_paths`.
    pub fn csv_row(&self, x: S, t: S) -> String {
        format!("{:?},{:?},{:?},{:?},{}", x, t, self.mean, self.std_error, self.n_paths)
    }
}

/// Header matching [`McEstimate::csv_row`].
pub const MC_CSV_HEADER: &str = "x,t,mean,std_error,n_paths";

/// Running mean and sum of squared deviations, mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / ((self.n - 1) as f64) / self.n as f64).sqrt()
    }
}

/// What one path contributes: `K` sample values and two counters.
#[derive(Debug, Clone, Copy)]
pub struct PathOutcome<const K: usize> {
    pub values: [f64; K],
    pub exited: bool,
    pub flagged: bool,
}

/// Merged moments of all paths.
#[derive(Debug, Clone, Copy)]
pub struct Summary<const K: usize> {
    pub moments: [Moments; K],
    pub exited: usize,
    pub flagged: usize,
}

impl<const K: usize> Summary<K> {
    fn empty() -> Self {
        Self { moments: [Moments::default(); K], exited: 0, flagged: 0 }
    }

    fn merge(&self, other: &Self) -> Self {
        let mut moments = [Moments::default(); K];
        for (j, m) in moments.iter_mut().enumerate() {
            *m = self.moments[j].merge(&other.moments[j]);
        }
        Self { moments, exited: self.exited + other.exited, flagged: self.flagged + other.flagged }
    }

    /// Estimate of component `j`.
    pub fn estimate<S: Scalar>(&self, j: usize) -> McEstimate<S> {
        let m = &self.moments[j];
        McEstimate {
            mean: S::lit(m.mean),
            std_error: S::lit(m.std_error()),
            n_paths: m.n,
            n_exited_before_t: self.exited,
            n_flagged: self.flagged,
        }
    }
}

const BLOCK: usize = 1024;

fn tree_merge<const K: usize>(parts: &[Summary<K>]) -> Summary<K> {
    match parts.len() {
        0 => Summary::empty(),
        1 => parts[0],
        n => {
            let (a, b) = parts.split_at(n / 2);
            tree_merge(a).merge(&tree_merge(b))
        }
    }
}

/// Runs `f` on path indices `0..n_paths` in parallel and reduces in a fixed
/// order: sequential within blocks of 1024 paths, then a balanced binary tree
/// over blocks. The result is bitwise independent of the worker count.
pub fn reduce_paths<const K: usize, F>(n_paths: usize, f: F) -> Summary<K>
where
    F: Fn(u64) -> PathOutcome<K> + Sync,
{
    let blocks = n_paths.div_ceil(BLOCK);
    let parts: Vec<Summary<K>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut s = Summary::empty();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n_paths) {
                let o = f(i as u64);
                for j in 0..K {
                    s.moments[j].push(o.values[j]);
                }
                s.exited += o.exited as usize;
                s.flagged += o.flagged as usize;
            }
            s
        })
        .collect();
    tree_merge(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.m2 - all.m2).abs() < 1e-8 * all.m2);
    }

    #[test]
    fn reduction_is_thread_count_independent() {
        let f = |i: u64| PathOutcome { values: [(i as f64).sin()], exited: i.is_multiple_of(3), flagged: false };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| reduce_paths(10_000, f));
        let b = four.install(|| reduce_paths(10_000, f));
        assert_eq!(a.moments[0].mean.to_bits(), b.moments[0].mean.to_bits());
        assert_eq!(a.moments[0].m2.to_bits(), b.moments[0].m2.to_bits());
        assert_eq!(a.exited, 3334);
    }
}
