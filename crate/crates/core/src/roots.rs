//! Bracketed bisection shared by the QoS solve and the allocators' dual
//! searches.

/// Outcome of a bisection run.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    /// Point where `f(lo) >= 0`.
    pub lo: f64,
    /// Point where `f(hi) <= 0`.
    pub hi: f64,
    pub iterations: usize,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bisects a non-increasing `f` on `[lo, hi]` with `f(lo) >= 0 >= f(hi)`.
///
/// Stops as soon as `done(x, f(x))` holds at a probe, or when the bracket
/// can no longer be split. When `geometric` is set and both ends are
/// positive, the probe is the geometric mean, which suits brackets spanning
/// many decades.
pub fn bisect_decreasing<F, D>(mut f: F, lo: f64, hi: f64, geometric: bool, mut done: D) -> Bracket
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64, f64) -> bool,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    loop {
        let mid = if geometric && lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            return Bracket { lo, hi, iterations };
        }
        iterations += 1;
        let v = f(mid);
        if done(mid, v) {
            return Bracket { lo: mid, hi: mid, iterations };
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
