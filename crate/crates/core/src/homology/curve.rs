use crate::error::{Error, Result};

/// Right-continuous integer step function on `[0, L]`.
///
/// `values[i]` holds on `[breakpoints[i], breakpoints[i + 1])`, and the last
/// value holds on `[breakpoints[last], L]`. The first breakpoint is always 0
/// and consecutive values always differ.
#[derive(Debug, Clone, PartialEq)]
pub struct BettiCurve {
    dim: usize,
    breakpoints: Vec<f64>,
    values: Vec<usize>,
    scale_cap: f64,
}

impl BettiCurve {
    pub fn new(
        dim: usize,
        breakpoints: Vec<f64>,
        values: Vec<usize>,
        scale_cap: f64,
    ) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::domain(
                "breakpoints and values must be nonempty and aligned",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::domain("first breakpoint must be 0"));
        }
        if breakpoints
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::domain("breakpoints must be strictly increasing"));
        }
        if *breakpoints.last().unwrap() > scale_cap {
            return Err(Error::domain("breakpoint beyond scale cap"));
        }
        Ok(Self::compacted(dim, breakpoints, values, scale_cap))
    }

    pub fn constant(dim: usize, value: usize, scale_cap: f64) -> Self {
        Self {
            dim,
            breakpoints: vec![0.0],
            values: vec![value],
            scale_cap,
        }
    }

    fn compacted(dim: usize, breakpoints: Vec<f64>, values: Vec<usize>, scale_cap: f64) -> Self {
        let mut bp = Vec::with_capacity(breakpoints.len());
        let mut vs: Vec<usize> = Vec::with_capacity(values.len());
        for (b, v) in breakpoints.into_iter().zip(values) {
            if vs.last() != Some(&v) {
                bp.push(b);
                vs.push(v);
            }
        }
        Self {
            dim,
            breakpoints: bp,
            values: vs,
            scale_cap,
        }
    }

    /// Curve counting the intervals `[birth, death)` alive at each scale.
    /// `None` deaths never die.
    pub fn from_intervals<I>(dim: usize, intervals: I, scale_cap: f64) -> Self
    where
        I: IntoIterator<Item = (f64, Option<f64>)>,
    {
        let mut events: Vec<(f64, i64)> = Vec::new();
        for (birth, death) in intervals {
            if let Some(d) = death {
                if d <= birth {
                    continue;
                }
                events.push((d, -1));
            }
            events.push((birth, 1));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut bp = vec![0.0];
        let mut vs = vec![0usize];
        let mut level: i64 = 0;
        let mut i = 0;
        while i < events.len() {
            let x = events[i].0;
            while i < events.len() && events[i].0 == x {
                level += events[i].1;
                i += 1;
            }
            debug_assert!(level >= 0);
            if x <= 0.0 {
                vs[0] = level as usize;
            } else {
                bp.push(x);
                vs.push(level as usize);
            }
        }
        Self::compacted(dim, bp, vs, scale_cap)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn scale_cap(&self) -> f64 {
        self.scale_cap
    }

    pub fn value_at(&self, eps: f64) -> usize {
        let idx = self.breakpoints.partition_point(|b| *b <= eps);
        self.values[idx.saturating_sub(1)]
    }

    /// `(start, end, value)` pieces covering `[0, L]`; a piece starting at `L`
    /// has zero length.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        (0..self.values.len()).map(move |i| {
            let end = self
                .breakpoints
                .get(i + 1)
                .copied()
                .unwrap_or(self.scale_cap);
            (self.breakpoints[i], end, self.values[i])
        })
    }
}
