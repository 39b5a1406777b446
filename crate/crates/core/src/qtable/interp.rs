use super::{AbstractGapQuery, QTable};

/// Lower cell index and fractional offset of `x` on `axis`. Outside the
/// axis range the offset leaves [0, 1], which turns the interpolation into
/// linear extrapolation from the boundary cell.
#[inline]
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 {
        return (0, 0, 0.0);
    }
    let i = axis.partition_point(|&a| a <= x).saturating_sub(1).min(n - 2);
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    (i, i + 1, t)
}

impl QTable {
    /// Trilinear interpolation of `q`, extrapolating linearly past the grid
    /// edges and clamping the result to [0, 1].
    ///
    /// A gap wider than the unit window (`g > 1`) is never found, so those
    /// queries return 0 without touching the table. Grid nodes return the
    /// stored value exactly.
    pub fn lookup(&self, query: &AbstractGapQuery) -> f64 {
        if query.g > 1.0 {
            return 0.0;
        }
        let axes = self.axes();
        let (g0, g1, tg) = bracket(axes.g(), query.g);
        let (m0, m1, tm) = bracket(axes.mu(), query.mu);
        let (s0, s1, ts) = bracket(axes.sigma(), query.sigma);

        let v = |ig, im, is| self.at(ig, im, is) as f64;
        let along_sigma = |ig, im| (1.0 - ts) * v(ig, im, s0) + ts * v(ig, im, s1);
        let along_mu = |ig| (1.0 - tm) * along_sigma(ig, m0) + tm * along_sigma(ig, m1);
        let q = (1.0 - tg) * along_mu(g0) + tg * along_mu(g1);
        q.clamp(0.0, 1.0)
    }
}
