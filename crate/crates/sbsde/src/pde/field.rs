use std::fmt::Write as _;

use crate::error::{domain, Error, Result};
use crate::model::{ProblemParams, Regime};
use crate::Scalar;

use super::solver::ReactionScheme;

/// Uniform space-time mesh: `nx` interior points, `nt` time steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<S> {
    nx: usize,
    nt: usize,
    params: ProblemParams<S>,
}

impl<S: Scalar> Grid<S> {
    pub fn new(params: ProblemParams<S>, nx: usize, nt: usize) -> Result<Self> {
        if nx < 3 || nt < 3 {
            return domain(format!("grid needs nx >= 3 and nt >= 3, got nx = {nx}, nt = {nt}"));
        }
        Ok(Self { nx, nt, params })
    }

    /// Grid with steps as close as possible to `dx` and `dt`.
    pub fn from_steps(params: ProblemParams<S>, dx: S, dt: S) -> Result<Self> {
        if !(dx > S::zero()) || !(dt > S::zero()) {
            return domain("grid steps must be positive");
        }
        let cells = (params.l() / dx).round().to_usize().unwrap_or(0);
        let nt = (params.t_end() / dt).round().to_usize().unwrap_or(0);
        Self::new(params, cells.saturating_sub(1), nt)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn params(&self) -> &ProblemParams<S> {
        &self.params
    }

    pub fn dx(&self) -> S {
        self.params.l() / S::usize(self.nx + 1)
    }

    pub fn dt(&self) -> S {
        self.params.t_end() / S::usize(self.nt)
    }

    /// `x_i = i·dx`, with `x_{nx+1} = L` exactly.
    pub fn x(&self, i: usize) -> S {
        if i == self.nx + 1 {
            self.params.l()
        } else {
            S::usize(i) * self.dx()
        }
    }

    /// `t_k = k·dt`, with `t_{nt} = T` exactly.
    pub fn t(&self, k: usize) -> S {
        if k == self.nt {
            self.params.t_end()
        } else {
            S::usize(k) * self.dt()
        }
    }

    /// Whether Crank–Nicolson with these steps satisfies the discrete maximum principle.
    pub fn is_monotone(&self) -> bool {
        self.dt() <= S::lit(2.0) * self.dx() * self.dx()
    }

    pub fn with_params(&self, params: ProblemParams<S>) -> Self {
        Self { params, ..*self }
    }
}

/// Which boundary data a field was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Boundary `ψ_{m,n}`.
    SmoothUmn { m: u64, n: u64 },
    /// Numerical double limit of `u_{m,n}`; `(m, n)` is the last pair computed.
    LimitU { m: u64, n: u64 },
    /// Lateral data `y_{t-1/n}`, terminal data 0.
    LadderUn(u64),
    /// Horizon `T - 1/n`, terminal data `y_{T-2/n}`, lateral data 0.
    UbarN(u64),
    /// Terminal data `y_{T-1/n}`, lateral data 0.
    VbarN(u64),
    /// Numerical increasing limit of `v̄_n`.
    LimitVbar(u64),
    /// Heat equation with lateral data `y_t`.
    LinearV0,
}

impl BoundaryTag {
    pub fn regime(&self) -> Regime {
        match self {
            BoundaryTag::UbarN(_) | BoundaryTag::VbarN(_) | BoundaryTag::LimitVbar(_) => Regime::InsideBall,
            _ => Regime::OutsideBall,
        }
    }

    pub fn has_reaction(&self) -> bool {
        !matches!(self, BoundaryTag::LinearV0)
    }

    fn encode(&self) -> String {
        match self {
            BoundaryTag::SmoothUmn { m, n } => format!("umn:{m}:{n}"),
            BoundaryTag::LimitU { m, n } => format!("u:{m}:{n}"),
            BoundaryTag::LadderUn(n) => format!("un:{n}"),
            BoundaryTag::UbarN(n) => format!("ubar_n:{n}"),
            BoundaryTag::VbarN(n) => format!("vbar_n:{n}"),
            BoundaryTag::LimitVbar(n) => format!("vbar:{n}"),
            BoundaryTag::LinearV0 => "v0".into(),
        }
    }

    fn decode(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<u64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("tag '{s}' is missing an index")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad index in tag '{s}'")))
        };
        match parts[0] {
            "umn" => Ok(BoundaryTag::SmoothUmn { m: num(1)?, n: num(2)? }),
            "u" => Ok(BoundaryTag::LimitU { m: num(1)?, n: num(2)? }),
            "un" => Ok(BoundaryTag::LadderUn(num(1)?)),
            "ubar_n" => Ok(BoundaryTag::UbarN(num(1)?)),
            "vbar_n" => Ok(BoundaryTag::VbarN(num(1)?)),
            "vbar" => Ok(BoundaryTag::LimitVbar(num(1)?)),
            "v0" => Ok(BoundaryTag::LinearV0),
            _ => Err(Error::Parse(format!("unknown field tag '{s}'"))),
        }
    }

    /// End of the time domain of the boundary problem.
    pub fn horizon<S: Scalar>(&self, params: &ProblemParams<S>) -> S {
        match self {
            BoundaryTag::UbarN(n) => params.t_end() - S::one() / S::lit(*n as f64),
            _ => params.t_end(),
        }
    }
}

/// Values on the nodes of a grid, rows `k = 0..=k_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<S> {
    pub(crate) grid: Grid<S>,
    pub(crate) values: Vec<S>,
    pub(crate) tag: BoundaryTag,
    pub(crate) k_end: usize,
    /// Length of the step from the (unstored) terminal data to row `k_end`,
    /// zero when row `k_end` carries the terminal data itself.
    pub(crate) h_top: S,
    pub(crate) reaction: ReactionScheme,
}

impl<S: Scalar> Field<S> {
    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    pub fn tag(&self) -> BoundaryTag {
        self.tag
    }

    pub fn params(&self) -> &ProblemParams<S> {
        self.grid.params()
    }

    /// Last stored time index.
    pub fn k_end(&self) -> usize {
        self.k_end
    }

    pub fn reaction(&self) -> ReactionScheme {
        self.reaction
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    #[inline]
    fn width(&self) -> usize {
        self.grid.nx + 2
    }

    /// Value at node `(i, k)`.
    #[inline]
    pub fn at(&self, i: usize, k: usize) -> S {
        self.values[k * self.width() + i]
    }

    /// Row `k` including the two lateral nodes.
    pub fn row(&self, k: usize) -> &[S] {
        let w = self.width();
        &self.values[k * w..(k + 1) * w]
    }

    /// Slice `t ↦ V(x_i, t_k)` for `k = 0..=k_end`.
    pub fn column(&self, i: usize) -> Vec<S> {
        (0..=self.k_end).map(|k| self.at(i, k)).collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_i(&self, x: S) -> usize {
        let i = (x / self.grid.dx()).round().to_usize().unwrap_or(0);
        i.min(self.grid.nx + 1)
    }

    /// Index of the time closest to `t`.
    pub fn nearest_k(&self, t: S) -> usize {
        let k = (t / self.grid.dt()).round().to_usize().unwrap_or(0);
        k.min(self.k_end)
    }

    /// Largest stored time.
    pub fn t_max(&self) -> S {
        self.grid.t(self.k_end)
    }

    fn locate(&self, x: S, t: S) -> Result<(usize, S, usize, S)> {
        let l = self.grid.params.l();
        let slack = S::lit(1e-12);
        let t_max = self.t_max();
        if !(x >= -slack * l && x <= l * (S::one() + slack) && t >= -slack && t <= t_max + slack * t_max.max(S::one()))
        {
            return Err(Error::Interpolation { x: x.f64(), t: t.f64() });
        }
        let x = x.max(S::zero()).min(l);
        let t = t.max(S::zero()).min(t_max);
        let dx = self.grid.dx();
        let dt = self.grid.dt();
        let i = (x / dx).floor().to_usize().unwrap_or(0).min(self.grid.nx);
        let k = (t / dt).floor().to_usize().unwrap_or(0).min(self.k_end.saturating_sub(1));
        let wx = ((x - self.grid.x(i)) / dx).max(S::zero()).min(S::one());
        let wt = ((t - self.grid.t(k)) / dt).max(S::zero()).min(S::one());
        Ok((i, wx, k, wt))
    }

    /// Bilinear interpolation.
    pub fn interp(&self, x: S, t: S) -> Result<S> {
        let (i, wx, k, wt) = self.locate(x, t)?;
        let one = S::one();
        let lo = self.at(i, k) * (one - wx) + self.at(i + 1, k) * wx;
        if self.k_end == 0 {
            return Ok(lo);
        }
        let hi = self.at(i, k + 1) * (one - wx) + self.at(i + 1, k + 1) * wx;
        Ok(lo * (one - wt) + hi * wt)
    }

    /// Nodal slope: centred difference inside, second-order one-sided at the edges.
    pub fn slope(&self, i: usize, k: usize) -> S {
        let dx = self.grid.dx();
        let two = S::lit(2.0);
        let last = self.grid.nx + 1;
        if i == 0 {
            (-S::lit(3.0) * self.at(0, k) + S::lit(4.0) * self.at(1, k) - self.at(2, k)) / (two * dx)
        } else if i == last {
            (S::lit(3.0) * self.at(last, k) - S::lit(4.0) * self.at(last - 1, k) + self.at(last - 2, k)) / (two * dx)
        } else {
            (self.at(i + 1, k) - self.at(i - 1, k)) / (two * dx)
        }
    }

    fn hermite_row(&self, i: usize, wx: S, k: usize) -> (S, S) {
        let dx = self.grid.dx();
        let (v0, v1) = (self.at(i, k), self.at(i + 1, k));
        let (m0, m1) = (self.slope(i, k) * dx, self.slope(i + 1, k) * dx);
        let s = wx;
        let s2 = s * s;
        let s3 = s2 * s;
        let two = S::lit(2.0);
        let three = S::lit(3.0);
        let h00 = two * s3 - three * s2 + S::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        let value = h00 * v0 + h10 * m0 + h01 * v1 + h11 * m1;
        let six = S::lit(6.0);
        let d00 = six * s2 - six * s;
        let d10 = three * s2 - S::lit(4.0) * s + S::one();
        let d01 = -six * s2 + six * s;
        let d11 = three * s2 - two * s;
        let deriv = (d00 * v0 + d10 * m0 + d01 * v1 + d11 * m1) / dx;
        (value, deriv)
    }

    /// `C¹` interpolation in space (cubic Hermite with the nodal slopes of
    /// [`Field::slope`]), linear in time. Returns the value and its `x`-derivative.
    pub fn interp_c1(&self, x: S, t: S) -> Result<(S, S)> {
        let (i, wx, k, wt) = self.locate(x, t)?;
        let (v_lo, d_lo) = self.hermite_row(i, wx, k);
        if self.k_end == 0 {
            return Ok((v_lo, d_lo));
        }
        let (v_hi, d_hi) = self.hermite_row(i, wx, k + 1);
        let one = S::one();
        Ok((v_lo * (one - wt) + v_hi * wt, d_lo * (one - wt) + d_hi * wt))
    }

    /// Largest `|self − other|` over interior nodes with `t_k ≤ t_max − eps`
    /// and `k < k_end` of both fields.
    pub fn sup_diff(&self, other: &Field<S>, eps: S) -> S {
        let k_last = self.k_end.min(other.k_end);
        let mut d = S::zero();
        for k in 0..k_last {
            if self.grid.t(k) > self.t_max().min(other.t_max()) - eps {
                break;
            }
            for i in 1..=self.grid.nx {
                d = d.max((self.at(i, k) - other.at(i, k)).abs());
            }
        }
        d
    }

    /// Serializes to CSV: header `# L,T,q,nx,nt,tag`, a `#` line with the
    /// values, the column line `i,k,x,t,value`, then one row per node.
    /// Floats use the shortest representation that parses back exactly.
    pub fn to_csv(&self) -> String {
        let p = self.params();
        let mut out = String::with_capacity(self.values.len() * 40 + 128);
        out.push_str("# L,T,q,nx,nt,tag\n");
        let _ = writeln!(
            out,
            "# {:?},{:?},{:?},{},{},{}",
            p.l(),
            p.t_end(),
            p.q(),
            self.grid.nx,
            self.grid.nt,
            self.tag.encode()
        );
        out.push_str("i,k,x,t,value\n");
        for k in 0..=self.k_end {
            for i in 0..self.width() {
                let _ = writeln!(out, "{},{},{:?},{:?},{:?}", i, k, self.grid.x(i), self.grid.t(k), self.at(i, k));
            }
        }
        out
    }

    /// Parses the output of [`Field::to_csv`]. The reaction scheme is assumed
    /// to be the default one.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| Error::Parse(m.to_string());
        let head = lines.next().ok_or_else(|| bad("empty field file"))?;
        if head.trim() != "# L,T,q,nx,nt,tag" {
            return Err(bad("missing field header"));
        }
        let meta = lines.next().ok_or_else(|| bad("missing field metadata"))?;
        let meta: Vec<&str> = meta.trim_start_matches('#').trim().split(',').collect();
        if meta.len() != 6 {
            return Err(bad("field metadata needs six entries"));
        }
        let num = |s: &str| s.trim().parse::<S>().map_err(|_| bad(&format!("bad number '{s}'")));
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(&format!("bad integer '{s}'")));
        let (l, t_end, q) = (num(meta[0])?, num(meta[1])?, num(meta[2])?);
        let (nx, nt) = (int(meta[3])?, int(meta[4])?);
        let tag = BoundaryTag::decode(meta[5].trim())?;
        let params = ProblemParams::new(q, l, t_end, tag.regime())?;
        let grid = Grid::new(params, nx, nt)?;
        let cols = lines.next().ok_or_else(|| bad("missing column line"))?;
        if cols.trim() != "i,k,x,t,value" {
            return Err(bad("unexpected column line"));
        }
        let width = nx + 2;
        let mut values = Vec::new();
        let mut k_end = 0;
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(&format!("row {row} needs five entries")));
            }
            let (i, k) = (int(f[0])?, int(f[1])?);
            if i != row % width || k != row / width || k > nt {
                return Err(bad(&format!("row {row} out of order")));
            }
            k_end = k;
            values.push(num(f[4])?);
        }
        if values.len() != (k_end + 1) * width {
            return Err(bad("incomplete field rows"));
        }
        let dt = grid.dt();
        let h_top = {
            let h = tag.horizon(&params) - grid.t(k_end);
            if h > S::lit(1e-12) * dt {
                h
            } else {
                S::zero()
            }
        };
        Ok(Self { grid, values, tag, k_end, h_top, reaction: ReactionScheme::default() })
    }
}
