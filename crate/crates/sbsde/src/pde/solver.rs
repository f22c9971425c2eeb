use crate::error::{domain, Error, Result};
use crate::model::{psi_mn, shifted_solution, BoundaryIndices, ProblemParams, Regime};
use crate::Scalar;

use super::field::{BoundaryTag, Field, Grid};
use super::tridiag::solve_tridiagonal;

/// Discretization of the reaction term over a step of length `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReactionScheme {
    /// `h·ρ_h(v) = Φ_h(v) − v` with `Φ_h` the exact forward flow of
    /// `dv/dt = v^q`; a spatially constant `y_{t-c}` then solves the scheme
    /// exactly.
    #[default]
    ExactFlow,
    /// Plain backward Euler: `h·v^q`.
    Implicit,
}

impl ReactionScheme {
    /// Returns `(h·ρ(v), h·ρ'(v))`, or `None` past the blow-up barrier.
    #[inline]
    fn eval<S: Scalar>(self, v: S, h: S, q: S) -> Option<(S, S)> {
        let one = S::one();
        match self {
            ReactionScheme::Implicit => {
                let vq1 = v.powf(q - one);
                Some((h * vq1 * v, h * q * vq1))
            }
            ReactionScheme::ExactFlow => {
                let a = (q - one) * h * v.powf(q - one);
                if a >= one {
                    return None;
                }
                let log_factor = -(-a).ln_1p() / (q - one);
                Some((v * log_factor.exp_m1(), (q * log_factor).exp_m1()))
            }
        }
    }

    /// Largest admissible value for a step of length `h`.
    fn barrier<S: Scalar>(self, h: S, q: S) -> S {
        match self {
            ReactionScheme::Implicit => S::infinity(),
            ReactionScheme::ExactFlow => ((q - S::one()) * h).powf(-S::one() / (q - S::one())),
        }
    }
}

/// Newton parameters of the implicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<S> {
    pub newton_tol: S,
    pub max_newton: usize,
    pub reaction: ReactionScheme,
}

impl<S: Scalar> Default for SolverSettings<S> {
    fn default() -> Self {
        Self { newton_tol: S::lit(1e-10), max_newton: 50, reaction: ReactionScheme::ExactFlow }
    }
}

/// Diagnostics of a monotone-limit computation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<S> {
    pub newton_iters_max: usize,
    /// Sup-norm change between consecutive members of the sweep.
    pub monotone_sweep: Vec<(BoundaryIndices, S)>,
    pub converged: bool,
    pub residual_sup: S,
}

/// Stabilization criterion of a sweep: sup-norm change below `tol` on
/// interior nodes with `t ≤ T − eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig<S> {
    pub tol: S,
    pub eps: S,
}

impl<S: Scalar> Default for SweepConfig<S> {
    fn default() -> Self {
        Self { tol: S::lit(1e-6), eps: S::zero() }
    }
}

/// Index schedule of the double limit: `m` inner, `n` outer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub ms: Vec<u64>,
    pub ns: Vec<u64>,
}

impl Schedule {
    /// `m` from `ceil(2/L)+1` and `n` from 4, both doubling up to `2^14`.
    pub fn default_for<S: Scalar>(params: &ProblemParams<S>) -> Self {
        let m0 = (S::lit(2.0) / params.l()).ceil().to_u64().unwrap_or(1).max(1) + 1;
        Self { ms: doubling(m0, 1 << 14), ns: doubling(4, 1 << 14) }
    }
}

fn doubling(start: u64, end: u64) -> Vec<u64> {
    let mut v = Vec::new();
    let mut x = start;
    while x <= end {
        v.push(x);
        x *= 2;
    }
    v
}

struct Stepper<'a, S> {
    grid: &'a Grid<S>,
    settings: SolverSettings<S>,
    reaction: bool,
    sub: Vec<S>,
    diag: Vec<S>,
    sup: Vec<S>,
    rhs: Vec<S>,
    newton_rhs: Vec<S>,
    scratch: Vec<S>,
    iters_max: usize,
}

impl<'a, S: Scalar> Stepper<'a, S> {
    fn new(grid: &'a Grid<S>, settings: SolverSettings<S>, reaction: bool) -> Self {
        let n = grid.nx();
        Self {
            grid,
            settings,
            reaction,
            sub: vec![S::zero(); n],
            diag: vec![S::zero(); n],
            sup: vec![S::zero(); n],
            rhs: vec![S::zero(); n],
            newton_rhs: vec![S::zero(); n],
            scratch: Vec::with_capacity(n),
            iters_max: 0,
        }
    }

    /// One backward step of length `h` from `prev` (full row) to `next`.
    /// The lateral data enter through their average `edge` over the step.
    fn step(&mut self, prev: &[S], next: &mut [S], h: S, theta: S, edge: S, k: usize) -> Result<()> {
        let nx = self.grid.nx();
        let dx = self.grid.dx();
        let half = S::lit(0.5);
        let one = S::one();
        let two = S::lit(2.0);
        let r = theta * h * half / (dx * dx);
        let flux = h * half * edge / (dx * dx);
        for j in 0..nx {
            let i = j + 1;
            let left = if i == 1 { S::zero() } else { prev[i - 1] };
            let right = if i == nx { S::zero() } else { prev[i + 1] };
            let mut b = prev[i] + (one - theta) * h * half * (left - two * prev[i] + right) / (dx * dx);
            if i == 1 {
                b = b + flux;
            }
            if i == nx {
                b = b + flux;
            }
            self.rhs[j] = b;
        }
        if !self.reaction {
            for j in 0..nx {
                self.sub[j] = -r;
                self.sup[j] = -r;
                self.diag[j] = one + two * r;
            }
            let mut sol = self.rhs.clone();
            solve_tridiagonal(&self.sub, &self.diag, &self.sup, &mut sol, &mut self.scratch);
            next[1..=nx].copy_from_slice(&sol);
            return Ok(());
        }
        let q = self.grid.params().q();
        let scheme = self.settings.reaction;
        let barrier = scheme.barrier(h, q);
        // initial guess: previous row, kept strictly inside the admissible set
        for i in 1..=nx {
            next[i] = prev[i].max(S::zero()).min(barrier * S::lit(0.5));
        }
        let mut last_res = S::infinity();
        for iter in 1..=self.settings.max_newton {
            let mut res = S::zero();
            for j in 0..nx {
                let i = j + 1;
                let v = next[i];
                let (g, dg) =
                    scheme.eval(v, h, q).ok_or(Error::Solver { step: k, iters: iter, residual: f64::INFINITY })?;
                let mut av = (one + two * r) * v;
                if i > 1 {
                    av = av - r * next[i - 1];
                }
                if i < nx {
                    av = av - r * next[i + 1];
                }
                let gi = av + g - self.rhs[j];
                res = res.max(gi.abs());
                self.newton_rhs[j] = -gi;
                self.sub[j] = -r;
                self.sup[j] = -r;
                self.diag[j] = one + two * r + dg;
            }
            last_res = res;
            solve_tridiagonal(&self.sub, &self.diag, &self.sup, &mut self.newton_rhs, &mut self.scratch);
            // damping: stay in [0, barrier)
            let mut lambda = one;
            loop {
                let ok = (1..=nx).all(|i| next[i] + lambda * self.newton_rhs[i - 1] < barrier);
                if ok || lambda < S::lit(1e-8) {
                    break;
                }
                lambda = lambda * half;
            }
            let mut step_size = S::zero();
            let mut scale = one;
            for (slot, &d) in next[1..=nx].iter_mut().zip(&self.newton_rhs) {
                let v = (*slot + lambda * d).max(S::zero());
                step_size = step_size.max((v - *slot).abs());
                scale = scale.max(v.abs());
                *slot = v;
            }
            if step_size <= self.settings.newton_tol * scale {
                self.iters_max = self.iters_max.max(iter);
                return Ok(());
            }
        }
        Err(Error::Solver { step: k, iters: self.settings.max_newton, residual: last_res.f64() })
    }
}

/// Lateral value stored at the boundary nodes at time `t`.
pub(crate) fn lateral_value<S: Scalar>(tag: BoundaryTag, p: &ProblemParams<S>, t: S) -> S {
    match tag {
        BoundaryTag::LinearV0 => {
            if t < p.t_end() {
                p.y_of_gap(p.t_end() - t)
            } else {
                S::zero()
            }
        }
        BoundaryTag::SmoothUmn { n, .. } | BoundaryTag::LimitU { n, .. } | BoundaryTag::LadderUn(n) => {
            p.y_of_gap(p.t_end() - t + S::one() / S::lit(n as f64))
        }
        _ => S::zero(),
    }
}

/// Mean of the lateral data over `[a, b]`, in closed form. This is what the
/// scheme feeds into the boundary stencil, so that the boundary flux stays
/// exact when the data are singular at `t = T`.
pub(crate) fn lateral_average<S: Scalar>(tag: BoundaryTag, p: &ProblemParams<S>, a: S, b: S) -> S {
    let shift = match tag {
        BoundaryTag::LinearV0 => S::zero(),
        BoundaryTag::SmoothUmn { n, .. } | BoundaryTag::LimitU { n, .. } | BoundaryTag::LadderUn(n) => {
            S::one() / S::lit(n as f64)
        }
        _ => return S::zero(),
    };
    let ga = p.t_end() - a + shift;
    let gb = (p.t_end() - b + shift).max(S::zero());
    let c = p.q() - S::one();
    let e = S::lit(2.0) - p.p();
    let integral =
        if e.abs() < S::lit(1e-12) { (ga / gb).ln() / c } else { ((c * ga).powf(e) - (c * gb).powf(e)) / (c * e) };
    integral / (ga - gb)
}

/// Terminal data of one backward solve.
struct Problem<'a, S> {
    grid: &'a Grid<S>,
    tag: BoundaryTag,
    /// Time of the terminal data (`T`, or `T − 1/n` for `ū_n`).
    horizon: S,
    /// Full terminal row (lateral entries are what gets stored at the corners).
    terminal: Vec<S>,
    reaction: bool,
}

fn march<S: Scalar>(pb: Problem<'_, S>, settings: SolverSettings<S>) -> Result<(Field<S>, usize)> {
    let grid = pb.grid;
    let p = *grid.params();
    let nx = grid.nx();
    let width = nx + 2;
    let dt = grid.dt();
    let ratio = pb.horizon / dt;
    let k_end = (ratio * (S::one() + S::lit(1e-12))).floor().to_usize().unwrap_or(0).min(grid.nt());
    let mut h_top = pb.horizon - grid.t(k_end);
    if h_top <= S::lit(1e-12) * dt {
        h_top = S::zero();
    }
    let mut values = vec![S::zero(); (k_end + 1) * width];
    let mut stepper = Stepper::new(grid, settings, pb.reaction);
    let one = S::one();
    let half = S::lit(0.5);
    let mut implicit_pending = true;
    {
        let top = &mut values[k_end * width..(k_end + 1) * width];
        if h_top > S::zero() {
            let t = grid.t(k_end);
            let edge = lateral_average(pb.tag, &p, t, pb.horizon);
            stepper.step(&pb.terminal, top, h_top, one, edge, k_end)?;
            let b = lateral_value(pb.tag, &p, t);
            top[0] = b;
            top[nx + 1] = b;
            implicit_pending = false;
        } else {
            top.copy_from_slice(&pb.terminal);
        }
    }
    for k in (0..k_end).rev() {
        let (lower, upper) = values.split_at_mut((k + 1) * width);
        let prev = &upper[..width];
        let next = &mut lower[k * width..];
        let edge = lateral_average(pb.tag, &p, grid.t(k), grid.t(k + 1));
        let theta = if implicit_pending { one } else { half };
        implicit_pending = false;
        stepper.step(prev, next, dt, theta, edge, k)?;
        let b = lateral_value(pb.tag, &p, grid.t(k));
        next[0] = b;
        next[nx + 1] = b;
    }
    let field = Field { grid: *grid, values, tag: pb.tag, k_end, h_top, reaction: settings.reaction };
    Ok((field, stepper.iters_max))
}

fn require(params: &ProblemParams<impl Scalar>, regime: Regime, what: &str) -> Result<()> {
    if params.regime() != regime {
        return Err(Error::Regime(format!(
            "{what} needs the {} regime, got {}",
            regime.name(),
            params.regime().name()
        )));
    }
    Ok(())
}

/// Heat equation `∂_t v + ½v_xx = 0` with lateral data `y_t` and terminal data 0.
/// The corner nodes at `t = T` store the terminal value 0.
pub fn solve_linear_v0<S: Scalar>(grid: &Grid<S>) -> Result<Field<S>> {
    let p = *grid.params();
    require(&p, Regime::OutsideBall, "the linear baseline")?;
    let pb = Problem {
        grid,
        tag: BoundaryTag::LinearV0,
        horizon: p.t_end(),
        terminal: vec![S::zero(); grid.nx() + 2],
        reaction: false,
    };
    Ok(march(pb, SolverSettings::default())?.0)
}

/// `u_{m,n}`: boundary data `ψ_{m,n}` on the lateral sides and at `t = T`.
pub fn solve_umn<S: Scalar>(m: u64, n: u64, grid: &Grid<S>) -> Result<Field<S>> {
    solve_umn_with(m, n, grid, SolverSettings::default()).map(|r| r.0)
}

pub(crate) fn solve_umn_with<S: Scalar>(
    m: u64,
    n: u64,
    grid: &Grid<S>,
    settings: SolverSettings<S>,
) -> Result<(Field<S>, usize)> {
    let p = *grid.params();
    require(&p, Regime::OutsideBall, "u_{m,n}")?;
    let idx = BoundaryIndices::new(m, n);
    idx.validate(&p)?;
    let terminal = (0..grid.nx() + 2).map(|i| psi_mn(grid.x(i), p.t_end(), idx, &p)).collect::<Result<Vec<_>>>()?;
    let pb = Problem { grid, tag: BoundaryTag::SmoothUmn { m, n }, horizon: p.t_end(), terminal, reaction: true };
    march(pb, settings)
}

/// `u_n`: lateral data `y_{t-1/n}`, terminal data 0 in the interior.
pub fn solve_un<S: Scalar>(n: u64, grid: &Grid<S>) -> Result<Field<S>> {
    let p = *grid.params();
    require(&p, Regime::OutsideBall, "u_n")?;
    if n == 0 {
        return domain("u_n needs n >= 1");
    }
    let tag = BoundaryTag::LadderUn(n);
    let mut terminal = vec![S::zero(); grid.nx() + 2];
    let corner = shifted_solution(p.t_end(), n, &p)?;
    terminal[0] = corner;
    terminal[grid.nx() + 1] = corner;
    let pb = Problem { grid, tag, horizon: p.t_end(), terminal, reaction: true };
    Ok(march(pb, SolverSettings::default())?.0)
}

/// Double limit of `u_{m,n}` along the schedule (`m` inner, `n` outer).
///
/// For each `n` the `m`-sweep stops once consecutive fields agree within
/// `cfg.tol`; the `n`-sweep stops likewise. The last computed field is
/// returned, tagged as the limit. Running out of schedule is reported, not
/// treated as an error.
pub fn solve_u<S: Scalar>(
    grid: &Grid<S>,
    schedule: &Schedule,
    cfg: SweepConfig<S>,
) -> Result<(Field<S>, SolveReport<S>)> {
    let p = *grid.params();
    require(&p, Regime::OutsideBall, "u")?;
    let settings = SolverSettings::default();
    let mut sweep = Vec::new();
    let mut iters = 0;
    let mut prev_n: Option<Field<S>> = None;
    let mut converged = false;
    let ms: Vec<u64> =
        schedule.ms.iter().copied().filter(|&m| BoundaryIndices::new(m, 1).validate(&p).is_ok()).collect();
    if ms.is_empty() || schedule.ns.is_empty() {
        return domain("schedule has no admissible (m, n)");
    }
    for &n in &schedule.ns {
        let mut prev_m: Option<Field<S>> = None;
        for &m in &ms {
            let (f, it) = solve_umn_with(m, n, grid, settings)?;
            iters = iters.max(it);
            let stop = match &prev_m {
                Some(g) => {
                    let d = f.sup_diff(g, cfg.eps);
                    sweep.push((BoundaryIndices::new(m, n), d));
                    d < cfg.tol
                }
                None => false,
            };
            prev_m = Some(f);
            if stop {
                break;
            }
        }
        let f = prev_m.expect("non-empty m schedule");
        let stop = match &prev_n {
            Some(g) => {
                let d = f.sup_diff(g, cfg.eps);
                let last_m = match f.tag {
                    BoundaryTag::SmoothUmn { m, .. } => m,
                    _ => 0,
                };
                sweep.push((BoundaryIndices::new(last_m, n), d));
                d < cfg.tol
            }
            None => false,
        };
        prev_n = Some(f);
        if stop {
            converged = true;
            break;
        }
    }
    let mut field = prev_n.expect("non-empty n schedule");
    if let BoundaryTag::SmoothUmn { m, n } = field.tag {
        field.tag = BoundaryTag::LimitU { m, n };
    }
    let residual_sup = pde_residual(&field);
    Ok((field, SolveReport { newton_iters_max: iters, monotone_sweep: sweep, converged, residual_sup }))
}

/// `ū_n`: solved on `[0, T − 1/n]` with lateral data 0 and terminal data `y_{T−2/n}`.
///
/// When `T − 1/n` is not a grid time, the first step is a short implicit step
/// down to the grid row below it.
pub fn solve_ubar_n<S: Scalar>(n: u64, grid: &Grid<S>) -> Result<Field<S>> {
    let p = *grid.params();
    require(&p, Regime::InsideBall, "ū_n")?;
    let inv = S::one() / S::lit(n as f64);
    if n < 3 || !(p.t_end() - inv > S::zero()) {
        return domain(format!("ū_n needs n >= 3 and T - 1/n > 0, got n = {n}"));
    }
    let c = p.y_of_gap(S::lit(2.0) * inv);
    let mut terminal = vec![c; grid.nx() + 2];
    terminal[0] = S::zero();
    terminal[grid.nx() + 1] = S::zero();
    let pb = Problem { grid, tag: BoundaryTag::UbarN(n), horizon: p.t_end() - inv, terminal, reaction: true };
    Ok(march(pb, SolverSettings::default())?.0)
}

pub(crate) fn solve_vbar_n_with<S: Scalar>(
    n: u64,
    grid: &Grid<S>,
    settings: SolverSettings<S>,
) -> Result<(Field<S>, usize)> {
    let p = *grid.params();
    require(&p, Regime::InsideBall, "v̄_n")?;
    if n == 0 {
        return domain("v̄_n needs n >= 1");
    }
    let c = p.y_of_gap(S::one() / S::lit(n as f64));
    let mut terminal = vec![c; grid.nx() + 2];
    terminal[0] = S::zero();
    terminal[grid.nx() + 1] = S::zero();
    let pb = Problem { grid, tag: BoundaryTag::VbarN(n), horizon: p.t_end(), terminal, reaction: true };
    march(pb, settings)
}

/// `v̄_n`: lateral data 0, terminal data `y_{T−1/n}`.
pub fn solve_vbar_n<S: Scalar>(n: u64, grid: &Grid<S>) -> Result<Field<S>> {
    Ok(solve_vbar_n_with(n, grid, SolverSettings::default())?.0)
}

/// Increasing limit of `v̄_n` along `n_schedule`, with stabilization measured
/// on `[0, L] × [0, T − eps]`.
pub fn solve_vbar<S: Scalar>(
    grid: &Grid<S>,
    n_schedule: &[u64],
    cfg: SweepConfig<S>,
) -> Result<(Field<S>, SolveReport<S>)> {
    if n_schedule.is_empty() {
        return domain("empty n schedule");
    }
    let mut sweep = Vec::new();
    let mut iters = 0;
    let mut prev: Option<Field<S>> = None;
    let mut converged = false;
    for &n in n_schedule {
        let (f, it) = solve_vbar_n_with(n, grid, SolverSettings::default())?;
        iters = iters.max(it);
        let stop = match &prev {
            Some(g) => {
                let d = f.sup_diff(g, cfg.eps);
                sweep.push((BoundaryIndices::new(0, n), d));
                d < cfg.tol
            }
            None => false,
        };
        prev = Some(f);
        if stop {
            converged = true;
            break;
        }
    }
    let mut field = prev.expect("non-empty schedule");
    if let BoundaryTag::VbarN(n) = field.tag {
        field.tag = BoundaryTag::LimitVbar(n);
    }
    let residual_sup = pde_residual(&field);
    Ok((field, SolveReport { newton_iters_max: iters, monotone_sweep: sweep, converged, residual_sup }))
}

/// Sup over interior nodes of the scheme residual
/// `|D_t V + ½D_xx V − ρ(V)|`, evaluated with the stencils the solver used
/// (lateral data enter as step averages; the top step out of unstored
/// terminal data is skipped).
pub fn pde_residual<S: Scalar>(field: &Field<S>) -> S {
    let grid = field.grid();
    let p = *grid.params();
    let nx = grid.nx();
    let dx = grid.dx();
    let dt = grid.dt();
    let q = p.q();
    let half = S::lit(0.5);
    let two = S::lit(2.0);
    let reaction = field.tag().has_reaction();
    let mut sup = S::zero();
    for k in (0..field.k_end()).rev() {
        let theta = if k + 1 == field.k_end() && field.h_top == S::zero() { S::one() } else { half };
        let edge = lateral_average(field.tag(), &p, grid.t(k), grid.t(k + 1));
        let at = |i: usize, kk: usize| {
            if i == 0 || i == nx + 1 {
                edge
            } else {
                field.at(i, kk)
            }
        };
        for i in 1..=nx {
            let lap_new = (at(i - 1, k) - two * at(i, k) + at(i + 1, k)) / (dx * dx);
            let lap_old = (at(i - 1, k + 1) - two * at(i, k + 1) + at(i + 1, k + 1)) / (dx * dx);
            let v = field.at(i, k);
            let react = if reaction {
                match field.reaction().eval(v, dt, q) {
                    Some((g, _)) => g / dt,
                    None => S::infinity(),
                }
            } else {
                S::zero()
            };
            let r = (field.at(i, k + 1) - v) / dt + half * (theta * lap_new + (S::one() - theta) * lap_old) - react;
            sup = sup.max(r.abs());
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Regime;

    fn outside(l: f64) -> ProblemParams<f64> {
        ProblemParams::new(3.0, l, 1.0, Regime::OutsideBall).unwrap()
    }

    fn inside(q: f64, l: f64) -> ProblemParams<f64> {
        ProblemParams::new(q, l, 1.0, Regime::InsideBall).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(outside(1.0), 2, 10).is_err());
        assert!(Grid::new(outside(1.0), 10, 2).is_err());
    }

    #[test]
    fn exact_flow_matches_blowup_curve() {
        let p = inside(2.0, 1.0);
        let h = 0.01;
        let c = p.y_of_gap(0.05);
        let next = p.y_of_gap(0.05 + h);
        let (g, _) = ReactionScheme::ExactFlow.eval(next, h, 2.0).unwrap();
        assert!((next + g - c).abs() < 1e-12 * c);
    }

    #[test]
    fn v0_boundary_and_terminal_rows() {
        let g = Grid::from_steps(outside(3.0), 0.1, 0.01).unwrap();
        let f = solve_linear_v0(&g).unwrap();
        for i in 1..=g.nx() {
            assert_eq!(f.at(i, g.nt()), 0.0);
        }
        for k in 0..g.nt() {
            let y = g.params().y(g.t(k)).unwrap();
            assert_eq!(f.at(0, k), y);
            assert_eq!(f.at(g.nx() + 1, k), y);
        }
        assert!(pde_residual(&f) < 1e-9);
    }

    #[test]
    fn umn_terminal_and_bound() {
        let p = outside(3.0);
        let g = Grid::from_steps(p, 0.1, 0.01).unwrap();
        let f = solve_umn(100, 10, &g).unwrap();
        let idx = BoundaryIndices::new(100, 10);
        for i in 0..g.nx() + 2 {
            assert_eq!(f.at(i, g.nt()), psi_mn(g.x(i), 1.0, idx, &p).unwrap());
        }
        let gamma = p.gamma(10);
        assert!(f.values().iter().all(|&v| (0.0..=gamma * (1.0 + 1e-12)).contains(&v)));
        assert!(pde_residual(&f) < 1e-8);
    }

    #[test]
    fn zero_field_has_zero_residual() {
        // v̄_n with n so small that the terminal data is tiny is not zero; use
        // the trivial solution directly instead.
        let g = Grid::new(inside(2.0, 1.0), 5, 5).unwrap();
        let f = Field {
            grid: g,
            values: vec![0.0; 7 * 6],
            tag: BoundaryTag::VbarN(1),
            k_end: 5,
            h_top: 0.0,
            reaction: ReactionScheme::ExactFlow,
        };
        assert_eq!(pde_residual(&f), 0.0);
    }

    #[test]
    fn constant_profile_residual_is_first_order() {
        // V(x,t) = y_{t-1/n} in the interior; the check stays away from the
        // edges by using a tag with lateral data y_{t-1/n}
        let p = outside(1.0);
        let mut res = Vec::new();
        for &nt in &[100usize, 200] {
            let g = Grid::new(p, 9, nt).unwrap();
            let values = (0..=nt).flat_map(|k| std::iter::repeat_n(p.y_of_gap(1.0 - g.t(k) + 0.1), 11)).collect();
            let f = Field {
                grid: g,
                values,
                tag: BoundaryTag::LadderUn(10),
                k_end: nt,
                h_top: 0.0,
                reaction: ReactionScheme::Implicit,
            };
            res.push(pde_residual(&f));
        }
        let ratio = res[0] / res[1];
        assert!((1.7..2.3).contains(&ratio), "{res:?}");
    }

    #[test]
    fn ubar_lateral_and_domain() {
        let g = Grid::from_steps(inside(2.0, 2.0), 0.1, 0.01).unwrap();
        let f = solve_ubar_n(50, &g).unwrap();
        assert_eq!(f.k_end(), 98);
        for k in 0..=f.k_end() {
            assert_eq!(f.at(0, k), 0.0);
            assert_eq!(f.at(g.nx() + 1, k), 0.0);
        }
        assert!(solve_ubar_n(2, &g).is_err());
        let g3 = Grid::from_steps(inside(2.0, 2.0), 0.1, 0.01).unwrap();
        let f3 = solve_ubar_n(3, &g3).unwrap();
        assert_eq!(f3.k_end(), 66);
        assert!(f3.h_top > 0.0);
    }

    #[test]
    fn regime_mismatch_is_rejected() {
        let g = Grid::from_steps(inside(2.0, 2.0), 0.1, 0.01).unwrap();
        assert!(matches!(solve_linear_v0(&g), Err(Error::Regime(_))));
        assert!(matches!(solve_umn(10, 10, &g), Err(Error::Regime(_))));
        let g2 = Grid::from_steps(outside(2.0), 0.1, 0.01).unwrap();
        assert!(matches!(solve_vbar_n(10, &g2), Err(Error::Regime(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = Grid::from_steps(inside(2.0, 2.0), 0.1, 0.01).unwrap();
        let f = solve_ubar_n(7, &g).unwrap();
        let text = f.to_csv();
        let back = Field::from_csv(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_csv(), text);
    }
}
